// SPDX-License-Identifier: Apache-2.0
#pragma once

// Which samples an embedding is trained on. Each regime's corpus contains the
// previous one, so vocabularies only grow from source to both to all.

#include <string>
#include <string_view>
#include <vector>

#include "cdt/common/error.hpp"
#include "cdt/embed/embedding.hpp"
#include "cdt/types/samples.hpp"

namespace cdt::embed {

enum class Regime { Source, Both, All };

inline std::string_view to_string(Regime r) {
    switch (r) {
        case Regime::Source: return "source";
        case Regime::Both: return "both";
        case Regime::All: return "all";
    }
    return "?";
}

inline Regime parse_regime(std::string_view s) {
    if (s == "source") return Regime::Source;
    if (s == "both") return Regime::Both;
    if (s == "all") return Regime::All;
    throw ConfigError("unknown embedding regime '" + std::string(s) + "'");
}

/// Identifier tokens followed by context tokens.
inline Sentence sentence_of(const types::TypeSample& s) {
    Sentence out = s.identifier_tokens;
    out.insert(out.end(), s.context_tokens.begin(), s.context_tokens.end());
    return out;
}

inline std::vector<Sentence> sentences_of(const std::vector<types::TypeSample>& samples) {
    std::vector<Sentence> out;
    out.reserve(samples.size());
    for (const auto& s : samples) out.push_back(sentence_of(s));
    return out;
}

/// Source train; then plus target train; then every split of both domains.
inline std::vector<Sentence> regime_corpus(Regime r, const std::vector<types::TypeSample>& source,
                                           const std::vector<types::TypeSample>& target) {
    using extract::Split;
    std::vector<Sentence> out;
    auto take = [&](const std::vector<types::TypeSample>& v) {
        for (const auto& s : v)
            if (s.split == Split::Train) out.push_back(sentence_of(s));
    };
    take(source);
    if (r != Regime::Source) take(target);
    if (r == Regime::All)
        for (const auto* v : {&source, &target})
            for (const auto& s : *v)
                if (s.split != Split::Train) out.push_back(sentence_of(s));
    return out;
}

}  // namespace cdt::embed

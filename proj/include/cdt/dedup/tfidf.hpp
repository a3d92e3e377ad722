// SPDX-License-Identifier: Apache-2.0
#pragma once

// TF-IDF vectors over the identifiers of source files. Weights are raw term
// counts times the smoothed idf  ln((1 + n) / (1 + df)) + 1, then scaled to
// unit Euclidean length.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "cdt/common/hash.hpp"
#include "cdt/extract/lexer.hpp"

namespace cdt::dedup {

struct SourceFile {
    std::string file_id;
    std::string text;
};

struct FileVector {
    std::string file_id;
    /// sha256 of the file bytes.
    std::string digest;
    /// (term id, weight), sorted by term id.
    std::vector<std::pair<std::uint32_t, double>> weights;
    /// The file did not tokenize and fell back to an identifier scan.
    bool fallback = false;
};

struct VectorSpace {
    std::vector<std::string> terms;  // sorted
    std::vector<FileVector> files;

    /// Weights keyed by term text.
    std::map<std::string, double> weights_of(std::size_t i) const {
        std::map<std::string, double> out;
        for (const auto& [t, w] : files[i].weights) out[terms[t]] = w;
        return out;
    }
};

inline std::vector<std::string> file_identifiers(const std::string& text, bool* fallback) {
    try {
        *fallback = false;
        return extract::identifiers(extract::tokenize(text));
    } catch (const extract::SyntaxError&) {
        *fallback = true;
        return extract::identifiers_fallback(text);
    }
}

inline VectorSpace build_file_vectors(const std::vector<SourceFile>& files) {
    VectorSpace vs;
    std::vector<std::map<std::string, std::size_t>> counts(files.size());
    std::vector<bool> fallback(files.size());
    std::map<std::string, std::size_t> df;
    for (std::size_t i = 0; i < files.size(); ++i) {
        bool fb = false;
        for (auto& id : file_identifiers(files[i].text, &fb)) ++counts[i][id];
        fallback[i] = fb;
        for (const auto& [t, _] : counts[i]) ++df[t];
    }
    std::unordered_map<std::string, std::uint32_t> term_id;
    for (const auto& [t, _] : df) {
        term_id[t] = static_cast<std::uint32_t>(vs.terms.size());
        vs.terms.push_back(t);
    }
    const double n = static_cast<double>(files.size());
    for (std::size_t i = 0; i < files.size(); ++i) {
        FileVector fv{files[i].file_id, sha256_hex(files[i].text), {}, fallback[i]};
        double norm = 0;
        for (const auto& [t, c] : counts[i]) {
            const double idf = std::log((1 + n) / (1 + static_cast<double>(df[t]))) + 1;
            const double w = static_cast<double>(c) * idf;
            fv.weights.emplace_back(term_id[t], w);
            norm += w * w;
        }
        norm = std::sqrt(norm);
        for (auto& [_, w] : fv.weights) w /= norm;
        vs.files.push_back(std::move(fv));
    }
    return vs;
}

}  // namespace cdt::dedup

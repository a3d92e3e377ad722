// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <unordered_map>
#include <vector>

#include "cdt/common/error.hpp"
#include "cdt/types/samples.hpp"

namespace cdt::model {

inline constexpr std::size_t kVisibleTypes = 1024;

/// The most frequent training labels, most frequent first, ties by text.
class VisibleTypeIndex {
public:
    VisibleTypeIndex() = default;
    explicit VisibleTypeIndex(std::vector<std::string> types) : types_(std::move(types)) {
        for (std::size_t i = 0; i < types_.size(); ++i) pos_[types_[i]] = i;
    }

    /// Only samples of the training split contribute; anything else is
    /// ignored, so evaluation data cannot reach the index.
    static VisibleTypeIndex from_training(const std::vector<types::TypeSample>& samples,
                                          std::size_t capacity = kVisibleTypes) {
        std::map<std::string, std::size_t> counts;
        for (const auto& s : samples)
            if (s.split == extract::Split::Train) ++counts[s.label];
        std::vector<std::pair<std::string, std::size_t>> ranked(counts.begin(), counts.end());
        std::stable_sort(ranked.begin(), ranked.end(),
                         [](const auto& a, const auto& b) { return a.second > b.second; });
        if (ranked.size() > capacity) ranked.resize(capacity);
        std::vector<std::string> out;
        for (auto& [t, _] : ranked) out.push_back(t);
        return VisibleTypeIndex(std::move(out));
    }

    std::size_t size() const { return types_.size(); }
    const std::vector<std::string>& types() const { return types_; }
    const std::string& operator[](std::size_t i) const { return types_[i]; }

    std::optional<std::size_t> position(const std::string& t) const {
        const auto it = pos_.find(t);
        if (it == pos_.end()) return std::nullopt;
        return it->second;
    }

private:
    std::vector<std::string> types_;
    std::unordered_map<std::string, std::size_t> pos_;
};

/// Bit i is set iff index[i] is among the module's source types.
inline std::vector<std::uint8_t> build_visible_hints(const std::vector<std::string>& module_types,
                                                     const VisibleTypeIndex& index) {
    std::vector<std::uint8_t> bits(index.size(), 0);
    for (const auto& t : module_types)
        if (auto p = index.position(t)) bits[*p] = 1;
    return bits;
}

/// Positions of the set bits, ascending.
inline std::vector<std::uint32_t> hint_positions(const std::vector<std::string>& module_types,
                                                 const VisibleTypeIndex& index) {
    std::vector<std::uint32_t> out;
    for (const auto& t : module_types)
        if (auto p = index.position(t)) out.push_back(static_cast<std::uint32_t>(*p));
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
}

}  // namespace cdt::model

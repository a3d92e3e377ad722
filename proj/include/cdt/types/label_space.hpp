// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <map>
#include <set>
#include <string>
#include <vector>

namespace cdt::types {

inline constexpr std::size_t kCommonThreshold = 100;

struct LabelSpace {
    std::map<std::string, std::size_t> counts;
    std::set<std::string> common;
    std::set<std::string> rare;
    std::size_t threshold = kCommonThreshold;

    bool is_common(const std::string& label) const { return common.count(label) != 0; }

    /// Associative merge of two counts tables; the partition is recomputed.
    void merge(const LabelSpace& other) {
        for (const auto& [k, v] : other.counts) counts[k] += v;
        repartition();
    }

    void repartition() {
        common.clear();
        rare.clear();
        for (const auto& [k, v] : counts) (v >= threshold ? common : rare).insert(k);
    }
};

template <typename Range>
LabelSpace build_label_space(const Range& labels, std::size_t threshold = kCommonThreshold) {
    LabelSpace ls;
    ls.threshold = threshold;
    for (const auto& l : labels) ++ls.counts[l];
    ls.repartition();
    return ls;
}

}  // namespace cdt::types

// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "cdt/common/csv.hpp"
#include "cdt/eval/svg.hpp"

namespace cdt::eval {

struct NamedLabels {
    std::string name;
    std::vector<std::string> labels;
    /// The visible-type index of a model trained on this data, if any.
    std::vector<std::string> visible_types;
};

struct DistributionReport {
    /// Per dataset: up to ten most frequent types, count descending then text.
    std::vector<std::pair<std::string, std::vector<std::pair<std::string, std::size_t>>>> top;
    struct Overlap {
        std::string a, b;
        std::size_t shared_types = 0;
        std::size_t shared_visible = 0;
    };
    std::vector<Overlap> overlaps;

    std::string top_csv() const {
        std::ostringstream os;
        csv::write_row(os, {"dataset", "rank", "type", "count"});
        for (const auto& [name, rows] : top)
            for (std::size_t i = 0; i < rows.size(); ++i)
                csv::write_row(os, {name, std::to_string(i + 1), rows[i].first, std::to_string(rows[i].second)});
        return os.str();
    }

    std::string overlap_csv() const {
        std::ostringstream os;
        csv::write_row(os, {"dataset_a", "dataset_b", "shared_types", "shared_visible_types"});
        for (const auto& o : overlaps)
            csv::write_row(os, {o.a, o.b, std::to_string(o.shared_types), std::to_string(o.shared_visible)});
        return os.str();
    }

    std::string chart_svg() const {
        // One chart listing each dataset's rows in turn.
        std::vector<std::pair<std::string, double>> rows;
        for (const auto& [name, r] : top)
            for (const auto& [t, c] : r) rows.emplace_back(name + ": " + t, static_cast<double>(c));
        return svg::horizontal_bars("Ten most common types per dataset", rows);
    }
};

inline std::vector<std::pair<std::string, std::size_t>> top_types(const std::vector<std::string>& labels,
                                                                  std::size_t n = 10) {
    std::map<std::string, std::size_t> counts;
    for (const auto& l : labels)
        if (l != "Any" && l != "None") ++counts[l];
    std::vector<std::pair<std::string, std::size_t>> v(counts.begin(), counts.end());
    std::stable_sort(v.begin(), v.end(), [](const auto& a, const auto& b) { return a.second > b.second; });
    if (v.size() > n) v.resize(n);
    return v;
}

inline DistributionReport distribution_report(const std::vector<NamedLabels>& datasets) {
    DistributionReport r;
    for (const auto& d : datasets) r.top.emplace_back(d.name, top_types(d.labels));
    for (std::size_t i = 0; i < datasets.size(); ++i) {
        for (std::size_t j = i + 1; j < datasets.size(); ++j) {
            const std::set<std::string> a(datasets[i].labels.begin(), datasets[i].labels.end());
            const std::set<std::string> b(datasets[j].labels.begin(), datasets[j].labels.end());
            const std::set<std::string> va(datasets[i].visible_types.begin(), datasets[i].visible_types.end());
            const std::set<std::string> vb(datasets[j].visible_types.begin(), datasets[j].visible_types.end());
            DistributionReport::Overlap o{datasets[i].name, datasets[j].name, 0, 0};
            for (const auto& x : a) o.shared_types += b.count(x);
            for (const auto& x : va) o.shared_visible += vb.count(x);
            r.overlaps.push_back(o);
        }
    }
    return r;
}

}  // namespace cdt::eval

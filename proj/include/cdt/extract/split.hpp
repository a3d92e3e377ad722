// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "cdt/common/csv.hpp"
#include "cdt/common/files.hpp"
#include "cdt/common/rng.hpp"
#include "cdt/extract/records.hpp"

namespace cdt::extract {

/// Whole projects are assigned to one split, so no file of a project can
/// leak into another split.
struct SplitAssignment {
    std::map<std::string, Split> projects;
    double train_ratio = 0.70;
    double valid_ratio = 0.10;
    double test_ratio = 0.20;
    std::uint64_t seed = 0;

    Split of(const std::string& project) const {
        const auto it = projects.find(project);
        if (it == projects.end()) throw Error("project '" + project + "' has no split assignment");
        return it->second;
    }

    std::size_t count(Split s) const {
        return static_cast<std::size_t>(std::count_if(projects.begin(), projects.end(),
                                                      [s](const auto& kv) { return kv.second == s; }));
    }
};

/// Split sizes: valid and test are rounded from their ratios with at least one
/// project each; train takes the rest. 10 projects give 7/1/2.
inline SplitAssignment split_projects(std::vector<std::string> projects, std::uint64_t seed,
                                      double train_ratio = 0.70, double valid_ratio = 0.10,
                                      double test_ratio = 0.20) {
    std::sort(projects.begin(), projects.end());
    projects.erase(std::unique(projects.begin(), projects.end()), projects.end());
    if (projects.size() < 3)
        throw ConfigError("need at least 3 projects for a train/valid/test split, got " +
                          std::to_string(projects.size()));
    const double total = train_ratio + valid_ratio + test_ratio;
    const auto n = projects.size();
    const auto n_valid = std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(n * valid_ratio / total)));
    const auto n_test = std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(n * test_ratio / total)));
    if (n_valid + n_test >= n) throw ConfigError("split ratios leave no training projects");

    Rng rng(derive_seed(seed, 0x5e1177));
    shuffle(projects, rng);
    SplitAssignment out;
    out.train_ratio = train_ratio;
    out.valid_ratio = valid_ratio;
    out.test_ratio = test_ratio;
    out.seed = seed;
    for (std::size_t i = 0; i < n; ++i) {
        const Split s = i < n_test ? Split::Test : i < n_test + n_valid ? Split::Valid : Split::Train;
        out.projects.emplace(projects[i], s);
    }
    return out;
}

/// Manifest CSV: `project,split`.
inline std::string format_split_manifest(const SplitAssignment& a) {
    std::ostringstream os;
    os << "project,split\n";
    for (const auto& [p, s] : a.projects) csv::write_row(os, {p, std::string(to_string(s))});
    return os.str();
}

inline SplitAssignment parse_split_manifest(std::istream& in) {
    auto rows = csv::read_all(in);
    if (rows.empty() || rows.front().fields != std::vector<std::string>{"project", "split"})
        throw ParseError("split manifest must start with 'project,split'", 1);
    SplitAssignment a;
    for (std::size_t i = 1; i < rows.size(); ++i) {
        const auto& [line, f] = rows[i];
        if (f.size() != 2) throw ParseError("expected 2 columns", line);
        try {
            a.projects[f[0]] = parse_split(f[1]);
        } catch (const ParseError& e) {
            throw ParseError(e.what(), line);
        }
    }
    return a;
}

}  // namespace cdt::extract

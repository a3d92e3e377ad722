// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <map>
#include <set>
#include <string>
#include <vector>

namespace cdt::eval {

struct PriorShiftReport {
    double tv_distance = 0.0;
    std::size_t types_a = 0;
    std::size_t types_b = 0;
    std::size_t shared_types = 0;
};

/// Total-variation distance between the empirical label distributions,
/// with the raw type counts and their overlap.
inline PriorShiftReport prior_shift_report(const std::vector<std::string>& a, const std::vector<std::string>& b) {
    std::map<std::string, double> pa, pb;
    for (const auto& l : a) pa[l] += 1.0;
    for (const auto& l : b) pb[l] += 1.0;
    PriorShiftReport r;
    r.types_a = pa.size();
    r.types_b = pb.size();
    std::set<std::string> all;
    for (const auto& [k, _] : pa) all.insert(k);
    for (const auto& [k, _] : pb) {
        all.insert(k);
        r.shared_types += pa.count(k);
    }
    if (a.empty() || b.empty()) {
        r.tv_distance = (a.empty() && b.empty()) ? 0.0 : 1.0;
        return r;
    }
    double s = 0;
    for (const auto& k : all) {
        const double p = pa.count(k) ? pa[k] / static_cast<double>(a.size()) : 0.0;
        const double q = pb.count(k) ? pb[k] / static_cast<double>(b.size()) : 0.0;
        s += std::abs(p - q);
    }
    r.tv_distance = s / 2;
    return r;
}

}  // namespace cdt::eval

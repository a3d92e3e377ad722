// SPDX-License-Identifier: Apache-2.0
#pragma once

// Two-sample Student t-test with pooled variance. Values are reported in the
// units they are given in; the pipeline passes F1 in percent.

#include <cmath>
#include <numeric>
#include <vector>

#include <boost/math/distributions/students_t.hpp>

#include "cdt/common/error.hpp"

namespace cdt::eval {

inline constexpr double kAlpha = 0.05;

struct SignificanceResult {
    double mean_a = 0, mean_b = 0, std_a = 0, std_b = 0;
    double t = 0;
    double p_value = 1.0;
    bool significant = false;
};

inline double mean_of(const std::vector<double>& v) {
    return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

/// Sample standard deviation (n - 1 in the denominator).
inline double stddev_of(const std::vector<double>& v) {
    if (v.size() < 2) return 0.0;
    const double m = mean_of(v);
    double s = 0;
    for (double x : v) s += (x - m) * (x - m);
    return std::sqrt(s / static_cast<double>(v.size() - 1));
}

/// Two-sided p-value of a t statistic with `df` degrees of freedom.
inline double t_two_sided_p(double t, double df) {
    const boost::math::students_t dist(df);
    return 2.0 * boost::math::cdf(boost::math::complement(dist, std::abs(t)));
}

inline SignificanceResult significance(const std::vector<double>& a, const std::vector<double>& b,
                                       double alpha = kAlpha) {
    if (a.size() < 2 || b.size() < 2) throw Error("the t-test needs at least two runs per condition");
    SignificanceResult r;
    r.mean_a = mean_of(a);
    r.mean_b = mean_of(b);
    r.std_a = stddev_of(a);
    r.std_b = stddev_of(b);
    const double na = static_cast<double>(a.size()), nb = static_cast<double>(b.size());
    const double df = na + nb - 2;
    const double pooled = ((na - 1) * r.std_a * r.std_a + (nb - 1) * r.std_b * r.std_b) / df;
    const double se = std::sqrt(pooled * (1 / na + 1 / nb));
    const double diff = r.mean_a - r.mean_b;
    if (se == 0) {
        // No spread at all: identical constants are never significant,
        // distinct constants always are.
        r.t = diff == 0 ? 0.0 : std::copysign(INFINITY, diff);
        r.p_value = diff == 0 ? 1.0 : 0.0;
    } else {
        r.t = diff / se;
        r.p_value = t_two_sided_p(r.t, df);
    }
    r.significant = r.p_value < alpha;
    return r;
}

}  // namespace cdt::eval

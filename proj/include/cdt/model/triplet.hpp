// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cmath>

#include "cdt/common/error.hpp"
#include "cdt/model/network.hpp"

namespace cdt::model {

/// max(0, m + ||a - p|| - ||a - n||) with Euclidean norms.
inline double triplet_loss(const Vec& a, const Vec& p, const Vec& n, double m) {
    if (a.size() != p.size() || a.size() != n.size()) throw Error("triplet dimension mismatch");
    return std::max(0.0, m + (a - p).norm() - (a - n).norm());
}

/// Mean triplet loss over the columns of A, P, N and its gradient with
/// respect to each. At the hinge and at zero distances the subgradient 0 is used.
inline double triplet_batch(const Mat& A, const Mat& P, const Mat& N, double m, Mat& dA, Mat& dP, Mat& dN) {
    const auto B = A.cols();
    dA = Mat::Zero(A.rows(), B);
    dP = Mat::Zero(A.rows(), B);
    dN = Mat::Zero(A.rows(), B);
    double total = 0;
    const double scale = 1.0 / static_cast<double>(B);
    for (Eigen::Index j = 0; j < B; ++j) {
        const Vec ap = A.col(j) - P.col(j);
        const Vec an = A.col(j) - N.col(j);
        const double dp = ap.norm(), dn = an.norm();
        const double l = m + dp - dn;
        if (l <= 0) continue;
        total += l;
        if (dp > 0) {
            dA.col(j) += scale * ap / dp;
            dP.col(j) -= scale * ap / dp;
        }
        if (dn > 0) {
            dA.col(j) -= scale * an / dn;
            dN.col(j) += scale * an / dn;
        }
    }
    return total * scale;
}

}  // namespace cdt::model

// SPDX-License-Identifier: Apache-2.0
#pragma once

// Type cluster and k-nearest-neighbour prediction. Neighbours are the k
// smallest Euclidean distances (ties by row order); each neighbour votes for
// its label with weight 1 / (d + kVoteEpsilon); labels rank by total weight,
// ties by label text.

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <string>
#include <utility>
#include <vector>

#include "cdt/common/error.hpp"
#include "cdt/model/network.hpp"

namespace cdt::model {

inline constexpr double kVoteEpsilon = 1e-9;

struct TypeCluster {
    Mat features;  // dim x rows
    std::vector<std::string> labels;
    std::size_t k = 10;

    std::size_t size() const { return labels.size(); }
};

inline TypeCluster build_cluster(Mat features, std::vector<std::string> labels, std::size_t k) {
    if (static_cast<std::size_t>(features.cols()) != labels.size()) throw Error("cluster rows and labels differ");
    if (k == 0) throw ConfigError("k must be positive");
    return {std::move(features), std::move(labels), k};
}

using Ranked = std::vector<std::pair<std::string, double>>;

inline double euclidean(const double* a, const double* b, Eigen::Index n) {
    double s = 0;
    for (Eigen::Index i = 0; i < n; ++i) {
        const double d = a[i] - b[i];
        s += d * d;
    }
    return std::sqrt(s);
}

inline Ranked predict(const double* query, const TypeCluster& c, std::size_t top = 0) {
    const auto n = c.size();
    if (n == 0) throw Error("empty type cluster");
    const Eigen::Index dim = c.features.rows();
    std::vector<std::pair<double, std::size_t>> d(n);
    for (std::size_t r = 0; r < n; ++r)
        d[r] = {euclidean(query, c.features.col(static_cast<Eigen::Index>(r)).data(), dim), r};
    const std::size_t k = std::min(c.k, n);
    std::partial_sort(d.begin(), d.begin() + static_cast<std::ptrdiff_t>(k), d.end());
    std::map<std::string, double> votes;
    for (std::size_t i = 0; i < k; ++i) votes[c.labels[d[i].second]] += 1.0 / (d[i].first + kVoteEpsilon);
    Ranked out(votes.begin(), votes.end());
    std::stable_sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.second > b.second; });
    if (top && out.size() > top) out.resize(top);
    return out;
}

inline Ranked predict(const Vec& query, const TypeCluster& c, std::size_t top = 0) {
    if (query.size() != c.features.rows()) throw Error("query dimension does not match the cluster");
    return predict(query.data(), c, top);
}

/// Top-1 label for every column of `queries`.
inline std::vector<std::string> predict_top1(const Mat& queries, const TypeCluster& c) {
    if (queries.rows() != c.features.rows()) throw Error("query dimension does not match the cluster");
    std::vector<std::string> out;
    out.reserve(static_cast<std::size_t>(queries.cols()));
    for (Eigen::Index j = 0; j < queries.cols(); ++j) out.push_back(predict(queries.col(j).data(), c, 1).front().first);
    return out;
}

}  // namespace cdt::model

// SPDX-License-Identifier: Apache-2.0
#pragma once

// Covariate-shift probe: an extremely randomized tree ensemble learns to tell
// which of two sets a feature vector came from, scored by k-fold
// cross-validation. Macro F1 near 0.5 means the sets are indistinguishable.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <numeric>
#include <vector>

#include <Eigen/Dense>

#include "cdt/common/error.hpp"
#include "cdt/common/rng.hpp"

namespace cdt::eval {

struct ExtraTreesConfig {
    std::size_t trees = 100;
    /// 0 selects floor(sqrt(features)).
    std::size_t max_features = 0;
    std::size_t min_samples_split = 2;
};

/// Binary extremely randomized trees on row-major data.
class ExtraTrees {
public:
    ExtraTrees(ExtraTreesConfig cfg, std::uint64_t seed) : cfg_(cfg), rng_(seed) {}

    void fit(const std::vector<double>& X, std::size_t dim, const std::vector<std::uint8_t>& y,
             const std::vector<std::size_t>& rows) {
        dim_ = dim;
        const std::size_t mf =
            cfg_.max_features ? std::min(cfg_.max_features, dim)
                              : std::max<std::size_t>(1, static_cast<std::size_t>(std::sqrt(static_cast<double>(dim))));
        trees_.clear();
        for (std::size_t t = 0; t < cfg_.trees; ++t) trees_.push_back(grow(X, y, rows, mf));
    }

    /// Mean class-1 probability over the trees.
    double proba(const double* x) const {
        double s = 0;
        for (const auto& tree : trees_) {
            std::size_t n = 0;
            while (tree[n].feature >= 0)
                n = x[tree[n].feature] <= tree[n].threshold ? static_cast<std::size_t>(tree[n].left)
                                                            : static_cast<std::size_t>(tree[n].right);
            s += tree[n].value;
        }
        return s / static_cast<double>(trees_.size());
    }

    std::uint8_t predict(const double* x) const { return proba(x) > 0.5 ? 1 : 0; }

private:
    struct Node {
        int feature = -1;
        double threshold = 0;
        int left = -1, right = -1;
        double value = 0;
    };

    static double gini(std::size_t n, std::size_t ones) {
        if (n == 0) return 0;
        const double p = static_cast<double>(ones) / static_cast<double>(n);
        return 2 * p * (1 - p);
    }

    std::vector<Node> grow(const std::vector<double>& X, const std::vector<std::uint8_t>& y,
                           std::vector<std::size_t> idx, std::size_t mf) {
        std::vector<Node> nodes;
        struct Task {
            std::size_t node, begin, end;
        };
        nodes.emplace_back();
        std::vector<Task> stack{{0, 0, idx.size()}};
        std::vector<std::size_t> features(dim_);
        while (!stack.empty()) {
            const Task t = stack.back();
            stack.pop_back();
            const std::size_t n = t.end - t.begin;
            std::size_t ones = 0;
            for (std::size_t i = t.begin; i < t.end; ++i) ones += y[idx[i]];
            nodes[t.node].value = static_cast<double>(ones) / static_cast<double>(n);
            if (n < cfg_.min_samples_split || ones == 0 || ones == n) continue;

            // Draw features without replacement until mf non-constant ones
            // have been tried or none remain.
            std::iota(features.begin(), features.end(), 0);
            std::size_t remaining = dim_, tried = 0;
            int best_f = -1;
            double best_thr = 0, best_score = INFINITY;
            while (remaining > 0 && tried < mf) {
                const std::size_t pick = static_cast<std::size_t>(uniform_index(rng_, remaining));
                const std::size_t f = features[pick];
                std::swap(features[pick], features[--remaining]);
                double lo = INFINITY, hi = -INFINITY;
                for (std::size_t i = t.begin; i < t.end; ++i) {
                    const double v = X[idx[i] * dim_ + f];
                    lo = std::min(lo, v);
                    hi = std::max(hi, v);
                }
                if (!(hi > lo)) continue;
                ++tried;
                double thr = uniform_real(rng_, lo, hi);
                if (thr >= hi) thr = lo;
                std::size_t nl = 0, ol = 0;
                for (std::size_t i = t.begin; i < t.end; ++i) {
                    if (X[idx[i] * dim_ + f] <= thr) {
                        ++nl;
                        ol += y[idx[i]];
                    }
                }
                const std::size_t nr = n - nl, orr = ones - ol;
                const double score = (static_cast<double>(nl) * gini(nl, ol) + static_cast<double>(nr) * gini(nr, orr));
                if (score < best_score) {
                    best_score = score;
                    best_f = static_cast<int>(f);
                    best_thr = thr;
                }
            }
            if (best_f < 0) continue;
            const auto mid = std::partition(idx.begin() + static_cast<std::ptrdiff_t>(t.begin),
                                            idx.begin() + static_cast<std::ptrdiff_t>(t.end), [&](std::size_t r) {
                                                return X[r * dim_ + static_cast<std::size_t>(best_f)] <= best_thr;
                                            });
            const std::size_t m = static_cast<std::size_t>(mid - idx.begin());
            if (m == t.begin || m == t.end) continue;
            nodes[t.node].feature = best_f;
            nodes[t.node].threshold = best_thr;
            const int l = static_cast<int>(nodes.size());
            nodes.emplace_back();
            nodes.emplace_back();
            nodes[t.node].left = l;
            nodes[t.node].right = l + 1;
            stack.push_back({static_cast<std::size_t>(l + 1), m, t.end});
            stack.push_back({static_cast<std::size_t>(l), t.begin, m});
        }
        return nodes;
    }

    ExtraTreesConfig cfg_;
    Rng rng_;
    std::size_t dim_ = 0;
    std::vector<std::vector<Node>> trees_;
};

/// Mean of the per-class F1 scores of a binary prediction.
inline double binary_macro_f1(const std::vector<std::uint8_t>& pred, const std::vector<std::uint8_t>& actual) {
    double sum = 0;
    for (std::uint8_t c = 0; c < 2; ++c) {
        std::size_t tp = 0, fp = 0, fn = 0;
        for (std::size_t i = 0; i < pred.size(); ++i) {
            tp += pred[i] == c && actual[i] == c;
            fp += pred[i] == c && actual[i] != c;
            fn += pred[i] != c && actual[i] == c;
        }
        if (tp) sum += 2.0 * static_cast<double>(tp) / static_cast<double>(2 * tp + fp + fn);
    }
    return sum / 2;
}

struct ShiftProbeReport {
    double probe_f1 = 0;
    std::size_t folds = 6;
    std::vector<double> fold_f1;
    std::size_t samples_a = 0, samples_b = 0;
};

/// Features are dim x n matrices (one vector per column).
inline ShiftProbeReport covariate_probe(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b, std::uint64_t seed,
                                        std::size_t folds = 6, ExtraTreesConfig trees = {}) {
    if (a.cols() == 0 || b.cols() == 0) throw Error("covariate probe needs two non-empty feature sets");
    if (a.rows() != b.rows()) throw Error("covariate probe feature dimensions differ");
    const std::size_t dim = static_cast<std::size_t>(a.rows());
    const std::size_t n = static_cast<std::size_t>(a.cols() + b.cols());

    std::vector<double> X(n * dim);
    std::vector<std::uint8_t> y(n);
    for (std::size_t i = 0; i < n; ++i) {
        const bool from_b = i >= static_cast<std::size_t>(a.cols());
        const auto col = static_cast<Eigen::Index>(from_b ? i - static_cast<std::size_t>(a.cols()) : i);
        for (std::size_t d = 0; d < dim; ++d) X[i * dim + d] = (from_b ? b : a)(static_cast<Eigen::Index>(d), col);
        y[i] = from_b;
    }
    // Identical vectors share a fold, so a copy of a held-out vector never
    // sits in the training folds with the opposite label.
    std::map<std::vector<double>, std::size_t> group_of;
    std::vector<std::size_t> group(n);
    for (std::size_t i = 0; i < n; ++i) {
        std::vector<double> key(X.begin() + static_cast<std::ptrdiff_t>(i * dim),
                                X.begin() + static_cast<std::ptrdiff_t>((i + 1) * dim));
        group[i] = group_of.emplace(std::move(key), group_of.size()).first->second;
    }
    Rng rng(derive_seed(seed, 0x9B0B));
    std::vector<std::size_t> order(group_of.size());
    std::iota(order.begin(), order.end(), 0);
    shuffle(std::span<std::size_t>(order), rng);
    std::vector<std::size_t> fold_of_group(order.size());
    for (std::size_t i = 0; i < order.size(); ++i) fold_of_group[order[i]] = i % folds;

    ShiftProbeReport r;
    r.folds = folds;
    r.samples_a = static_cast<std::size_t>(a.cols());
    r.samples_b = static_cast<std::size_t>(b.cols());
    for (std::size_t f = 0; f < folds; ++f) {
        std::vector<std::size_t> train, test;
        for (std::size_t i = 0; i < n; ++i) (fold_of_group[group[i]] == f ? test : train).push_back(i);
        if (test.empty() || train.empty()) throw Error("too few distinct feature vectors for the folds");
        ExtraTrees et(trees, derive_seed(seed, 0x7EE + f));
        et.fit(X, dim, y, train);
        std::vector<std::uint8_t> pred, actual;
        Rng coin(derive_seed(seed, 0xC017 + f));
        for (auto i : test) {
            // An exact tie carries no information about the source set.
            const double p = et.proba(&X[i * dim]);
            pred.push_back(p == 0.5 ? static_cast<std::uint8_t>(uniform_index(coin, 2)) : p > 0.5);
            actual.push_back(y[i]);
        }
        r.fold_f1.push_back(binary_macro_f1(pred, actual));
    }
    r.probe_f1 = std::accumulate(r.fold_f1.begin(), r.fold_f1.end(), 0.0) / static_cast<double>(folds);
    return r;
}

}  // namespace cdt::eval

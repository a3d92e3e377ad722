// SPDX-License-Identifier: Apache-2.0
#pragma once

// Domain adaptation on top of triplet training: an adversarial domain
// discriminator behind a gradient reversal layer, a Wasserstein critic with
// gradient penalty, and plain fine-tuning on labelled target data.

#include <cmath>
#include <string>
#include <string_view>
#include <vector>

#include "cdt/common/error.hpp"
#include "cdt/common/rng.hpp"
#include "cdt/model/knn.hpp"
#include "cdt/model/train.hpp"

namespace cdt::model {

enum class AdaptMethod { None, Dann, Wdgrl, FineTune };

inline std::string_view to_string(AdaptMethod m) {
    switch (m) {
        case AdaptMethod::None: return "none";
        case AdaptMethod::Dann: return "dann";
        case AdaptMethod::Wdgrl: return "wdgrl";
        case AdaptMethod::FineTune: return "finetune";
    }
    return "?";
}

inline AdaptMethod parse_adapt_method(std::string_view s) {
    if (s == "none") return AdaptMethod::None;
    if (s == "dann") return AdaptMethod::Dann;
    if (s == "wdgrl") return AdaptMethod::Wdgrl;
    if (s == "finetune") return AdaptMethod::FineTune;
    throw ConfigError("unknown adaptation method '" + std::string(s) + "'");
}

struct AdaptConfig {
    double lambda_max = 1.0;
    std::size_t disc_hidden = 32;
    std::size_t disc_steps = 5;
    double disc_lr = 5e-3;
    std::size_t critic_steps = 5;
    double penalty = 10.0;
    double wd_weight = 1.0;
    std::size_t critic_hidden = 32;
    double critic_lr = 1e-3;
    std::size_t finetune_epochs = 10;
};

/// Identity forward; backward multiplies the incoming gradient by -lambda.
struct GradientReversal {
    double lambda = 1.0;
    Mat forward(const Mat& x) const { return x; }
    Mat backward(const Mat& grad) const { return -lambda * grad; }
};

/// 2 / (1 + exp(-10 p)) - 1, rising from 0 at p = 0 towards 1.
inline double dann_lambda(double progress) { return 2.0 / (1.0 + std::exp(-10.0 * progress)) - 1.0; }

namespace detail {

inline std::vector<const EncodedInput*> draw_batch(const std::vector<EncodedInput>& pool, std::size_t n, Rng& rng) {
    std::vector<const EncodedInput*> out;
    out.reserve(n);
    for (std::size_t i = 0; i < n; ++i) out.push_back(&pool[uniform_index(rng, pool.size())]);
    return out;
}

inline Mat relu(const Mat& x) { return x.cwiseMax(0.0); }

}  // namespace detail

/// One-hidden-layer logistic domain classifier on encoder features.
struct DomainDiscriminator {
    Mat W1, b1, w2, b2;

    DomainDiscriminator(std::size_t in, std::size_t hidden, Rng& rng)
        : W1(static_cast<Eigen::Index>(hidden), static_cast<Eigen::Index>(in)),
          b1(Mat::Zero(static_cast<Eigen::Index>(hidden), 1)),
          w2(1, static_cast<Eigen::Index>(hidden)),
          b2(Mat::Zero(1, 1)) {
        model::detail::init_uniform(W1, 1.0 / std::sqrt(static_cast<double>(in)), rng);
        model::detail::init_uniform(w2, 1.0 / std::sqrt(static_cast<double>(hidden)), rng);
    }

    /// Mean binary cross-entropy for columns of X with labels y (1 = source),
    /// its gradient with respect to X, and the parameter gradients.
    double loss(const Mat& X, const std::vector<double>& y, Mat& dX, std::array<Mat, 4>& g) const {
        const auto n = X.cols();
        Mat u = W1 * X;
        u.colwise() += b1.col(0);
        const Mat h = u.unaryExpr(&model::detail::sigmoid);
        Mat s = w2 * h;
        s.array() += b2(0, 0);
        double total = 0;
        Mat ds(1, n);
        for (Eigen::Index j = 0; j < n; ++j) {
            const double z = s(0, j), t = y[static_cast<std::size_t>(j)];
            // log(1 + e^z) - t z, written stably
            total += std::max(z, 0.0) + std::log1p(std::exp(-std::abs(z))) - t * z;
            ds(0, j) = (model::detail::sigmoid(z) - t) / static_cast<double>(n);
        }
        const Mat dh = w2.transpose() * ds;
        const Mat du = (dh.array() * h.array() * (1.0 - h.array())).matrix();
        g[0] = du * X.transpose();
        g[1] = du.rowwise().sum();
        g[2] = ds * h.transpose();
        g[3] = ds.rowwise().sum();
        dX = W1.transpose() * du;
        return total / static_cast<double>(n);
    }
};

struct DannHistory {
    std::vector<double> disc_loss;
};

class DannAdapter : public Adapter {
public:
    DannAdapter(const std::vector<EncodedInput>& target, std::size_t feat_dim, const AdaptConfig& cfg,
                std::uint64_t seed)
        : target_(target), cfg_(cfg), rng_(derive_seed(seed, 0xDA77)), init_rng_(derive_seed(seed, 0xDA78)),
          disc_(feat_dim, cfg.disc_hidden, init_rng_), adam_(cfg.disc_lr) {
        if (target_.empty()) throw Error("domain adaptation needs target inputs");
    }

    void step(const TypeModel& m, const Mat& A, Mat& dA, NetParams& grad, double progress) override {
        const auto B = A.cols();
        const auto batch = detail::draw_batch(target_, static_cast<std::size_t>(B), rng_);
        EncoderCache cache;
        const Mat T = encode_batch(m.params, *m.table, batch, m.index.size(), &cache);
        GradientReversal grl{cfg_.lambda_max * dann_lambda(progress)};
        Mat X(A.rows(), 2 * B);
        X << grl.forward(A), grl.forward(T);
        std::vector<double> y(static_cast<std::size_t>(2 * B), 0.0);
        std::fill(y.begin(), y.begin() + B, 1.0);
        Mat dX;
        std::array<Mat, 4> g;
        for (std::size_t s = 0; s < cfg_.disc_steps; ++s) {
            disc_.loss(X, y, dX, g);
            adam_.step({&disc_.W1, &disc_.b1, &disc_.w2, &disc_.b2}, {&g[0], &g[1], &g[2], &g[3]});
        }
        epoch_loss_ += disc_.loss(X, y, dX, g);
        ++epoch_steps_;
        const Mat rev = grl.backward(dX);
        dA += rev.leftCols(B);
        encode_backward(m.params, cache, rev.rightCols(B), grad);
    }

    void end_epoch() override {
        history.disc_loss.push_back(epoch_steps_ ? epoch_loss_ / static_cast<double>(epoch_steps_) : 0.0);
        epoch_loss_ = 0;
        epoch_steps_ = 0;
    }

    DannHistory history;

private:
    const std::vector<EncodedInput>& target_;
    AdaptConfig cfg_;
    Rng rng_, init_rng_;
    DomainDiscriminator disc_;
    Adam adam_;
    double epoch_loss_ = 0;
    std::size_t epoch_steps_ = 0;
};

/// f(x) = v relu(W x + b) + c. The output layer starts at zero, so a fresh
/// critic is constant and passes no gradient to the encoder.
struct Critic {
    Mat W, b, v, c;

    Critic(std::size_t in, std::size_t hidden, Rng& rng)
        : W(static_cast<Eigen::Index>(hidden), static_cast<Eigen::Index>(in)),
          b(Mat::Zero(static_cast<Eigen::Index>(hidden), 1)),
          v(Mat::Zero(1, static_cast<Eigen::Index>(hidden))),
          c(Mat::Zero(1, 1)) {
        model::detail::init_uniform(W, std::sqrt(6.0 / static_cast<double>(in + hidden)), rng);
    }

    Mat pre(const Mat& X) const {
        Mat u = W * X;
        u.colwise() += b.col(0);
        return u;
    }

    Mat values(const Mat& X) const {
        Mat out = v * detail::relu(pre(X));
        out.array() += c(0, 0);
        return out;
    }

    /// Gradient of f with respect to each input column.
    Mat input_grad(const Mat& X) const {
        const Mat mask = (pre(X).array() > 0).cast<double>().matrix();
        const Mat q = (mask.array().colwise() * v.row(0).transpose().array()).matrix();
        return W.transpose() * q;
    }

    /// Mean f(S) - mean f(T).
    double estimate(const Mat& S, const Mat& T) const { return values(S).mean() - values(T).mean(); }
};

/// Critic loss  -(mean f(S) - mean f(T) - penalty * mean (|grad f(x_hat)| - 1)^2)
/// and its parameter gradients. The mask of the penalty term is treated as
/// constant, which is exact away from ReLU kinks.
inline double critic_objective(const Critic& cr, const Mat& S, const Mat& T, const Mat& Xhat, double penalty,
                               std::array<Mat, 4>& g) {
    g[0] = Mat::Zero(cr.W.rows(), cr.W.cols());
    g[1] = Mat::Zero(cr.b.rows(), 1);
    g[2] = Mat::Zero(1, cr.v.cols());
    g[3] = Mat::Zero(1, 1);
    auto mean_grads = [&](const Mat& X, double sign) {
        const Mat u = cr.pre(X);
        const Mat r = detail::relu(u);
        const Mat mask = (u.array() > 0).cast<double>().matrix();
        const double w = sign / static_cast<double>(X.cols());
        g[2] += w * r.rowwise().sum().transpose();
        const Mat q = (mask.array().colwise() * cr.v.row(0).transpose().array()).matrix();
        g[0] += w * q * X.transpose();
        g[1] += w * q.rowwise().sum();
    };
    // Gradients of the quantity to maximise, negated at the end.
    mean_grads(S, 1.0);
    mean_grads(T, -1.0);
    double gp = 0;
    if (penalty > 0 && Xhat.cols() > 0) {
        const Mat u = cr.pre(Xhat);
        const Mat mask = (u.array() > 0).cast<double>().matrix();
        const double w = penalty / static_cast<double>(Xhat.cols());
        for (Eigen::Index j = 0; j < Xhat.cols(); ++j) {
            const Vec q = mask.col(j).cwiseProduct(cr.v.row(0).transpose());
            const Vec grad_x = cr.W.transpose() * q;
            const double norm = grad_x.norm();
            gp += (norm - 1.0) * (norm - 1.0);
            if (norm < 1e-12) continue;
            const Vec s = 2.0 * (norm - 1.0) / norm * grad_x;
            g[0] -= w * q * s.transpose();
            g[2] -= w * (mask.col(j).cwiseProduct(cr.W * s)).transpose();
        }
        gp /= static_cast<double>(Xhat.cols());
    }
    for (auto& m : g) m = -m;
    return -(cr.estimate(S, T) - penalty * gp);
}

struct WdgrlHistory {
    std::vector<double> estimate;
};

class WdgrlAdapter : public Adapter {
public:
    WdgrlAdapter(const std::vector<EncodedInput>& target, std::size_t feat_dim, const AdaptConfig& cfg,
                 std::uint64_t seed)
        : target_(target), cfg_(cfg), rng_(derive_seed(seed, 0x3D61)), init_rng_(derive_seed(seed, 0x3D62)),
          critic_(feat_dim, cfg.critic_hidden, init_rng_), adam_(cfg.critic_lr) {
        if (target_.empty()) throw Error("domain adaptation needs target inputs");
    }

    void step(const TypeModel& m, const Mat& A, Mat& dA, NetParams& grad, double) override {
        const auto B = A.cols();
        const auto batch = detail::draw_batch(target_, static_cast<std::size_t>(B), rng_);
        EncoderCache cache;
        const Mat T = encode_batch(m.params, *m.table, batch, m.index.size(), &cache);
        for (std::size_t s = 0; s < cfg_.critic_steps; ++s) {
            Mat Xhat(A.rows(), B);
            for (Eigen::Index j = 0; j < B; ++j) {
                const double e = uniform01(rng_);
                Xhat.col(j) = e * A.col(j) + (1.0 - e) * T.col(j);
            }
            std::array<Mat, 4> g;
            critic_objective(critic_, A, T, Xhat, cfg_.penalty, g);
            adam_.step({&critic_.W, &critic_.b, &critic_.v, &critic_.c}, {&g[0], &g[1], &g[2], &g[3]});
        }
        epoch_est_ += critic_.estimate(A, T);
        ++epoch_steps_;
        const double w = cfg_.wd_weight;
        dA += (w / static_cast<double>(B)) * critic_.input_grad(A);
        const Mat dT = (-w / static_cast<double>(B)) * critic_.input_grad(T);
        encode_backward(m.params, cache, dT, grad);
    }

    void end_epoch() override {
        history.estimate.push_back(epoch_steps_ ? epoch_est_ / static_cast<double>(epoch_steps_) : 0.0);
        epoch_est_ = 0;
        epoch_steps_ = 0;
    }

    const Critic& critic() const { return critic_; }

    WdgrlHistory history;

private:
    const std::vector<EncodedInput>& target_;
    AdaptConfig cfg_;
    Rng rng_, init_rng_;
    Critic critic_;
    Adam adam_;
    double epoch_est_ = 0;
    std::size_t epoch_steps_ = 0;
};

/// Source training with the adversarial discriminator.
inline DannHistory dann_train(TypeModel& m, const TrainSet& source, const std::vector<EncodedInput>& target,
                              const TrainOptions& opt, const AdaptConfig& cfg) {
    DannAdapter ad(target, m.cfg.out_dim, cfg, opt.seed);
    train(m, source, opt, &ad);
    return ad.history;
}

/// Source training with the Wasserstein critic.
inline WdgrlHistory wdgrl_train(TypeModel& m, const TrainSet& source, const std::vector<EncodedInput>& target,
                                const TrainOptions& opt, const AdaptConfig& cfg) {
    WdgrlAdapter ad(target, m.cfg.out_dim, cfg, opt.seed);
    train(m, source, opt, &ad);
    return ad.history;
}

inline TypeCluster cluster_from(const TypeModel& m, const TrainSet& ts) {
    return build_cluster(m.encode(ts.inputs), ts.labels, m.cfg.k);
}

/// Continues training on labelled target data; the caller rebuilds the
/// cluster from the same target training set.
inline TypeModel fine_tune(const TypeModel& pretrained, const TrainSet& target, const TrainOptions& opt) {
    if (target.size() == 0) throw Error("fine-tuning needs a labelled target training set");
    TypeModel m = pretrained;
    train(m, target, opt);
    return m;
}

}  // namespace cdt::model

// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <vector>

#include <Eigen/Dense>

namespace cdt::model {

/// Adam over a fixed list of tensors.
class Adam {
public:
    explicit Adam(double lr, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8)
        : lr_(lr), b1_(beta1), b2_(beta2), eps_(eps) {}

    void step(const std::vector<Eigen::MatrixXd*>& params, const std::vector<const Eigen::MatrixXd*>& grads) {
        if (m_.empty()) {
            for (const auto* p : params) {
                m_.push_back(Eigen::MatrixXd::Zero(p->rows(), p->cols()));
                v_.push_back(Eigen::MatrixXd::Zero(p->rows(), p->cols()));
            }
        }
        ++t_;
        const double c1 = 1.0 - std::pow(b1_, static_cast<double>(t_));
        const double c2 = 1.0 - std::pow(b2_, static_cast<double>(t_));
        for (std::size_t i = 0; i < params.size(); ++i) {
            m_[i] = b1_ * m_[i] + (1.0 - b1_) * *grads[i];
            v_[i] = b2_ * v_[i] + (1.0 - b2_) * grads[i]->cwiseProduct(*grads[i]);
            params[i]->array() -= lr_ * (m_[i].array() / c1) / ((v_[i].array() / c2).sqrt() + eps_);
        }
    }

    std::size_t steps() const { return t_; }
    void set_lr(double lr) { lr_ = lr; }

private:
    double lr_, b1_, b2_, eps_;
    std::size_t t_ = 0;
    std::vector<Eigen::MatrixXd> m_, v_;
};

}  // namespace cdt::model

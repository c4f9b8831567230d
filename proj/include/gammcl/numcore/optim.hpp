// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

#include "gammcl/error.hpp"
#include "gammcl/numcore/tensor.hpp"

namespace gammcl {

// Heavy-ball SGD in the PyTorch convention: v <- momentum*v + g; p <- p - lr*v.
class SgdMomentum {
public:
    SgdMomentum(std::size_t n, double lr, double momentum) : lr_(lr), momentum_(momentum), velocity_(n, 0.0) {}

    void step(std::span<double> params, std::span<const double> grad) {
        if (params.size() != velocity_.size() || grad.size() != velocity_.size()) {
            throw ShapeError("SgdMomentum::step: size mismatch");
        }
        for (std::size_t i = 0; i < params.size(); ++i) {
            velocity_[i] = momentum_ * velocity_[i] + grad[i];
            params[i] -= lr_ * velocity_[i];
        }
    }

    void set_learning_rate(double lr) noexcept { lr_ = lr; }
    [[nodiscard]] double learning_rate() const noexcept { return lr_; }

private:
    double lr_;
    double momentum_;
    std::vector<double> velocity_;
};

class Adam {
public:
    Adam(std::size_t n, double lr, double beta1 = 0.0, double beta2 = 0.9, double eps = 1e-8)
        : lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps), m_(n, 0.0), v_(n, 0.0) {}

    void step(std::span<double> params, std::span<const double> grad) {
        if (params.size() != m_.size() || grad.size() != m_.size()) throw ShapeError("Adam::step: size mismatch");
        ++t_;
        const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
        const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
        for (std::size_t i = 0; i < params.size(); ++i) {
            m_[i] = beta1_ * m_[i] + (1.0 - beta1_) * grad[i];
            v_[i] = beta2_ * v_[i] + (1.0 - beta2_) * grad[i] * grad[i];
            const double m_hat = m_[i] / c1;
            const double v_hat = v_[i] / c2;
            params[i] -= lr_ * m_hat / (std::sqrt(v_hat) + eps_);
        }
    }

private:
    double lr_;
    double beta1_;
    double beta2_;
    double eps_;
    long long t_ = 0;
    std::vector<double> m_;
    std::vector<double> v_;
};

} // namespace gammcl

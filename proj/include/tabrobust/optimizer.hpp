#pragma once

#include <cmath>
#include <span>
#include <vector>

namespace tabrobust {

/// Adam with decoupled weight decay. weight_decay = 0 gives plain Adam.
class AdamW {
public:
    AdamW(std::size_t n, double lr, double weight_decay = 0.0, double beta1 = 0.9,
          double beta2 = 0.999, double eps = 1e-8)
        : lr_(lr), wd_(weight_decay), b1_(beta1), b2_(beta2), eps_(eps), m_(n, 0.0), v_(n, 0.0) {}

    void step(std::span<double> params, std::span<const double> grad) {
        ++t_;
        double bc1 = 1.0 - std::pow(b1_, t_);
        double bc2 = 1.0 - std::pow(b2_, t_);
        for (std::size_t i = 0; i < params.size(); ++i) {
            m_[i] = b1_ * m_[i] + (1.0 - b1_) * grad[i];
            v_[i] = b2_ * v_[i] + (1.0 - b2_) * grad[i] * grad[i];
            double mhat = m_[i] / bc1;
            double vhat = v_[i] / bc2;
            params[i] -= lr_ * (mhat / (std::sqrt(vhat) + eps_) + wd_ * params[i]);
        }
    }

private:
    double lr_, wd_, b1_, b2_, eps_;
    int t_ = 0;
    std::vector<double> m_, v_;
};

} // namespace tabrobust

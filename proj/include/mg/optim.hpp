#pragma once

#include "mg/autodiff.hpp"

#include <vector>

namespace mg {

/// Adam with bias correction. One state slot per registered tensor; step()
/// consumes the gradient currently stored on each node.
template <class S>
class Adam {
public:
    Adam(std::vector<ad::NodePtr<S>> params, S lr, S beta1 = S(0.9), S beta2 = S(0.999),
         S eps = S(1e-8))
        : params_(std::move(params)), lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {
        for (const auto& p : params_) {
            m_.push_back(ad::Arr<S>::Zero(p->numel()));
            v_.push_back(ad::Arr<S>::Zero(p->numel()));
        }
    }

    void step() {
        ++t_;
        const S bc1 = S(1) - std::pow(beta1_, static_cast<S>(t_));
        const S bc2 = S(1) - std::pow(beta2_, static_cast<S>(t_));
        for (std::size_t i = 0; i < params_.size(); ++i) {
            auto& p = *params_[i];
            if (p.grad.size() != p.numel()) continue;  // no backward ran for this param
            m_[i] = beta1_ * m_[i] + (S(1) - beta1_) * p.grad;
            v_[i] = beta2_ * v_[i] + (S(1) - beta2_) * p.grad.square();
            p.value -= lr_ * (m_[i] / bc1) / ((v_[i] / bc2).sqrt() + eps_);
        }
    }

private:
    std::vector<ad::NodePtr<S>> params_;
    std::vector<ad::Arr<S>> m_, v_;
    S lr_, beta1_, beta2_, eps_;
    long t_ = 0;
};

}  // namespace mg

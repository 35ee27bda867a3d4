#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "tensor.hpp"

namespace hmsr {

// Mean absolute error over all elements.
template <typename T>
double l1_loss(const Tensor<T>& pred, const Tensor<T>& target) {
    if (!pred.same_shape(target)) throw std::invalid_argument("l1_loss: shape mismatch");
    double sum = 0.0;
    for (size_t i = 0; i < pred.v.size(); ++i)
        sum += std::abs(static_cast<double>(pred.v[i]) - static_cast<double>(target.v[i]));
    return sum / static_cast<double>(pred.v.size());
}

// d(mean |pred - target|)/d pred; sign convention: 0 at exact equality.
template <typename T>
Tensor<T> l1_loss_backward(const Tensor<T>& pred, const Tensor<T>& target) {
    Tensor<T> d(pred.c, pred.h, pred.w);
    const T inv_n = T(1) / static_cast<T>(pred.v.size());
    for (size_t i = 0; i < pred.v.size(); ++i) {
        const T diff = pred.v[i] - target.v[i];
        d.v[i] = diff > T(0) ? inv_n : (diff < T(0) ? -inv_n : T(0));
    }
    return d;
}

enum class LrSchedule { constant, multistep, cosine };

inline LrSchedule lr_schedule_from_string(const std::string& s) {
    if (s == "constant") return LrSchedule::constant;
    if (s == "multistep") return LrSchedule::multistep;
    if (s == "cosine") return LrSchedule::cosine;
    throw std::invalid_argument("unknown lr schedule: " + s);
}

// multistep: halve at 50%, 75% and 90% of the iteration budget.
inline double scheduled_lr(double base_lr, LrSchedule sched, int64_t iter, int64_t total) {
    switch (sched) {
        case LrSchedule::constant:
            return base_lr;
        case LrSchedule::multistep: {
            double lr = base_lr;
            if (iter >= total / 2) lr *= 0.5;
            if (iter >= total * 3 / 4) lr *= 0.5;
            if (iter >= total * 9 / 10) lr *= 0.5;
            return lr;
        }
        case LrSchedule::cosine:
            return base_lr * 0.5 * (1.0 + std::cos(M_PI * static_cast<double>(iter) / static_cast<double>(total)));
    }
    return base_lr;
}

// Adam over a fixed parameter list. Moment buffers are addressed by list
// position; the list order is the model's declaration order, which the
// checkpoint format also relies on.
template <typename T>
class Adam {
public:
    Adam() = default;
    Adam(const std::vector<Param<T>*>& params, double beta1 = 0.9, double beta2 = 0.99,
         double eps = 1e-8)
        : beta1_(beta1), beta2_(beta2), eps_(eps) {
        for (const auto* p : params) {
            m_.emplace_back(p->value.c, p->value.h, p->value.w);
            v_.emplace_back(p->value.c, p->value.h, p->value.w);
        }
    }

    void step(const std::vector<Param<T>*>& params, double lr) {
        ++t_;
        const double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
        const double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
        for (size_t i = 0; i < params.size(); ++i) {
            Param<T>& p = *params[i];
            for (size_t j = 0; j < p.value.v.size(); ++j) {
                const double g = static_cast<double>(p.grad.v[j]);
                const double m = beta1_ * static_cast<double>(m_[i].v[j]) + (1.0 - beta1_) * g;
                const double v = beta2_ * static_cast<double>(v_[i].v[j]) + (1.0 - beta2_) * g * g;
                m_[i].v[j] = static_cast<T>(m);
                v_[i].v[j] = static_cast<T>(v);
                const double mhat = m / bc1;
                const double vhat = v / bc2;
                p.value.v[j] -= static_cast<T>(lr * mhat / (std::sqrt(vhat) + eps_));
            }
        }
    }

    int64_t steps() const { return t_; }
    std::vector<Tensor<T>>& m() { return m_; }
    std::vector<Tensor<T>>& v() { return v_; }
    const std::vector<Tensor<T>>& m() const { return m_; }
    const std::vector<Tensor<T>>& v() const { return v_; }
    void set_steps(int64_t t) { t_ = t; }
    double beta1() const { return beta1_; }
    double beta2() const { return beta2_; }

private:
    double beta1_ = 0.9, beta2_ = 0.99, eps_ = 1e-8;
    int64_t t_ = 0;
    std::vector<Tensor<T>> m_, v_;
};

}  // namespace hmsr

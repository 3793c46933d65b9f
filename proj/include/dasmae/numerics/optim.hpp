#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <string>
#include <vector>

#include "dasmae/numerics/autograd.hpp"

namespace dasmae::num {

struct AdamWConfig {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double weight_decay = 0.0;
};

/// First/second moments per parameter plus the step counter.
template <typename T>
struct OptimizerState {
    AdamWConfig hyper;
    std::vector<NdArray<T>> first_moment;
    std::vector<NdArray<T>> second_moment;
    std::uint64_t step = 0;
};

template <typename T>
OptimizerState<T> make_optimizer_state(const std::vector<Var<T>>& params, const AdamWConfig& hyper) {
    OptimizerState<T> state;
    state.hyper = hyper;
    for (const auto& p : params) {
        state.first_moment.emplace_back(p.shape());
        state.second_moment.emplace_back(p.shape());
    }
    return state;
}

/// One AdamW update of every parameter from its accumulated gradient.
/// Weight decay is decoupled: p <- p * (1 - lr * wd) before the Adam step.
/// Throws NumericError, leaving parameters untouched, on any non-finite gradient.
template <typename T>
void adamw_step(std::vector<Var<T>>& params, OptimizerState<T>& state, double lr) {
    if (state.first_moment.size() != params.size()) {
        throw ContractError("adamw_step: optimizer state tracks " + std::to_string(state.first_moment.size()) +
                            " parameters, got " + std::to_string(params.size()));
    }
    for (std::size_t i = 0; i < params.size(); ++i) {
        if (params[i].shape() != state.first_moment[i].shape()) {
            throw DimensionError("adamw_step: state shape mismatch for '" + params[i].name() + "'");
        }
        if (!params[i].grad().all_finite()) {
            throw NumericError("adamw_step: non-finite gradient in '" + params[i].name() + "'");
        }
    }
    const auto& h = state.hyper;
    state.step += 1;
    const double t = static_cast<double>(state.step);
    const double bc1 = 1.0 - std::pow(h.beta1, t);
    const double bc2 = 1.0 - std::pow(h.beta2, t);
    const T decay = static_cast<T>(1.0 - lr * h.weight_decay);
    const T b1 = static_cast<T>(h.beta1), b2 = static_cast<T>(h.beta2);
    const T step_size = static_cast<T>(lr / bc1);
    const T inv_sqrt_bc2 = static_cast<T>(1.0 / std::sqrt(bc2));
    const T eps = static_cast<T>(h.eps);
    for (std::size_t i = 0; i < params.size(); ++i) {
        auto& value = params[i].value();
        const auto& grad = params[i].grad();
        auto& m = state.first_moment[i];
        auto& v = state.second_moment[i];
        for (std::size_t j = 0; j < value.size(); ++j) {
            const T g = grad[j];
            m[j] = b1 * m[j] + (T(1) - b1) * g;
            v[j] = b2 * v[j] + (T(1) - b2) * g * g;
            value[j] *= decay;
            value[j] -= step_size * m[j] / (std::sqrt(v[j]) * inv_sqrt_bc2 + eps);
        }
    }
}

template <typename T>
void zero_grad(std::vector<Var<T>>& params) {
    for (auto& p : params) p.zero_grad();
}

struct LrSchedule {
    double peak_lr = 1e-3;
    double floor_lr = 0.0;
    int warmup_epochs = 40;
    int total_epochs = 500;
};

inline void validate(const LrSchedule& s) {
    if (!(s.peak_lr > 0.0) || s.floor_lr < 0.0 || s.floor_lr > s.peak_lr || s.warmup_epochs < 0 ||
        s.total_epochs <= 0 || s.total_epochs <= s.warmup_epochs) {
        throw ContractError("LrSchedule: need 0 <= floor <= peak, peak > 0, 0 <= warmup < total");
    }
}

/// Linear ramp from 0 to peak over the warmup epochs, then a half cosine from
/// peak down to floor at `total_epochs`.
inline double cosine_lr(int epoch, const LrSchedule& s) {
    validate(s);
    if (epoch < 0 || epoch > s.total_epochs) {
        throw ContractError("cosine_lr: epoch " + std::to_string(epoch) + " outside [0, " +
                            std::to_string(s.total_epochs) + "]");
    }
    if (epoch < s.warmup_epochs) return s.peak_lr * epoch / s.warmup_epochs;
    if (epoch == s.warmup_epochs) return s.peak_lr;
    if (epoch == s.total_epochs) return s.floor_lr;
    const double progress =
        static_cast<double>(epoch - s.warmup_epochs) / static_cast<double>(s.total_epochs - s.warmup_epochs);
    return s.floor_lr + (s.peak_lr - s.floor_lr) * 0.5 * (1.0 + std::cos(std::numbers::pi * progress));
}

}  // namespace dasmae::num

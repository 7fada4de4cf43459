// SPDX-License-Identifier: Apache-2.0
#include "attentrack/numcore/optim.hpp"

#include <cmath>
#include <numbers>

#include "attentrack/error.hpp"

namespace attentrack::numcore {

ScheduleValues one_cycle(const AdamWConfig& config, double position) {
    const double initial_lr = config.max_lr / config.div_factor;
    const double final_lr = config.max_lr / config.final_div_factor;
    if (position <= config.warmup_fraction) {
        const double t = config.warmup_fraction > 0.0 ? position / config.warmup_fraction : 1.0;
        return {initial_lr + (config.max_lr - initial_lr) * t,
                config.beta1_high + (config.beta1_low - config.beta1_high) * t};
    }
    const double t = (position - config.warmup_fraction) / (1.0 - config.warmup_fraction);
    const double cosine = 0.5 * (1.0 + std::cos(std::numbers::pi * t));  // 1 → 0
    return {final_lr + (config.max_lr - final_lr) * cosine,
            config.beta1_high + (config.beta1_low - config.beta1_high) * cosine};
}

void adamw_step(std::span<NamedParameter> params, OptimizerState& state, double schedule_position,
                const AdamWConfig& config) {
    if (!(schedule_position >= 0.0 && schedule_position <= 1.0)) {
        throw ContractError("adamw_step: schedule position " + std::to_string(schedule_position) +
                            " outside [0, 1]");
    }
    for (const auto& param : params) {
        if (!param.tensor.requires_grad()) {
            throw ContractError("adamw_step: parameter '" + param.name +
                                "' is frozen and cannot be updated");
        }
        if (!param.tensor.has_grad()) {
            throw Error("adamw_step: parameter '" + param.name + "' has no gradient");
        }
        if (auto it = state.moments.find(param.name);
            it != state.moments.end() && it->second.first.size() != param.tensor.size()) {
            throw ContractError("adamw_step: moment size mismatch for parameter '" + param.name +
                                "'");
        }
    }

    const auto [lr, beta1] = one_cycle(config, schedule_position);
    ++state.step;
    state.schedule_position = schedule_position;
    const double decay = 1.0 - lr * config.weight_decay;

    for (auto& param : params) {
        auto values = param.tensor.mutable_data();
        const auto grad = param.tensor.grad();
        ParameterMoments& moments = state.moments[param.name];
        if (moments.first.empty()) {
            moments.first.assign(values.size(), 0.0);
            moments.second.assign(values.size(), 0.0);
        }
        ++moments.updates;
        const double t = static_cast<double>(moments.updates);
        const double bias1 = 1.0 - std::pow(beta1, t);
        const double bias2 = 1.0 - std::pow(config.beta2, t);
        auto& m = moments.first;
        auto& v = moments.second;
        for (std::size_t i = 0; i < values.size(); ++i) {
            const double g = grad[i];
            m[i] = beta1 * m[i] + (1.0 - beta1) * g;
            v[i] = config.beta2 * v[i] + (1.0 - config.beta2) * g * g;
            const double m_hat = m[i] / bias1;
            const double v_hat = v[i] / bias2;
            values[i] = values[i] * decay - lr * m_hat / (std::sqrt(v_hat) + config.eps);
        }
    }
}

}  // namespace attentrack::numcore

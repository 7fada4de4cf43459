// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "attentrack/numcore/tensor.hpp"

namespace attentrack::numcore {

struct NamedParameter {
    std::string name;
    Tensor tensor;
};

/// AdamW with a one-cycle schedule: linear warmup from max/div_factor to max
/// over the first `warmup_fraction` of training, then cosine decay to
/// max/final_div_factor. β₁ runs the opposite way between its two bounds.
struct AdamWConfig {
    double max_lr = 1e-3;
    double weight_decay = 0.01;
    double beta1_low = 0.85;
    double beta1_high = 0.95;
    double beta2 = 0.999;
    double eps = 1e-8;
    double warmup_fraction = 0.3;
    double div_factor = 25.0;
    double final_div_factor = 1e4;
};

struct ScheduleValues {
    double lr;
    double beta1;
};

/// Learning rate and β₁ at `position` ∈ [0, 1] of the run.
ScheduleValues one_cycle(const AdamWConfig& config, double position);

struct ParameterMoments {
    std::vector<double> first;
    std::vector<double> second;
    std::uint64_t updates = 0;  // drives bias correction for this parameter
};

struct OptimizerState {
    /// Keyed by parameter name; created on a parameter's first update.
    std::map<std::string, ParameterMoments> moments;
    /// Number of adamw_step calls so far.
    std::uint64_t step = 0;
    double schedule_position = 0.0;
};

/// One AdamW update of every parameter in `params` using its stored grad.
///
/// Throws ContractError if a parameter is frozen (requires_grad == false) or
/// its stored moments have another size, and Error naming the parameter when
/// its gradient is missing.
void adamw_step(std::span<NamedParameter> params, OptimizerState& state, double schedule_position,
                const AdamWConfig& config = {});

}  // namespace attentrack::numcore

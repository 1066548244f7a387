#pragma once

#include "numkit/checkpoint.hpp"

namespace trainer {

struct AdamConfig {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double weight_decay = 0.0;  // classic L2: grad += wd * param
};

struct AdamState {
    std::vector<std::vector<double>> m, v;
    long step = 0;

    static AdamState init(const numkit::ParamList& params);
};

// Bias-corrected Adam update, in place, deterministic parameter order.
void adam_step(numkit::ParamList& params, const std::vector<std::vector<double>>& grads,
               AdamState& state, const AdamConfig& cfg);

}  // namespace trainer

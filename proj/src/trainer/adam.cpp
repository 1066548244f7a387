#include "trainer/adam.hpp"

#include <cmath>

namespace trainer {

AdamState AdamState::init(const numkit::ParamList& params) {
    AdamState s;
    s.m.reserve(params.size());
    s.v.reserve(params.size());
    for (const auto& [path, t] : params) {
        (void)path;
        s.m.emplace_back(t.data.size(), 0.0);
        s.v.emplace_back(t.data.size(), 0.0);
    }
    return s;
}

void adam_step(numkit::ParamList& params, const std::vector<std::vector<double>>& grads,
               AdamState& state, const AdamConfig& cfg) {
    if (grads.size() != params.size() || state.m.size() != params.size())
        throw numkit::NumericError("adam_step: parameter/gradient/state count mismatch");

    state.step += 1;
    double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.step));
    double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.step));

    for (std::size_t p = 0; p < params.size(); ++p) {
        auto& tensor = params[p].second;
        const auto& g = grads[p];
        if (g.size() != tensor.data.size())
            throw numkit::NumericError("adam_step: gradient shape mismatch for '" + params[p].first + "'");
        auto& m = state.m[p];
        auto& v = state.v[p];
        for (std::size_t i = 0; i < g.size(); ++i) {
            double grad = g[i] + cfg.weight_decay * tensor.data[i];
            m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * grad;
            v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * grad * grad;
            double mhat = m[i] / bc1;
            double vhat = v[i] / bc2;
            tensor.data[i] -= cfg.lr * mhat / (std::sqrt(vhat) + cfg.eps);
        }
        numkit::require_finite(tensor, "adam_step '" + params[p].first + "'");
    }
}

}  // namespace trainer

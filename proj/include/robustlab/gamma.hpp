#pragma once

#include "numkit/tensor.hpp"

namespace robustlab {

struct AmplificationFactors {
    double gamma = 1.0;      // sqrt(1 + 2 sum_{i<j} a_i a_j rho_ij)
    double gamma_pol = 1.0;  // sqrt(1 - 2 sum_{i<j} |a_i a_j rho_ij|)
    bool clamped_gamma = false;
    bool clamped_pol = false;
};

// Noise amplification of an attention-weighted sum under correlated node
// noise, and its signed-weight counterpart. Negative radicands clamp to 0.
AmplificationFactors amplification_factors(const std::vector<double>& alphas,
                                           const numkit::Tensor& rho);

}  // namespace robustlab

#pragma once

#include <functional>

#include "robustlab/noise.hpp"

namespace robustlab {

// Largest singular value by power iteration on A^T A.
double spectral_norm(const numkit::Tensor& A, double tol = 1e-10, int max_iters = 10000);

double frobenius_norm(const numkit::Tensor& A);

using FeatureMap = std::function<numkit::Tensor(const numkit::Tensor&)>;

struct LipschitzEstimate {
    double mean = 0.0;
    double max = 0.0;
    int trials_used = 0;
    std::vector<double> ratios;
};

// Perturbation-ratio estimator: ||f(X+eta) - f(X)||_F / ||eta||_F over
// sampled noise; zero-noise draws are skipped.
LipschitzEstimate empirical_lipschitz(const FeatureMap& f, const numkit::Tensor& X,
                                      const NoiseSpec& spec, int trials);

}  // namespace robustlab

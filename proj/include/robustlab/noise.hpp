#pragma once

#include <optional>
#include <random>

#include "numkit/tensor.hpp"

namespace robustlab {

// Additive Gaussian feature noise. Without rho the entries are iid
// N(0, sigma^2); with rho the node noise vectors are drawn jointly so that
// E[eta_i . eta_j] = rho_ij * sigma^2 * D.
struct NoiseSpec {
    double sigma = 0.1;
    std::optional<numkit::Tensor> rho;  // n x n, symmetric, unit diagonal, PSD
    std::uint64_t seed = 0;
};

// Validates and factorizes rho once; sample() is then cheap.
class NoiseSampler {
public:
    NoiseSampler(const NoiseSpec& spec, int n, int dim);

    // returns the noise matrix eta (n x dim)
    numkit::Tensor sample();

    int nodes() const { return n_; }
    int dim() const { return dim_; }

private:
    int n_ = 0, dim_ = 0;
    double sigma_ = 0.0;
    numkit::Tensor factor_;  // L with L L^T = rho; empty for iid
    bool correlated_ = false;
    std::mt19937_64 rng_;
    std::normal_distribution<double> unit_{0.0, 1.0};
};

// One-shot convenience: (X + eta, eta).
std::pair<numkit::Tensor, numkit::Tensor> perturb_features(const numkit::Tensor& X, const NoiseSpec& spec);

// rho with anti-correlated node pairs (2i, 2i+1), used for the Theorem-3
// style heterogeneous-noise evaluation.
numkit::Tensor anticorrelated_pairs_rho(int n, double rho_value);

}  // namespace robustlab

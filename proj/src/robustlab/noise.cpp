#include "robustlab/noise.hpp"

#include <cmath>

#include <Eigen/Dense>

namespace robustlab {

using numkit::NumericError;
using numkit::Tensor;

NoiseSampler::NoiseSampler(const NoiseSpec& spec, int n, int dim)
    : n_(n), dim_(dim), sigma_(spec.sigma), rng_(spec.seed) {
    if (n < 1 || dim < 1) throw NumericError("NoiseSampler: empty shape");
    if (!(sigma_ >= 0.0)) throw NumericError("NoiseSampler: sigma must be >= 0");
    if (!spec.rho.has_value()) return;

    const Tensor& rho = *spec.rho;
    if (rho.rows() != n || rho.cols() != n)
        throw NumericError("NoiseSampler: rho must be n x n, got " + rho.shape_str());
    for (int i = 0; i < n; ++i) {
        if (std::abs(rho.at(i, i) - 1.0) > 1e-12)
            throw NumericError("NoiseSampler: rho diagonal must be 1");
        for (int j = 0; j < n; ++j) {
            if (std::abs(rho.at(i, j)) > 1.0 + 1e-12)
                throw NumericError("NoiseSampler: rho entries must lie in [-1, 1]");
            if (std::abs(rho.at(i, j) - rho.at(j, i)) > 1e-12)
                throw NumericError("NoiseSampler: rho must be symmetric");
        }
    }

    Eigen::MatrixXd R(n, n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) R(i, j) = rho.at(i, j);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(R);
    if (eig.info() != Eigen::Success) throw NumericError("NoiseSampler: eigendecomposition failed");

    Eigen::VectorXd lambda = eig.eigenvalues();
    for (int i = 0; i < n; ++i) {
        if (lambda(i) < -1e-10)
            throw NumericError("NoiseSampler: rho is not positive semidefinite (eigenvalue " +
                               std::to_string(lambda(i)) + ")");
        if (lambda(i) < 0.0) lambda(i) = 0.0;
    }
    Eigen::MatrixXd L = eig.eigenvectors() * lambda.cwiseSqrt().asDiagonal();

    factor_ = Tensor::zeros(n, n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) factor_.at(i, j) = L(i, j);
    correlated_ = true;
}

Tensor NoiseSampler::sample() {
    Tensor g = Tensor::zeros(n_, dim_);
    for (double& v : g.data) v = sigma_ * unit_(rng_);
    if (!correlated_) return g;

    Tensor eta = Tensor::zeros(n_, dim_);
    for (int i = 0; i < n_; ++i)
        for (int k = 0; k < n_; ++k) {
            double l = factor_.at(i, k);
            if (l == 0.0) continue;
            for (int j = 0; j < dim_; ++j) eta.at(i, j) += l * g.at(k, j);
        }
    return eta;
}

std::pair<Tensor, Tensor> perturb_features(const Tensor& X, const NoiseSpec& spec) {
    NoiseSampler sampler(spec, X.rows(), X.cols());
    Tensor eta = sampler.sample();
    Tensor noisy = X;
    for (std::size_t i = 0; i < noisy.data.size(); ++i) noisy.data[i] += eta.data[i];
    return {std::move(noisy), std::move(eta)};
}

Tensor anticorrelated_pairs_rho(int n, double rho_value) {
    if (!(rho_value >= -1.0 && rho_value <= 0.0))
        throw NumericError("anticorrelated_pairs_rho: value must lie in [-1, 0]");
    Tensor rho = Tensor::identity(n);
    for (int i = 0; i + 1 < n; i += 2) {
        rho.at(i, i + 1) = rho_value;
        rho.at(i + 1, i) = rho_value;
    }
    return rho;
}

}  // namespace robustlab

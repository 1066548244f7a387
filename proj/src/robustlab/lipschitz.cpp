#include "robustlab/lipschitz.hpp"

#include <cmath>

namespace robustlab {

using numkit::NumericError;
using numkit::Tensor;

double frobenius_norm(const Tensor& A) {
    double s = 0.0;
    for (double v : A.data) s += v * v;
    return std::sqrt(s);
}

double spectral_norm(const Tensor& A, double tol, int max_iters) {
    int n = A.rows(), m = A.cols();
    std::vector<double> v(static_cast<std::size_t>(m), 1.0 / std::sqrt(static_cast<double>(m)));
    std::vector<double> av(static_cast<std::size_t>(n));
    double sigma = 0.0;

    for (int iter = 0; iter < max_iters; ++iter) {
        // av = A v
        for (int i = 0; i < n; ++i) {
            double s = 0.0;
            for (int j = 0; j < m; ++j) s += A.at(i, j) * v[static_cast<std::size_t>(j)];
            av[static_cast<std::size_t>(i)] = s;
        }
        // w = A^T av
        double norm_w = 0.0;
        std::vector<double> w(static_cast<std::size_t>(m), 0.0);
        for (int i = 0; i < n; ++i) {
            double a = av[static_cast<std::size_t>(i)];
            if (a == 0.0) continue;
            for (int j = 0; j < m; ++j) w[static_cast<std::size_t>(j)] += A.at(i, j) * a;
        }
        for (double x : w) norm_w += x * x;
        norm_w = std::sqrt(norm_w);
        if (norm_w == 0.0) return 0.0;

        double next = 0.0;
        for (double x : av) next += x * x;
        next = std::sqrt(next);

        for (int j = 0; j < m; ++j) v[static_cast<std::size_t>(j)] = w[static_cast<std::size_t>(j)] / norm_w;
        if (std::abs(next - sigma) <= tol * std::max(1.0, next)) return next;
        sigma = next;
    }
    return sigma;
}

LipschitzEstimate empirical_lipschitz(const FeatureMap& f, const Tensor& X, const NoiseSpec& spec,
                                      int trials) {
    if (trials < 1) throw NumericError("empirical_lipschitz: need at least one trial");

    Tensor base = f(X);
    NoiseSampler sampler(spec, X.rows(), X.cols());

    LipschitzEstimate est;
    double sum = 0.0;
    for (int trial = 0; trial < trials; ++trial) {
        Tensor eta = sampler.sample();
        double eta_norm = frobenius_norm(eta);
        if (eta_norm == 0.0) continue;  // degenerate draw carries no information

        Tensor noisy = X;
        for (std::size_t i = 0; i < noisy.data.size(); ++i) noisy.data[i] += eta.data[i];
        Tensor out = f(noisy);

        numkit::require_same_shape(out, base, "empirical_lipschitz");
        double diff = 0.0;
        for (std::size_t i = 0; i < out.data.size(); ++i) {
            double d = out.data[i] - base.data[i];
            diff += d * d;
        }
        double ratio = std::sqrt(diff) / eta_norm;
        est.ratios.push_back(ratio);
        sum += ratio;
        est.max = std::max(est.max, ratio);
        ++est.trials_used;
    }
    est.mean = est.trials_used > 0 ? sum / est.trials_used : 0.0;
    return est;
}

}  // namespace robustlab

#include "robustlab/gamma.hpp"

#include <cmath>

namespace robustlab {

AmplificationFactors amplification_factors(const std::vector<double>& alphas,
                                           const numkit::Tensor& rho) {
    int n = static_cast<int>(alphas.size());
    if (n < 1) throw numkit::NumericError("amplification_factors: empty weight vector");
    if (rho.rows() != n || rho.cols() != n)
        throw numkit::NumericError("amplification_factors: rho must be " + std::to_string(n) + "x" +
                                   std::to_string(n) + ", got " + rho.shape_str());

    double signed_sum = 0.0, abs_sum = 0.0;
    for (int i = 0; i < n; ++i)
        for (int j = i + 1; j < n; ++j) {
            double term = alphas[static_cast<std::size_t>(i)] * alphas[static_cast<std::size_t>(j)] * rho.at(i, j);
            signed_sum += term;
            abs_sum += std::abs(term);
        }

    AmplificationFactors out;
    double g = 1.0 + 2.0 * signed_sum;
    double gp = 1.0 - 2.0 * abs_sum;
    if (g < 0.0) {
        g = 0.0;
        out.clamped_gamma = true;
    }
    if (gp < 0.0) {
        gp = 0.0;
        out.clamped_pol = true;
    }
    out.gamma = std::sqrt(g);
    out.gamma_pol = std::sqrt(gp);
    return out;
}

}  // namespace robustlab

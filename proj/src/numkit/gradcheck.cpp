#include "numkit/gradcheck.hpp"

#include <cmath>

namespace numkit {

namespace {

double eval_at(const ScalarFn& f, const Tensor& x) {
    Tape t;
    Var xv = t.leaf(x, false);
    Var loss = f(t, xv);
    const Tensor& v = t.value(loss);
    if (!v.is_scalar()) throw NumericError("grad_check: function must be scalar-valued");
    return v.data[0];
}

}  // namespace

double grad_check(const ScalarFn& f, const Tensor& x, double h) {
    if (!(h >= 1e-7 && h <= 1e-3)) throw NumericError("grad_check: step must lie in [1e-7, 1e-3]");

    Tape t;
    Var xv = t.leaf(x, true);
    Var loss = f(t, xv);
    if (!t.value(loss).is_scalar()) throw NumericError("grad_check: function must be scalar-valued");
    t.backward(loss);
    std::vector<double> analytic = t.grad(xv);

    double worst = 0.0;
    Tensor probe = x;
    for (std::size_t i = 0; i < x.data.size(); ++i) {
        probe.data[i] = x.data[i] + h;
        double fp = eval_at(f, probe);
        probe.data[i] = x.data[i] - h;
        double fm = eval_at(f, probe);
        probe.data[i] = x.data[i];
        double numeric = (fp - fm) / (2.0 * h);
        if (!std::isfinite(numeric)) throw NumericError("grad_check: non-finite central difference");
        double err = std::abs(analytic[i] - numeric) / std::max(1.0, std::abs(numeric));
        worst = std::max(worst, err);
    }
    return worst;
}

}  // namespace numkit

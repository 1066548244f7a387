#pragma once

#include <functional>

#include "numkit/tape.hpp"

namespace numkit {

// Builds a scalar loss from a single differentiable input.
using ScalarFn = std::function<Var(Tape&, Var)>;

// Compares reverse-mode gradients of f at x against central differences.
// Returns max over coordinates of |analytic - numeric| / max(1, |numeric|).
double grad_check(const ScalarFn& f, const Tensor& x, double h = 1e-5);

}  // namespace numkit

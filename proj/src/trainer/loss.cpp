#include "trainer/loss.hpp"

#include <algorithm>
#include <cmath>

namespace trainer {

using numkit::Tape;
using numkit::Tensor;
using numkit::Var;

Var nll_loss(Tape& t, Var logits, int y) {
    const Tensor& z = t.value(logits);
    if (z.rows() != 1) throw numkit::NumericError("nll_loss: logits must be a single row");
    if (y < 0 || y >= z.cols())
        throw numkit::NumericError("nll_loss: label " + std::to_string(y) + " outside [0," +
                                   std::to_string(z.cols()) + ")");
    Var lse = t.row_logsumexp(logits);
    Var zy = t.slice_cols(logits, y, y + 1);
    return t.sub(lse, zy);
}

double nll_loss_value(const Tensor& logits, int y) {
    if (y < 0 || y >= static_cast<int>(logits.data.size()))
        throw numkit::NumericError("nll_loss: label out of range");
    double mx = *std::max_element(logits.data.begin(), logits.data.end());
    double z = 0.0;
    for (double v : logits.data) z += std::exp(v - mx);
    return mx + std::log(z) - logits.data[static_cast<std::size_t>(y)];
}

}  // namespace trainer

#pragma once

#include "numkit/tape.hpp"

namespace trainer {

// Negative log-likelihood of class y under logits z: -z_y + logsumexp(z),
// evaluated with max subtraction.
numkit::Var nll_loss(numkit::Tape& t, numkit::Var logits, int y);

double nll_loss_value(const numkit::Tensor& logits, int y);

}  // namespace trainer

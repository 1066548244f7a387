#pragma once

#include <vector>

namespace trainer {

struct Metrics {
    double acc = 0.0;
    double macro_f1 = 0.0;
    std::vector<std::vector<long>> confusion;  // [true][pred]
};

// macro-F1 averages per-class F1; a class with no precision and no recall
// contributes 0.
Metrics evaluate_metrics(const std::vector<int>& predictions, const std::vector<int>& labels, int n_classes);

}  // namespace trainer

#include "trainer/metrics.hpp"

#include <string>

#include "numkit/errors.hpp"

namespace trainer {

Metrics evaluate_metrics(const std::vector<int>& predictions, const std::vector<int>& labels, int n_classes) {
    if (predictions.size() != labels.size())
        throw numkit::NumericError("evaluate_metrics: prediction/label count mismatch");
    if (n_classes < 1) throw numkit::NumericError("evaluate_metrics: n_classes must be positive");

    Metrics m;
    m.confusion.assign(static_cast<std::size_t>(n_classes), std::vector<long>(static_cast<std::size_t>(n_classes), 0));
    long correct = 0;
    for (std::size_t i = 0; i < labels.size(); ++i) {
        int y = labels[i], p = predictions[i];
        if (y < 0 || y >= n_classes || p < 0 || p >= n_classes)
            throw numkit::NumericError("evaluate_metrics: label out of range at index " + std::to_string(i));
        m.confusion[static_cast<std::size_t>(y)][static_cast<std::size_t>(p)] += 1;
        if (y == p) ++correct;
    }
    m.acc = labels.empty() ? 0.0 : static_cast<double>(correct) / labels.size();

    double f1_sum = 0.0;
    for (int c = 0; c < n_classes; ++c) {
        long tp = m.confusion[static_cast<std::size_t>(c)][static_cast<std::size_t>(c)];
        long pred_c = 0, true_c = 0;
        for (int j = 0; j < n_classes; ++j) {
            pred_c += m.confusion[static_cast<std::size_t>(j)][static_cast<std::size_t>(c)];
            true_c += m.confusion[static_cast<std::size_t>(c)][static_cast<std::size_t>(j)];
        }
        double precision = pred_c > 0 ? static_cast<double>(tp) / pred_c : 0.0;
        double recall = true_c > 0 ? static_cast<double>(tp) / true_c : 0.0;
        double f1 = precision + recall > 0.0 ? 2.0 * precision * recall / (precision + recall) : 0.0;
        f1_sum += f1;
    }
    m.macro_f1 = f1_sum / n_classes;
    return m;
}

}  // namespace trainer

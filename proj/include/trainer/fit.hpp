#pragma once

#include "graphio/pipeline.hpp"
#include "mplayers/model.hpp"
#include "trainer/metrics.hpp"

namespace trainer {

struct EpochStats {
    double train_loss = 0.0;
    double val_loss = 0.0;
    double val_acc = 0.0;
    double lr = 0.0;
};

struct TrainReport {
    std::vector<EpochStats> epochs;
    int stopped_epoch = 0;  // epochs actually run (early stop included)
    int best_epoch = 0;     // 1-based epoch whose parameters were kept
    double test_acc = 0.0;
    double test_macro_f1 = 0.0;
    std::vector<std::vector<long>> confusion;

    nlohmann::json to_json() const;
};

struct FitOptions {
    // noise-augmented training: every batch sees features perturbed by
    // iid N(0, sigma^2); 0 disables
    double feature_noise_sigma = 0.0;
    bool verbose = false;
};

struct FitResult {
    mplayers::Model model;
    TrainReport report;
};

// Stratified record-level split: test_frac of each class held out for test,
// then val_frac of the remaining training records carved out for validation.
struct SplitIndices {
    std::vector<int> train, val, test;
};

SplitIndices stratified_split(const std::vector<int>& labels, double test_frac, double val_frac,
                              std::uint64_t seed);

std::vector<mplayers::PreparedSample> prepare_records(const graphio::Dataset& records,
                                                      const std::vector<int>& subset,
                                                      const graphio::PreprocessConfig& prep);

// Offline training: per batch local features -> (polarized) attention ->
// gating -> experts -> mean pooling -> classifier -> NLL -> Adam, with step
// learning-rate decay, early stopping on validation loss and best-parameter
// restoration. Test data never influences stopping.
FitResult fit(const graphio::Dataset& records, const graphio::PreprocessConfig& prep,
              mplayers::ModelConfig cfg, const FitOptions& opts = {});

std::vector<int> predict(const mplayers::Model& model,
                         const std::vector<mplayers::PreparedSample>& samples);

double mean_nll(const mplayers::Model& model, const std::vector<mplayers::PreparedSample>& samples);

}  // namespace trainer

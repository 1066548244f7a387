#pragma once

#include "robustlab/lipschitz.hpp"
#include "trainer/fit.hpp"

namespace robustlab {

struct HierarchyConfig {
    int n_seeds = 5;
    std::uint64_t base_seed = 1;

    int n_classes = 5;
    int samples_per_class = 24;
    graphio::PreprocessConfig prep;

    int d_model = 32;
    int n_heads = 4;
    int n_layers = 3;
    int epochs = 15;
    int batch_size = 16;

    double train_noise_sigma = 0.25;  // noise-augmented training
    double eval_sigma = 0.25;
    int eval_trials = 24;
    int eval_samples = 6;
    double anti_rho = -0.8;  // pairwise anti-correlation for the Theorem-3 probe
};

struct HierarchySeedRow {
    std::uint64_t seed = 0;
    double gcn = 0.0, dca = 0.0, pola = 0.0;       // pooled mean ratios, iid noise
    double dca_anti = 0.0, pola_anti = 0.0;        // anti-correlated noise
    double gcn_max = 0.0, dca_max = 0.0, pola_max = 0.0;
    // per-trial ratios (iid probe), kept for external plotting
    std::vector<double> gcn_ratios, dca_ratios, pola_ratios;
    bool diverged = false;
    std::string note;
};

struct RobustnessReport {
    std::vector<HierarchySeedRow> rows;
    double median_gcn = 0.0, median_dca = 0.0, median_pola = 0.0;
    bool median_ordering_holds = false;  // pola <= dca <= gcn
    double theorem3_fraction = 0.0;      // seeds with pola_anti < dca_anti
    double reduction_gap = 0.0;          // control: frozen PolaDCA vs DCA ratio gap

    nlohmann::json to_json() const;
};

// Trains matched-width GCN / DCA / PolaDCA models per seed with
// noise-augmented batches, then estimates each trained network's empirical
// Lipschitz ratio on held-out samples under iid and anti-correlated noise.
// Orderings are reported, not hard-asserted; the frozen-weights reduction
// identity is the only exact control.
RobustnessReport hierarchy_experiment(const HierarchyConfig& cfg);

// Builds the PolaDCA twin of a DCA model: shared parameters copied, polar
// weights (1,1,-1,-1), identity output projection. With the identity output
// activation its forward equals the DCA forward.
mplayers::Model frozen_pola_twin(const mplayers::Model& dca);

}  // namespace robustlab

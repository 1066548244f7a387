#pragma once

#include "mplayers/layers.hpp"
#include "robustlab/noise.hpp"

namespace robustlab {

// Randomized verification of the proven perturbation bounds. All three are
// theorems about arbitrary parameters, so a single violation beyond the
// slack indicates an implementation bug.
struct LemmaSuiteConfig {
    long trials = 1000;
    double slack = 1e-9;
    std::uint64_t seed = 0;
    int max_nodes = 8;
    int max_dim = 8;
};

struct BoundTally {
    long checks = 0;
    long violations = 0;
    double worst_margin = std::numeric_limits<double>::infinity();  // min(rhs - lhs)

    void record(double lhs, double rhs, double slack);
};

struct LemmaSuiteResult {
    long trials = 0;
    BoundTally consensus;  // mean-feature sensitivity, B_W * mean ||eta_j||
    BoundTally diversity;  // std-feature sensitivity, sqrt(2) * B_W * rms ||eta_j||
    BoundTally dca;        // attention-output deviation bound

    long total_violations() const {
        return consensus.violations + diversity.violations + dca.violations;
    }
};

LemmaSuiteResult run_lemma_suite(const LemmaSuiteConfig& cfg);

// Single-case checks, exposed for targeted tests (e.g. the equality case of
// the consensus bound with one neighbor and an identity projection).
struct BoundCase {
    double lhs = 0.0;
    double rhs = 0.0;
};

// Per-node consensus-feature deviations for arbitrary Wy.
std::vector<BoundCase> consensus_bound_cases(const mplayers::PreparedSample& sample,
                                             const numkit::Tensor& Wy, const numkit::Tensor& eta);

// Per-node diversity-feature deviations. The sqrt(2) constant is proven for
// a shared projection, so one W feeds both the consensus and the centered
// terms here.
std::vector<BoundCase> diversity_bound_cases(const mplayers::PreparedSample& sample,
                                             const numkit::Tensor& W, const numkit::Tensor& eta);

// Per-query-row deviation of stacked DCA attention, bounded by the score
// perturbation times the value-row scale M plus the value deviation.
std::vector<BoundCase> dca_bound_cases(const numkit::Tensor& A, const numkit::Tensor& B,
                                       const numkit::Tensor& C, const numkit::Tensor& Ap,
                                       const numkit::Tensor& Bp, const numkit::Tensor& Cp);

}  // namespace robustlab

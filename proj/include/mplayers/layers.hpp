#pragma once

#include <cstdint>
#include <functional>

#include "mplayers/topology.hpp"

namespace mplayers {

using numkit::Tape;
using numkit::Var;

enum class Scheme { GCN, GAT, SCA, DCA, PolaDCA };

std::string scheme_name(Scheme s);
Scheme scheme_from_name(const std::string& name);

enum class Activation { Relu, Identity };

constexpr double kLeakySlope = 0.2;

// Projected node feature, neighborhood consensus (mean) and neighborhood
// diversity (elementwise sample standard deviation around the consensus).
struct LocalFeatureVars {
    Var Fx, Fy, Fz;
};

LocalFeatureVars local_features(Tape& t, Var X, const TopoVars& topo, Var Wx, Var Wy, Var Wz);

// Full-graph scaled dot-product attention over stacked node features, split
// into H heads of width cols/H.
Var dca_attend(Tape& t, Var Q, Var K, Var V, int heads);

struct PolarWeights {
    Var wpp, wnn, wpn, wnp;  // each 1 x H
};

// (relu(T), relu(-T)): reconstruction T_pos - T_neg == T, supports disjoint.
std::pair<Var, Var> polar_decompose(Tape& t, Var T);

// Combined signed attention scores for one head-partitioned Q/K pair.
// Returns the per-head score matrices concatenated column-wise (n x n*H).
Var polar_scores(Tape& t, Var Q, Var K, const PolarWeights& w, int heads);

// Polarized attention: four signed score channels per head, softmax-weighted
// aggregation of V, output projection Wo and activation.
Var poladca_attend(Tape& t, Var Q, Var K, Var V, const PolarWeights& w, Var Wo, int heads,
                   Activation act);

using AttendFn = std::function<Var(Tape&, Var, Var, Var)>;

// Path 1 attends (Fx, Fy, Fz), path 2 swaps consensus and diversity roles;
// a sigmoid gate blends them per node and feature.
Var dual_path_fuse(Tape& t, const LocalFeatureVars& f, Var Wg, Var bg, const AttendFn& attend);

struct ExpertVars {
    Var W1, b1, W2, b2, route;
};

struct ExpertOutput {
    Var out;      // n x M
    Var weights;  // n x E softmax routing weights
};

// Residual enhancement of Fx by a routed mixture of specialist transforms
// (identity / relu / tanh activations cycle over the experts).
ExpertOutput expert_fusion(Tape& t, Var Fx, Var Fused, const std::vector<ExpertVars>& experts);

Var gcn_layer(Tape& t, Var X, const TopoVars& topo, Var W, Activation act);

Var gat_layer(Tape& t, Var X, const TopoVars& topo, Var W, Var a, Activation act);

Var sca_attend(Tape& t, Var XE, Var YD, Var Wq, Var Wk, Var Wv);

// Closed-form per-layer FLOP model; an accounting model, not a counter.
long long flop_count(Scheme scheme, long long n, long long D);

}  // namespace mplayers

#pragma once

#include "graphio/types.hpp"
#include "numkit/tape.hpp"

namespace mplayers {

// Constant aggregation operators derived from one sample's graph; shared by
// every layer of a forward pass (topology is fixed across layers).
struct Topology {
    int n = 0;
    numkit::Tensor adj01;     // n x n, 1 on undirected edges, no self-loops
    numkit::Tensor avg;       // n x n, row i averages over N(i)
    numkit::Tensor deg;       // n x 1, |N(i)|
    numkit::Tensor inv_nm1;   // n x 1, 1/(|N(i)|-1), 0 when |N(i)| <= 1
    numkit::Tensor gcn_prop;  // n x n, D^-1/2 (A+I) D^-1/2 with self-loops
    numkit::Tensor att_mask;  // n x n, 0 on edges, large negative off
};

Topology build_topology(const std::vector<std::vector<int>>& neighbors);

// A sample with its aggregation constants precomputed.
struct PreparedSample {
    numkit::Tensor features;  // n x D
    Topology topo;
    int label = 0;
};

PreparedSample prepare_sample(const graphio::GraphSample& sample);

// Topology constants placed on a tape for one forward pass.
struct TopoVars {
    int n = 0;
    numkit::Var adj01, avg, deg, inv_nm1, gcn_prop, att_mask;
};

TopoVars load_topology(numkit::Tape& tape, const Topology& topo);

}  // namespace mplayers

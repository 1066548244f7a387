#include "mplayers/topology.hpp"

#include <cmath>

namespace mplayers {

using numkit::Tensor;

namespace {
constexpr double kMaskOff = -1e30;
}

Topology build_topology(const std::vector<std::vector<int>>& neighbors) {
    int n = static_cast<int>(neighbors.size());
    if (n < 1) throw numkit::ConfigError("build_topology: empty graph");

    Topology t;
    t.n = n;
    t.adj01 = Tensor::zeros(n, n);
    t.avg = Tensor::zeros(n, n);
    t.deg = Tensor::zeros(n, 1);
    t.inv_nm1 = Tensor::zeros(n, 1);
    t.gcn_prop = Tensor::zeros(n, n);
    t.att_mask = Tensor::full(n, n, kMaskOff);

    for (int i = 0; i < n; ++i) {
        const auto& nb = neighbors[static_cast<std::size_t>(i)];
        for (int j : nb) {
            if (j < 0 || j >= n) throw numkit::ConfigError("build_topology: neighbor index out of range");
            if (j == i) throw numkit::ConfigError("build_topology: self-loop in neighbor list");
            t.adj01.at(i, j) = 1.0;
            t.att_mask.at(i, j) = 0.0;
        }
        int d = static_cast<int>(nb.size());
        t.deg.at(i, 0) = d;
        if (d > 0)
            for (int j : nb) t.avg.at(i, j) = 1.0 / d;
        t.inv_nm1.at(i, 0) = d > 1 ? 1.0 / (d - 1) : 0.0;
    }

    // symmetry check: the layers assume an undirected graph
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < i; ++j)
            if (t.adj01.at(i, j) != t.adj01.at(j, i))
                throw numkit::ConfigError("build_topology: neighbor lists are not symmetric");

    for (int i = 0; i < n; ++i) {
        double di = t.deg.at(i, 0) + 1.0;  // self-loop
        t.gcn_prop.at(i, i) = 1.0 / di;
        for (int j = 0; j < n; ++j)
            if (t.adj01.at(i, j) != 0.0) {
                double dj = t.deg.at(j, 0) + 1.0;
                t.gcn_prop.at(i, j) = 1.0 / std::sqrt(di * dj);
            }
    }
    return t;
}

PreparedSample prepare_sample(const graphio::GraphSample& sample) {
    PreparedSample p;
    p.features = sample.node_features;
    p.topo = build_topology(sample.neighbors);
    p.label = sample.label;
    return p;
}

TopoVars load_topology(numkit::Tape& tape, const Topology& topo) {
    TopoVars v;
    v.n = topo.n;
    v.adj01 = tape.constant(topo.adj01);
    v.avg = tape.constant(topo.avg);
    v.deg = tape.constant(topo.deg);
    v.inv_nm1 = tape.constant(topo.inv_nm1);
    v.gcn_prop = tape.constant(topo.gcn_prop);
    v.att_mask = tape.constant(topo.att_mask);
    return v;
}

}  // namespace mplayers

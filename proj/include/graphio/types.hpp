#pragma once

#include <limits>
#include <string>
#include <vector>

#include "numkit/tensor.hpp"

namespace graphio {

// Raw multivariate signal: one row per sensor channel, one column per time step.
struct SignalRecord {
    numkit::Tensor channels;  // m x L_total
    int label = 0;

    int num_channels() const { return channels.rows(); }
    int length() const { return channels.cols(); }
};

// One diagnosis instance: node features plus an undirected kNN graph.
struct GraphSample {
    numkit::Tensor node_features;         // n x D
    std::vector<std::vector<int>> neighbors;  // sorted, symmetric, no self
    int label = 0;

    int num_nodes() const { return node_features.rows(); }
    int feature_dim() const { return node_features.cols(); }
};

enum class NodeMode { Segments, Timesteps };

struct PreprocessConfig {
    int window_len = 400;
    int stride = 200;
    int k = 8;
    bool zscore = true;
    NodeMode node_mode = NodeMode::Segments;
    int segment_count = 20;

    void validate() const;
    bool operator==(const PreprocessConfig&) const = default;
};

std::string node_mode_name(NodeMode mode);
NodeMode node_mode_from_name(const std::string& name);

using Dataset = std::vector<SignalRecord>;

inline constexpr double kSnrClean = std::numeric_limits<double>::infinity();

}  // namespace graphio

#pragma once

#include <cstdint>

#include "graphio/types.hpp"

namespace graphio {

// Full windows at offsets 0, stride, 2*stride, ...; count floor((L-w)/s)+1.
std::vector<numkit::Tensor> segment_signal(const SignalRecord& rec, int window_len, int stride);

// Per-channel standardization to mean 0 / sample std 1; a constant channel
// is centered only.
numkit::Tensor zscore(const numkit::Tensor& window);

// k nearest others by Euclidean distance, union-symmetrized. Distance ties
// break toward the lower node index.
std::vector<std::vector<int>> build_knn_graph(const numkit::Tensor& node_features, int k);

numkit::Tensor window_to_nodes(const numkit::Tensor& window, const PreprocessConfig& cfg);

GraphSample window_to_sample(const numkit::Tensor& window, int label, const PreprocessConfig& cfg);

// Additive Gaussian noise at the requested per-channel SNR; snr_db of
// +infinity returns the window unchanged.
numkit::Tensor inject_snr_noise(const numkit::Tensor& window, double snr_db, std::uint64_t seed);

std::vector<GraphSample> record_to_samples(const SignalRecord& rec, const PreprocessConfig& cfg);

}  // namespace graphio

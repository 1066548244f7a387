#include "graphio/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <random>

namespace graphio {

using numkit::ConfigError;
using numkit::NumericError;
using numkit::Tensor;

void PreprocessConfig::validate() const {
    if (window_len < 1) throw ConfigError("preprocess: window_len must be positive");
    if (stride < 1) throw ConfigError("preprocess: stride must be >= 1");
    if (k < 1) throw ConfigError("preprocess: k must be >= 1");
    if (node_mode == NodeMode::Segments) {
        if (segment_count < 1) throw ConfigError("preprocess: segment_count must be positive");
        if (window_len % segment_count != 0)
            throw ConfigError("preprocess: window_len " + std::to_string(window_len) +
                              " not divisible by segment_count " + std::to_string(segment_count));
    }
}

std::string node_mode_name(NodeMode mode) {
    return mode == NodeMode::Segments ? "segments" : "timesteps";
}

NodeMode node_mode_from_name(const std::string& name) {
    if (name == "segments") return NodeMode::Segments;
    if (name == "timesteps") return NodeMode::Timesteps;
    throw ConfigError("unknown node mode '" + name + "'");
}

std::vector<Tensor> segment_signal(const SignalRecord& rec, int window_len, int stride) {
    int L = rec.length(), m = rec.num_channels();
    if (window_len > L)
        throw ConfigError("segment_signal: window " + std::to_string(window_len) +
                          " exceeds signal length " + std::to_string(L));
    if (stride < 1) throw ConfigError("segment_signal: stride must be >= 1");

    std::vector<Tensor> windows;
    for (int start = 0; start + window_len <= L; start += stride) {
        Tensor w = Tensor::zeros(m, window_len);
        for (int c = 0; c < m; ++c)
            for (int i = 0; i < window_len; ++i) w.at(c, i) = rec.channels.at(c, start + i);
        windows.push_back(std::move(w));
    }
    return windows;
}

Tensor zscore(const Tensor& window) {
    int m = window.rows(), L = window.cols();
    Tensor out = Tensor::zeros(m, L);
    for (int c = 0; c < m; ++c) {
        double mean = 0.0;
        for (int i = 0; i < L; ++i) mean += window.at(c, i);
        mean /= L;
        double ss = 0.0;
        for (int i = 0; i < L; ++i) {
            double d = window.at(c, i) - mean;
            ss += d * d;
        }
        double std = L > 1 ? std::sqrt(ss / (L - 1)) : 0.0;
        if (std > 0.0)
            for (int i = 0; i < L; ++i) out.at(c, i) = (window.at(c, i) - mean) / std;
        else
            for (int i = 0; i < L; ++i) out.at(c, i) = window.at(c, i) - mean;
    }
    return out;
}

std::vector<std::vector<int>> build_knn_graph(const Tensor& node_features, int k) {
    int n = node_features.rows(), D = node_features.cols();
    if (k >= n)
        throw ConfigError("build_knn_graph: k=" + std::to_string(k) + " requires more than " +
                          std::to_string(n) + " nodes");
    if (k < 1) throw ConfigError("build_knn_graph: k must be >= 1");

    std::vector<std::vector<char>> adj(n, std::vector<char>(n, 0));
    std::vector<std::pair<double, int>> cand;
    for (int i = 0; i < n; ++i) {
        cand.clear();
        for (int j = 0; j < n; ++j) {
            if (j == i) continue;
            double d2 = 0.0;
            for (int f = 0; f < D; ++f) {
                double d = node_features.at(i, f) - node_features.at(j, f);
                d2 += d * d;
            }
            cand.emplace_back(d2, j);
        }
        std::sort(cand.begin(), cand.end());  // pair order breaks ties by index
        for (int s = 0; s < k; ++s) {
            adj[i][cand[static_cast<std::size_t>(s)].second] = 1;
            adj[cand[static_cast<std::size_t>(s)].second][i] = 1;  // union symmetrization
        }
    }

    std::vector<std::vector<int>> neighbors(n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
            if (adj[i][j]) neighbors[static_cast<std::size_t>(i)].push_back(j);
    return neighbors;
}

Tensor window_to_nodes(const Tensor& window, const PreprocessConfig& cfg) {
    cfg.validate();
    int m = window.rows(), L = window.cols();
    if (L != cfg.window_len) throw ConfigError("window_to_nodes: window length does not match config");

    if (cfg.node_mode == NodeMode::Timesteps) {
        // node = time step, features = channel values at that step
        Tensor X = Tensor::zeros(L, m);
        for (int tstep = 0; tstep < L; ++tstep)
            for (int c = 0; c < m; ++c) X.at(tstep, c) = window.at(c, tstep);
        return X;
    }

    // node = contiguous chunk, features = channel-major flattening of the chunk
    int n = cfg.segment_count;
    int chunk = L / n;
    Tensor X = Tensor::zeros(n, m * chunk);
    for (int s = 0; s < n; ++s)
        for (int c = 0; c < m; ++c)
            for (int i = 0; i < chunk; ++i) X.at(s, c * chunk + i) = window.at(c, s * chunk + i);
    return X;
}

GraphSample window_to_sample(const Tensor& window, int label, const PreprocessConfig& cfg) {
    Tensor w = cfg.zscore ? zscore(window) : window;
    GraphSample sample;
    sample.node_features = window_to_nodes(w, cfg);
    sample.neighbors = build_knn_graph(sample.node_features, cfg.k);
    sample.label = label;
    return sample;
}

Tensor inject_snr_noise(const Tensor& window, double snr_db, std::uint64_t seed) {
    numkit::require_finite(window, "inject_snr_noise");
    if (std::isinf(snr_db) && snr_db > 0) return window;
    if (!std::isfinite(snr_db)) throw ConfigError("inject_snr_noise: snr_db must be finite or +inf");

    int m = window.rows(), L = window.cols();
    Tensor out = window;
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> unit(0.0, 1.0);
    for (int c = 0; c < m; ++c) {
        double power = 0.0;
        for (int i = 0; i < L; ++i) power += window.at(c, i) * window.at(c, i);
        power /= L;
        if (power <= 0.0)
            throw NumericError("inject_snr_noise: channel " + std::to_string(c) +
                               " has zero power; finite SNR undefined");
        double sigma = std::sqrt(power * std::pow(10.0, -snr_db / 10.0));
        for (int i = 0; i < L; ++i) out.at(c, i) += sigma * unit(rng);
    }
    return out;
}

std::vector<GraphSample> record_to_samples(const SignalRecord& rec, const PreprocessConfig& cfg) {
    std::vector<GraphSample> out;
    for (const Tensor& w : segment_signal(rec, cfg.window_len, cfg.stride))
        out.push_back(window_to_sample(w, rec.label, cfg));
    return out;
}

}  // namespace graphio

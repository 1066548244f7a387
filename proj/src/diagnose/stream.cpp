#include "diagnose/stream.hpp"

#include <cmath>

#include "graphio/pipeline.hpp"

namespace diagnose {

using numkit::ConfigError;
using numkit::Tensor;

std::pair<int, std::vector<double>> map_decision(const Tensor& logits) {
    numkit::require_finite(logits, "map_decision");
    int K = static_cast<int>(logits.data.size());
    double mx = logits.data[0];
    int arg = 0;
    for (int k = 1; k < K; ++k)
        if (logits.data[static_cast<std::size_t>(k)] > mx) {
            mx = logits.data[static_cast<std::size_t>(k)];
            arg = k;
        }
    double z = 0.0;
    std::vector<double> posterior(static_cast<std::size_t>(K));
    for (int k = 0; k < K; ++k) {
        posterior[static_cast<std::size_t>(k)] = std::exp(logits.data[static_cast<std::size_t>(k)] - mx);
        z += posterior[static_cast<std::size_t>(k)];
    }
    for (double& p : posterior) p /= z;
    return {arg, std::move(posterior)};
}

StreamDiagnoser::StreamDiagnoser(mplayers::Model model, graphio::PreprocessConfig prep, int window,
                                 int stride)
    : model_(std::move(model)), prep_(std::move(prep)), window_(window), stride_(stride) {
    prep_.validate();
    if (window_ != prep_.window_len)
        throw ConfigError("stream: window length " + std::to_string(window_) +
                          " does not match the checkpoint's preprocessing window " +
                          std::to_string(prep_.window_len));
    if (stride_ < 1) throw ConfigError("stream: stride must be >= 1");

    // the model's input width must agree with what this preprocessing yields;
    // a per-channel check happens on the first pushed step
    if (prep_.node_mode == graphio::NodeMode::Segments &&
        model_.input_dim() % (prep_.window_len / prep_.segment_count) != 0)
        throw ConfigError("stream: checkpoint input width is incompatible with the preprocessing config");
}

Decision StreamDiagnoser::diagnose_window(long start) {
    long base = seen_ - static_cast<long>(buffer_.size());
    Tensor window = Tensor::zeros(channels_, window_);
    for (int i = 0; i < window_; ++i) {
        const std::vector<double>& step = buffer_[static_cast<std::size_t>(start - base + i)];
        for (int c = 0; c < channels_; ++c) window.at(c, i) = step[static_cast<std::size_t>(c)];
    }
    graphio::GraphSample g = graphio::window_to_sample(window, 0, prep_);
    mplayers::PreparedSample p = mplayers::prepare_sample(g);
    mplayers::Inference inf = mplayers::infer(model_, p);

    Decision d;
    d.t = start;
    auto [cls, posterior] = map_decision(inf.logits);
    d.fault_class = cls;
    d.posterior = std::move(posterior);
    d.gate_weights = std::move(inf.gate_weights);
    return d;
}

std::optional<Decision> StreamDiagnoser::push(const std::vector<double>& step) {
    if (channels_ < 0) {
        channels_ = static_cast<int>(step.size());
        if (channels_ < 1) throw ConfigError("stream: steps must carry at least one channel");
        int expected = prep_.node_mode == graphio::NodeMode::Timesteps
                           ? model_.input_dim()
                           : model_.input_dim() / (prep_.window_len / prep_.segment_count);
        if (channels_ != expected)
            throw ConfigError("stream: got " + std::to_string(channels_) + " channels, checkpoint expects " +
                              std::to_string(expected));
    }
    if (static_cast<int>(step.size()) != channels_)
        throw ConfigError("stream: inconsistent channel count at step " + std::to_string(seen_));

    buffer_.push_back(step);
    ++seen_;

    std::optional<Decision> out;
    if (seen_ - next_start_ >= window_) {
        out = diagnose_window(next_start_);
        next_start_ += stride_;
        // drop steps that precede the next window
        long base = seen_ - static_cast<long>(buffer_.size());
        while (base < next_start_ && !buffer_.empty()) {
            buffer_.pop_front();
            ++base;
        }
    }
    return out;
}

std::vector<Decision> run_stream(mplayers::Model model, const graphio::PreprocessConfig& prep,
                                 const Tensor& channels, int window, int stride) {
    StreamDiagnoser sd(std::move(model), prep, window, stride);
    std::vector<Decision> out;
    int m = channels.rows(), L = channels.cols();
    std::vector<double> step(static_cast<std::size_t>(m));
    for (int i = 0; i < L; ++i) {
        for (int c = 0; c < m; ++c) step[static_cast<std::size_t>(c)] = channels.at(c, i);
        if (auto d = sd.push(step)) out.push_back(std::move(*d));
    }
    return out;
}

}  // namespace diagnose

#pragma once

#include <deque>
#include <optional>

#include "mplayers/model.hpp"

namespace diagnose {

struct Decision {
    long t = 0;  // start index of the window that produced this decision
    int fault_class = 0;
    std::vector<double> posterior;
    std::vector<double> gate_weights;  // empty for baseline schemes
};

// MAP rule: softmax posterior, argmax class, ties to the lowest index.
std::pair<int, std::vector<double>> map_decision(const numkit::Tensor& logits);

// Sliding-window runtime: buffers incoming multichannel time steps, and once
// a full window of length T is available applies exactly the training-time
// preprocessing (z-score, node construction, kNN rebuild) and the loaded
// model, then slides by s.
class StreamDiagnoser {
public:
    StreamDiagnoser(mplayers::Model model, graphio::PreprocessConfig prep, int window, int stride);

    // feed one time step (one value per channel); returns a decision when a
    // window completes
    std::optional<Decision> push(const std::vector<double>& step);

    const mplayers::Model& model() const { return model_; }
    const graphio::PreprocessConfig& prep() const { return prep_; }

private:
    mplayers::Model model_;
    graphio::PreprocessConfig prep_;
    int window_ = 0;
    int stride_ = 0;
    int channels_ = -1;  // fixed by the first pushed step
    long next_start_ = 0;
    long seen_ = 0;
    std::deque<std::vector<double>> buffer_;  // holds steps [next_start_, seen_)

    Decision diagnose_window(long start);
};

// Replays a finite stream; convenience over push().
std::vector<Decision> run_stream(mplayers::Model model, const graphio::PreprocessConfig& prep,
                                 const numkit::Tensor& channels, int window, int stride);

}  // namespace diagnose

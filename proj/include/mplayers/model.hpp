#pragma once

#include <json.hpp>

#include "mplayers/layers.hpp"
#include "numkit/checkpoint.hpp"

namespace mplayers {

// Architecture and training hyperparameters (one record for both so a
// checkpoint is self-describing).
struct ModelConfig {
    int d_model = 64;
    int n_layers = 3;
    int n_heads = 4;
    int n_experts = 3;
    double dropout = 0.01;
    std::vector<int> classifier_dims = {128, 64};
    int n_classes = 0;
    Scheme scheme = Scheme::PolaDCA;
    int epochs = 50;
    int batch_size = 16;
    double lr = 1e-3;
    double weight_decay = 5e-4;
    double lr_decay = 0.5;
    int lr_decay_every = 20;
    int patience = 20;
    std::uint64_t seed = 0;

    void validate() const;
};

nlohmann::json config_to_json(const ModelConfig& cfg);
ModelConfig config_from_json(const nlohmann::json& j);

// All learnable tensors of one graph layer, as tape variables.
struct LayerVars {
    // DCA / PolaDCA
    Var Wx, Wy, Wz, Wg, bg;
    std::vector<ExpertVars> experts;
    // PolaDCA only
    PolarWeights polar;
    Var Wo;
    // baselines
    Var W, a, Wq, Wk, Wv;
};

struct ModelVars {
    std::vector<LayerVars> layers;
    std::vector<std::pair<Var, Var>> classifier;  // (W, b)
    std::vector<Var> flat;                        // registration order
};

struct ForwardOptions {
    bool training = false;
    std::mt19937_64* dropout_rng = nullptr;  // required when training and dropout > 0
    // identity output activation enables the exact PolaDCA -> DCA reduction
    Activation output_act = Activation::Relu;
};

struct ForwardResult {
    Var logits;       // 1 x K
    Var node_embed;   // n x M after the last graph layer
    Var routing;      // n x E from the last layer (DCA/PolaDCA only)
    bool has_routing = false;
};

class Model {
public:
    Model(ModelConfig cfg, int input_dim);

    const ModelConfig& config() const { return cfg_; }
    int input_dim() const { return input_dim_; }

    numkit::ParamList& params() { return params_; }
    const numkit::ParamList& params() const { return params_; }

    // Installs every parameter on the tape (in registration order) and
    // returns structured handles. One call per tape, then any number of
    // forward() calls.
    ModelVars load(Tape& tape, bool trainable) const;

    ForwardResult forward(Tape& tape, const ModelVars& vars, const PreparedSample& sample,
                          const ForwardOptions& opts = {}) const;

    // Writes gradients (from a finished backward pass) in registration order.
    std::vector<std::vector<double>> collect_gradients(const Tape& tape, const ModelVars& vars) const;

    nlohmann::json to_checkpoint() const;
    static Model from_checkpoint(const nlohmann::json& j);

private:
    ModelConfig cfg_;
    int input_dim_ = 0;
    numkit::ParamList params_;

    // Single source of truth for parameter paths/shapes; both init and load
    // walk it in the same order.
    void walk_schema(const std::function<void(const std::string&, int, int)>& visit) const;
};

inline constexpr const char* kCheckpointFormat = "polagnn-checkpoint-v1";

// One-shot inference convenience: fresh tape, no dropout.
struct Inference {
    numkit::Tensor logits;             // 1 x K
    std::vector<double> gate_weights;  // node-mean routing weights; empty for baselines
};

Inference infer(const Model& model, const PreparedSample& sample,
                Activation output_act = Activation::Relu);

}  // namespace mplayers

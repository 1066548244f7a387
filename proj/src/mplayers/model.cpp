#include "mplayers/model.hpp"

#include <cmath>

namespace mplayers {

using numkit::ConfigError;
using numkit::ParamList;
using numkit::Tensor;

void ModelConfig::validate() const {
    if (d_model < 1 || n_layers < 1 || n_heads < 1 || n_experts < 1)
        throw ConfigError("model config: dimensions and counts must be positive");
    if (d_model % n_heads != 0)
        throw ConfigError("model config: d_model " + std::to_string(d_model) +
                          " not divisible by n_heads " + std::to_string(n_heads));
    if (n_classes < 2) throw ConfigError("model config: n_classes must be >= 2");
    if (!(dropout >= 0.0 && dropout < 1.0)) throw ConfigError("model config: dropout must lie in [0,1)");
    if (epochs < 1 || batch_size < 1) throw ConfigError("model config: epochs and batch_size must be positive");
    if (!(lr > 0.0) || !(lr_decay > 0.0) || lr_decay_every < 1)
        throw ConfigError("model config: learning-rate schedule must be positive");
    if (weight_decay < 0.0) throw ConfigError("model config: weight_decay must be >= 0");
    if (patience < 1) throw ConfigError("model config: patience must be >= 1");
    for (int d : classifier_dims)
        if (d < 1) throw ConfigError("model config: classifier dims must be positive");
}

nlohmann::json config_to_json(const ModelConfig& cfg) {
    nlohmann::json j;
    j["d_model"] = cfg.d_model;
    j["n_layers"] = cfg.n_layers;
    j["n_heads"] = cfg.n_heads;
    j["n_experts"] = cfg.n_experts;
    j["dropout"] = cfg.dropout;
    j["classifier_dims"] = cfg.classifier_dims;
    j["n_classes"] = cfg.n_classes;
    j["scheme"] = scheme_name(cfg.scheme);
    j["epochs"] = cfg.epochs;
    j["batch_size"] = cfg.batch_size;
    j["lr"] = cfg.lr;
    j["weight_decay"] = cfg.weight_decay;
    j["lr_decay"] = cfg.lr_decay;
    j["lr_decay_every"] = cfg.lr_decay_every;
    j["patience"] = cfg.patience;
    j["seed"] = cfg.seed;
    return j;
}

ModelConfig config_from_json(const nlohmann::json& j) {
    ModelConfig cfg;
    cfg.d_model = j.at("d_model").get<int>();
    cfg.n_layers = j.at("n_layers").get<int>();
    cfg.n_heads = j.at("n_heads").get<int>();
    cfg.n_experts = j.at("n_experts").get<int>();
    cfg.dropout = j.at("dropout").get<double>();
    cfg.classifier_dims = j.at("classifier_dims").get<std::vector<int>>();
    cfg.n_classes = j.at("n_classes").get<int>();
    cfg.scheme = scheme_from_name(j.at("scheme").get<std::string>());
    cfg.epochs = j.at("epochs").get<int>();
    cfg.batch_size = j.at("batch_size").get<int>();
    cfg.lr = j.at("lr").get<double>();
    cfg.weight_decay = j.at("weight_decay").get<double>();
    cfg.lr_decay = j.at("lr_decay").get<double>();
    cfg.lr_decay_every = j.at("lr_decay_every").get<int>();
    cfg.patience = j.at("patience").get<int>();
    cfg.seed = j.at("seed").get<std::uint64_t>();
    cfg.validate();
    return cfg;
}

void Model::walk_schema(const std::function<void(const std::string&, int, int)>& visit) const {
    int M = cfg_.d_model;
    for (int l = 0; l < cfg_.n_layers; ++l) {
        std::string base = "layer" + std::to_string(l) + "/";
        int D = l == 0 ? input_dim_ : M;
        switch (cfg_.scheme) {
            case Scheme::GCN:
                visit(base + "W", D, M);
                break;
            case Scheme::GAT:
                visit(base + "W", D, M);
                visit(base + "a", 1, 2 * M);
                break;
            case Scheme::SCA:
                visit(base + "Wq", D, M);
                visit(base + "Wk", D, M);
                visit(base + "Wv", D, M);
                break;
            case Scheme::PolaDCA:
            case Scheme::DCA:
                visit(base + "Wx", D, M);
                visit(base + "Wy", D, M);
                visit(base + "Wz", D, M);
                visit(base + "Wg", M, 2 * M);
                visit(base + "bg", 1, M);
                for (int e = 0; e < cfg_.n_experts; ++e) {
                    std::string eb = base + "expert" + std::to_string(e) + "/";
                    visit(eb + "W1", M, M);
                    visit(eb + "b1", 1, M);
                    visit(eb + "W2", M, M);
                    visit(eb + "b2", 1, M);
                    visit(eb + "route", M, 1);
                }
                if (cfg_.scheme == Scheme::PolaDCA) {
                    visit(base + "wpp", 1, cfg_.n_heads);
                    visit(base + "wnn", 1, cfg_.n_heads);
                    visit(base + "wpn", 1, cfg_.n_heads);
                    visit(base + "wnp", 1, cfg_.n_heads);
                    visit(base + "Wo", M, M);
                }
                break;
        }
    }
    int in = M;
    for (std::size_t i = 0; i < cfg_.classifier_dims.size(); ++i) {
        int out = cfg_.classifier_dims[i];
        std::string fb = "classifier/fc" + std::to_string(i) + "/";
        visit(fb + "W", in, out);
        visit(fb + "b", 1, out);
        in = out;
    }
    std::string fb = "classifier/fc" + std::to_string(cfg_.classifier_dims.size()) + "/";
    visit(fb + "W", in, cfg_.n_classes);
    visit(fb + "b", 1, cfg_.n_classes);
}

namespace {

bool is_bias(const std::string& path) {
    auto slash = path.rfind('/');
    std::string leaf = slash == std::string::npos ? path : path.substr(slash + 1);
    return !leaf.empty() && leaf[0] == 'b';
}

// Polarity weights start at standard dot-product attention: (1, 1, -1, -1).
double polar_init(const std::string& path) {
    if (path.ends_with("wpp") || path.ends_with("wnn")) return 1.0;
    return -1.0;
}

bool is_polar(const std::string& path) {
    return path.ends_with("wpp") || path.ends_with("wnn") || path.ends_with("wpn") ||
           path.ends_with("wnp");
}

}  // namespace

Model::Model(ModelConfig cfg, int input_dim) : cfg_(std::move(cfg)), input_dim_(input_dim) {
    cfg_.validate();
    if (input_dim_ < 1) throw ConfigError("model: input feature dimension must be positive");

    std::mt19937_64 rng(numkit::derive_seed(cfg_.seed, "model-init"));
    walk_schema([&](const std::string& path, int rows, int cols) {
        Tensor t;
        if (is_polar(path)) t = Tensor::full(rows, cols, polar_init(path));
        else if (is_bias(path)) t = Tensor::zeros(rows, cols);
        else t = numkit::xavier_uniform(rows, cols, rng);
        params_.emplace_back(path, std::move(t));
    });
}

ModelVars Model::load(Tape& tape, bool trainable) const {
    ModelVars vars;
    vars.flat.reserve(params_.size());
    std::size_t idx = 0;
    for (const auto& [path, tensor] : params_) {
        (void)path;
        vars.flat.push_back(tape.leaf(tensor, trainable));
        ++idx;
    }

    // second walk binds structured handles in the same order
    idx = 0;
    auto next = [&]() { return vars.flat[idx++]; };
    vars.layers.resize(static_cast<std::size_t>(cfg_.n_layers));
    for (int l = 0; l < cfg_.n_layers; ++l) {
        LayerVars& lv = vars.layers[static_cast<std::size_t>(l)];
        switch (cfg_.scheme) {
            case Scheme::GCN:
                lv.W = next();
                break;
            case Scheme::GAT:
                lv.W = next();
                lv.a = next();
                break;
            case Scheme::SCA:
                lv.Wq = next();
                lv.Wk = next();
                lv.Wv = next();
                break;
            case Scheme::PolaDCA:
            case Scheme::DCA:
                lv.Wx = next();
                lv.Wy = next();
                lv.Wz = next();
                lv.Wg = next();
                lv.bg = next();
                lv.experts.resize(static_cast<std::size_t>(cfg_.n_experts));
                for (int e = 0; e < cfg_.n_experts; ++e) {
                    ExpertVars& ev = lv.experts[static_cast<std::size_t>(e)];
                    ev.W1 = next();
                    ev.b1 = next();
                    ev.W2 = next();
                    ev.b2 = next();
                    ev.route = next();
                }
                if (cfg_.scheme == Scheme::PolaDCA) {
                    lv.polar.wpp = next();
                    lv.polar.wnn = next();
                    lv.polar.wpn = next();
                    lv.polar.wnp = next();
                    lv.Wo = next();
                }
                break;
        }
    }
    std::size_t n_fc = cfg_.classifier_dims.size() + 1;
    for (std::size_t i = 0; i < n_fc; ++i) {
        Var W = next();
        Var b = next();
        vars.classifier.emplace_back(W, b);
    }
    if (idx != vars.flat.size()) throw numkit::InvariantError("model load: schema walk out of sync");
    return vars;
}

ForwardResult Model::forward(Tape& t, const ModelVars& vars, const PreparedSample& sample,
                             const ForwardOptions& opts) const {
    if (sample.features.cols() != input_dim_)
        throw ConfigError("forward: sample feature dim " + std::to_string(sample.features.cols()) +
                          " does not match model input dim " + std::to_string(input_dim_));
    if (opts.training && cfg_.dropout > 0.0 && opts.dropout_rng == nullptr)
        throw ConfigError("forward: training with dropout needs an RNG");

    TopoVars topo = load_topology(t, sample.topo);
    Var X = t.constant(sample.features);

    ForwardResult res;
    for (int l = 0; l < cfg_.n_layers; ++l) {
        const LayerVars& lv = vars.layers[static_cast<std::size_t>(l)];
        Var H;
        switch (cfg_.scheme) {
            case Scheme::GCN:
                H = gcn_layer(t, X, topo, lv.W, Activation::Relu);
                break;
            case Scheme::GAT:
                H = gat_layer(t, X, topo, lv.W, lv.a, Activation::Relu);
                break;
            case Scheme::SCA:
                H = sca_attend(t, X, X, lv.Wq, lv.Wk, lv.Wv);
                break;
            case Scheme::DCA:
            case Scheme::PolaDCA: {
                LocalFeatureVars f = local_features(t, X, topo, lv.Wx, lv.Wy, lv.Wz);
                AttendFn attend;
                if (cfg_.scheme == Scheme::DCA) {
                    attend = [&](Tape& tp, Var q, Var k, Var v) {
                        return dca_attend(tp, q, k, v, cfg_.n_heads);
                    };
                } else {
                    attend = [&](Tape& tp, Var q, Var k, Var v) {
                        return poladca_attend(tp, q, k, v, lv.polar, lv.Wo, cfg_.n_heads,
                                              opts.output_act);
                    };
                }
                Var fused = dual_path_fuse(t, f, lv.Wg, lv.bg, attend);
                ExpertOutput eo = expert_fusion(t, f.Fx, fused, lv.experts);
                H = eo.out;
                res.routing = eo.weights;
                res.has_routing = true;
                break;
            }
        }
        if (opts.training && cfg_.dropout > 0.0) {
            const Tensor& hv = t.value(H);
            Tensor mask = Tensor::zeros(hv.rows(), hv.cols());
            std::uniform_real_distribution<double> u(0.0, 1.0);
            double keep = 1.0 - cfg_.dropout;
            for (double& m : mask.data) m = u(*opts.dropout_rng) < keep ? 1.0 / keep : 0.0;
            H = t.hadamard(H, t.constant(mask));
        }
        X = H;
    }

    res.node_embed = X;
    Var h = t.col_mean(X);  // permutation-invariant readout
    for (std::size_t i = 0; i < vars.classifier.size(); ++i) {
        const auto& [W, b] = vars.classifier[i];
        h = t.add_rowvec(t.matmul(h, W), b);
        if (i + 1 < vars.classifier.size()) h = t.relu(h);
    }
    res.logits = h;
    return res;
}

std::vector<std::vector<double>> Model::collect_gradients(const Tape& tape, const ModelVars& vars) const {
    std::vector<std::vector<double>> grads;
    grads.reserve(vars.flat.size());
    for (Var v : vars.flat) grads.push_back(tape.grad(v));
    return grads;
}

nlohmann::json Model::to_checkpoint() const {
    nlohmann::json j;
    j["format"] = kCheckpointFormat;
    j["input_dim"] = input_dim_;
    j["config"] = config_to_json(cfg_);
    j["params"] = numkit::params_to_json(params_);
    return j;
}

Inference infer(const Model& model, const PreparedSample& sample, Activation output_act) {
    Tape t;
    ModelVars vars = model.load(t, false);
    ForwardOptions opts;
    opts.output_act = output_act;
    ForwardResult r = model.forward(t, vars, sample, opts);
    Inference out;
    out.logits = t.value(r.logits);
    if (r.has_routing) {
        const Tensor& w = t.value(t.col_mean(r.routing));
        out.gate_weights = w.data;
    }
    return out;
}

Model Model::from_checkpoint(const nlohmann::json& j) {
    if (!j.contains("format") || j["format"] != kCheckpointFormat)
        throw ConfigError("checkpoint: unknown or missing format tag");
    ModelConfig cfg = config_from_json(j.at("config"));
    Model m(cfg, j.at("input_dim").get<int>());
    ParamList loaded = numkit::params_from_json(j.at("params"));
    if (loaded.size() != m.params_.size())
        throw ConfigError("checkpoint: expected " + std::to_string(m.params_.size()) +
                          " parameters, found " + std::to_string(loaded.size()));
    for (auto& [path, tensor] : m.params_) {
        const Tensor* src = numkit::find_param(loaded, path);
        if (src == nullptr) throw ConfigError("checkpoint: missing parameter '" + path + "'");
        if (src->shape != tensor.shape)
            throw ConfigError("checkpoint: parameter '" + path + "' has shape " + src->shape_str() +
                              ", expected " + tensor.shape_str());
        tensor = *src;
    }
    return m;
}

}  // namespace mplayers

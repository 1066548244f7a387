#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>

#include "diagnose/stream.hpp"
#include "graphio/csvio.hpp"
#include "graphio/synthetic.hpp"
#include "robustlab/gamma.hpp"
#include "robustlab/hierarchy.hpp"
#include "robustlab/lemmas.hpp"
#include "trainer/fit.hpp"

namespace fs = std::filesystem;
using numkit::ConfigError;

namespace {

constexpr const char* kVersion = "polagnn 1.0 (checkpoint schema polagnn-checkpoint-v1)";

// Flat dotted-key configuration: declared keys with defaults, optional JSON
// file, then `--set key=value` overrides. Unknown keys are rejected and the
// resolved result is persisted next to each run's outputs.
class FlatConfig {
public:
    void declare(const std::string& key, nlohmann::json def) { values_[key] = std::move(def); }

    void load_file(const fs::path& path) {
        std::ifstream in(path);
        if (!in) throw ConfigError("cannot open config file: " + path.string());
        nlohmann::json j;
        try {
            in >> j;
        } catch (const nlohmann::json::exception& e) {
            throw ConfigError(path.string() + ": invalid JSON: " + e.what());
        }
        if (!j.is_object()) throw ConfigError(path.string() + ": config must be a JSON object");
        for (auto it = j.begin(); it != j.end(); ++it) assign(it.key(), it.value());
    }

    void apply_override(const std::string& kv) {
        auto eq = kv.find('=');
        if (eq == std::string::npos) throw ConfigError("override '" + kv + "' is not key=value");
        std::string key = kv.substr(0, eq);
        std::string raw = kv.substr(eq + 1);
        nlohmann::json parsed;
        try {
            parsed = nlohmann::json::parse(raw);
        } catch (const nlohmann::json::exception&) {
            parsed = raw;  // plain string
        }
        assign(key, parsed);
    }

    template <typename T>
    T get(const std::string& key) const {
        auto it = values_.find(key);
        if (it == values_.end()) throw ConfigError("internal: config key '" + key + "' not declared");
        try {
            return it->second.get<T>();
        } catch (const nlohmann::json::exception&) {
            throw ConfigError("config key '" + key + "' has the wrong type: " + it->second.dump());
        }
    }

    nlohmann::json resolved() const {
        nlohmann::json j;
        for (const auto& [k, v] : values_) j[k] = v;
        return j;
    }

    void write_resolved(const fs::path& dir) const {
        std::ofstream out(dir / "resolved_config.json");
        if (!out) throw ConfigError("cannot write resolved config in " + dir.string());
        out << resolved().dump(2) << "\n";
    }

private:
    void assign(const std::string& key, nlohmann::json value) {
        auto it = values_.find(key);
        if (it == values_.end()) throw ConfigError("unknown config key '" + key + "'");
        it->second = std::move(value);
    }

    std::map<std::string, nlohmann::json> values_;
};

void ensure_out_dir(const fs::path& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw ConfigError("cannot create output directory " + dir.string() + ": " + ec.message());
    // probe writability up front so failures carry the path
    fs::path probe = dir / ".write_probe";
    {
        std::ofstream f(probe);
        if (!f) throw ConfigError("output directory is not writable: " + dir.string());
    }
    fs::remove(probe, ec);
}

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream out(path);
    if (!out) throw ConfigError("cannot write " + path.string());
    out << text;
    if (!out) throw ConfigError("write failed: " + path.string());
}

graphio::PreprocessConfig prep_from_config(const FlatConfig& cfg) {
    graphio::PreprocessConfig prep;
    prep.window_len = cfg.get<int>("prep.window_len");
    prep.stride = cfg.get<int>("prep.stride");
    prep.k = cfg.get<int>("prep.k");
    prep.zscore = cfg.get<bool>("prep.zscore");
    prep.node_mode = graphio::node_mode_from_name(cfg.get<std::string>("prep.node_mode"));
    prep.segment_count = cfg.get<int>("prep.segment_count");
    prep.validate();
    return prep;
}

struct GendataArgs {
    std::string config_file, out_dir = "data_out";
    std::vector<std::string> sets;
};

int cmd_gendata(const GendataArgs& args) {
    FlatConfig cfg;
    cfg.declare("data.classes", 5);
    cfg.declare("data.samples_per_class", 40);
    cfg.declare("data.channels", 2);
    cfg.declare("data.length", 400);
    cfg.declare("seed", 7);
    if (!args.config_file.empty()) cfg.load_file(args.config_file);
    for (const auto& kv : args.sets) cfg.apply_override(kv);

    graphio::SyntheticConfig scfg;
    scfg.n_classes = cfg.get<int>("data.classes");
    scfg.samples_per_class = cfg.get<int>("data.samples_per_class");
    scfg.channels = cfg.get<int>("data.channels");
    scfg.length = cfg.get<int>("data.length");

    ensure_out_dir(args.out_dir);
    graphio::Dataset data = graphio::generate_synthetic_dataset(scfg, cfg.get<std::uint64_t>("seed"));
    fs::path manifest = graphio::write_dataset(args.out_dir, data);
    cfg.write_resolved(args.out_dir);

    std::cout << "wrote " << data.size() << " records across " << scfg.n_classes << " classes\n"
              << "manifest: " << manifest.string() << "\n";
    return 0;
}

struct TrainArgs {
    std::string config_file, manifest, out_dir = "train_out", scheme;
    std::int64_t seed = -1;
    std::vector<std::string> sets;
};

int cmd_train(const TrainArgs& args) {
    FlatConfig cfg;
    cfg.declare("data.manifest", "");
    cfg.declare("prep.window_len", 400);
    cfg.declare("prep.stride", 200);
    cfg.declare("prep.k", 8);
    cfg.declare("prep.zscore", true);
    cfg.declare("prep.node_mode", "segments");
    cfg.declare("prep.segment_count", 20);
    cfg.declare("model.scheme", "poladca");
    cfg.declare("model.d_model", 64);
    cfg.declare("model.n_layers", 3);
    cfg.declare("model.n_heads", 4);
    cfg.declare("model.n_experts", 3);
    cfg.declare("model.dropout", 0.01);
    cfg.declare("model.classifier_dims", std::vector<int>{128, 64});
    cfg.declare("model.n_classes", 0);  // 0: infer from the data
    cfg.declare("train.epochs", 50);
    cfg.declare("train.batch_size", 16);
    cfg.declare("train.lr", 1e-3);
    cfg.declare("train.weight_decay", 5e-4);
    cfg.declare("train.lr_decay", 0.5);
    cfg.declare("train.lr_decay_every", 20);
    cfg.declare("train.patience", 20);
    cfg.declare("train.feature_noise_sigma", 0.0);
    cfg.declare("seed", 1);
    if (!args.config_file.empty()) cfg.load_file(args.config_file);
    for (const auto& kv : args.sets) cfg.apply_override(kv);
    if (!args.manifest.empty()) cfg.apply_override("data.manifest=" + args.manifest);
    if (!args.scheme.empty()) cfg.apply_override("model.scheme=" + args.scheme);
    if (args.seed >= 0) cfg.apply_override("seed=" + std::to_string(args.seed));

    std::string manifest = cfg.get<std::string>("data.manifest");
    if (manifest.empty()) throw ConfigError("train: data.manifest (or --manifest) is required");

    graphio::Dataset records = graphio::load_csv_dataset(manifest);
    graphio::PreprocessConfig prep = prep_from_config(cfg);

    mplayers::ModelConfig mc;
    mc.scheme = mplayers::scheme_from_name(cfg.get<std::string>("model.scheme"));
    mc.d_model = cfg.get<int>("model.d_model");
    mc.n_layers = cfg.get<int>("model.n_layers");
    mc.n_heads = cfg.get<int>("model.n_heads");
    mc.n_experts = cfg.get<int>("model.n_experts");
    mc.dropout = cfg.get<double>("model.dropout");
    mc.classifier_dims = cfg.get<std::vector<int>>("model.classifier_dims");
    mc.n_classes = cfg.get<int>("model.n_classes");
    if (mc.n_classes == 0) {
        for (const auto& r : records) mc.n_classes = std::max(mc.n_classes, r.label + 1);
    }
    mc.epochs = cfg.get<int>("train.epochs");
    mc.batch_size = cfg.get<int>("train.batch_size");
    mc.lr = cfg.get<double>("train.lr");
    mc.weight_decay = cfg.get<double>("train.weight_decay");
    mc.lr_decay = cfg.get<double>("train.lr_decay");
    mc.lr_decay_every = cfg.get<int>("train.lr_decay_every");
    mc.patience = cfg.get<int>("train.patience");
    mc.seed = cfg.get<std::uint64_t>("seed");
    mc.validate();

    ensure_out_dir(args.out_dir);

    trainer::FitOptions fopts;
    fopts.feature_noise_sigma = cfg.get<double>("train.feature_noise_sigma");
    trainer::FitResult result = trainer::fit(records, prep, mc, fopts);

    nlohmann::json ck = result.model.to_checkpoint();
    ck["preprocess"] = graphio::prep_to_json(prep);
    write_text(fs::path(args.out_dir) / "checkpoint.json", ck.dump(2) + "\n");
    write_text(fs::path(args.out_dir) / "report.json", result.report.to_json().dump(2) + "\n");

    std::ostringstream csv;
    for (const auto& row : result.report.confusion) {
        for (std::size_t j = 0; j < row.size(); ++j) csv << (j ? "," : "") << row[j];
        csv << "\n";
    }
    write_text(fs::path(args.out_dir) / "confusion.csv", csv.str());
    cfg.write_resolved(args.out_dir);

    std::cout << "scheme " << mplayers::scheme_name(mc.scheme) << ", stopped at epoch "
              << result.report.stopped_epoch << " (best " << result.report.best_epoch << ")\n"
              << "test accuracy " << result.report.test_acc << ", macro-F1 "
              << result.report.test_macro_f1 << "\n";
    return 0;
}

struct DiagnoseArgs {
    std::string checkpoint, input = "-";
    int window = 0, stride = 0, k = 0;
};

int cmd_diagnose(const DiagnoseArgs& args) {
    std::ifstream ck_in(args.checkpoint);
    if (!ck_in) throw ConfigError("cannot open checkpoint: " + args.checkpoint);
    nlohmann::json ck;
    try {
        ck_in >> ck;
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError("checkpoint is not valid JSON: " + std::string(e.what()));
    }
    if (!ck.contains("preprocess"))
        throw ConfigError("checkpoint lacks a preprocess block; cannot match the stream config");
    graphio::PreprocessConfig prep = graphio::prep_from_json(ck["preprocess"]);
    mplayers::Model model = mplayers::Model::from_checkpoint(ck);

    if (args.k > 0 && args.k != prep.k)
        throw ConfigError("stream k=" + std::to_string(args.k) + " does not match checkpoint k=" +
                          std::to_string(prep.k));
    int window = args.window > 0 ? args.window : prep.window_len;
    int stride = args.stride > 0 ? args.stride : prep.stride;

    diagnose::StreamDiagnoser sd(std::move(model), prep, window, stride);

    std::ifstream file_in;
    std::istream* in = &std::cin;
    if (args.input != "-") {
        file_in.open(args.input);
        if (!file_in) throw ConfigError("cannot open stream input: " + args.input);
        in = &file_in;
    }

    std::string line;
    bool header_skipped = false;
    long line_no = 0;
    while (std::getline(*in, line)) {
        ++line_no;
        if (line.empty() || line == "\r") continue;
        if (!header_skipped) {  // header row names the channels
            header_skipped = true;
            continue;
        }
        std::vector<double> step;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) {
            try {
                step.push_back(std::stod(cell));
            } catch (const std::exception&) {
                throw ConfigError("stream input line " + std::to_string(line_no) +
                                  ": non-numeric cell '" + cell + "'");
            }
        }
        if (auto d = sd.push(step)) {
            nlohmann::json j;
            j["t"] = d->t;
            j["class"] = d->fault_class;
            j["posterior"] = d->posterior;
            j["gate_weights"] = d->gate_weights;
            std::cout << j.dump() << "\n";
        }
    }
    return 0;
}

struct RobustArgs {
    std::string suite, out_dir;
    long long n = 10, d = 64;
    std::string alpha = "0.5,0.5";
    double rho = 0.0;
    long trials = 1000;
    double slack = 1e-9;
    int seeds = 5;
    int epochs = 15;
    int samples_per_class = 24;
    double train_noise = 0.25;
    double eval_noise = 0.25;
    int eval_trials = 24;
    std::uint64_t seed = 1;
};

int cmd_robust(const RobustArgs& args) {
    const bool has_out = !args.out_dir.empty();
    if (has_out) ensure_out_dir(args.out_dir);

    if (args.suite == "flops") {
        long long sca = mplayers::flop_count(mplayers::Scheme::SCA, args.n, args.d);
        long long dca = mplayers::flop_count(mplayers::Scheme::DCA, args.n, args.d);
        long long pola = mplayers::flop_count(mplayers::Scheme::PolaDCA, args.n, args.d);
        std::cout << "SCA: " << sca << "\nDCA: " << dca << "\nPolaDCA: " << pola << "\n";
        if (has_out) {
            nlohmann::json j;
            j["n"] = args.n;
            j["d"] = args.d;
            j["sca"] = sca;
            j["dca"] = dca;
            j["poladca"] = pola;
            write_text(fs::path(args.out_dir) / "flops.json", j.dump(2) + "\n");
        }
        return 0;
    }

    if (args.suite == "gamma") {
        std::vector<double> alphas;
        std::stringstream ss(args.alpha);
        std::string cell;
        while (std::getline(ss, cell, ',')) {
            try {
                alphas.push_back(std::stod(cell));
            } catch (const std::exception&) {
                throw ConfigError("gamma: bad alpha entry '" + cell + "'");
            }
        }
        if (alphas.size() < 2) throw ConfigError("gamma: need at least two weights");
        int n = static_cast<int>(alphas.size());
        numkit::Tensor rho_m = numkit::Tensor::identity(n);
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j)
                if (i != j) rho_m.at(i, j) = args.rho;
        robustlab::AmplificationFactors f = robustlab::amplification_factors(alphas, rho_m);
        std::cout << "gamma = " << f.gamma << "\ngamma_pol = " << f.gamma_pol << "\n";
        if (f.clamped_gamma || f.clamped_pol) std::cout << "note: radicand clamped at zero\n";
        if (has_out) {
            nlohmann::json j;
            j["alphas"] = alphas;
            j["rho"] = args.rho;
            j["gamma"] = f.gamma;
            j["gamma_pol"] = f.gamma_pol;
            j["clamped_gamma"] = f.clamped_gamma;
            j["clamped_pol"] = f.clamped_pol;
            write_text(fs::path(args.out_dir) / "gamma.json", j.dump(2) + "\n");
        }
        return 0;
    }

    if (args.suite == "lemmas") {
        robustlab::LemmaSuiteConfig cfg;
        cfg.trials = args.trials;
        cfg.slack = args.slack;
        cfg.seed = args.seed;
        robustlab::LemmaSuiteResult r = robustlab::run_lemma_suite(cfg);
        std::cout << "trials: " << r.trials << "\n"
                  << "consensus checks: " << r.consensus.checks << ", violations: " << r.consensus.violations
                  << "\n"
                  << "diversity checks: " << r.diversity.checks << ", violations: " << r.diversity.violations
                  << "\n"
                  << "dca checks: " << r.dca.checks << ", violations: " << r.dca.violations << "\n"
                  << "violations: " << r.total_violations() << "\n";
        if (has_out) {
            nlohmann::json j;
            j["trials"] = r.trials;
            j["consensus"] = {{"checks", r.consensus.checks}, {"violations", r.consensus.violations},
                              {"worst_margin", r.consensus.worst_margin}};
            j["diversity"] = {{"checks", r.diversity.checks}, {"violations", r.diversity.violations},
                              {"worst_margin", r.diversity.worst_margin}};
            j["dca"] = {{"checks", r.dca.checks}, {"violations", r.dca.violations},
                        {"worst_margin", r.dca.worst_margin}};
            write_text(fs::path(args.out_dir) / "lemmas.json", j.dump(2) + "\n");
        }
        if (r.total_violations() > 0)
            throw numkit::InvariantError("lemma suite reported " + std::to_string(r.total_violations()) +
                                         " violations; the bounds are proven, so this is a bug");
        return 0;
    }

    if (args.suite == "hierarchy") {
        robustlab::HierarchyConfig cfg;
        cfg.n_seeds = args.seeds;
        cfg.base_seed = args.seed;
        cfg.epochs = args.epochs;
        cfg.samples_per_class = args.samples_per_class;
        cfg.train_noise_sigma = args.train_noise;
        cfg.eval_sigma = args.eval_noise;
        cfg.eval_trials = args.eval_trials;
        robustlab::RobustnessReport r = robustlab::hierarchy_experiment(cfg);
        std::cout << "median L (gcn / dca / poladca): " << r.median_gcn << " / " << r.median_dca
                  << " / " << r.median_pola << "\n"
                  << "median ordering poladca <= dca <= gcn: " << (r.median_ordering_holds ? "yes" : "no")
                  << "\n"
                  << "theorem-3 fraction (anti-correlated, poladca < dca): " << r.theorem3_fraction << "\n"
                  << "reduction-identity gap: " << r.reduction_gap << "\n";
        if (r.reduction_gap > 1e-10)
            throw numkit::InvariantError("reduction-identity control exceeded 1e-10");
        if (has_out) {
            write_text(fs::path(args.out_dir) / "hierarchy.json", r.to_json().dump(2) + "\n");
            std::ostringstream csv;
            csv << "seed,scheme,trial,ratio\n";
            for (const auto& row : r.rows) {
                auto dump = [&](const char* scheme, const std::vector<double>& ratios) {
                    for (std::size_t i = 0; i < ratios.size(); ++i)
                        csv << row.seed << "," << scheme << "," << i << "," << ratios[i] << "\n";
                };
                dump("gcn", row.gcn_ratios);
                dump("dca", row.dca_ratios);
                dump("poladca", row.pola_ratios);
            }
            write_text(fs::path(args.out_dir) / "ratios.csv", csv.str());
        }
        return 0;
    }

    throw ConfigError("unknown suite '" + args.suite + "' (expected lemmas|hierarchy|gamma|flops)");
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Graph message-passing fault diagnosis: training, streaming inference and "
                 "noise-robustness verification"};
    app.set_version_flag("--version", kVersion);
    app.require_subcommand(1);

    GendataArgs ga;
    CLI::App* gendata = app.add_subcommand("gendata", "generate a synthetic CSV dataset + manifest");
    gendata->add_option("--config", ga.config_file, "JSON config file");
    gendata->add_option("--out", ga.out_dir, "output directory");
    gendata->add_option("--set", ga.sets, "override config key (key=value, repeatable)");

    TrainArgs ta;
    CLI::App* train = app.add_subcommand("train", "train a model on a CSV dataset");
    train->add_option("--config", ta.config_file, "JSON config file");
    train->add_option("--manifest", ta.manifest, "dataset manifest path");
    train->add_option("--out", ta.out_dir, "output directory");
    train->add_option("--scheme", ta.scheme, "gcn|gat|sca|dca|poladca");
    train->add_option("--seed", ta.seed, "run seed");
    train->add_option("--set", ta.sets, "override config key (key=value, repeatable)");

    DiagnoseArgs da;
    CLI::App* diag = app.add_subcommand("diagnose", "stream CSV rows through a trained model");
    diag->add_option("--checkpoint", da.checkpoint, "checkpoint JSON")->required();
    diag->add_option("--input", da.input, "CSV file or '-' for stdin");
    diag->add_option("--window", da.window, "window length (must match checkpoint)");
    diag->add_option("--stride", da.stride, "steps between decisions");
    diag->add_option("--k", da.k, "kNN neighbor count (must match checkpoint)");

    RobustArgs ra;
    CLI::App* robust = app.add_subcommand("robust", "noise-robustness verification suites");
    robust->add_option("--suite", ra.suite, "lemmas|hierarchy|gamma|flops")->required();
    robust->add_option("--out", ra.out_dir, "output directory (optional)");
    robust->add_option("--n", ra.n, "node count for the FLOP model");
    robust->add_option("--d", ra.d, "feature width for the FLOP model");
    robust->add_option("--alpha", ra.alpha, "comma-separated attention weights");
    robust->add_option("--rho", ra.rho, "pairwise correlation");
    robust->add_option("--trials", ra.trials, "randomized trials for the lemma suite");
    robust->add_option("--slack", ra.slack, "violation slack");
    robust->add_option("--seeds", ra.seeds, "seeds for the hierarchy experiment");
    robust->add_option("--epochs", ra.epochs, "training epochs per hierarchy model");
    robust->add_option("--samples-per-class", ra.samples_per_class, "hierarchy dataset size");
    robust->add_option("--train-noise", ra.train_noise, "noise-augmentation sigma");
    robust->add_option("--eval-noise", ra.eval_noise, "evaluation noise sigma");
    robust->add_option("--eval-trials", ra.eval_trials, "noise trials per probe sample");
    robust->add_option("--seed", ra.seed, "base seed");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        if (*gendata) return cmd_gendata(ga);
        if (*train) return cmd_train(ta);
        if (*diag) return cmd_diagnose(da);
        if (*robust) return cmd_robust(ra);
        throw ConfigError("no subcommand selected");
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const numkit::InvariantError& e) {
        std::cerr << "invariant violation: " << e.what() << "\n";
        return 4;
    } catch (const numkit::NumericError& e) {
        std::cerr << "numeric error: " << e.what() << "\n";
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    }
}

#include "robustlab/hierarchy.hpp"

#include <algorithm>
#include <cmath>

#include "graphio/synthetic.hpp"

namespace robustlab {

using graphio::Dataset;
using mplayers::Model;
using mplayers::ModelConfig;
using mplayers::PreparedSample;
using mplayers::Scheme;
using numkit::Tensor;

nlohmann::json RobustnessReport::to_json() const {
    nlohmann::json j;
    nlohmann::json rows_json = nlohmann::json::array();
    for (const HierarchySeedRow& r : rows) {
        nlohmann::json jr;
        jr["seed"] = r.seed;
        jr["lipschitz_mean"] = {{"gcn", r.gcn}, {"dca", r.dca}, {"poladca", r.pola}};
        jr["lipschitz_max"] = {{"gcn", r.gcn_max}, {"dca", r.dca_max}, {"poladca", r.pola_max}};
        jr["anticorrelated_mean"] = {{"dca", r.dca_anti}, {"poladca", r.pola_anti}};
        jr["diverged"] = r.diverged;
        if (!r.note.empty()) jr["note"] = r.note;
        rows_json.push_back(std::move(jr));
    }
    j["seeds"] = std::move(rows_json);
    j["median"] = {{"gcn", median_gcn}, {"dca", median_dca}, {"poladca", median_pola}};
    j["median_ordering_holds"] = median_ordering_holds;
    j["theorem3_fraction"] = theorem3_fraction;
    j["reduction_identity_gap"] = reduction_gap;
    return j;
}

namespace {

double median(std::vector<double> v) {
    if (v.empty()) return 0.0;
    std::sort(v.begin(), v.end());
    std::size_t mid = v.size() / 2;
    return v.size() % 2 == 1 ? v[mid] : 0.5 * (v[mid - 1] + v[mid]);
}

ModelConfig scheme_config(const HierarchyConfig& cfg, Scheme scheme, std::uint64_t seed) {
    ModelConfig mc;
    mc.d_model = cfg.d_model;
    mc.n_layers = cfg.n_layers;
    mc.n_heads = cfg.n_heads;
    mc.n_classes = cfg.n_classes;
    mc.classifier_dims = {cfg.d_model * 2, cfg.d_model};
    mc.scheme = scheme;
    mc.epochs = cfg.epochs;
    mc.batch_size = cfg.batch_size;
    mc.patience = cfg.epochs;  // no early stop in the short robustness runs
    mc.seed = seed;
    return mc;
}

// pooled perturbation ratios of the full network over a few samples
struct PooledLipschitz {
    double mean = 0.0;
    double max = 0.0;
    std::vector<double> ratios;
};

PooledLipschitz network_lipschitz(const Model& model, const std::vector<PreparedSample>& samples,
                                  double sigma, bool anticorrelated, double anti_rho, int trials,
                                  std::uint64_t seed) {
    PooledLipschitz out;
    double sum = 0.0;
    for (std::size_t si = 0; si < samples.size(); ++si) {
        const PreparedSample& s = samples[si];
        FeatureMap f = [&](const Tensor& X) {
            PreparedSample probe = s;
            probe.features = X;
            return mplayers::infer(model, probe).logits;
        };
        NoiseSpec spec;
        spec.sigma = sigma;
        spec.seed = numkit::derive_seed(seed, "eval-noise-" + std::to_string(si));
        if (anticorrelated) spec.rho = anticorrelated_pairs_rho(s.topo.n, anti_rho);
        LipschitzEstimate est = empirical_lipschitz(f, s.features, spec, trials);
        for (double r : est.ratios) {
            sum += r;
            out.max = std::max(out.max, r);
            out.ratios.push_back(r);
        }
    }
    out.mean = out.ratios.empty() ? 0.0 : sum / static_cast<double>(out.ratios.size());
    return out;
}

}  // namespace

Model frozen_pola_twin(const Model& dca) {
    ModelConfig cfg = dca.config();
    cfg.scheme = Scheme::PolaDCA;
    Model twin(cfg, dca.input_dim());
    for (auto& [path, tensor] : twin.params()) {
        if (path.ends_with("wpp") || path.ends_with("wnn")) {
            for (double& v : tensor.data) v = 1.0;
        } else if (path.ends_with("wpn") || path.ends_with("wnp")) {
            for (double& v : tensor.data) v = -1.0;
        } else if (path.ends_with("Wo")) {
            tensor = Tensor::identity(tensor.rows());
        } else {
            const Tensor* src = numkit::find_param(dca.params(), path);
            if (src == nullptr)
                throw numkit::InvariantError("frozen_pola_twin: missing shared parameter " + path);
            tensor = *src;
        }
    }
    return twin;
}

RobustnessReport hierarchy_experiment(const HierarchyConfig& cfg) {
    if (cfg.n_seeds < 1) throw numkit::ConfigError("hierarchy_experiment: need at least one seed");

    RobustnessReport report;
    std::vector<double> med_gcn, med_dca, med_pola;

    for (int si = 0; si < cfg.n_seeds; ++si) {
        std::uint64_t seed = cfg.base_seed + static_cast<std::uint64_t>(si);
        Dataset records =
            graphio::generate_synthetic_dataset(cfg.n_classes, cfg.samples_per_class, cfg.prep,
                                                numkit::derive_seed(seed, "hierarchy-data"));

        HierarchySeedRow row;
        row.seed = seed;

        // held-out samples for the Lipschitz probes (same split fit() uses)
        std::vector<int> labels;
        for (const auto& r : records) labels.push_back(r.label);
        trainer::SplitIndices split = trainer::stratified_split(labels, 0.3, 0.15, seed);
        std::vector<PreparedSample> test = trainer::prepare_records(records, split.test, cfg.prep);
        if (static_cast<int>(test.size()) > cfg.eval_samples)
            test.resize(static_cast<std::size_t>(cfg.eval_samples));

        trainer::FitOptions fopts;
        fopts.feature_noise_sigma = cfg.train_noise_sigma;

        std::optional<Model> gcn, dca, pola;
        try {
            gcn = trainer::fit(records, cfg.prep, scheme_config(cfg, Scheme::GCN, seed), fopts).model;
            dca = trainer::fit(records, cfg.prep, scheme_config(cfg, Scheme::DCA, seed), fopts).model;
            pola = trainer::fit(records, cfg.prep, scheme_config(cfg, Scheme::PolaDCA, seed), fopts).model;
        } catch (const numkit::NumericError& e) {
            row.diverged = true;
            row.note = e.what();
            report.rows.push_back(row);
            continue;
        }

        PooledLipschitz pg = network_lipschitz(*gcn, test, cfg.eval_sigma, false, 0.0, cfg.eval_trials, seed);
        PooledLipschitz pd = network_lipschitz(*dca, test, cfg.eval_sigma, false, 0.0, cfg.eval_trials, seed);
        PooledLipschitz pp = network_lipschitz(*pola, test, cfg.eval_sigma, false, 0.0, cfg.eval_trials, seed);
        row.gcn = pg.mean;
        row.gcn_max = pg.max;
        row.gcn_ratios = std::move(pg.ratios);
        row.dca = pd.mean;
        row.dca_max = pd.max;
        row.dca_ratios = std::move(pd.ratios);
        row.pola = pp.mean;
        row.pola_max = pp.max;
        row.pola_ratios = std::move(pp.ratios);

        row.dca_anti =
            network_lipschitz(*dca, test, cfg.eval_sigma, true, cfg.anti_rho, cfg.eval_trials, seed).mean;
        row.pola_anti =
            network_lipschitz(*pola, test, cfg.eval_sigma, true, cfg.anti_rho, cfg.eval_trials, seed).mean;

        // exact control: the frozen twin must behave identically to DCA
        if (si == 0) {
            Model twin = frozen_pola_twin(*dca);
            double worst = 0.0;
            for (const PreparedSample& s : test) {
                FeatureMap f_dca = [&](const Tensor& X) {
                    PreparedSample p = s;
                    p.features = X;
                    return mplayers::infer(*dca, p).logits;
                };
                FeatureMap f_twin = [&](const Tensor& X) {
                    PreparedSample p = s;
                    p.features = X;
                    return mplayers::infer(twin, p, mplayers::Activation::Identity).logits;
                };
                NoiseSpec spec;
                spec.sigma = cfg.eval_sigma;
                spec.seed = numkit::derive_seed(seed, "reduction-control");
                LipschitzEstimate a = empirical_lipschitz(f_dca, s.features, spec, cfg.eval_trials);
                LipschitzEstimate b = empirical_lipschitz(f_twin, s.features, spec, cfg.eval_trials);
                for (std::size_t i = 0; i < a.ratios.size(); ++i)
                    worst = std::max(worst, std::abs(a.ratios[i] - b.ratios[i]));
            }
            report.reduction_gap = worst;
        }

        med_gcn.push_back(row.gcn);
        med_dca.push_back(row.dca);
        med_pola.push_back(row.pola);
        report.rows.push_back(row);
    }

    report.median_gcn = median(med_gcn);
    report.median_dca = median(med_dca);
    report.median_pola = median(med_pola);
    report.median_ordering_holds =
        report.median_pola <= report.median_dca && report.median_dca <= report.median_gcn;

    int anti_wins = 0, usable = 0;
    for (const HierarchySeedRow& r : report.rows) {
        if (r.diverged) continue;
        ++usable;
        if (r.pola_anti < r.dca_anti) ++anti_wins;
    }
    report.theorem3_fraction = usable > 0 ? static_cast<double>(anti_wins) / usable : 0.0;
    return report;
}

}  // namespace robustlab

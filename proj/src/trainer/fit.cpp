#include "trainer/fit.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>

#include "trainer/adam.hpp"
#include "trainer/loss.hpp"

namespace trainer {

using graphio::Dataset;
using graphio::PreprocessConfig;
using mplayers::Model;
using mplayers::ModelConfig;
using mplayers::ModelVars;
using mplayers::PreparedSample;
using numkit::Tape;
using numkit::Tensor;
using numkit::Var;

nlohmann::json TrainReport::to_json() const {
    nlohmann::json j;
    nlohmann::json eps = nlohmann::json::array();
    for (const EpochStats& e : epochs) {
        nlohmann::json je;
        je["train_loss"] = e.train_loss;
        je["val_loss"] = e.val_loss;
        je["val_acc"] = e.val_acc;
        je["lr"] = e.lr;
        eps.push_back(std::move(je));
    }
    j["epochs"] = std::move(eps);
    j["stopped_epoch"] = stopped_epoch;
    j["best_epoch"] = best_epoch;
    j["test_acc"] = test_acc;
    j["test_macro_f1"] = test_macro_f1;
    j["confusion"] = confusion;
    return j;
}

SplitIndices stratified_split(const std::vector<int>& labels, double test_frac, double val_frac,
                              std::uint64_t seed) {
    if (!(test_frac >= 0.0 && test_frac < 1.0) || !(val_frac >= 0.0 && val_frac < 1.0))
        throw numkit::ConfigError("stratified_split: fractions must lie in [0,1)");

    int K = 0;
    for (int y : labels) K = std::max(K, y + 1);
    std::vector<std::vector<int>> by_class(static_cast<std::size_t>(K));
    for (std::size_t i = 0; i < labels.size(); ++i)
        by_class[static_cast<std::size_t>(labels[i])].push_back(static_cast<int>(i));

    std::mt19937_64 rng(numkit::derive_seed(seed, "split"));
    SplitIndices out;
    for (auto& members : by_class) {
        std::shuffle(members.begin(), members.end(), rng);
        int n = static_cast<int>(members.size());
        int n_test = static_cast<int>(std::round(n * test_frac));
        int n_train_total = n - n_test;
        int n_val = static_cast<int>(std::round(n_train_total * val_frac));
        for (int i = 0; i < n; ++i) {
            int idx = members[static_cast<std::size_t>(i)];
            if (i < n_test) out.test.push_back(idx);
            else if (i < n_test + n_val) out.val.push_back(idx);
            else out.train.push_back(idx);
        }
    }
    std::sort(out.train.begin(), out.train.end());
    std::sort(out.val.begin(), out.val.end());
    std::sort(out.test.begin(), out.test.end());
    return out;
}

std::vector<PreparedSample> prepare_records(const Dataset& records, const std::vector<int>& subset,
                                            const PreprocessConfig& prep) {
    std::vector<PreparedSample> out;
    for (int idx : subset) {
        const graphio::SignalRecord& rec = records[static_cast<std::size_t>(idx)];
        for (const graphio::GraphSample& g : graphio::record_to_samples(rec, prep))
            out.push_back(mplayers::prepare_sample(g));
    }
    return out;
}

std::vector<int> predict(const Model& model, const std::vector<PreparedSample>& samples) {
    std::vector<int> preds;
    preds.reserve(samples.size());
    for (const PreparedSample& s : samples) {
        Tensor logits = mplayers::infer(model, s).logits;
        int arg = 0;
        for (int k = 1; k < logits.cols(); ++k)
            if (logits.data[static_cast<std::size_t>(k)] > logits.data[static_cast<std::size_t>(arg)]) arg = k;
        preds.push_back(arg);
    }
    return preds;
}

double mean_nll(const Model& model, const std::vector<PreparedSample>& samples) {
    if (samples.empty()) throw numkit::ConfigError("mean_nll: empty sample set");
    double total = 0.0;
    for (const PreparedSample& s : samples)
        total += nll_loss_value(mplayers::infer(model, s).logits, s.label);
    return total / static_cast<double>(samples.size());
}

FitResult fit(const Dataset& records, const PreprocessConfig& prep, ModelConfig cfg,
              const FitOptions& opts) {
    if (records.empty()) throw numkit::ConfigError("fit: empty dataset");
    std::vector<int> labels;
    labels.reserve(records.size());
    for (const auto& r : records) {
        if (r.label < 0 || r.label >= cfg.n_classes)
            throw numkit::ConfigError("fit: record label " + std::to_string(r.label) +
                                      " outside configured n_classes");
        labels.push_back(r.label);
    }

    // 7:3 train/test, then 15% of the training records for validation
    SplitIndices split = stratified_split(labels, 0.3, 0.15, cfg.seed);
    if (split.train.empty() || split.val.empty() || split.test.empty())
        throw numkit::ConfigError("fit: a split is empty; dataset too small");

    std::vector<PreparedSample> train = prepare_records(records, split.train, prep);
    std::vector<PreparedSample> val = prepare_records(records, split.val, prep);
    std::vector<PreparedSample> test = prepare_records(records, split.test, prep);

    Model model(cfg, train.front().features.cols());

    AdamState adam = AdamState::init(model.params());
    std::mt19937_64 shuffle_rng(numkit::derive_seed(cfg.seed, "shuffle"));
    std::mt19937_64 dropout_rng(numkit::derive_seed(cfg.seed, "dropout"));
    std::mt19937_64 noise_rng(numkit::derive_seed(cfg.seed, "feature-noise"));

    TrainReport report;
    double best_val = std::numeric_limits<double>::infinity();
    numkit::ParamList best_params = model.params();
    int best_epoch = 0;
    int since_improve = 0;

    std::vector<int> order(train.size());
    for (std::size_t i = 0; i < train.size(); ++i) order[i] = static_cast<int>(i);

    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        double lr = cfg.lr * std::pow(cfg.lr_decay, epoch / cfg.lr_decay_every);
        std::shuffle(order.begin(), order.end(), shuffle_rng);

        double epoch_loss = 0.0;
        std::size_t n_batches = 0;
        for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(cfg.batch_size)) {
            std::size_t end = std::min(order.size(), start + static_cast<std::size_t>(cfg.batch_size));
            Tape tape;
            ModelVars vars = model.load(tape, true);
            mplayers::ForwardOptions fopts;
            fopts.training = true;
            fopts.dropout_rng = &dropout_rng;

            Var batch_loss;
            for (std::size_t i = start; i < end; ++i) {
                const PreparedSample& base = train[static_cast<std::size_t>(order[i])];
                const PreparedSample* sample = &base;
                PreparedSample noisy;
                if (opts.feature_noise_sigma > 0.0) {
                    noisy = base;
                    std::normal_distribution<double> gauss(0.0, opts.feature_noise_sigma);
                    for (double& v : noisy.features.data) v += gauss(noise_rng);
                    sample = &noisy;
                }
                mplayers::ForwardResult r = model.forward(tape, vars, *sample, fopts);
                Var l = nll_loss(tape, r.logits, sample->label);
                batch_loss = i == start ? l : tape.add(batch_loss, l);
            }
            batch_loss = tape.scale(batch_loss, 1.0 / static_cast<double>(end - start));

            double loss_value = tape.value(batch_loss).data[0];
            if (!std::isfinite(loss_value))
                throw numkit::NumericError("fit: non-finite loss at epoch " + std::to_string(epoch + 1));
            epoch_loss += loss_value;
            ++n_batches;

            tape.backward(batch_loss);
            auto grads = model.collect_gradients(tape, vars);
            AdamConfig acfg;
            acfg.lr = lr;
            acfg.weight_decay = cfg.weight_decay;
            adam_step(model.params(), grads, adam, acfg);
        }

        EpochStats stats;
        stats.lr = lr;
        stats.train_loss = epoch_loss / static_cast<double>(n_batches);
        stats.val_loss = mean_nll(model, val);
        std::vector<int> val_preds = predict(model, val);
        std::vector<int> val_labels;
        val_labels.reserve(val.size());
        for (const auto& s : val) val_labels.push_back(s.label);
        stats.val_acc = evaluate_metrics(val_preds, val_labels, cfg.n_classes).acc;
        report.epochs.push_back(stats);
        report.stopped_epoch = epoch + 1;

        if (opts.verbose)
            std::cerr << "epoch " << (epoch + 1) << " train " << stats.train_loss << " val "
                      << stats.val_loss << " acc " << stats.val_acc << "\n";

        if (stats.val_loss < best_val) {
            best_val = stats.val_loss;
            best_params = model.params();
            best_epoch = epoch + 1;
            since_improve = 0;
        } else if (++since_improve >= cfg.patience) {
            break;
        }
    }

    model.params() = best_params;
    report.best_epoch = best_epoch;

    std::vector<int> test_preds = predict(model, test);
    std::vector<int> test_labels;
    test_labels.reserve(test.size());
    for (const auto& s : test) test_labels.push_back(s.label);
    Metrics m = evaluate_metrics(test_preds, test_labels, cfg.n_classes);
    report.test_acc = m.acc;
    report.test_macro_f1 = m.macro_f1;
    report.confusion = m.confusion;

    return FitResult{std::move(model), std::move(report)};
}

}  // namespace trainer

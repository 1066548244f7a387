#include "robustlab/lemmas.hpp"

#include <cmath>

#include "graphio/pipeline.hpp"
#include "robustlab/lipschitz.hpp"

namespace robustlab {

using mplayers::PreparedSample;
using numkit::Tape;
using numkit::Tensor;
using numkit::Var;

void BoundTally::record(double lhs, double rhs, double slack) {
    ++checks;
    if (lhs > rhs + slack) ++violations;
    worst_margin = std::min(worst_margin, rhs - lhs);
}

namespace {

double row_norm(const Tensor& t, int i) {
    double s = 0.0;
    for (int j = 0; j < t.cols(); ++j) s += t.at(i, j) * t.at(i, j);
    return std::sqrt(s);
}

double max_row_diff_norm(const Tensor& a, const Tensor& b) {
    double m = 0.0;
    for (int i = 0; i < a.rows(); ++i) {
        double s = 0.0;
        for (int j = 0; j < a.cols(); ++j) {
            double d = a.at(i, j) - b.at(i, j);
            s += d * d;
        }
        m = std::max(m, std::sqrt(s));
    }
    return m;
}

double max_row_norm(const Tensor& a) {
    double m = 0.0;
    for (int i = 0; i < a.rows(); ++i) m = std::max(m, row_norm(a, i));
    return m;
}

Tensor add_noise(const Tensor& X, const Tensor& eta) {
    Tensor out = X;
    for (std::size_t i = 0; i < out.data.size(); ++i) out.data[i] += eta.data[i];
    return out;
}

struct Features {
    Tensor fx, fy, fz;
};

Features eval_local_features(const PreparedSample& s, const Tensor& X, const Tensor& Wx,
                             const Tensor& Wy, const Tensor& Wz) {
    Tape t;
    mplayers::TopoVars topo = mplayers::load_topology(t, s.topo);
    mplayers::LocalFeatureVars f = mplayers::local_features(
        t, t.constant(X), topo, t.constant(Wx), t.constant(Wy), t.constant(Wz));
    return {t.value(f.Fx), t.value(f.Fy), t.value(f.Fz)};
}

}  // namespace

std::vector<BoundCase> consensus_bound_cases(const PreparedSample& sample, const Tensor& Wy,
                                             const Tensor& eta) {
    Tensor Wx = Tensor::identity(Wy.rows());
    Features clean = eval_local_features(sample, sample.features, Wx, Wy, Wy);
    Features noisy = eval_local_features(sample, add_noise(sample.features, eta), Wx, Wy, Wy);

    double bw = spectral_norm(Wy);
    std::vector<BoundCase> cases;
    for (int i = 0; i < sample.topo.n; ++i) {
        double mean_eta = 0.0;
        int deg = static_cast<int>(sample.topo.deg.data[static_cast<std::size_t>(i)]);
        if (deg == 0) continue;
        for (int j = 0; j < sample.topo.n; ++j)
            if (sample.topo.adj01.at(i, j) != 0.0) mean_eta += row_norm(eta, j);
        mean_eta /= deg;

        BoundCase c;
        double s = 0.0;
        for (int j = 0; j < clean.fy.cols(); ++j) {
            double d = noisy.fy.at(i, j) - clean.fy.at(i, j);
            s += d * d;
        }
        c.lhs = std::sqrt(s);
        c.rhs = bw * mean_eta;
        cases.push_back(c);
    }
    return cases;
}

std::vector<BoundCase> diversity_bound_cases(const PreparedSample& sample, const Tensor& W,
                                             const Tensor& eta) {
    Tensor Wx = Tensor::identity(W.rows());
    Features clean = eval_local_features(sample, sample.features, Wx, W, W);
    Features noisy = eval_local_features(sample, add_noise(sample.features, eta), Wx, W, W);

    double bw = spectral_norm(W);
    std::vector<BoundCase> cases;
    for (int i = 0; i < sample.topo.n; ++i) {
        int deg = static_cast<int>(sample.topo.deg.data[static_cast<std::size_t>(i)]);
        if (deg == 0) continue;
        double mean_sq = 0.0;
        for (int j = 0; j < sample.topo.n; ++j)
            if (sample.topo.adj01.at(i, j) != 0.0) {
                double r = row_norm(eta, j);
                mean_sq += r * r;
            }
        mean_sq /= deg;

        BoundCase c;
        double s = 0.0;
        for (int j = 0; j < clean.fz.cols(); ++j) {
            double d = noisy.fz.at(i, j) - clean.fz.at(i, j);
            s += d * d;
        }
        c.lhs = std::sqrt(s);
        c.rhs = std::sqrt(2.0) * bw * std::sqrt(mean_sq);
        cases.push_back(c);
    }
    return cases;
}

std::vector<BoundCase> dca_bound_cases(const Tensor& A, const Tensor& B, const Tensor& C,
                                       const Tensor& Ap, const Tensor& Bp, const Tensor& Cp) {
    int dk = A.cols();
    auto attend = [&](const Tensor& q, const Tensor& k, const Tensor& v) {
        Tape t;
        return t.value(mplayers::dca_attend(t, t.constant(q), t.constant(k), t.constant(v), 1));
    };
    Tensor out = attend(A, B, C);
    Tensor outp = attend(Ap, Bp, Cp);

    double max_b = max_row_norm(B);
    double max_db = max_row_diff_norm(Bp, B);
    double max_dc = max_row_diff_norm(Cp, C);
    double value_scale = std::max(max_row_norm(C), max_row_norm(Cp));
    double inv_sqrt_dk = 1.0 / std::sqrt(static_cast<double>(dk));

    std::vector<BoundCase> cases;
    for (int i = 0; i < A.rows(); ++i) {
        double da = 0.0;
        for (int j = 0; j < A.cols(); ++j) {
            double d = Ap.at(i, j) - A.at(i, j);
            da += d * d;
        }
        da = std::sqrt(da);

        BoundCase c;
        double s = 0.0;
        for (int j = 0; j < out.cols(); ++j) {
            double d = outp.at(i, j) - out.at(i, j);
            s += d * d;
        }
        c.lhs = std::sqrt(s);
        c.rhs = inv_sqrt_dk * (row_norm(Ap, i) * max_db + max_b * da) * value_scale + max_dc;
        cases.push_back(c);
    }
    return cases;
}

LemmaSuiteResult run_lemma_suite(const LemmaSuiteConfig& cfg) {
    std::mt19937_64 rng(numkit::derive_seed(cfg.seed, "lemma-suite"));
    std::uniform_real_distribution<double> unit(-1.0, 1.0);
    std::uniform_real_distribution<double> sigma_dist(0.0, 1.5);

    LemmaSuiteResult result;
    for (long trial = 0; trial < cfg.trials; ++trial) {
        int n = 2 + static_cast<int>(rng() % static_cast<unsigned>(cfg.max_nodes - 1));
        int D = 1 + static_cast<int>(rng() % static_cast<unsigned>(cfg.max_dim));
        int M = 1 + static_cast<int>(rng() % static_cast<unsigned>(cfg.max_dim));
        int k = 1 + static_cast<int>(rng() % static_cast<unsigned>(n - 1));

        graphio::GraphSample g;
        g.node_features = Tensor::zeros(n, D);
        for (double& v : g.node_features.data) v = 2.0 * unit(rng);
        g.neighbors = graphio::build_knn_graph(g.node_features, k);
        PreparedSample sample = mplayers::prepare_sample(g);

        auto rand_matrix = [&](int r, int c, double scale) {
            Tensor t = Tensor::zeros(r, c);
            for (double& v : t.data) v = scale * unit(rng);
            return t;
        };

        NoiseSpec spec;
        spec.sigma = trial % 17 == 0 ? 0.0 : sigma_dist(rng);
        spec.seed = rng();
        if (trial % 3 == 0) {
            // random PSD correlation with unit diagonal
            Tensor Braw = rand_matrix(n, n, 1.0);
            Tensor rho = Tensor::zeros(n, n);
            std::vector<double> norms(static_cast<std::size_t>(n));
            for (int i = 0; i < n; ++i) norms[static_cast<std::size_t>(i)] = std::max(1e-9, row_norm(Braw, i));
            for (int i = 0; i < n; ++i)
                for (int j = 0; j < n; ++j) {
                    double dot = 0.0;
                    for (int c = 0; c < n; ++c) dot += Braw.at(i, c) * Braw.at(j, c);
                    rho.at(i, j) = dot / (norms[static_cast<std::size_t>(i)] * norms[static_cast<std::size_t>(j)]);
                }
            for (int i = 0; i < n; ++i) rho.at(i, i) = 1.0;
            spec.rho = rho;
        }
        NoiseSampler sampler(spec, n, D);
        Tensor eta = sampler.sample();

        Tensor Wy = rand_matrix(D, M, 1.5);
        for (const BoundCase& c : consensus_bound_cases(sample, Wy, eta))
            result.consensus.record(c.lhs, c.rhs, cfg.slack);

        Tensor W = rand_matrix(D, M, 1.5);
        for (const BoundCase& c : diversity_bound_cases(sample, W, eta))
            result.diversity.record(c.lhs, c.rhs, cfg.slack);

        // attention deviation: features from the actual layer path
        Tensor Wx = rand_matrix(D, M, 1.0);
        Tensor Wyy = rand_matrix(D, M, 1.0);
        Tensor Wz = rand_matrix(D, M, 1.0);
        Features clean = eval_local_features(sample, sample.features, Wx, Wyy, Wz);
        Features noisy = eval_local_features(sample, add_noise(sample.features, eta), Wx, Wyy, Wz);
        for (const BoundCase& c :
             dca_bound_cases(clean.fx, clean.fy, clean.fz, noisy.fx, noisy.fy, noisy.fz))
            result.dca.record(c.lhs, c.rhs, cfg.slack);

        ++result.trials;
    }
    return result;
}

}  // namespace robustlab

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "graphio/pipeline.hpp"
#include "graphio/synthetic.hpp"
#include "robustlab/gamma.hpp"
#include "robustlab/hierarchy.hpp"
#include "robustlab/lemmas.hpp"

using namespace robustlab;
using numkit::Tensor;

TEST_CASE("perturb_features") {
    std::mt19937_64 seed_rng(4);
    Tensor X = Tensor::zeros(2, 3);
    for (double& v : X.data) v = 1.0;

    SUBCASE("zero sigma leaves X untouched") {
        NoiseSpec spec;
        spec.sigma = 0.0;
        auto [noisy, eta] = perturb_features(X, spec);
        CHECK(noisy.data == X.data);
        for (double v : eta.data) CHECK(v == 0.0);
    }
    SUBCASE("perfect correlation duplicates node noise") {
        NoiseSpec spec;
        spec.sigma = 0.7;
        spec.seed = 11;
        spec.rho = Tensor::full(2, 2, 1.0);
        auto [noisy, eta] = perturb_features(X, spec);
        (void)noisy;
        for (int j = 0; j < 3; ++j) CHECK(eta.at(0, j) == doctest::Approx(eta.at(1, j)).epsilon(1e-12));
    }
    SUBCASE("empirical node covariance matches rho") {
        int n = 3, D = 4;
        Tensor rho = Tensor::identity(n);
        rho.at(0, 1) = rho.at(1, 0) = 0.6;
        rho.at(1, 2) = rho.at(2, 1) = -0.5;
        NoiseSpec spec;
        spec.sigma = 1.3;
        spec.seed = 21;
        spec.rho = rho;
        NoiseSampler sampler(spec, n, D);
        std::vector<std::vector<double>> dots(static_cast<std::size_t>(n),
                                              std::vector<double>(static_cast<std::size_t>(n), 0.0));
        int trials = 100000;
        for (int trial = 0; trial < trials; ++trial) {
            Tensor eta = sampler.sample();
            for (int i = 0; i < n; ++i)
                for (int j = 0; j < n; ++j) {
                    double d = 0.0;
                    for (int c = 0; c < D; ++c) d += eta.at(i, c) * eta.at(j, c);
                    dots[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] += d;
                }
        }
        double denom = spec.sigma * spec.sigma * D * trials;
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j)
                CHECK(std::abs(dots[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] / denom -
                               rho.at(i, j)) <= 0.03);
    }
    SUBCASE("non-PSD rho rejected") {
        Tensor rho = Tensor::identity(3);
        rho.at(0, 1) = rho.at(1, 0) = 0.9;
        rho.at(1, 2) = rho.at(2, 1) = 0.9;
        rho.at(0, 2) = rho.at(2, 0) = -0.9;  // violates PSD
        NoiseSpec spec;
        spec.rho = rho;
        CHECK_THROWS_AS(NoiseSampler(spec, 3, 2), numkit::NumericError);
    }
}

TEST_CASE("empirical_lipschitz") {
    Tensor X = Tensor::zeros(1, 4);
    NoiseSpec spec;
    spec.sigma = 0.5;
    spec.seed = 3;

    SUBCASE("identity map has ratio exactly one") {
        auto est = empirical_lipschitz([](const Tensor& x) { return x; }, X, spec, 50);
        CHECK(est.trials_used == 50);
        for (double r : est.ratios) CHECK(r == doctest::Approx(1.0).epsilon(1e-12));
    }
    SUBCASE("constant map has ratio zero") {
        auto est = empirical_lipschitz([](const Tensor&) { return Tensor::zeros(2, 2); }, X, spec, 20);
        CHECK(est.mean == 0.0);
        CHECK(est.max == 0.0);
    }
    SUBCASE("linear map never exceeds its spectral norm and approaches it") {
        Tensor A = Tensor::matrix(2, 2, {2.0, 0.0, 0.0, 0.4});
        double sn = spectral_norm(A);
        CHECK(sn == doctest::Approx(2.0).epsilon(1e-10));
        Tensor X2 = Tensor::zeros(1, 2);
        auto f = [&](const Tensor& x) {
            numkit::Tape t;
            return t.value(t.matmul(t.constant(x), t.constant(A)));
        };
        auto est = empirical_lipschitz(f, X2, spec, 4000);
        CHECK(est.max <= sn + 1e-9);
        CHECK(est.max >= 0.98 * sn);
    }
}

TEST_CASE("spectral norm via power iteration") {
    std::mt19937_64 rng(8);
    std::uniform_real_distribution<double> d(-1, 1);
    Tensor A = Tensor::zeros(5, 3);
    for (double& v : A.data) v = d(rng);
    double sn = spectral_norm(A);
    // oracle: exhaustive unit-direction scan in 3D
    double best = 0.0;
    for (int a = 0; a < 160; ++a)
        for (int b = 0; b < 160; ++b) {
            double theta = a * M_PI / 160, phi = b * 2 * M_PI / 160;
            double v[3] = {std::sin(theta) * std::cos(phi), std::sin(theta) * std::sin(phi),
                           std::cos(theta)};
            double s = 0.0;
            for (int i = 0; i < 5; ++i) {
                double r = 0.0;
                for (int j = 0; j < 3; ++j) r += A.at(i, j) * v[j];
                s += r * r;
            }
            best = std::max(best, std::sqrt(s));
        }
    CHECK(sn == doctest::Approx(best).epsilon(1e-3));
    CHECK(sn >= best - 1e-9);
}

TEST_CASE("lemma bound equality case") {
    // single neighbor, identity projection, eta = (3,4): deviation is exactly 5
    graphio::GraphSample g;
    g.node_features = Tensor::matrix(2, 2, {0, 0, 1, 2});
    g.neighbors = {{1}, {0}};
    mplayers::PreparedSample s = mplayers::prepare_sample(g);

    Tensor eta = Tensor::zeros(2, 2);
    eta.at(1, 0) = 3.0;
    eta.at(1, 1) = 4.0;

    auto cases = consensus_bound_cases(s, Tensor::identity(2), eta);
    REQUIRE(cases.size() == 2);
    CHECK(cases[0].lhs == doctest::Approx(5.0).epsilon(1e-12));
    CHECK(cases[0].rhs == doctest::Approx(5.0).epsilon(1e-9));
    CHECK(cases[0].lhs <= cases[0].rhs + 1e-9);
}

TEST_CASE("zero perturbation gives zero deviations") {
    graphio::GraphSample g;
    g.node_features = Tensor::matrix(3, 2, {1, 0, 0, 1, 1, 1});
    g.neighbors = {{1, 2}, {0}, {0}};
    mplayers::PreparedSample s = mplayers::prepare_sample(g);
    Tensor eta = Tensor::zeros(3, 2);
    for (const auto& c : consensus_bound_cases(s, Tensor::identity(2), eta)) CHECK(c.lhs == 0.0);
    for (const auto& c : diversity_bound_cases(s, Tensor::identity(2), eta)) CHECK(c.lhs == 0.0);
}

TEST_CASE("lemma suite: 1000 randomized trials, zero violations") {
    LemmaSuiteConfig cfg;
    cfg.trials = 1000;
    cfg.seed = 2024;
    LemmaSuiteResult r = run_lemma_suite(cfg);
    CHECK(r.trials == 1000);
    CHECK(r.consensus.checks > 1000);
    CHECK(r.diversity.checks > 1000);
    CHECK(r.dca.checks > 1000);
    CHECK(r.consensus.violations == 0);
    CHECK(r.diversity.violations == 0);
    CHECK(r.dca.violations == 0);
}

TEST_CASE("amplification factors") {
    SUBCASE("hand values") {
        Tensor rho = Tensor::full(2, 2, 1.0);
        auto f = amplification_factors({0.5, 0.5}, rho);
        CHECK(f.gamma == doctest::Approx(1.22474).epsilon(1e-5));
        CHECK(f.gamma_pol == doctest::Approx(0.70711).epsilon(1e-5));
        CHECK_FALSE(f.clamped_gamma);
        CHECK_FALSE(f.clamped_pol);
    }
    SUBCASE("uncorrelated noise leaves both at one") {
        auto f = amplification_factors({0.3, 0.3, 0.4}, Tensor::identity(3));
        CHECK(f.gamma == 1.0);
        CHECK(f.gamma_pol == 1.0);
    }
    SUBCASE("gamma_pol never exceeds gamma") {
        std::mt19937_64 rng(12);
        std::uniform_real_distribution<double> d(-1, 1);
        for (int trial = 0; trial < 10000; ++trial) {
            int n = 2 + static_cast<int>(rng() % 4);
            std::vector<double> alphas(static_cast<std::size_t>(n));
            double sum = 0.0;
            for (double& a : alphas) {
                a = std::abs(d(rng));
                sum += a;
            }
            for (double& a : alphas) a /= std::max(sum, 1e-9);  // attention-like weights
            Tensor rho = Tensor::identity(n);
            for (int i = 0; i < n; ++i)
                for (int j = 0; j < i; ++j) rho.at(i, j) = rho.at(j, i) = d(rng);
            auto f = amplification_factors(alphas, rho);
            CHECK(f.gamma_pol <= f.gamma + 1e-12);
        }
    }
    SUBCASE("equality iff all cross terms vanish") {
        auto f = amplification_factors({1.0, 0.0}, Tensor::full(2, 2, 1.0));
        CHECK(f.gamma == f.gamma_pol);
    }
}

TEST_CASE("frozen PolaDCA twin tracks DCA exactly") {
    graphio::PreprocessConfig prep;
    prep.window_len = 60;
    prep.stride = 60;
    prep.k = 3;
    prep.segment_count = 6;

    graphio::Dataset records = graphio::generate_synthetic_dataset(3, 4, prep, 77);
    auto g = graphio::record_to_samples(records[0], prep)[0];
    mplayers::PreparedSample sample = mplayers::prepare_sample(g);

    mplayers::ModelConfig cfg;
    cfg.d_model = 8;
    cfg.n_layers = 2;
    cfg.n_heads = 2;
    cfg.n_classes = 3;
    cfg.classifier_dims = {12, 6};
    cfg.scheme = mplayers::Scheme::DCA;
    cfg.seed = 5;
    mplayers::Model dca(cfg, sample.features.cols());
    mplayers::Model twin = frozen_pola_twin(dca);

    Tensor a = mplayers::infer(dca, sample).logits;
    Tensor b = mplayers::infer(twin, sample, mplayers::Activation::Identity).logits;
    for (std::size_t i = 0; i < a.data.size(); ++i) CHECK(std::abs(a.data[i] - b.data[i]) <= 1e-10);
}

TEST_CASE("hierarchy experiment smoke run") {
    HierarchyConfig cfg;
    cfg.n_seeds = 1;
    cfg.n_classes = 3;
    cfg.samples_per_class = 12;
    cfg.prep.window_len = 120;
    cfg.prep.stride = 120;
    cfg.prep.segment_count = 10;
    cfg.prep.k = 3;
    cfg.d_model = 8;
    cfg.n_heads = 2;
    cfg.n_layers = 2;
    cfg.epochs = 2;
    cfg.eval_trials = 6;
    cfg.eval_samples = 2;

    RobustnessReport r = hierarchy_experiment(cfg);
    REQUIRE(r.rows.size() == 1);
    CHECK_FALSE(r.rows[0].diverged);
    CHECK(r.rows[0].gcn > 0.0);
    CHECK(r.rows[0].dca > 0.0);
    CHECK(r.rows[0].pola > 0.0);
    CHECK(r.reduction_gap <= 1e-10);
    nlohmann::json j = r.to_json();
    CHECK(j.contains("seeds"));
    CHECK(j.contains("median"));
}

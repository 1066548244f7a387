#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstring>

#include "diagnose/stream.hpp"
#include "graphio/pipeline.hpp"
#include "graphio/synthetic.hpp"
#include "trainer/fit.hpp"

using namespace diagnose;
using graphio::PreprocessConfig;
using mplayers::Model;
using mplayers::ModelConfig;
using numkit::Tensor;

namespace {

PreprocessConfig small_prep() {
    PreprocessConfig p;
    p.window_len = 60;
    p.stride = 30;
    p.k = 2;
    p.node_mode = graphio::NodeMode::Segments;
    p.segment_count = 6;
    return p;
}

Model small_model(const PreprocessConfig& prep, int channels, mplayers::Scheme scheme) {
    ModelConfig cfg;
    cfg.d_model = 8;
    cfg.n_layers = 2;
    cfg.n_heads = 2;
    cfg.n_classes = 3;
    cfg.classifier_dims = {12, 6};
    cfg.scheme = scheme;
    cfg.seed = 77;
    int D = channels * prep.window_len / prep.segment_count;
    return Model(cfg, D);
}

}  // namespace

TEST_CASE("map_decision") {
    auto [c1, p1] = map_decision(Tensor::row({2, 1, 0}));
    CHECK(c1 == 0);

    auto [c2, p2] = map_decision(Tensor::row({0, 0, 0}));
    CHECK(c2 == 0);  // tie goes to the lowest index
    for (double p : p2) CHECK(p == doctest::Approx(1.0 / 3).epsilon(1e-14));

    // shift invariance of the argmax and posterior
    auto [c3, p3] = map_decision(Tensor::row({1.5, -0.5, 0.25}));
    auto [c4, p4] = map_decision(Tensor::row({101.5, 99.5, 100.25}));
    CHECK(c3 == c4);
    for (std::size_t i = 0; i < p3.size(); ++i) CHECK(std::abs(p3[i] - p4[i]) <= 1e-12);

    double sum = 0.0;
    for (double p : p3) sum += p;
    CHECK(std::abs(sum - 1.0) <= 1e-12);
    CHECK(std::max_element(p3.begin(), p3.end()) - p3.begin() == c3);
}

TEST_CASE("stream emission counts and timestamps") {
    PreprocessConfig prep = small_prep();
    Model m = small_model(prep, 2, mplayers::Scheme::PolaDCA);

    SUBCASE("length T+s gives exactly two emissions at t=0 and t=s") {
        Tensor stream = Tensor::zeros(2, prep.window_len + prep.stride);
        std::mt19937_64 rng(1);
        std::uniform_real_distribution<double> d(-1, 1);
        for (double& v : stream.data) v = d(rng);
        auto decisions = run_stream(m, prep, stream, prep.window_len, prep.stride);
        REQUIRE(decisions.size() == 2);
        CHECK(decisions[0].t == 0);
        CHECK(decisions[1].t == prep.stride);
        CHECK(decisions[0].gate_weights.size() == 3);  // E experts
    }
    SUBCASE("shorter than T emits nothing") {
        Tensor stream = Tensor::zeros(2, prep.window_len - 1);
        for (int i = 0; i < stream.cols(); ++i) stream.at(0, i) = i;
        auto decisions = run_stream(m, prep, stream, prep.window_len, prep.stride);
        CHECK(decisions.empty());
    }
    SUBCASE("timestamps form an arithmetic sequence") {
        Tensor stream = Tensor::zeros(2, prep.window_len + 5 * prep.stride + 3);
        std::mt19937_64 rng(2);
        std::uniform_real_distribution<double> d(-1, 1);
        for (double& v : stream.data) v = d(rng);
        auto decisions = run_stream(m, prep, stream, prep.window_len, prep.stride);
        REQUIRE(decisions.size() == 6);
        for (std::size_t i = 0; i < decisions.size(); ++i)
            CHECK(decisions[i].t == static_cast<long>(i) * prep.stride);
    }
}

TEST_CASE("stream path matches batch path bit-for-bit") {
    PreprocessConfig prep = small_prep();
    graphio::Dataset records = graphio::generate_synthetic_dataset(3, 6, prep, 5);
    // make one record long enough for several windows
    graphio::SignalRecord rec = records[0];
    {
        graphio::SyntheticConfig scfg;
        scfg.n_classes = 3;
        scfg.samples_per_class = 1;
        scfg.channels = 2;
        scfg.length = prep.window_len + 3 * prep.stride;
        rec = graphio::generate_synthetic_dataset(scfg, 9)[1];
    }

    for (auto scheme : {mplayers::Scheme::PolaDCA, mplayers::Scheme::GCN}) {
        Model m = small_model(prep, 2, scheme);

        // batch path
        std::vector<Tensor> batch_logits;
        for (const auto& g : graphio::record_to_samples(rec, prep))
            batch_logits.push_back(mplayers::infer(m, mplayers::prepare_sample(g)).logits);

        // stream path over the same raw rows
        auto decisions = run_stream(m, prep, rec.channels, prep.window_len, prep.stride);
        REQUIRE(decisions.size() == batch_logits.size());
        for (std::size_t i = 0; i < decisions.size(); ++i) {
            auto [cls, post] = map_decision(batch_logits[i]);
            CHECK(cls == decisions[i].fault_class);
            REQUIRE(post.size() == decisions[i].posterior.size());
            CHECK(std::memcmp(post.data(), decisions[i].posterior.data(),
                              post.size() * sizeof(double)) == 0);
        }
    }
}

TEST_CASE("preprocessing mismatch is a hard error at start") {
    PreprocessConfig prep = small_prep();
    Model m = small_model(prep, 2, mplayers::Scheme::DCA);

    CHECK_THROWS_AS(StreamDiagnoser(m, prep, prep.window_len + 10, prep.stride), numkit::ConfigError);

    // channel mismatch surfaces on the first step
    StreamDiagnoser sd(m, prep, prep.window_len, prep.stride);
    CHECK_THROWS_AS(sd.push({1.0, 2.0, 3.0}), numkit::ConfigError);
}

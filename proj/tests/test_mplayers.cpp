#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "graphio/pipeline.hpp"
#include "mplayers/model.hpp"
#include "numkit/gradcheck.hpp"

using namespace mplayers;
using numkit::Tape;
using numkit::Tensor;
using numkit::Var;

namespace {

Tensor random_tensor(int r, int c, std::mt19937_64& rng, double scale = 1.0) {
    std::uniform_real_distribution<double> d(-scale, scale);
    Tensor t = Tensor::zeros(r, c);
    for (double& v : t.data) v = d(rng);
    return t;
}

graphio::GraphSample random_graph(int n, int D, int k, std::mt19937_64& rng) {
    graphio::GraphSample s;
    s.node_features = random_tensor(n, D, rng);
    s.neighbors = graphio::build_knn_graph(s.node_features, k);
    s.label = 0;
    return s;
}

double max_abs_diff(const Tensor& a, const Tensor& b) {
    REQUIRE(a.data.size() == b.data.size());
    double m = 0.0;
    for (std::size_t i = 0; i < a.data.size(); ++i) m = std::max(m, std::abs(a.data[i] - b.data[i]));
    return m;
}

}  // namespace

TEST_CASE("local_features") {
    SUBCASE("single neighbor yields zero diversity") {
        // node 0's only neighbor is node 1
        graphio::GraphSample s;
        s.node_features = Tensor::matrix(2, 2, {1, 1, 3, 3});
        s.neighbors = {{1}, {0}};
        PreparedSample p = prepare_sample(s);
        Tape t;
        TopoVars topo = load_topology(t, p.topo);
        Var I = t.constant(Tensor::identity(2));
        LocalFeatureVars f = local_features(t, t.constant(p.features), topo, I, I, I);
        CHECK(t.value(f.Fx).at(0, 0) == 1.0);
        CHECK(t.value(f.Fy).at(0, 0) == 3.0);
        CHECK(t.value(f.Fy).at(0, 1) == 3.0);
        CHECK(t.value(f.Fz).at(0, 0) == 0.0);
        CHECK(t.value(f.Fz).at(0, 1) == 0.0);
    }
    SUBCASE("two neighbors give the sample standard deviation") {
        graphio::GraphSample s;
        s.node_features = Tensor::matrix(3, 2, {0, 0, 1, 1, 3, 3});
        s.neighbors = {{1, 2}, {0, 2}, {0, 1}};
        PreparedSample p = prepare_sample(s);
        Tape t;
        TopoVars topo = load_topology(t, p.topo);
        Var I = t.constant(Tensor::identity(2));
        LocalFeatureVars f = local_features(t, t.constant(p.features), topo, I, I, I);
        CHECK(t.value(f.Fy).at(0, 0) == doctest::Approx(2.0).epsilon(1e-14));
        CHECK(t.value(f.Fz).at(0, 0) == doctest::Approx(std::sqrt(2.0)).epsilon(1e-12));
        CHECK(t.value(f.Fz).at(0, 1) == doctest::Approx(std::sqrt(2.0)).epsilon(1e-12));
    }
    SUBCASE("all-zero inputs stay zero") {
        graphio::GraphSample s;
        s.node_features = Tensor::zeros(3, 2);
        s.neighbors = {{1, 2}, {0, 2}, {0, 1}};
        PreparedSample p = prepare_sample(s);
        Tape t;
        TopoVars topo = load_topology(t, p.topo);
        Var I = t.constant(Tensor::identity(2));
        LocalFeatureVars f = local_features(t, t.constant(p.features), topo, I, I, I);
        for (double v : t.value(f.Fx).data) CHECK(v == 0.0);
        for (double v : t.value(f.Fy).data) CHECK(v == 0.0);
        for (double v : t.value(f.Fz).data) CHECK(v == 0.0);
    }
    SUBCASE("isolated node rejected") {
        Tape t;
        Topology topo = build_topology({{1}, {0}, {}});  // node 2 isolated
        TopoVars tv = load_topology(t, topo);
        Var I = t.constant(Tensor::identity(2));
        CHECK_THROWS_AS(local_features(t, t.constant(Tensor::zeros(3, 2)), tv, I, I, I),
                        numkit::ConfigError);
    }
}

TEST_CASE("dca_attend") {
    SUBCASE("zero logits average V") {
        Tape t;
        Var Q = t.constant(Tensor::zeros(3, 2));
        Var K = t.constant(Tensor::zeros(3, 2));
        Var V = t.constant(Tensor::matrix(3, 2, {1, 2, 3, 4, 5, 6}));
        Var out = dca_attend(t, Q, K, V, 1);
        for (int i = 0; i < 3; ++i) {
            CHECK(t.value(out).at(i, 0) == doctest::Approx(3.0).epsilon(1e-14));
            CHECK(t.value(out).at(i, 1) == doctest::Approx(4.0).epsilon(1e-14));
        }
    }
    SUBCASE("single node passes V through") {
        Tape t;
        Var Q = t.constant(Tensor::row({0.3}));
        Var K = t.constant(Tensor::row({-2.0}));
        Var V = t.constant(Tensor::row({7.5}));
        CHECK(t.value(dca_attend(t, Q, K, V, 1)).data[0] == 7.5);
    }
    SUBCASE("hand-computed softmax row") {
        Tape t;
        Var Q = t.constant(Tensor::matrix(2, 1, {1, 0}));
        Var K = t.constant(Tensor::matrix(2, 1, {1, 0}));
        Var V = t.constant(Tensor::matrix(2, 2, {1, 0, 0, 1}));
        Var out = dca_attend(t, Q, K, V, 1);
        CHECK(t.value(out).at(0, 0) == doctest::Approx(0.73106).epsilon(1e-5));
        CHECK(t.value(out).at(0, 1) == doctest::Approx(0.26894).epsilon(1e-5));
    }
    SUBCASE("attention rows sum to one") {
        std::mt19937_64 rng(3);
        Tape t;
        Var Q = t.constant(random_tensor(5, 4, rng));
        Var K = t.constant(random_tensor(5, 4, rng));
        Var scores = t.scale(t.matmul(Q, t.transpose(K)), 0.5);
        const Tensor& P = t.value(t.row_softmax(scores));
        for (int i = 0; i < 5; ++i) {
            double s = 0.0;
            for (int j = 0; j < 5; ++j) s += P.at(i, j);
            CHECK(std::abs(s - 1.0) <= 1e-12);
        }
    }
}

TEST_CASE("polar_decompose identities") {
    std::mt19937_64 rng(9);
    Tensor x = random_tensor(4, 5, rng, 3.0);
    Tape t;
    Var xv = t.constant(x);
    auto [pos, neg] = polar_decompose(t, xv);
    const Tensor& p = t.value(pos);
    const Tensor& n = t.value(neg);
    for (std::size_t i = 0; i < x.data.size(); ++i) {
        CHECK(p.data[i] - n.data[i] == x.data[i]);  // exact reconstruction
        CHECK(p.data[i] * n.data[i] == 0.0);        // disjoint support
        CHECK(p.data[i] >= 0.0);
        CHECK(n.data[i] >= 0.0);
    }

    Tape t2;
    auto [p3, n3] = polar_decompose(t2, t2.constant(Tensor::row({1, -2, 0})));
    CHECK(t2.value(p3).data == std::vector<double>{1, 0, 0});
    CHECK(t2.value(n3).data == std::vector<double>{0, 2, 0});
}

TEST_CASE("polar_scores") {
    auto make_weights = [](Tape& t, double pp, double nn, double pn, double np, int H) {
        PolarWeights w;
        w.wpp = t.constant(Tensor::full(1, H, pp));
        w.wnn = t.constant(Tensor::full(1, H, nn));
        w.wpn = t.constant(Tensor::full(1, H, pn));
        w.wnp = t.constant(Tensor::full(1, H, np));
        return w;
    };

    SUBCASE("hand-evaluated single row") {
        Tape t;
        Var Q = t.constant(Tensor::matrix(1, 2, {1, -1}));
        Var K = t.constant(Tensor::matrix(1, 2, {1, -1}));
        PolarWeights w = make_weights(t, 1, 1, -1, -1, 1);
        // head width 2 here; the spec's d_k = 4 variant is the same formula
        // with explicit scale, checked via the raw channels below
        Var acom = polar_scores(t, Q, K, w, 1);
        CHECK(t.value(acom).data[0] == doctest::Approx(2.0 / std::sqrt(2.0)).epsilon(1e-14));

        auto [qp, qn] = polar_decompose(t, Q);
        auto [kp, kn] = polar_decompose(t, K);
        double inv = 1.0 / std::sqrt(4.0);
        Var app = t.scale(t.matmul(qp, t.transpose(kp)), inv);
        Var ann = t.scale(t.matmul(qn, t.transpose(kn)), inv);
        Var apn = t.scale(t.matmul(qp, t.transpose(kn)), inv);
        Var anp = t.scale(t.matmul(qn, t.transpose(kp)), inv);
        CHECK(t.value(app).data[0] == 0.5);
        CHECK(t.value(ann).data[0] == 0.5);
        CHECK(t.value(apn).data[0] == 0.0);
        CHECK(t.value(anp).data[0] == 0.0);
        double acom_dk4 = t.value(app).data[0] + t.value(ann).data[0] - t.value(apn).data[0] -
                          t.value(anp).data[0];
        CHECK(acom_dk4 == 1.0);
    }
    SUBCASE("(1,1,-1,-1) reduces to plain scores") {
        std::mt19937_64 rng(31);
        Tape t;
        Var Q = t.constant(random_tensor(6, 8, rng, 2.0));
        Var K = t.constant(random_tensor(6, 8, rng, 2.0));
        PolarWeights w = make_weights(t, 1, 1, -1, -1, 2);
        Var acom = polar_scores(t, Q, K, w, 2);  // 6 x 12 (two heads side by side)
        int dk = 4;
        for (int h = 0; h < 2; ++h) {
            Var Qh = t.slice_cols(Q, h * dk, (h + 1) * dk);
            Var Kh = t.slice_cols(K, h * dk, (h + 1) * dk);
            Var plain = t.scale(t.matmul(Qh, t.transpose(Kh)), 1.0 / std::sqrt(4.0));
            Var got = t.slice_cols(acom, h * 6, (h + 1) * 6);
            CHECK(max_abs_diff(t.value(got), t.value(plain)) <= 1e-12);
        }
    }
    SUBCASE("nonnegative inputs with (1,0,0,0) reduce to plain scores") {
        std::mt19937_64 rng(32);
        Tape t;
        Tensor q = random_tensor(4, 4, rng);
        Tensor k = random_tensor(4, 4, rng);
        for (double& v : q.data) v = std::abs(v);
        for (double& v : k.data) v = std::abs(v);
        Var Q = t.constant(q);
        Var K = t.constant(k);
        PolarWeights w = make_weights(t, 1, 0, 0, 0, 1);
        Var acom = polar_scores(t, Q, K, w, 1);
        Var plain = t.scale(t.matmul(Q, t.transpose(K)), 0.5);
        CHECK(max_abs_diff(t.value(acom), t.value(plain)) <= 1e-12);
    }
}

TEST_CASE("poladca_attend") {
    SUBCASE("reduction identity to dca_attend") {
        std::mt19937_64 rng(41);
        for (int trial = 0; trial < 5; ++trial) {
            int H = trial % 2 == 0 ? 1 : 4;
            int M = 8;
            Tape t;
            Var Q = t.constant(random_tensor(5, M, rng, 2.0));
            Var K = t.constant(random_tensor(5, M, rng, 2.0));
            Var V = t.constant(random_tensor(5, M, rng, 2.0));
            PolarWeights w;
            w.wpp = t.constant(Tensor::full(1, H, 1.0));
            w.wnn = t.constant(Tensor::full(1, H, 1.0));
            w.wpn = t.constant(Tensor::full(1, H, -1.0));
            w.wnp = t.constant(Tensor::full(1, H, -1.0));
            Var Wo = t.constant(Tensor::identity(M));
            Var pola = poladca_attend(t, Q, K, V, w, Wo, H, Activation::Identity);
            Var dca = dca_attend(t, Q, K, V, H);
            CHECK(max_abs_diff(t.value(pola), t.value(dca)) <= 1e-12);
        }
    }
    SUBCASE("single node returns its value row") {
        Tape t;
        Var Q = t.constant(Tensor::row({0.5, -0.5}));
        Var K = t.constant(Tensor::row({1.0, 2.0}));
        Var V = t.constant(Tensor::row({3.0, -4.0}));
        PolarWeights w;
        w.wpp = t.constant(Tensor::row({1.0}));
        w.wnn = t.constant(Tensor::row({1.0}));
        w.wpn = t.constant(Tensor::row({-1.0}));
        w.wnp = t.constant(Tensor::row({-1.0}));
        Var Wo = t.constant(Tensor::identity(2));
        Var out = poladca_attend(t, Q, K, V, w, Wo, 1, Activation::Identity);
        CHECK(t.value(out).data == std::vector<double>{3.0, -4.0});
    }
    SUBCASE("head arithmetic") {
        CHECK(64 / 4 == 16);  // d_model 64, 4 heads
        Tape t;
        Var Q = t.constant(Tensor::zeros(2, 6));
        CHECK_THROWS_AS(dca_attend(t, Q, Q, Q, 4), numkit::NumericError);
    }
}

TEST_CASE("dual_path_fuse") {
    std::mt19937_64 rng(55);
    int n = 4, M = 6;
    graphio::GraphSample g = random_graph(n, M, 2, rng);
    PreparedSample p = prepare_sample(g);

    Tape t;
    TopoVars topo = load_topology(t, p.topo);
    Var Wx = t.constant(random_tensor(M, M, rng));
    Var Wy = t.constant(random_tensor(M, M, rng));
    Var Wz = t.constant(random_tensor(M, M, rng));
    LocalFeatureVars f = local_features(t, t.constant(p.features), topo, Wx, Wy, Wz);
    AttendFn attend = [](Tape& tp, Var q, Var k, Var v) { return dca_attend(tp, q, k, v, 2); };

    SUBCASE("zero gate parameters average the two paths") {
        Var Wg = t.constant(Tensor::zeros(M, 2 * M));
        Var bg = t.constant(Tensor::zeros(1, M));
        Var fused = dual_path_fuse(t, f, Wg, bg, attend);
        Var p1 = attend(t, f.Fx, f.Fy, f.Fz);
        Var p2 = attend(t, f.Fx, f.Fz, f.Fy);
        Var avg = t.scale(t.add(p1, p2), 0.5);
        CHECK(max_abs_diff(t.value(fused), t.value(avg)) <= 1e-14);
    }
    SUBCASE("identical paths make the gate irrelevant") {
        Var Wg = t.constant(random_tensor(M, 2 * M, rng));
        Var bg = t.constant(random_tensor(1, M, rng));
        // an attend that ignores K and V makes path1 == path2
        AttendFn same = [](Tape& tp, Var q, Var k, Var v) {
            (void)k;
            (void)v;
            return dca_attend(tp, q, q, q, 1);
        };
        Var fused = dual_path_fuse(t, f, Wg, bg, same);
        Var p1 = dca_attend(t, f.Fx, f.Fx, f.Fx, 1);
        CHECK(max_abs_diff(t.value(fused), t.value(p1)) <= 1e-13);
    }
    SUBCASE("saturated gate selects path 1") {
        Var Wg = t.constant(Tensor::zeros(M, 2 * M));
        Var bg = t.constant(Tensor::full(1, M, 100.0));
        Var fused = dual_path_fuse(t, f, Wg, bg, attend);
        Var p1 = attend(t, f.Fx, f.Fy, f.Fz);
        CHECK(max_abs_diff(t.value(fused), t.value(p1)) <= 1e-10);
    }
}

TEST_CASE("expert_fusion") {
    std::mt19937_64 rng(66);
    int n = 3, M = 4, E = 3;
    Tensor fx = random_tensor(n, M, rng);
    Tensor fused = random_tensor(n, M, rng);

    auto zero_experts = [&](Tape& t) {
        std::vector<ExpertVars> ex(static_cast<std::size_t>(E));
        for (auto& e : ex) {
            e.W1 = t.constant(Tensor::zeros(M, M));
            e.b1 = t.constant(Tensor::zeros(1, M));
            e.W2 = t.constant(Tensor::zeros(M, M));
            e.b2 = t.constant(Tensor::zeros(1, M));
            e.route = t.constant(Tensor::zeros(M, 1));
        }
        return ex;
    };

    SUBCASE("zeroed experts preserve Fx exactly") {
        Tape t;
        ExpertOutput out = expert_fusion(t, t.constant(fx), t.constant(fused), zero_experts(t));
        CHECK(t.value(out.out).data == fx.data);
    }
    SUBCASE("zero routing gives uniform weights and alpha one half") {
        Tape t;
        auto ex = zero_experts(t);
        // nonzero expert bodies, zero routing vectors
        for (auto& e : ex) {
            e.W1 = t.constant(random_tensor(M, M, rng));
            e.W2 = t.constant(random_tensor(M, M, rng));
        }
        ExpertOutput out = expert_fusion(t, t.constant(fx), t.constant(fused), ex);
        const Tensor& w = t.value(out.weights);
        for (int i = 0; i < n; ++i)
            for (int e = 0; e < E; ++e) CHECK(w.at(i, e) == doctest::Approx(1.0 / 3).epsilon(1e-14));
        // alpha = sigmoid(0) = 0.5: verify via the identity-expert shortcut
        Tape t2;
        std::vector<ExpertVars> one(1);
        one[0].W1 = t2.constant(Tensor::identity(M));
        one[0].b1 = t2.constant(Tensor::zeros(1, M));
        one[0].W2 = t2.constant(Tensor::identity(M));
        one[0].b2 = t2.constant(Tensor::zeros(1, M));
        one[0].route = t2.constant(Tensor::zeros(M, 1));
        ExpertOutput o2 = expert_fusion(t2, t2.constant(fx), t2.constant(fused), one);
        for (std::size_t i = 0; i < fx.data.size(); ++i)
            CHECK(t2.value(o2.out).data[i] == doctest::Approx(fx.data[i] + 0.5 * fused.data[i]).epsilon(1e-14));
    }
}

TEST_CASE("gcn_layer") {
    SUBCASE("two connected nodes share features evenly") {
        Tape t;
        Topology topo = build_topology({{1}, {0}});
        TopoVars tv = load_topology(t, topo);
        Var X = t.constant(Tensor::matrix(2, 2, {1, 0, 0, 1}));
        Var W = t.constant(Tensor::identity(2));
        Var out = gcn_layer(t, X, tv, W, Activation::Identity);
        for (double v : t.value(out).data) CHECK(v == doctest::Approx(0.5).epsilon(1e-14));
    }
    SUBCASE("isolated node with self-loop keeps its feature") {
        Tape t;
        Topology topo = build_topology({{}});
        TopoVars tv = load_topology(t, topo);
        Var X = t.constant(Tensor::row({2.5, -1.5}));
        Var W = t.constant(Tensor::identity(2));
        Var out = gcn_layer(t, X, tv, W, Activation::Identity);
        CHECK(t.value(out).data == std::vector<double>{2.5, -1.5});
    }
    SUBCASE("zero weights give sigma(0)") {
        Tape t;
        Topology topo = build_topology({{1}, {0}});
        TopoVars tv = load_topology(t, topo);
        Var X = t.constant(Tensor::matrix(2, 2, {1, 2, 3, 4}));
        Var W = t.constant(Tensor::zeros(2, 2));
        Var out = gcn_layer(t, X, tv, W, Activation::Relu);
        for (double v : t.value(out).data) CHECK(v == 0.0);
    }
}

TEST_CASE("gat_layer") {
    std::mt19937_64 rng(77);
    SUBCASE("zero attention vector averages neighbors") {
        Tape t;
        Topology topo = build_topology({{1, 2}, {0}, {0}});
        TopoVars tv = load_topology(t, topo);
        Tensor x = random_tensor(3, 2, rng);
        Var X = t.constant(x);
        Var W = t.constant(Tensor::identity(2));
        Var a = t.constant(Tensor::zeros(1, 4));
        Var out = gat_layer(t, X, tv, W, a, Activation::Identity);
        CHECK(t.value(out).at(0, 0) == doctest::Approx(0.5 * (x.at(1, 0) + x.at(2, 0))).epsilon(1e-12));
        CHECK(t.value(out).at(1, 0) == doctest::Approx(x.at(0, 0)).epsilon(1e-12));
    }
    SUBCASE("single neighbor gets full attention") {
        Tape t;
        Topology topo = build_topology({{1}, {0}});
        TopoVars tv = load_topology(t, topo);
        Tensor x = random_tensor(2, 3, rng);
        Var X = t.constant(x);
        Var W = t.constant(Tensor::identity(3));
        Var a = t.constant(random_tensor(1, 6, rng));
        Var out = gat_layer(t, X, tv, W, a, Activation::Identity);
        for (int j = 0; j < 3; ++j) CHECK(t.value(out).at(0, j) == doctest::Approx(x.at(1, j)).epsilon(1e-12));
    }
    SUBCASE("leaky slope") {
        Tape t;
        Var v = t.leaky_relu(t.constant(Tensor::row({-1.0})), kLeakySlope);
        CHECK(t.value(v).data[0] == doctest::Approx(-0.2).epsilon(1e-15));
    }
    SUBCASE("isolated node rejected") {
        Tape t;
        Topology topo = build_topology({{1}, {0}, {}});
        TopoVars tv = load_topology(t, topo);
        Var X = t.constant(Tensor::zeros(3, 2));
        Var W = t.constant(Tensor::identity(2));
        Var a = t.constant(Tensor::zeros(1, 4));
        CHECK_THROWS_AS(gat_layer(t, X, tv, W, a, Activation::Identity), numkit::ConfigError);
    }
}

TEST_CASE("sca_attend") {
    std::mt19937_64 rng(88);
    SUBCASE("zero query projection averages V") {
        Tape t;
        Tensor y = random_tensor(4, 3, rng);
        Var XE = t.constant(random_tensor(2, 3, rng));
        Var YD = t.constant(y);
        Var Wq = t.constant(Tensor::zeros(3, 3));
        Var Wk = t.constant(random_tensor(3, 3, rng));
        Var Wv = t.constant(Tensor::identity(3));
        Var out = sca_attend(t, XE, YD, Wq, Wk, Wv);
        for (int j = 0; j < 3; ++j) {
            double mean = 0.0;
            for (int i = 0; i < 4; ++i) mean += y.at(i, j);
            mean /= 4;
            CHECK(t.value(out).at(0, j) == doctest::Approx(mean).epsilon(1e-12));
        }
    }
    SUBCASE("single context row is passed through") {
        Tape t;
        Tensor y = random_tensor(1, 3, rng);
        Var out = sca_attend(t, t.constant(random_tensor(3, 3, rng)), t.constant(y),
                             t.constant(Tensor::identity(3)), t.constant(Tensor::identity(3)),
                             t.constant(Tensor::identity(3)));
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 3; ++j) CHECK(t.value(out).at(i, j) == y.at(0, j));
    }
    SUBCASE("matches the dca_attend numeric case with identity projections") {
        Tape t;
        Var X = t.constant(Tensor::matrix(2, 1, {1, 0}));
        Var I = t.constant(Tensor::identity(1));
        Var out = sca_attend(t, X, X, I, I, t.constant(Tensor::identity(1)));
        // V = X here, so row 0 = 0.73106*1 + 0.26894*0
        CHECK(t.value(out).at(0, 0) == doctest::Approx(0.73106).epsilon(1e-5));
    }
}

TEST_CASE("flop model") {
    CHECK(flop_count(Scheme::SCA, 10, 64) == 12800);
    CHECK(flop_count(Scheme::DCA, 10, 64) == 94720);
    CHECK(flop_count(Scheme::PolaDCA, 10, 64) == 97280);
    CHECK_THROWS_AS(flop_count(Scheme::SCA, 0, 4), numkit::ConfigError);

    std::mt19937_64 rng(5);
    for (int trial = 0; trial < 20; ++trial) {
        long long n = 1 + static_cast<long long>(rng() % 500);
        long long D = 1 + static_cast<long long>(rng() % 500);
        CHECK(flop_count(Scheme::PolaDCA, n, D) - flop_count(Scheme::DCA, n, D) == 4 * n * D);
    }
}

TEST_CASE("permutation equivariance") {
    std::mt19937_64 rng(101);
    int n = 8, D = 6, M = 6;

    graphio::GraphSample g = random_graph(n, D, 3, rng);
    PreparedSample p = prepare_sample(g);

    std::vector<int> perm(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) perm[static_cast<std::size_t>(i)] = i;
    std::shuffle(perm.begin(), perm.end(), rng);  // perm[old] = new

    graphio::GraphSample gp;
    gp.node_features = Tensor::zeros(n, D);
    gp.neighbors.assign(static_cast<std::size_t>(n), {});
    for (int i = 0; i < n; ++i) {
        int pi = perm[static_cast<std::size_t>(i)];
        for (int j = 0; j < D; ++j) gp.node_features.at(pi, j) = g.node_features.at(i, j);
        for (int nb : g.neighbors[static_cast<std::size_t>(i)])
            gp.neighbors[static_cast<std::size_t>(pi)].push_back(perm[static_cast<std::size_t>(nb)]);
    }
    for (auto& lst : gp.neighbors) std::sort(lst.begin(), lst.end());
    PreparedSample pp = prepare_sample(gp);

    Tensor W = random_tensor(D, M, rng);
    Tensor Wy = random_tensor(D, M, rng);
    Tensor Wz = random_tensor(D, M, rng);
    Tensor a = random_tensor(1, 2 * M, rng);

    auto run_layer = [&](const PreparedSample& ps, auto fn) {
        Tape t;
        TopoVars topo = load_topology(t, ps.topo);
        Var X = t.constant(ps.features);
        return fn(t, X, topo);
    };

    SUBCASE("gcn bit-exact") {
        auto gcn = [&](Tape& t, Var X, TopoVars& topo) {
            Tensor out = t.value(gcn_layer(t, X, topo, t.constant(W), Activation::Relu));
            return out;
        };
        Tensor base = run_layer(p, gcn);
        Tensor permuted = run_layer(pp, gcn);
        for (int i = 0; i < n; ++i) {
            int pi = perm[static_cast<std::size_t>(i)];
            for (int j = 0; j < M; ++j) CHECK(permuted.at(pi, j) == base.at(i, j));
        }
    }
    SUBCASE("attention layers within 1e-12") {
        auto dca = [&](Tape& t, Var X, TopoVars& topo) {
            LocalFeatureVars f =
                local_features(t, X, topo, t.constant(W), t.constant(Wy), t.constant(Wz));
            return t.value(dca_attend(t, f.Fx, f.Fy, f.Fz, 2));
        };
        Tensor base = run_layer(p, dca);
        Tensor permuted = run_layer(pp, dca);
        for (int i = 0; i < n; ++i) {
            int pi = perm[static_cast<std::size_t>(i)];
            for (int j = 0; j < M; ++j)
                CHECK(std::abs(permuted.at(pi, j) - base.at(i, j)) <= 1e-12);
        }

        auto gat = [&](Tape& t, Var X, TopoVars& topo) {
            return t.value(gat_layer(t, X, topo, t.constant(W), t.constant(a), Activation::Relu));
        };
        Tensor gbase = run_layer(p, gat);
        Tensor gperm = run_layer(pp, gat);
        for (int i = 0; i < n; ++i) {
            int pi = perm[static_cast<std::size_t>(i)];
            for (int j = 0; j < M; ++j) CHECK(std::abs(gperm.at(pi, j) - gbase.at(i, j)) <= 1e-12);
        }
    }
}

TEST_CASE("every layer passes grad_check on random 4-node graphs") {
    std::mt19937_64 rng(202);
    int n = 4, D = 3, M = 4;

    for (int trial = 0; trial < 5; ++trial) {
        graphio::GraphSample g = random_graph(n, D, 2, rng);
        PreparedSample p = prepare_sample(g);
        Topology topo = p.topo;
        Tensor X = p.features;

        Tensor Wx = random_tensor(D, M, rng), Wy = random_tensor(D, M, rng), Wz = random_tensor(D, M, rng);
        Tensor Wg = random_tensor(M, 2 * M, rng), bg = random_tensor(1, M, rng);
        Tensor a = random_tensor(1, 2 * M, rng);
        Tensor Wq = random_tensor(D, M, rng), Wk = random_tensor(D, M, rng), Wv = random_tensor(D, M, rng);

        // gradient w.r.t. the input features through the full DCA stack
        auto dca_loss = [&](Tape& t, Var x) {
            TopoVars tv = load_topology(t, topo);
            LocalFeatureVars f = local_features(t, x, tv, t.constant(Wx), t.constant(Wy), t.constant(Wz));
            AttendFn attend = [](Tape& tp, Var q, Var k, Var v) { return dca_attend(tp, q, k, v, 2); };
            Var fused = dual_path_fuse(t, f, t.constant(Wg), t.constant(bg), attend);
            std::vector<ExpertVars> ex(3);
            std::mt19937_64 erng(trial + 1);
            for (auto& e : ex) {
                e.W1 = t.constant(random_tensor(M, M, erng, 0.7));
                e.b1 = t.constant(random_tensor(1, M, erng, 0.2));
                e.W2 = t.constant(random_tensor(M, M, erng, 0.7));
                e.b2 = t.constant(random_tensor(1, M, erng, 0.2));
                e.route = t.constant(random_tensor(M, 1, erng, 0.7));
            }
            return t.sum(t.tanh(expert_fusion(t, f.Fx, fused, ex).out));
        };
        CHECK(numkit::grad_check(dca_loss, X) <= 1e-4);

        Tensor Wo = random_tensor(M, M, rng);
        auto pola_loss = [&](Tape& t, Var x) {
            TopoVars tv = load_topology(t, topo);
            LocalFeatureVars f = local_features(t, x, tv, t.constant(Wx), t.constant(Wy), t.constant(Wz));
            PolarWeights w;
            w.wpp = t.constant(Tensor::row({1.0, 0.8}));
            w.wnn = t.constant(Tensor::row({0.9, 1.1}));
            w.wpn = t.constant(Tensor::row({-0.7, -1.2}));
            w.wnp = t.constant(Tensor::row({-1.0, -0.6}));
            Var out = poladca_attend(t, f.Fx, f.Fy, f.Fz, w, t.constant(Wo), 2, Activation::Relu);
            return t.sum(t.sigmoid(out));
        };
        CHECK(numkit::grad_check(pola_loss, X) <= 1e-4);

        auto gcn_loss = [&](Tape& t, Var x) {
            TopoVars tv = load_topology(t, topo);
            return t.sum(t.tanh(gcn_layer(t, x, tv, t.constant(Wx), Activation::Relu)));
        };
        CHECK(numkit::grad_check(gcn_loss, X) <= 1e-4);

        auto gat_loss = [&](Tape& t, Var x) {
            TopoVars tv = load_topology(t, topo);
            return t.sum(t.tanh(gat_layer(t, x, tv, t.constant(Wx), t.constant(a), Activation::Relu)));
        };
        CHECK(numkit::grad_check(gat_loss, X) <= 1e-4);

        auto sca_loss = [&](Tape& t, Var x) {
            return t.sum(t.tanh(sca_attend(t, x, x, t.constant(Wq), t.constant(Wk), t.constant(Wv))));
        };
        CHECK(numkit::grad_check(sca_loss, X) <= 1e-4);
    }
}

TEST_CASE("model forward, checkpoint round trip") {
    std::mt19937_64 rng(303);
    graphio::GraphSample g = random_graph(6, 5, 2, rng);
    PreparedSample p = prepare_sample(g);

    ModelConfig cfg;
    cfg.d_model = 8;
    cfg.n_layers = 2;
    cfg.n_heads = 2;
    cfg.n_classes = 3;
    cfg.scheme = Scheme::PolaDCA;
    cfg.seed = 12;

    Model m(cfg, 5);
    Tape t;
    ModelVars mv = m.load(t, false);
    ForwardResult r = m.forward(t, mv, p);
    CHECK(t.value(r.logits).cols() == 3);
    CHECK(r.has_routing);
    CHECK(t.value(r.routing).cols() == cfg.n_experts);

    nlohmann::json ck = m.to_checkpoint();
    Model m2 = Model::from_checkpoint(nlohmann::json::parse(ck.dump()));
    Tape t2;
    ModelVars mv2 = m2.load(t2, false);
    ForwardResult r2 = m2.forward(t2, mv2, p);
    CHECK(t.value(r.logits).data == t2.value(r2.logits).data);

    // corrupt: drop a parameter
    nlohmann::json bad = ck;
    bad["params"].erase(bad["params"].begin());
    CHECK_THROWS_AS(Model::from_checkpoint(bad), numkit::ConfigError);
}

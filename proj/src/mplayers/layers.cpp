#include "mplayers/layers.hpp"

#include <cmath>

namespace mplayers {

using numkit::NumericError;
using numkit::Tensor;

std::string scheme_name(Scheme s) {
    switch (s) {
        case Scheme::GCN: return "gcn";
        case Scheme::GAT: return "gat";
        case Scheme::SCA: return "sca";
        case Scheme::DCA: return "dca";
        case Scheme::PolaDCA: return "poladca";
    }
    return "?";
}

Scheme scheme_from_name(const std::string& name) {
    if (name == "gcn") return Scheme::GCN;
    if (name == "gat") return Scheme::GAT;
    if (name == "sca") return Scheme::SCA;
    if (name == "dca") return Scheme::DCA;
    if (name == "poladca") return Scheme::PolaDCA;
    throw numkit::ConfigError("unknown scheme '" + name + "'");
}

LocalFeatureVars local_features(Tape& t, Var X, const TopoVars& topo, Var Wx, Var Wy, Var Wz) {
    const Tensor& deg = t.value(topo.deg);
    for (int i = 0; i < topo.n; ++i)
        if (topo.n >= 2 && deg.data[static_cast<std::size_t>(i)] < 1.0)
            throw numkit::ConfigError("local_features: node " + std::to_string(i) + " is isolated");

    LocalFeatureVars f;
    f.Fx = t.matmul(X, Wx);
    f.Fy = t.matmul(topo.avg, t.matmul(X, Wy));

    // sum_{j in N(i)} (z_j - Fy_i)^2 = [A z^2]_i - 2 Fy_i [A z]_i + deg_i Fy_i^2
    Var Z = t.matmul(X, Wz);
    Var s1 = t.matmul(topo.adj01, t.hadamard(Z, Z));
    Var s2 = t.hadamard(f.Fy, t.matmul(topo.adj01, Z));
    Var s3 = t.mul_colvec(t.hadamard(f.Fy, f.Fy), topo.deg);
    Var ssq = t.sub(t.add(s1, s3), t.scale(s2, 2.0));
    // 1/(|N|-1) normalization; |N|=1 rows are pinned to zero, and tiny
    // negative radicands from cancellation are clamped before the sqrt
    Var variance = t.relu(t.mul_colvec(ssq, topo.inv_nm1));
    f.Fz = t.sqrt(variance);
    return f;
}

namespace {

int head_width(const Tensor& q, int heads) {
    if (heads < 1) throw NumericError("attention: head count must be positive");
    if (q.cols() % heads != 0)
        throw NumericError("attention: width " + std::to_string(q.cols()) + " not divisible by " +
                           std::to_string(heads) + " heads");
    return q.cols() / heads;
}

}  // namespace

Var dca_attend(Tape& t, Var Q, Var K, Var V, int heads) {
    int dk = head_width(t.value(Q), heads);
    double inv_sqrt_dk = 1.0 / std::sqrt(static_cast<double>(dk));

    std::vector<Var> outs;
    outs.reserve(static_cast<std::size_t>(heads));
    for (int h = 0; h < heads; ++h) {
        Var Qh = heads == 1 ? Q : t.slice_cols(Q, h * dk, (h + 1) * dk);
        Var Kh = heads == 1 ? K : t.slice_cols(K, h * dk, (h + 1) * dk);
        Var Vh = heads == 1 ? V : t.slice_cols(V, h * dk, (h + 1) * dk);
        Var scores = t.scale(t.matmul(Qh, t.transpose(Kh)), inv_sqrt_dk);
        outs.push_back(t.matmul(t.row_softmax(scores), Vh));
    }
    return heads == 1 ? outs[0] : t.concat_cols(std::span<const Var>(outs.data(), outs.size()));
}

std::pair<Var, Var> polar_decompose(Tape& t, Var T) {
    return {t.relu(T), t.relu(t.scale(T, -1.0))};
}

namespace {

Var combined_head_scores(Tape& t, Var Qh, Var Kh, const PolarWeights& w, int h, int dk) {
    double inv_sqrt_dk = 1.0 / std::sqrt(static_cast<double>(dk));
    auto [qp, qn] = polar_decompose(t, Qh);
    auto [kp, kn] = polar_decompose(t, Kh);
    Var app = t.scale(t.matmul(qp, t.transpose(kp)), inv_sqrt_dk);
    Var ann = t.scale(t.matmul(qn, t.transpose(kn)), inv_sqrt_dk);
    Var apn = t.scale(t.matmul(qp, t.transpose(kn)), inv_sqrt_dk);
    Var anp = t.scale(t.matmul(qn, t.transpose(kp)), inv_sqrt_dk);
    Var wpp = t.slice_cols(w.wpp, h, h + 1);
    Var wnn = t.slice_cols(w.wnn, h, h + 1);
    Var wpn = t.slice_cols(w.wpn, h, h + 1);
    Var wnp = t.slice_cols(w.wnp, h, h + 1);
    return t.add(t.add(t.mul_scalar(app, wpp), t.mul_scalar(ann, wnn)),
                 t.add(t.mul_scalar(apn, wpn), t.mul_scalar(anp, wnp)));
}

}  // namespace

Var polar_scores(Tape& t, Var Q, Var K, const PolarWeights& w, int heads) {
    int dk = head_width(t.value(Q), heads);
    std::vector<Var> per_head;
    per_head.reserve(static_cast<std::size_t>(heads));
    for (int h = 0; h < heads; ++h) {
        Var Qh = heads == 1 ? Q : t.slice_cols(Q, h * dk, (h + 1) * dk);
        Var Kh = heads == 1 ? K : t.slice_cols(K, h * dk, (h + 1) * dk);
        per_head.push_back(combined_head_scores(t, Qh, Kh, w, h, dk));
    }
    return heads == 1 ? per_head[0]
                      : t.concat_cols(std::span<const Var>(per_head.data(), per_head.size()));
}

Var poladca_attend(Tape& t, Var Q, Var K, Var V, const PolarWeights& w, Var Wo, int heads,
                   Activation act) {
    int dk = head_width(t.value(Q), heads);
    std::vector<Var> outs;
    outs.reserve(static_cast<std::size_t>(heads));
    for (int h = 0; h < heads; ++h) {
        Var Qh = heads == 1 ? Q : t.slice_cols(Q, h * dk, (h + 1) * dk);
        Var Kh = heads == 1 ? K : t.slice_cols(K, h * dk, (h + 1) * dk);
        Var Vh = heads == 1 ? V : t.slice_cols(V, h * dk, (h + 1) * dk);
        Var scores = combined_head_scores(t, Qh, Kh, w, h, dk);
        outs.push_back(t.matmul(t.row_softmax(scores), Vh));
    }
    Var cat = heads == 1 ? outs[0] : t.concat_cols(std::span<const Var>(outs.data(), outs.size()));
    Var projected = t.matmul(cat, t.transpose(Wo));
    return act == Activation::Relu ? t.relu(projected) : projected;
}

Var dual_path_fuse(Tape& t, const LocalFeatureVars& f, Var Wg, Var bg, const AttendFn& attend) {
    Var path1 = attend(t, f.Fx, f.Fy, f.Fz);
    Var path2 = attend(t, f.Fx, f.Fz, f.Fy);
    Var gate_in = t.matmul(t.concat_cols({path1, path2}), t.transpose(Wg));
    Var g = t.sigmoid(t.add_rowvec(gate_in, bg));
    const Tensor& gv = t.value(g);
    Var ones = t.constant(Tensor::full(gv.rows(), gv.cols(), 1.0));
    return t.add(t.hadamard(g, path1), t.hadamard(t.sub(ones, g), path2));
}

ExpertOutput expert_fusion(Tape& t, Var Fx, Var Fused, const std::vector<ExpertVars>& experts) {
    if (experts.empty()) throw NumericError("expert_fusion: need at least one expert");
    int E = static_cast<int>(experts.size());

    std::vector<Var> logits;
    logits.reserve(static_cast<std::size_t>(E));
    for (const ExpertVars& e : experts) logits.push_back(t.matmul(Fused, e.route));
    Var R = E == 1 ? logits[0] : t.concat_cols(std::span<const Var>(logits.data(), logits.size()));
    Var weights = t.row_softmax(R);
    Var alpha = t.sigmoid(t.row_mean(R));

    Var mix;
    for (int e = 0; e < E; ++e) {
        const ExpertVars& ev = experts[static_cast<std::size_t>(e)];
        Var h = t.add_rowvec(t.matmul(Fused, t.transpose(ev.W1)), ev.b1);
        if (e % 3 == 1) h = t.relu(h);
        else if (e % 3 == 2) h = t.tanh(h);
        Var expert = t.add_rowvec(t.matmul(h, t.transpose(ev.W2)), ev.b2);
        Var weighted = t.mul_colvec(expert, t.slice_cols(weights, e, e + 1));
        mix = e == 0 ? weighted : t.add(mix, weighted);
    }

    ExpertOutput out;
    out.out = t.add(Fx, t.mul_colvec(mix, alpha));
    out.weights = weights;
    return out;
}

Var gcn_layer(Tape& t, Var X, const TopoVars& topo, Var W, Activation act) {
    // value-ordered aggregation keeps the output invariant under node
    // relabeling down to the last bit
    Var agg = t.matmul_sorted(topo.gcn_prop, t.matmul(X, W));
    return act == Activation::Relu ? t.relu(agg) : agg;
}

Var gat_layer(Tape& t, Var X, const TopoVars& topo, Var W, Var a, Activation act) {
    const Tensor& deg = t.value(topo.deg);
    for (int i = 0; i < topo.n; ++i)
        if (deg.data[static_cast<std::size_t>(i)] < 1.0)
            throw numkit::ConfigError("gat_layer: node " + std::to_string(i) + " is isolated");

    Var H = t.matmul(X, W);
    int M = t.value(H).cols();
    int n = topo.n;
    Var a1 = t.transpose(t.slice_cols(a, 0, M));
    Var a2 = t.transpose(t.slice_cols(a, M, 2 * M));
    Var s1 = t.matmul(H, a1);  // n x 1
    Var s2 = t.matmul(H, a2);
    Var ones_row = t.constant(Tensor::full(1, n, 1.0));
    Var ones_col = t.constant(Tensor::full(n, 1, 1.0));
    Var e = t.add(t.matmul(s1, ones_row), t.matmul(ones_col, t.transpose(s2)));
    Var scores = t.leaky_relu(e, kLeakySlope);
    // keep edge logits, push non-edges to an effective -inf
    Var masked = t.add(t.hadamard(scores, topo.adj01), topo.att_mask);
    Var out = t.matmul(t.row_softmax(masked), H);
    return act == Activation::Relu ? t.relu(out) : out;
}

Var sca_attend(Tape& t, Var XE, Var YD, Var Wq, Var Wk, Var Wv) {
    Var Q = t.matmul(XE, Wq);
    Var K = t.matmul(YD, Wk);
    Var V = t.matmul(YD, Wv);
    double inv_sqrt_dk = 1.0 / std::sqrt(static_cast<double>(t.value(K).cols()));
    Var scores = t.scale(t.matmul(Q, t.transpose(K)), inv_sqrt_dk);
    return t.matmul(t.row_softmax(scores), V);
}

long long flop_count(Scheme scheme, long long n, long long D) {
    if (n < 1 || D < 1) throw numkit::ConfigError("flop_count: n and D must be >= 1");
    switch (scheme) {
        case Scheme::SCA: return 2 * n * n * D;
        case Scheme::DCA: return 2 * n * D * D + 2 * n * n * D;
        case Scheme::PolaDCA: return 2 * n * D * D + 2 * n * n * D + 4 * n * D;
        default: throw numkit::ConfigError("flop_count: model covers SCA, DCA and PolaDCA");
    }
}

}  // namespace mplayers

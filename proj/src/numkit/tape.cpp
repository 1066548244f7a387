#include "numkit/tape.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace numkit {

namespace {

void check_arity(Op op, std::size_t got, std::size_t want) {
    if (got != want)
        throw NumericError(std::string(op_name(op)) + ": expected " + std::to_string(want) +
                           " inputs, got " + std::to_string(got));
}

std::vector<double>& ensure_grad(Tape::Node& n) {
    if (n.val.grad.empty()) n.val.grad.assign(n.val.data.size(), 0.0);
    return n.val.grad;
}

}  // namespace

const char* op_name(Op op) {
    switch (op) {
        case Op::Leaf: return "leaf";
        case Op::MatMul: return "matmul";
        case Op::MatMulSorted: return "matmul_sorted";
        case Op::Transpose: return "transpose";
        case Op::Add: return "add";
        case Op::Sub: return "sub";
        case Op::Hadamard: return "hadamard";
        case Op::Scale: return "scale";
        case Op::MulScalar: return "mul_scalar";
        case Op::AddRowVec: return "add_rowvec";
        case Op::MulColVec: return "mul_colvec";
        case Op::RowSoftmax: return "row_softmax";
        case Op::Relu: return "relu";
        case Op::LeakyRelu: return "leaky_relu";
        case Op::Sigmoid: return "sigmoid";
        case Op::Tanh: return "tanh";
        case Op::Sqrt: return "sqrt";
        case Op::RowMean: return "row_mean";
        case Op::ColMean: return "col_mean";
        case Op::ConcatCols: return "concat_cols";
        case Op::SliceCols: return "slice_cols";
        case Op::Sum: return "sum";
        case Op::Mean: return "mean";
        case Op::RowLogSumExp: return "row_logsumexp";
    }
    return "unknown";
}

const Tape::Node& Tape::node(int id) const {
    if (id < 0 || id >= size()) throw NumericError("Tape: variable does not belong to this tape");
    return nodes_[static_cast<std::size_t>(id)];
}

Tape::Node& Tape::mutable_node(int id) {
    if (id < 0 || id >= size()) throw NumericError("Tape: variable does not belong to this tape");
    return nodes_[static_cast<std::size_t>(id)];
}

Var Tape::leaf(Tensor value, bool requires_grad) {
    require_finite(value, "leaf");
    Node n;
    n.val = std::move(value);
    n.op = Op::Leaf;
    n.requires_grad = requires_grad;
    n.val.requires_grad = requires_grad;
    nodes_.push_back(std::move(n));
    return Var{size() - 1};
}

const std::vector<double>& Tape::grad(Var v) const {
    const Node& n = node(v.id);
    if (n.val.grad.empty())
        throw NumericError("Tape::grad: no gradient buffer; run backward() first");
    return n.val.grad;
}

void Tape::zero_grad() {
    for (Node& n : nodes_) std::fill(n.val.grad.begin(), n.val.grad.end(), 0.0);
}

Var Tape::matmul(Var a, Var b) { return apply(Op::MatMul, std::initializer_list<Var>{a, b}); }
Var Tape::matmul_sorted(Var a, Var b) { return apply(Op::MatMulSorted, std::initializer_list<Var>{a, b}); }
Var Tape::transpose(Var a) { return apply(Op::Transpose, std::initializer_list<Var>{a}); }
Var Tape::add(Var a, Var b) { return apply(Op::Add, std::initializer_list<Var>{a, b}); }
Var Tape::sub(Var a, Var b) { return apply(Op::Sub, std::initializer_list<Var>{a, b}); }
Var Tape::hadamard(Var a, Var b) { return apply(Op::Hadamard, std::initializer_list<Var>{a, b}); }
Var Tape::scale(Var a, double c) { return apply(Op::Scale, std::initializer_list<Var>{a}, c); }
Var Tape::mul_scalar(Var a, Var s) { return apply(Op::MulScalar, std::initializer_list<Var>{a, s}); }
Var Tape::add_rowvec(Var a, Var v) { return apply(Op::AddRowVec, std::initializer_list<Var>{a, v}); }
Var Tape::mul_colvec(Var a, Var c) { return apply(Op::MulColVec, std::initializer_list<Var>{a, c}); }
Var Tape::row_softmax(Var a) { return apply(Op::RowSoftmax, std::initializer_list<Var>{a}); }
Var Tape::relu(Var a) { return apply(Op::Relu, std::initializer_list<Var>{a}); }
Var Tape::leaky_relu(Var a, double slope) {
    if (!(slope > 0.0 && slope < 1.0)) throw NumericError("leaky_relu: slope must lie in (0,1)");
    return apply(Op::LeakyRelu, std::initializer_list<Var>{a}, slope);
}
Var Tape::sigmoid(Var a) { return apply(Op::Sigmoid, std::initializer_list<Var>{a}); }
Var Tape::tanh(Var a) { return apply(Op::Tanh, std::initializer_list<Var>{a}); }
Var Tape::sqrt(Var a) { return apply(Op::Sqrt, std::initializer_list<Var>{a}); }
Var Tape::row_mean(Var a) { return apply(Op::RowMean, std::initializer_list<Var>{a}); }
Var Tape::col_mean(Var a) { return apply(Op::ColMean, std::initializer_list<Var>{a}); }
Var Tape::concat_cols(std::span<const Var> parts) { return apply(Op::ConcatCols, parts); }
Var Tape::concat_cols(std::initializer_list<Var> parts) {
    return apply(Op::ConcatCols, std::span<const Var>(parts.begin(), parts.size()));
}
Var Tape::slice_cols(Var a, int lo, int hi) {
    return apply(Op::SliceCols, std::initializer_list<Var>{a}, 0.0, lo, hi);
}
Var Tape::sum(Var a) { return apply(Op::Sum, std::initializer_list<Var>{a}); }
Var Tape::mean(Var a) { return apply(Op::Mean, std::initializer_list<Var>{a}); }
Var Tape::row_logsumexp(Var a) { return apply(Op::RowLogSumExp, std::initializer_list<Var>{a}); }

Var Tape::apply(Op op, std::span<const Var> inputs, double attr, int lo, int hi) {
    for (Var v : inputs) node(v.id);  // validates membership

    auto in = [&](std::size_t i) -> const Tensor& { return nodes_[static_cast<std::size_t>(inputs[i].id)].val; };

    Tensor out;
    switch (op) {
        case Op::Leaf:
            throw NumericError("apply: leaf is not an applicable primitive");
        case Op::MatMul: {
            check_arity(op, inputs.size(), 2);
            const Tensor& a = in(0);
            const Tensor& b = in(1);
            if (a.cols() != b.rows())
                throw NumericError("matmul: inner dimensions disagree " + a.shape_str() + " x " + b.shape_str());
            int n = a.rows(), k = a.cols(), m = b.cols();
            out = Tensor::zeros(n, m);
            const double* A = a.data.data();
            const double* B = b.data.data();
            double* C = out.data.data();
            for (int i = 0; i < n; ++i)
                for (int p = 0; p < k; ++p) {
                    double av = A[static_cast<std::size_t>(i) * k + p];
                    if (av == 0.0) continue;
                    const double* Brow = B + static_cast<std::size_t>(p) * m;
                    double* Crow = C + static_cast<std::size_t>(i) * m;
                    for (int j = 0; j < m; ++j) Crow[j] += av * Brow[j];
                }
            break;
        }
        case Op::MatMulSorted: {
            check_arity(op, inputs.size(), 2);
            const Tensor& a = in(0);
            const Tensor& b = in(1);
            if (a.cols() != b.rows())
                throw NumericError("matmul_sorted: inner dimensions disagree " + a.shape_str() + " x " + b.shape_str());
            int n = a.rows(), k = a.cols(), m = b.cols();
            out = Tensor::zeros(n, m);
            std::vector<double> terms;
            for (int i = 0; i < n; ++i)
                for (int j = 0; j < m; ++j) {
                    terms.clear();
                    for (int p = 0; p < k; ++p) {
                        double av = a.at(i, p);
                        if (av != 0.0) terms.push_back(av * b.at(p, j));
                    }
                    std::sort(terms.begin(), terms.end());
                    double s = 0.0;
                    for (double t : terms) s += t;
                    out.at(i, j) = s;
                }
            break;
        }
        case Op::Transpose: {
            check_arity(op, inputs.size(), 1);
            const Tensor& a = in(0);
            out = Tensor::zeros(a.cols(), a.rows());
            for (int i = 0; i < a.rows(); ++i)
                for (int j = 0; j < a.cols(); ++j) out.at(j, i) = a.at(i, j);
            break;
        }
        case Op::Add:
        case Op::Sub:
        case Op::Hadamard: {
            check_arity(op, inputs.size(), 2);
            const Tensor& a = in(0);
            const Tensor& b = in(1);
            require_same_shape(a, b, op_name(op));
            out = Tensor::zeros_like(a);
            for (std::size_t i = 0; i < a.data.size(); ++i)
                out.data[i] = op == Op::Add   ? a.data[i] + b.data[i]
                              : op == Op::Sub ? a.data[i] - b.data[i]
                                              : a.data[i] * b.data[i];
            break;
        }
        case Op::Scale: {
            check_arity(op, inputs.size(), 1);
            const Tensor& a = in(0);
            out = Tensor::zeros_like(a);
            for (std::size_t i = 0; i < a.data.size(); ++i) out.data[i] = attr * a.data[i];
            break;
        }
        case Op::MulScalar: {
            check_arity(op, inputs.size(), 2);
            const Tensor& a = in(0);
            const Tensor& s = in(1);
            if (!s.is_scalar()) throw NumericError("mul_scalar: second operand must be 1x1");
            out = Tensor::zeros_like(a);
            double sv = s.data[0];
            for (std::size_t i = 0; i < a.data.size(); ++i) out.data[i] = sv * a.data[i];
            break;
        }
        case Op::AddRowVec: {
            check_arity(op, inputs.size(), 2);
            const Tensor& a = in(0);
            const Tensor& v = in(1);
            if (v.rows() != 1 || v.cols() != a.cols())
                throw NumericError("add_rowvec: vector shape " + v.shape_str() + " does not match " + a.shape_str());
            out = Tensor::zeros_like(a);
            for (int i = 0; i < a.rows(); ++i)
                for (int j = 0; j < a.cols(); ++j) out.at(i, j) = a.at(i, j) + v.data[static_cast<std::size_t>(j)];
            break;
        }
        case Op::MulColVec: {
            check_arity(op, inputs.size(), 2);
            const Tensor& a = in(0);
            const Tensor& c = in(1);
            if (c.cols() != 1 || c.rows() != a.rows())
                throw NumericError("mul_colvec: column shape " + c.shape_str() + " does not match " + a.shape_str());
            out = Tensor::zeros_like(a);
            for (int i = 0; i < a.rows(); ++i) {
                double cv = c.data[static_cast<std::size_t>(i)];
                for (int j = 0; j < a.cols(); ++j) out.at(i, j) = cv * a.at(i, j);
            }
            break;
        }
        case Op::RowSoftmax: {
            check_arity(op, inputs.size(), 1);
            const Tensor& a = in(0);
            out = Tensor::zeros_like(a);
            int m = a.cols();
            for (int i = 0; i < a.rows(); ++i) {
                double mx = a.at(i, 0);
                for (int j = 1; j < m; ++j) mx = std::max(mx, a.at(i, j));
                double z = 0.0;
                for (int j = 0; j < m; ++j) {
                    double e = std::exp(a.at(i, j) - mx);
                    out.at(i, j) = e;
                    z += e;
                }
                for (int j = 0; j < m; ++j) out.at(i, j) /= z;
            }
            break;
        }
        case Op::Relu: {
            check_arity(op, inputs.size(), 1);
            const Tensor& a = in(0);
            out = Tensor::zeros_like(a);
            for (std::size_t i = 0; i < a.data.size(); ++i) out.data[i] = a.data[i] > 0.0 ? a.data[i] : 0.0;
            break;
        }
        case Op::LeakyRelu: {
            check_arity(op, inputs.size(), 1);
            const Tensor& a = in(0);
            out = Tensor::zeros_like(a);
            for (std::size_t i = 0; i < a.data.size(); ++i)
                out.data[i] = a.data[i] > 0.0 ? a.data[i] : attr * a.data[i];
            break;
        }
        case Op::Sigmoid: {
            check_arity(op, inputs.size(), 1);
            const Tensor& a = in(0);
            out = Tensor::zeros_like(a);
            for (std::size_t i = 0; i < a.data.size(); ++i) out.data[i] = 1.0 / (1.0 + std::exp(-a.data[i]));
            break;
        }
        case Op::Tanh: {
            check_arity(op, inputs.size(), 1);
            const Tensor& a = in(0);
            out = Tensor::zeros_like(a);
            for (std::size_t i = 0; i < a.data.size(); ++i) out.data[i] = std::tanh(a.data[i]);
            break;
        }
        case Op::Sqrt: {
            check_arity(op, inputs.size(), 1);
            const Tensor& a = in(0);
            out = Tensor::zeros_like(a);
            for (std::size_t i = 0; i < a.data.size(); ++i) {
                if (a.data[i] < 0.0) throw NumericError("sqrt: negative input");
                out.data[i] = std::sqrt(a.data[i]);
            }
            break;
        }
        case Op::RowMean: {
            check_arity(op, inputs.size(), 1);
            const Tensor& a = in(0);
            out = Tensor::zeros(a.rows(), 1);
            for (int i = 0; i < a.rows(); ++i) {
                double s = 0.0;
                for (int j = 0; j < a.cols(); ++j) s += a.at(i, j);
                out.data[static_cast<std::size_t>(i)] = s / a.cols();
            }
            break;
        }
        case Op::ColMean: {
            check_arity(op, inputs.size(), 1);
            const Tensor& a = in(0);
            out = Tensor::zeros(1, a.cols());
            for (int j = 0; j < a.cols(); ++j) {
                double s = 0.0;
                for (int i = 0; i < a.rows(); ++i) s += a.at(i, j);
                out.data[static_cast<std::size_t>(j)] = s / a.rows();
            }
            break;
        }
        case Op::ConcatCols: {
            if (inputs.empty()) throw NumericError("concat_cols: needs at least one input");
            int n = in(0).rows(), total = 0;
            for (std::size_t i = 0; i < inputs.size(); ++i) {
                if (in(i).rows() != n) throw NumericError("concat_cols: row counts disagree");
                total += in(i).cols();
            }
            out = Tensor::zeros(n, total);
            int off = 0;
            for (std::size_t p = 0; p < inputs.size(); ++p) {
                const Tensor& a = in(p);
                for (int i = 0; i < n; ++i)
                    for (int j = 0; j < a.cols(); ++j) out.at(i, off + j) = a.at(i, j);
                off += a.cols();
            }
            break;
        }
        case Op::SliceCols: {
            check_arity(op, inputs.size(), 1);
            const Tensor& a = in(0);
            if (lo < 0 || hi > a.cols() || lo >= hi)
                throw NumericError("slice_cols: bad range [" + std::to_string(lo) + "," + std::to_string(hi) +
                                   ") for " + a.shape_str());
            out = Tensor::zeros(a.rows(), hi - lo);
            for (int i = 0; i < a.rows(); ++i)
                for (int j = lo; j < hi; ++j) out.at(i, j - lo) = a.at(i, j);
            break;
        }
        case Op::Sum:
        case Op::Mean: {
            check_arity(op, inputs.size(), 1);
            const Tensor& a = in(0);
            double s = 0.0;
            for (double v : a.data) s += v;
            out = Tensor::scalar(op == Op::Sum ? s : s / static_cast<double>(a.data.size()));
            break;
        }
        case Op::RowLogSumExp: {
            check_arity(op, inputs.size(), 1);
            const Tensor& a = in(0);
            out = Tensor::zeros(a.rows(), 1);
            for (int i = 0; i < a.rows(); ++i) {
                double mx = a.at(i, 0);
                for (int j = 1; j < a.cols(); ++j) mx = std::max(mx, a.at(i, j));
                double z = 0.0;
                for (int j = 0; j < a.cols(); ++j) z += std::exp(a.at(i, j) - mx);
                out.data[static_cast<std::size_t>(i)] = mx + std::log(z);
            }
            break;
        }
    }

    require_finite(out, op_name(op));

    Node n;
    n.val = std::move(out);
    n.op = op;
    n.attr = attr;
    n.lo = lo;
    n.hi = hi;
    n.inputs.reserve(inputs.size());
    for (Var v : inputs) {
        n.inputs.push_back(v.id);
        n.requires_grad = n.requires_grad || nodes_[static_cast<std::size_t>(v.id)].requires_grad;
    }
    n.val.requires_grad = n.requires_grad;
    nodes_.push_back(std::move(n));
    return Var{size() - 1};
}

void Tape::backward(Var loss) {
    Node& root = mutable_node(loss.id);
    if (!root.val.is_scalar()) throw NumericError("backward: loss must be scalar, got " + root.val.shape_str());
    ensure_grad(root)[0] += 1.0;

    for (int id = loss.id; id >= 0; --id) {
        Node& n = nodes_[static_cast<std::size_t>(id)];
        if (n.op == Op::Leaf || !n.requires_grad || n.val.grad.empty()) continue;
        const std::vector<double>& g = n.val.grad;
        const Tensor& y = n.val;

        auto input_node = [&](std::size_t i) -> Node& { return nodes_[static_cast<std::size_t>(n.inputs[i])]; };
        auto want = [&](std::size_t i) { return input_node(i).requires_grad; };

        switch (n.op) {
            case Op::Leaf:
                break;
            case Op::MatMul:
            case Op::MatMulSorted: {
                Node& na = input_node(0);
                Node& nb = input_node(1);
                const Tensor& a = na.val;
                const Tensor& b = nb.val;
                int nr = a.rows(), k = a.cols(), m = b.cols();
                if (want(0)) {
                    std::vector<double>& da = ensure_grad(na);
                    // dA = G * B^T
                    for (int i = 0; i < nr; ++i)
                        for (int p = 0; p < k; ++p) {
                            double s = 0.0;
                            const double* Grow = g.data() + static_cast<std::size_t>(i) * m;
                            const double* Brow = b.data.data() + static_cast<std::size_t>(p) * m;
                            for (int j = 0; j < m; ++j) s += Grow[j] * Brow[j];
                            da[static_cast<std::size_t>(i) * k + p] += s;
                        }
                }
                if (want(1)) {
                    std::vector<double>& db = ensure_grad(nb);
                    // dB = A^T * G
                    for (int p = 0; p < k; ++p)
                        for (int i = 0; i < nr; ++i) {
                            double av = a.data[static_cast<std::size_t>(i) * k + p];
                            if (av == 0.0) continue;
                            const double* Grow = g.data() + static_cast<std::size_t>(i) * m;
                            double* dBrow = db.data() + static_cast<std::size_t>(p) * m;
                            for (int j = 0; j < m; ++j) dBrow[j] += av * Grow[j];
                        }
                }
                break;
            }
            case Op::Transpose: {
                if (!want(0)) break;
                Node& na = input_node(0);
                std::vector<double>& da = ensure_grad(na);
                int r = na.val.rows(), c = na.val.cols();
                for (int i = 0; i < r; ++i)
                    for (int j = 0; j < c; ++j)
                        da[static_cast<std::size_t>(i) * c + j] += g[static_cast<std::size_t>(j) * r + i];
                break;
            }
            case Op::Add:
            case Op::Sub: {
                double sgn = n.op == Op::Sub ? -1.0 : 1.0;
                if (want(0)) {
                    std::vector<double>& da = ensure_grad(input_node(0));
                    for (std::size_t i = 0; i < g.size(); ++i) da[i] += g[i];
                }
                if (want(1)) {
                    std::vector<double>& db = ensure_grad(input_node(1));
                    for (std::size_t i = 0; i < g.size(); ++i) db[i] += sgn * g[i];
                }
                break;
            }
            case Op::Hadamard: {
                const Tensor& a = input_node(0).val;
                const Tensor& b = input_node(1).val;
                if (want(0)) {
                    std::vector<double>& da = ensure_grad(input_node(0));
                    for (std::size_t i = 0; i < g.size(); ++i) da[i] += g[i] * b.data[i];
                }
                if (want(1)) {
                    std::vector<double>& db = ensure_grad(input_node(1));
                    for (std::size_t i = 0; i < g.size(); ++i) db[i] += g[i] * a.data[i];
                }
                break;
            }
            case Op::Scale: {
                if (!want(0)) break;
                std::vector<double>& da = ensure_grad(input_node(0));
                for (std::size_t i = 0; i < g.size(); ++i) da[i] += n.attr * g[i];
                break;
            }
            case Op::MulScalar: {
                const Tensor& a = input_node(0).val;
                double sv = input_node(1).val.data[0];
                if (want(0)) {
                    std::vector<double>& da = ensure_grad(input_node(0));
                    for (std::size_t i = 0; i < g.size(); ++i) da[i] += sv * g[i];
                }
                if (want(1)) {
                    std::vector<double>& ds = ensure_grad(input_node(1));
                    double s = 0.0;
                    for (std::size_t i = 0; i < g.size(); ++i) s += g[i] * a.data[i];
                    ds[0] += s;
                }
                break;
            }
            case Op::AddRowVec: {
                const Tensor& a = input_node(0).val;
                if (want(0)) {
                    std::vector<double>& da = ensure_grad(input_node(0));
                    for (std::size_t i = 0; i < g.size(); ++i) da[i] += g[i];
                }
                if (want(1)) {
                    std::vector<double>& dv = ensure_grad(input_node(1));
                    int m = a.cols();
                    for (int i = 0; i < a.rows(); ++i)
                        for (int j = 0; j < m; ++j) dv[static_cast<std::size_t>(j)] += g[static_cast<std::size_t>(i) * m + j];
                }
                break;
            }
            case Op::MulColVec: {
                const Tensor& a = input_node(0).val;
                const Tensor& c = input_node(1).val;
                int m = a.cols();
                if (want(0)) {
                    std::vector<double>& da = ensure_grad(input_node(0));
                    for (int i = 0; i < a.rows(); ++i) {
                        double cv = c.data[static_cast<std::size_t>(i)];
                        for (int j = 0; j < m; ++j) da[static_cast<std::size_t>(i) * m + j] += cv * g[static_cast<std::size_t>(i) * m + j];
                    }
                }
                if (want(1)) {
                    std::vector<double>& dc = ensure_grad(input_node(1));
                    for (int i = 0; i < a.rows(); ++i) {
                        double s = 0.0;
                        for (int j = 0; j < m; ++j) s += g[static_cast<std::size_t>(i) * m + j] * a.data[static_cast<std::size_t>(i) * m + j];
                        dc[static_cast<std::size_t>(i)] += s;
                    }
                }
                break;
            }
            case Op::RowSoftmax: {
                if (!want(0)) break;
                std::vector<double>& da = ensure_grad(input_node(0));
                int m = y.cols();
                for (int i = 0; i < y.rows(); ++i) {
                    double dot = 0.0;
                    for (int j = 0; j < m; ++j) dot += g[static_cast<std::size_t>(i) * m + j] * y.at(i, j);
                    for (int j = 0; j < m; ++j)
                        da[static_cast<std::size_t>(i) * m + j] += y.at(i, j) * (g[static_cast<std::size_t>(i) * m + j] - dot);
                }
                break;
            }
            case Op::Relu: {
                if (!want(0)) break;
                const Tensor& a = input_node(0).val;
                std::vector<double>& da = ensure_grad(input_node(0));
                // subgradient 0 at the kink
                for (std::size_t i = 0; i < g.size(); ++i) da[i] += a.data[i] > 0.0 ? g[i] : 0.0;
                break;
            }
            case Op::LeakyRelu: {
                if (!want(0)) break;
                const Tensor& a = input_node(0).val;
                std::vector<double>& da = ensure_grad(input_node(0));
                for (std::size_t i = 0; i < g.size(); ++i) da[i] += (a.data[i] > 0.0 ? 1.0 : n.attr) * g[i];
                break;
            }
            case Op::Sigmoid: {
                if (!want(0)) break;
                std::vector<double>& da = ensure_grad(input_node(0));
                for (std::size_t i = 0; i < g.size(); ++i) da[i] += y.data[i] * (1.0 - y.data[i]) * g[i];
                break;
            }
            case Op::Tanh: {
                if (!want(0)) break;
                std::vector<double>& da = ensure_grad(input_node(0));
                for (std::size_t i = 0; i < g.size(); ++i) da[i] += (1.0 - y.data[i] * y.data[i]) * g[i];
                break;
            }
            case Op::Sqrt: {
                if (!want(0)) break;
                std::vector<double>& da = ensure_grad(input_node(0));
                // derivative pinned to 0 at x == 0, matching the relu-kink rule
                for (std::size_t i = 0; i < g.size(); ++i)
                    da[i] += y.data[i] > 0.0 ? g[i] / (2.0 * y.data[i]) : 0.0;
                break;
            }
            case Op::RowMean: {
                if (!want(0)) break;
                const Tensor& a = input_node(0).val;
                std::vector<double>& da = ensure_grad(input_node(0));
                int m = a.cols();
                for (int i = 0; i < a.rows(); ++i) {
                    double gi = g[static_cast<std::size_t>(i)] / m;
                    for (int j = 0; j < m; ++j) da[static_cast<std::size_t>(i) * m + j] += gi;
                }
                break;
            }
            case Op::ColMean: {
                if (!want(0)) break;
                const Tensor& a = input_node(0).val;
                std::vector<double>& da = ensure_grad(input_node(0));
                int m = a.cols();
                for (int i = 0; i < a.rows(); ++i)
                    for (int j = 0; j < m; ++j) da[static_cast<std::size_t>(i) * m + j] += g[static_cast<std::size_t>(j)] / a.rows();
                break;
            }
            case Op::ConcatCols: {
                int off = 0;
                int m = y.cols();
                for (std::size_t p = 0; p < n.inputs.size(); ++p) {
                    Node& np = input_node(p);
                    int c = np.val.cols();
                    if (np.requires_grad) {
                        std::vector<double>& dp = ensure_grad(np);
                        for (int i = 0; i < np.val.rows(); ++i)
                            for (int j = 0; j < c; ++j)
                                dp[static_cast<std::size_t>(i) * c + j] += g[static_cast<std::size_t>(i) * m + off + j];
                    }
                    off += c;
                }
                break;
            }
            case Op::SliceCols: {
                if (!want(0)) break;
                Node& na = input_node(0);
                std::vector<double>& da = ensure_grad(na);
                int m = na.val.cols(), w = n.hi - n.lo;
                for (int i = 0; i < na.val.rows(); ++i)
                    for (int j = 0; j < w; ++j)
                        da[static_cast<std::size_t>(i) * m + n.lo + j] += g[static_cast<std::size_t>(i) * w + j];
                break;
            }
            case Op::Sum: {
                if (!want(0)) break;
                std::vector<double>& da = ensure_grad(input_node(0));
                for (double& v : da) v += g[0];
                break;
            }
            case Op::Mean: {
                if (!want(0)) break;
                std::vector<double>& da = ensure_grad(input_node(0));
                double gi = g[0] / static_cast<double>(da.size());
                for (double& v : da) v += gi;
                break;
            }
            case Op::RowLogSumExp: {
                if (!want(0)) break;
                const Tensor& a = input_node(0).val;
                std::vector<double>& da = ensure_grad(input_node(0));
                int m = a.cols();
                for (int i = 0; i < a.rows(); ++i) {
                    double lse = y.data[static_cast<std::size_t>(i)];
                    double gi = g[static_cast<std::size_t>(i)];
                    for (int j = 0; j < m; ++j)
                        da[static_cast<std::size_t>(i) * m + j] += gi * std::exp(a.at(i, j) - lse);
                }
                break;
            }
        }
    }

    // leaves the loss never touched still advertise a (zero) gradient
    for (Node& n : nodes_)
        if (n.op == Op::Leaf && n.requires_grad) ensure_grad(n);
}

}  // namespace numkit

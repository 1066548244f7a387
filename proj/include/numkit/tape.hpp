#pragma once

#include <span>
#include <vector>

#include "numkit/tensor.hpp"

namespace numkit {

enum class Op {
    Leaf,
    MatMul,
    MatMulSorted,  // matmul whose inner sums run in value order, so row
                   // relabeling of a sparse left factor cannot change rounding
    Transpose,
    Add,
    Sub,
    Hadamard,
    Scale,       // by compile-time scalar attribute
    MulScalar,   // by a 1x1 tensor operand
    AddRowVec,   // broadcast a 1xm row over all rows
    MulColVec,   // scale row i by entry i of an nx1 column
    RowSoftmax,
    Relu,
    LeakyRelu,
    Sigmoid,
    Tanh,
    Sqrt,
    RowMean,      // nxm -> nx1
    ColMean,      // nxm -> 1xm
    ConcatCols,   // n-ary
    SliceCols,
    Sum,          // -> 1x1
    Mean,         // -> 1x1
    RowLogSumExp  // nxm -> nx1, max-subtracted
};

const char* op_name(Op op);

// Handle to a node on a Tape. Plain index; cheap to copy.
struct Var {
    int id = -1;
    bool valid() const { return id >= 0; }
};

// Records primitive applications in execution order. Backward walks the
// record in strict reverse, so gradient accumulation order is fixed and
// two backward passes from zeroed grads agree bit-for-bit.
class Tape {
public:
    struct Node {
        Tensor val;  // val.grad doubles as the adjoint buffer
        Op op = Op::Leaf;
        std::vector<int> inputs;
        double attr = 0.0;  // leaky slope / scale factor
        int lo = 0, hi = 0; // slice bounds
        bool requires_grad = false;
    };

    Var leaf(Tensor value, bool requires_grad);
    Var constant(Tensor value) { return leaf(std::move(value), false); }

    // Generic primitive dispatch; the named helpers below all route here.
    Var apply(Op op, std::span<const Var> inputs, double attr = 0.0, int lo = 0, int hi = 0);

    Var matmul(Var a, Var b);
    Var matmul_sorted(Var a, Var b);
    Var transpose(Var a);
    Var add(Var a, Var b);
    Var sub(Var a, Var b);
    Var hadamard(Var a, Var b);
    Var scale(Var a, double c);
    Var mul_scalar(Var a, Var s);
    Var add_rowvec(Var a, Var v);
    Var mul_colvec(Var a, Var c);
    Var row_softmax(Var a);
    Var relu(Var a);
    Var leaky_relu(Var a, double slope);
    Var sigmoid(Var a);
    Var tanh(Var a);
    Var sqrt(Var a);
    Var row_mean(Var a);
    Var col_mean(Var a);
    Var concat_cols(std::span<const Var> parts);
    Var concat_cols(std::initializer_list<Var> parts);
    Var slice_cols(Var a, int lo, int hi);
    Var sum(Var a);
    Var mean(Var a);
    Var row_logsumexp(Var a);

    // Accumulates d(loss)/d(node) into every node reachable from `loss`;
    // leaves with requires_grad that the loss does not touch get zeros.
    void backward(Var loss);

    void zero_grad();

    const Tensor& value(Var v) const { return node(v.id).val; }
    const std::vector<double>& grad(Var v) const;

    int size() const { return static_cast<int>(nodes_.size()); }
    void clear() { nodes_.clear(); }

    const Node& node(int id) const;

private:
    Node& mutable_node(int id);
    std::vector<Node> nodes_;
};

}  // namespace numkit

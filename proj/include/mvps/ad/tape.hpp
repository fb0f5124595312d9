// Copyright Contributors to the mvps-fusion Project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "mvps/ad/matrix.hpp"

#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <vector>

namespace mvps::ad {

/// Trainable tensor. grad always has the shape of value.
struct Param {
    Param() = default;
    Param(std::string name, Matrix value);

    std::string name;
    Matrix value;
    Matrix grad;

    void zero_grad() { grad.fill(0.0); }
};

void zero_grads(std::span<Param* const> params);

enum class OpKind : std::uint8_t {
    Constant,
    Parameter,
    MatMul,
    Add,
    AddRow,
    Sub,
    Mul,
    MulCol,
    MulScalar,
    DivScalar,
    Scale,
    AddConst,
    Unary,
    Sum,
    Mean,
    RowSum,
    RowGroupSum,
    RowMax,
    RowNormL2,
    RowNormL1,
    Softmax,
    ConcatCols,
    SliceCols,
    ConcatRows,
    SliceRows,
    Reshape,
    Transpose,
    CumSumExclusive,
    MulRowTiled,
};

const char* op_name(OpKind op) noexcept;

class Tape;

/// Handle to a node on a tape.
struct Var {
    Tape* tape = nullptr;
    std::uint32_t id = std::numeric_limits<std::uint32_t>::max();

    const Matrix& value() const;
    std::size_t rows() const { return value().rows(); }
    std::size_t cols() const { return value().cols(); }
    /// Value of a 1x1 node.
    double item() const;
    bool valid() const noexcept { return tape != nullptr; }
};

/// Append-only record of a computation. Node parents always precede the node,
/// so a single reverse sweep visits every node after all of its consumers.
class Tape {
public:
    struct Node {
        OpKind op = OpKind::Constant;
        const char* label = "";
        std::uint32_t a = kNone;
        std::uint32_t b = kNone;
        std::vector<std::uint32_t> inputs;  // variadic ops (concat)
        Matrix value;
        Matrix partial;  // local derivative for elementwise ops, argmax for RowMax
        Matrix grad;
        bool requires_grad = false;
        Param* param = nullptr;
        double scalar = 0.0;
        std::size_t i0 = 0;
        std::size_t i1 = 0;
    };
    static constexpr std::uint32_t kNone = std::numeric_limits<std::uint32_t>::max();

    Tape() = default;
    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;

    Var constant(Matrix value);
    Var constant(double value) { return constant(Matrix::scalar(value)); }
    Var param(Param& p);

    /// Reverse sweep from a 1x1 root. Gradients of every Param reachable from
    /// the root are overwritten with d(root)/d(param).
    void backward(Var root);

    const Node& node(std::uint32_t id) const { return nodes_[id]; }
    std::size_t size() const noexcept { return nodes_.size(); }

    /// Gradient of the root w.r.t. a node after backward(); zero matrix when the
    /// node did not participate.
    Matrix grad(Var v) const;

    // Finite-value checks on every produced node; on by default.
    void set_check_finite(bool on) noexcept { check_finite_ = on; }

    // Internal: used by op implementations.
    Var push(Node&& n);
    Node& mutable_node(std::uint32_t id) { return nodes_[id]; }

private:
    void accumulate(std::uint32_t id, const Matrix& g);
    Matrix& grad_buffer(std::uint32_t id);
    void backward_node(std::uint32_t id);

    std::vector<Node> nodes_;
    bool check_finite_ = true;
    bool swept_ = false;
};

// Linear algebra
Var matmul(Var a, Var b);
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
/// a (m x n) + row (1 x n) broadcast over rows.
Var add_row(Var a, Var row);
/// a (m x n) scaled row-wise by col (m x 1).
Var mul_col(Var a, Var col);
/// a scaled by a 1x1 node.
Var mul_scalar(Var a, Var s);
/// a divided by a positive 1x1 node.
Var div_scalar(Var a, Var s);
Var scale(Var a, double c);
/// a divided by a positive constant.
Var div(Var a, double c);
Var add_const(Var a, double c);
Var neg(Var a);

// Elementwise
Var relu(Var a);
/// log(1 + exp(beta a)) / beta
Var softplus(Var a, double beta = 1.0);
/// Derivative of softplus(a, beta), i.e. sigmoid(beta a), as a differentiable node.
Var softplus_slope(Var a, double beta);
Var sigmoid(Var a);
Var reciprocal(Var a);
Var exp(Var a);
Var log(Var a);
Var sin(Var a);
Var cos(Var a);
Var abs(Var a);
Var sqrt(Var a);
Var square(Var a);
Var clamp_min(Var a, double lo);
Var clamp(Var a, double lo, double hi);
/// CDF of the zero-mean unit-scale Laplace distribution.
Var laplace_cdf(Var a);

// Reductions
Var sum(Var a);
Var mean(Var a);
Var row_sum(Var a);
/// Sums consecutive groups of `group` rows: (m*group x n) -> (m x n).
Var row_group_sum(Var a, std::size_t group);
Var row_max(Var a);
Var row_norm_l2(Var a);
Var row_norm_l1(Var a);
Var softmax_rows(Var a);

// Structure
Var concat_cols(std::span<const Var> parts);
Var slice_cols(Var a, std::size_t begin, std::size_t end);
Var concat_rows(std::span<const Var> parts);
Var slice_rows(Var a, std::size_t begin, std::size_t end);
Var reshape(Var a, std::size_t rows, std::size_t cols);
Var transpose(Var a);
/// out(i, j) = sum_{k < j} a(i, k)
Var cumsum_exclusive(Var a);
/// a is k stacked blocks of g's shape; every block is multiplied by g.
Var mul_row_tiled(Var a, Var g);

inline Var operator+(Var a, Var b) { return add(a, b); }
inline Var operator-(Var a, Var b) { return sub(a, b); }
inline Var operator*(Var a, Var b) { return mul(a, b); }
inline Var operator-(Var a) { return neg(a); }

}  // namespace mvps::ad

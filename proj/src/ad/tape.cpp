// Copyright Contributors to the mvps-fusion Project
// SPDX-License-Identifier: Apache-2.0

#include "mvps/ad/tape.hpp"

#include "mvps/common/error.hpp"
#include "mvps/simd/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_set>

namespace mvps::ad {

// ---------------------------------------------------------------------------
// Matrix

Matrix::Matrix(std::size_t rows, std::size_t cols, std::vector<double> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
    if (data_.size() != rows * cols)
        throw Error("matrix data size " + std::to_string(data_.size()) + " does not match shape " +
                    ad::shape_str(rows, cols));
}

void Matrix::fill(double v) { std::fill(data_.begin(), data_.end(), v); }

void Matrix::reshape(std::size_t rows, std::size_t cols) {
    if (rows * cols != data_.size())
        throw Error("cannot reshape " + shape_str() + " to " + ad::shape_str(rows, cols));
    rows_ = rows;
    cols_ = cols;
}

Matrix Matrix::transposed() const {
    Matrix t(cols_, rows_);
    for (std::size_t r = 0; r < rows_; ++r)
        for (std::size_t c = 0; c < cols_; ++c) t(c, r) = (*this)(r, c);
    return t;
}

std::string Matrix::shape_str() const { return ad::shape_str(rows_, cols_); }

std::string shape_str(std::size_t rows, std::size_t cols) {
    return "(" + std::to_string(rows) + " x " + std::to_string(cols) + ")";
}

// ---------------------------------------------------------------------------
// Param

Param::Param(std::string n, Matrix v) : name(std::move(n)), value(std::move(v)) {
    grad = Matrix(value.rows(), value.cols());
}

void zero_grads(std::span<Param* const> params) {
    for (Param* p : params) p->zero_grad();
}

const char* op_name(OpKind op) noexcept {
    switch (op) {
        case OpKind::Constant: return "constant";
        case OpKind::Parameter: return "param";
        case OpKind::MatMul: return "matmul";
        case OpKind::Add: return "add";
        case OpKind::AddRow: return "add_row";
        case OpKind::Sub: return "sub";
        case OpKind::Mul: return "mul";
        case OpKind::MulCol: return "mul_col";
        case OpKind::MulScalar: return "mul_scalar";
        case OpKind::DivScalar: return "div_scalar";
        case OpKind::Scale: return "scale";
        case OpKind::AddConst: return "add_const";
        case OpKind::Unary: return "unary";
        case OpKind::Sum: return "sum";
        case OpKind::Mean: return "mean";
        case OpKind::RowSum: return "row_sum";
        case OpKind::RowGroupSum: return "row_group_sum";
        case OpKind::RowMax: return "row_max";
        case OpKind::RowNormL2: return "row_norm_l2";
        case OpKind::RowNormL1: return "row_norm_l1";
        case OpKind::Softmax: return "softmax";
        case OpKind::ConcatCols: return "concat_cols";
        case OpKind::SliceCols: return "slice_cols";
        case OpKind::ConcatRows: return "concat_rows";
        case OpKind::SliceRows: return "slice_rows";
        case OpKind::Reshape: return "reshape";
        case OpKind::Transpose: return "transpose";
        case OpKind::CumSumExclusive: return "cumsum_exclusive";
        case OpKind::MulRowTiled: return "mul_row_tiled";
    }
    return "?";
}

// ---------------------------------------------------------------------------
// Var / Tape

const Matrix& Var::value() const { return tape->node(id).value; }

double Var::item() const {
    const Matrix& v = value();
    if (v.size() != 1) throw Error("item() on non-scalar node of shape " + v.shape_str());
    return v[0];
}

namespace {

bool all_finite(const Matrix& m) {
    for (double v : m.flat())
        if (!std::isfinite(v)) return false;
    return true;
}

const simd::KernelTable& K() { return simd::kernels(); }

}  // namespace

Var Tape::push(Node&& n) {
    const auto id = static_cast<std::uint32_t>(nodes_.size());
    if (check_finite_ && !all_finite(n.value)) {
        const bool is_input = n.op == OpKind::Constant || n.op == OpKind::Parameter;
        throw NonFiniteError(std::string(is_input ? "non-finite input" : "non-finite value") + " at node " +
                    std::to_string(id) + " (" + op_name(n.op) +
                    (n.label[0] != '\0' ? std::string(" ") + n.label : std::string()) + ")");
    }
    nodes_.push_back(std::move(n));
    return Var{this, id};
}

Var Tape::constant(Matrix value) {
    Node n;
    n.op = OpKind::Constant;
    n.value = std::move(value);
    return push(std::move(n));
}

Var Tape::param(Param& p) {
    if (!p.grad.same_shape(p.value)) p.grad = Matrix(p.value.rows(), p.value.cols());
    Node n;
    n.op = OpKind::Parameter;
    n.value = p.value;
    n.param = &p;
    n.requires_grad = true;
    return push(std::move(n));
}

Matrix& Tape::grad_buffer(std::uint32_t id) {
    Node& n = nodes_[id];
    if (n.grad.empty() && !n.value.empty()) n.grad = Matrix(n.value.rows(), n.value.cols());
    return n.grad;
}

void Tape::accumulate(std::uint32_t id, const Matrix& g) {
    if (!nodes_[id].requires_grad) return;
    Matrix& dst = grad_buffer(id);
    K().axpy(dst.size(), 1.0, g.data(), dst.data());
}

Matrix Tape::grad(Var v) const {
    const Node& n = nodes_[v.id];
    if (n.grad.empty()) return Matrix(n.value.rows(), n.value.cols());
    return n.grad;
}

void Tape::backward(Var root) {
    if (root.tape != this) throw Error("backward: root belongs to a different tape");
    const Node& r = nodes_[root.id];
    if (r.value.size() != 1)
        throw Error("backward: root must be scalar, got shape " + r.value.shape_str());
    if (swept_)
        for (auto& n : nodes_) n.grad = Matrix();
    swept_ = true;

    std::unordered_set<Param*> seen;
    for (auto& n : nodes_)
        if (n.param != nullptr && seen.insert(n.param).second) n.param->zero_grad();

    if (!r.requires_grad) return;
    grad_buffer(root.id)[0] = 1.0;
    for (std::int64_t id = root.id; id >= 0; --id) {
        const auto uid = static_cast<std::uint32_t>(id);
        if (nodes_[uid].requires_grad && !nodes_[uid].grad.empty()) backward_node(uid);
    }
}

void Tape::backward_node(std::uint32_t id) {
    const auto& kt = K();
    Node& n = nodes_[id];
    const Matrix& g = n.grad;
    auto wants = [&](std::uint32_t p) { return p != kNone && nodes_[p].requires_grad; };

    switch (n.op) {
        case OpKind::Constant: break;
        case OpKind::Parameter: {
            Matrix& pg = n.param->grad;
            kt.axpy(pg.size(), 1.0, g.data(), pg.data());
            break;
        }
        case OpKind::MatMul: {
            const Matrix& A = nodes_[n.a].value;
            const Matrix& B = nodes_[n.b].value;
            if (wants(n.a)) {
                const Matrix bt = B.transposed();
                Matrix& ga = grad_buffer(n.a);
                kt.gemm_nn(A.rows(), A.cols(), B.cols(), g.data(), bt.data(), ga.data(), true);
            }
            if (wants(n.b)) {
                Matrix& gb = grad_buffer(n.b);
                kt.gemm_tn(A.rows(), B.cols(), A.cols(), A.data(), g.data(), gb.data(), true);
            }
            break;
        }
        case OpKind::Add:
            accumulate(n.a, g);
            accumulate(n.b, g);
            break;
        case OpKind::AddRow: {
            accumulate(n.a, g);
            if (wants(n.b)) {
                Matrix& gb = grad_buffer(n.b);
                for (std::size_t r = 0; r < g.rows(); ++r) kt.axpy(g.cols(), 1.0, g.row(r), gb.data());
            }
            break;
        }
        case OpKind::Sub: {
            accumulate(n.a, g);
            if (wants(n.b)) {
                Matrix& gb = grad_buffer(n.b);
                kt.axpy(g.size(), -1.0, g.data(), gb.data());
            }
            break;
        }
        case OpKind::Mul: {
            if (wants(n.a)) kt.mul_acc(g.size(), g.data(), nodes_[n.b].value.data(), grad_buffer(n.a).data());
            if (wants(n.b)) kt.mul_acc(g.size(), g.data(), nodes_[n.a].value.data(), grad_buffer(n.b).data());
            break;
        }
        case OpKind::MulCol: {
            const Matrix& A = nodes_[n.a].value;
            const Matrix& w = nodes_[n.b].value;
            if (wants(n.a)) {
                Matrix& ga = grad_buffer(n.a);
                for (std::size_t r = 0; r < g.rows(); ++r) kt.axpy(g.cols(), w[r], g.row(r), ga.row(r));
            }
            if (wants(n.b)) {
                Matrix& gw = grad_buffer(n.b);
                for (std::size_t r = 0; r < g.rows(); ++r) gw[r] += kt.dot(g.cols(), g.row(r), A.row(r));
            }
            break;
        }
        case OpKind::MulScalar: {
            const double s = nodes_[n.b].value[0];
            if (wants(n.a)) kt.axpy(g.size(), s, g.data(), grad_buffer(n.a).data());
            if (wants(n.b)) grad_buffer(n.b)[0] += kt.dot(g.size(), g.data(), nodes_[n.a].value.data());
            break;
        }
        case OpKind::DivScalar: {
            const double s = nodes_[n.b].value[0];
            if (wants(n.a)) kt.axpy(g.size(), 1.0 / s, g.data(), grad_buffer(n.a).data());
            if (wants(n.b)) grad_buffer(n.b)[0] -= kt.dot(g.size(), g.data(), n.value.data()) / s;
            break;
        }
        case OpKind::Scale:
            if (wants(n.a)) kt.axpy(g.size(), n.scalar, g.data(), grad_buffer(n.a).data());
            break;
        case OpKind::AddConst:
        case OpKind::Reshape:
            if (wants(n.a)) kt.axpy(g.size(), 1.0, g.data(), grad_buffer(n.a).data());
            break;
        case OpKind::Unary:
            if (wants(n.a)) kt.mul_acc(g.size(), g.data(), n.partial.data(), grad_buffer(n.a).data());
            break;
        case OpKind::Sum:
        case OpKind::Mean: {
            if (!wants(n.a)) break;
            Matrix& ga = grad_buffer(n.a);
            const double v = n.op == OpKind::Sum ? g[0] : g[0] / static_cast<double>(ga.size());
            for (double& x : ga.flat()) x += v;
            break;
        }
        case OpKind::RowSum: {
            if (!wants(n.a)) break;
            Matrix& ga = grad_buffer(n.a);
            for (std::size_t r = 0; r < ga.rows(); ++r) {
                double* row = ga.row(r);
                for (std::size_t c = 0; c < ga.cols(); ++c) row[c] += g[r];
            }
            break;
        }
        case OpKind::RowGroupSum: {
            if (!wants(n.a)) break;
            Matrix& ga = grad_buffer(n.a);
            const std::size_t group = n.i0;
            for (std::size_t r = 0; r < ga.rows(); ++r) kt.axpy(ga.cols(), 1.0, g.row(r / group), ga.row(r));
            break;
        }
        case OpKind::RowMax: {
            if (!wants(n.a)) break;
            Matrix& ga = grad_buffer(n.a);
            for (std::size_t r = 0; r < ga.rows(); ++r)
                ga(r, static_cast<std::size_t>(n.partial[r])) += g[r];
            break;
        }
        case OpKind::RowNormL2:
        case OpKind::RowNormL1: {
            if (!wants(n.a)) break;
            Matrix& ga = grad_buffer(n.a);
            for (std::size_t r = 0; r < ga.rows(); ++r) kt.axpy(ga.cols(), g[r], n.partial.row(r), ga.row(r));
            break;
        }
        case OpKind::Softmax: {
            if (!wants(n.a)) break;
            Matrix& ga = grad_buffer(n.a);
            for (std::size_t r = 0; r < ga.rows(); ++r) {
                const double* s = n.value.row(r);
                const double* gr = g.row(r);
                const double inner = kt.dot(ga.cols(), gr, s);
                double* out = ga.row(r);
                for (std::size_t c = 0; c < ga.cols(); ++c) out[c] += s[c] * (gr[c] - inner);
            }
            break;
        }
        case OpKind::ConcatCols: {
            std::size_t offset = 0;
            for (std::uint32_t p : n.inputs) {
                const std::size_t w = nodes_[p].value.cols();
                if (wants(p)) {
                    Matrix& gp = grad_buffer(p);
                    for (std::size_t r = 0; r < g.rows(); ++r) kt.axpy(w, 1.0, g.row(r) + offset, gp.row(r));
                }
                offset += w;
            }
            break;
        }
        case OpKind::SliceCols: {
            if (!wants(n.a)) break;
            Matrix& ga = grad_buffer(n.a);
            const std::size_t w = n.i1 - n.i0;
            for (std::size_t r = 0; r < g.rows(); ++r) kt.axpy(w, 1.0, g.row(r), ga.row(r) + n.i0);
            break;
        }
        case OpKind::ConcatRows: {
            std::size_t offset = 0;
            for (std::uint32_t p : n.inputs) {
                const std::size_t sz = nodes_[p].value.size();
                if (wants(p)) kt.axpy(sz, 1.0, g.data() + offset, grad_buffer(p).data());
                offset += sz;
            }
            break;
        }
        case OpKind::SliceRows: {
            if (!wants(n.a)) break;
            Matrix& ga = grad_buffer(n.a);
            kt.axpy(g.size(), 1.0, g.data(), ga.row(n.i0));
            break;
        }
        case OpKind::Transpose: {
            if (!wants(n.a)) break;
            Matrix& ga = grad_buffer(n.a);
            for (std::size_t r = 0; r < ga.rows(); ++r)
                for (std::size_t c = 0; c < ga.cols(); ++c) ga(r, c) += g(c, r);
            break;
        }
        case OpKind::CumSumExclusive: {
            if (!wants(n.a)) break;
            Matrix& ga = grad_buffer(n.a);
            for (std::size_t r = 0; r < ga.rows(); ++r) {
                double tail = 0.0;
                for (std::size_t c = ga.cols(); c-- > 0;) {
                    ga(r, c) += tail;
                    tail += g(r, c);
                }
            }
            break;
        }
        case OpKind::MulRowTiled: {
            const Matrix& A = nodes_[n.a].value;
            const Matrix& G = nodes_[n.b].value;
            const std::size_t block = G.size();
            const std::size_t blocks = A.size() / block;
            if (wants(n.a)) {
                Matrix& ga = grad_buffer(n.a);
                for (std::size_t b = 0; b < blocks; ++b)
                    kt.mul_acc(block, g.data() + b * block, G.data(), ga.data() + b * block);
            }
            if (wants(n.b)) {
                Matrix& gg = grad_buffer(n.b);
                for (std::size_t b = 0; b < blocks; ++b)
                    kt.mul_acc(block, g.data() + b * block, A.data() + b * block, gg.data());
            }
            break;
        }
    }
}

// ---------------------------------------------------------------------------
// Ops

namespace {

Tape& same_tape(Var a, Var b, const char* op) {
    if (a.tape == nullptr || a.tape != b.tape)
        throw Error(std::string(op) + ": operands live on different tapes");
    return *a.tape;
}

[[noreturn]] void shape_error(const char* op, const Matrix& a, const Matrix& b) {
    throw Error(std::string(op) + ": shape mismatch " + a.shape_str() + " vs " + b.shape_str());
}

Tape::Node make(OpKind op, Var a, Var b = {}) {
    Tape::Node n;
    n.op = op;
    n.a = a.id;
    n.requires_grad = a.tape->node(a.id).requires_grad;
    if (b.tape != nullptr) {
        n.b = b.id;
        n.requires_grad = n.requires_grad || b.tape->node(b.id).requires_grad;
    }
    return n;
}

template <class F>
Var unary(Var a, const char* label, F&& fn) {
    const Matrix& x = a.value();
    Tape::Node n = make(OpKind::Unary, a);
    n.label = label;
    n.value = Matrix(x.rows(), x.cols());
    n.partial = Matrix(x.rows(), x.cols());
    for (std::size_t i = 0; i < x.size(); ++i) fn(x[i], n.value[i], n.partial[i]);
    return a.tape->push(std::move(n));
}

}  // namespace

Var matmul(Var a, Var b) {
    Tape& t = same_tape(a, b, "matmul");
    const Matrix& A = a.value();
    const Matrix& B = b.value();
    if (A.cols() != B.rows()) shape_error("matmul", A, B);
    Tape::Node n = make(OpKind::MatMul, a, b);
    n.value = Matrix(A.rows(), B.cols());
    K().gemm_nn(A.rows(), B.cols(), A.cols(), A.data(), B.data(), n.value.data(), false);
    return t.push(std::move(n));
}

Var add(Var a, Var b) {
    Tape& t = same_tape(a, b, "add");
    if (!a.value().same_shape(b.value())) shape_error("add", a.value(), b.value());
    Tape::Node n = make(OpKind::Add, a, b);
    n.value = a.value();
    K().axpy(n.value.size(), 1.0, b.value().data(), n.value.data());
    return t.push(std::move(n));
}

Var sub(Var a, Var b) {
    Tape& t = same_tape(a, b, "sub");
    if (!a.value().same_shape(b.value())) shape_error("sub", a.value(), b.value());
    Tape::Node n = make(OpKind::Sub, a, b);
    n.value = a.value();
    K().axpy(n.value.size(), -1.0, b.value().data(), n.value.data());
    return t.push(std::move(n));
}

Var mul(Var a, Var b) {
    Tape& t = same_tape(a, b, "mul");
    if (!a.value().same_shape(b.value())) shape_error("mul", a.value(), b.value());
    Tape::Node n = make(OpKind::Mul, a, b);
    n.value = Matrix(a.rows(), a.cols());
    K().mul(n.value.size(), a.value().data(), b.value().data(), n.value.data());
    return t.push(std::move(n));
}

Var add_row(Var a, Var row) {
    Tape& t = same_tape(a, row, "add_row");
    const Matrix& A = a.value();
    const Matrix& R = row.value();
    if (R.rows() != 1 || R.cols() != A.cols()) shape_error("add_row", A, R);
    Tape::Node n = make(OpKind::AddRow, a, row);
    n.value = A;
    for (std::size_t r = 0; r < A.rows(); ++r) K().axpy(A.cols(), 1.0, R.data(), n.value.row(r));
    return t.push(std::move(n));
}

Var mul_col(Var a, Var col) {
    Tape& t = same_tape(a, col, "mul_col");
    const Matrix& A = a.value();
    const Matrix& C = col.value();
    if (C.cols() != 1 || C.rows() != A.rows()) shape_error("mul_col", A, C);
    Tape::Node n = make(OpKind::MulCol, a, col);
    n.value = A;
    for (std::size_t r = 0; r < A.rows(); ++r) {
        double* row = n.value.row(r);
        for (std::size_t c = 0; c < A.cols(); ++c) row[c] *= C[r];
    }
    return t.push(std::move(n));
}

Var mul_scalar(Var a, Var s) {
    Tape& t = same_tape(a, s, "mul_scalar");
    if (s.value().size() != 1) shape_error("mul_scalar", a.value(), s.value());
    Tape::Node n = make(OpKind::MulScalar, a, s);
    n.value = a.value();
    const double k = s.value()[0];
    for (double& v : n.value.flat()) v *= k;
    return t.push(std::move(n));
}

Var div_scalar(Var a, Var s) {
    Tape& t = same_tape(a, s, "div_scalar");
    if (s.value().size() != 1) shape_error("div_scalar", a.value(), s.value());
    const double k = s.value()[0];
    if (!(k > 0.0)) throw Error("div_scalar: divisor must be positive, got " + std::to_string(k));
    Tape::Node n = make(OpKind::DivScalar, a, s);
    n.value = a.value();
    for (double& v : n.value.flat()) v /= k;
    return t.push(std::move(n));
}

Var scale(Var a, double c) {
    Tape::Node n = make(OpKind::Scale, a);
    n.scalar = c;
    n.value = a.value();
    for (double& v : n.value.flat()) v *= c;
    return a.tape->push(std::move(n));
}

Var div(Var a, double c) {
    if (!(c > 0.0)) throw Error("div: divisor must be positive, got " + std::to_string(c));
    return scale(a, 1.0 / c);
}

Var add_const(Var a, double c) {
    Tape::Node n = make(OpKind::AddConst, a);
    n.value = a.value();
    for (double& v : n.value.flat()) v += c;
    return a.tape->push(std::move(n));
}

Var neg(Var a) { return scale(a, -1.0); }

Var relu(Var a) {
    return unary(a, "relu", [](double x, double& y, double& d) {
        y = x > 0.0 ? x : 0.0;
        d = x > 0.0 ? 1.0 : 0.0;
    });
}

Var softplus(Var a, double beta) {
    if (!(beta > 0.0)) throw Error("softplus: beta must be positive");
    const Matrix& x = a.value();
    Tape::Node n = make(OpKind::Unary, a);
    n.label = "softplus";
    n.value = Matrix(x.rows(), x.cols());
    n.partial = Matrix(x.rows(), x.cols());
    K().softplus(x.size(), beta, x.data(), n.value.data(), n.partial.data());
    return a.tape->push(std::move(n));
}

Var softplus_slope(Var a, double beta) {
    if (!(beta > 0.0)) throw Error("softplus_slope: beta must be positive");
    const Matrix& x = a.value();
    Tape::Node n = make(OpKind::Unary, a);
    n.label = "softplus_slope";
    n.value = Matrix(x.rows(), x.cols());
    n.partial = Matrix(x.rows(), x.cols());
    for (std::size_t i = 0; i < x.size(); ++i) n.partial[i] = beta * x[i];
    K().sigmoid(x.size(), n.partial.data(), n.value.data());
    for (std::size_t i = 0; i < x.size(); ++i) n.partial[i] = beta * n.value[i] * (1.0 - n.value[i]);
    return a.tape->push(std::move(n));
}

Var reciprocal(Var a) {
    return unary(a, "reciprocal", [](double x, double& y, double& d) {
        y = 1.0 / x;
        d = -y * y;
    });
}

Var sigmoid(Var a) {
    const Matrix& x = a.value();
    Tape::Node n = make(OpKind::Unary, a);
    n.label = "sigmoid";
    n.value = Matrix(x.rows(), x.cols());
    n.partial = Matrix(x.rows(), x.cols());
    K().sigmoid(x.size(), x.data(), n.value.data());
    for (std::size_t i = 0; i < x.size(); ++i) n.partial[i] = n.value[i] * (1.0 - n.value[i]);
    return a.tape->push(std::move(n));
}

Var exp(Var a) {
    return unary(a, "exp", [](double x, double& y, double& d) { y = d = std::exp(x); });
}

Var log(Var a) {
    return unary(a, "log", [](double x, double& y, double& d) {
        y = std::log(x);
        d = 1.0 / x;
    });
}

Var sin(Var a) {
    return unary(a, "sin", [](double x, double& y, double& d) {
        y = std::sin(x);
        d = std::cos(x);
    });
}

Var cos(Var a) {
    return unary(a, "cos", [](double x, double& y, double& d) {
        y = std::cos(x);
        d = -std::sin(x);
    });
}

Var abs(Var a) {
    return unary(a, "abs", [](double x, double& y, double& d) {
        y = std::abs(x);
        d = x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0);
    });
}

Var sqrt(Var a) {
    return unary(a, "sqrt", [](double x, double& y, double& d) {
        y = std::sqrt(x);
        d = 0.5 / y;
    });
}

Var square(Var a) {
    return unary(a, "square", [](double x, double& y, double& d) {
        y = x * x;
        d = 2.0 * x;
    });
}

Var clamp_min(Var a, double lo) {
    return unary(a, "clamp_min", [lo](double x, double& y, double& d) {
        y = x > lo ? x : lo;
        d = x > lo ? 1.0 : 0.0;
    });
}

Var clamp(Var a, double lo, double hi) {
    return unary(a, "clamp", [lo, hi](double x, double& y, double& d) {
        y = std::clamp(x, lo, hi);
        d = (x > lo && x < hi) ? 1.0 : 0.0;
    });
}

Var laplace_cdf(Var a) {
    // exp(-|u|) never overflows, so both branches are evaluated from it.
    return unary(a, "laplace_cdf", [](double u, double& y, double& d) {
        const double e = std::exp(-std::abs(u));
        y = u <= 0.0 ? 0.5 * e : 1.0 - 0.5 * e;
        d = 0.5 * e;
    });
}

Var sum(Var a) {
    Tape::Node n = make(OpKind::Sum, a);
    double s = 0.0;
    for (double v : a.value().flat()) s += v;
    n.value = Matrix::scalar(s);
    return a.tape->push(std::move(n));
}

Var mean(Var a) {
    if (a.value().empty()) throw Error("mean of empty node");
    Tape::Node n = make(OpKind::Mean, a);
    double s = 0.0;
    for (double v : a.value().flat()) s += v;
    n.value = Matrix::scalar(s / static_cast<double>(a.value().size()));
    return a.tape->push(std::move(n));
}

Var row_sum(Var a) {
    const Matrix& A = a.value();
    Tape::Node n = make(OpKind::RowSum, a);
    n.value = Matrix(A.rows(), 1);
    for (std::size_t r = 0; r < A.rows(); ++r) {
        double s = 0.0;
        for (std::size_t c = 0; c < A.cols(); ++c) s += A(r, c);
        n.value[r] = s;
    }
    return a.tape->push(std::move(n));
}

Var row_group_sum(Var a, std::size_t group) {
    const Matrix& A = a.value();
    if (group == 0 || A.rows() % group != 0)
        throw Error("row_group_sum: " + std::to_string(A.rows()) + " rows not divisible by group " +
                    std::to_string(group));
    Tape::Node n = make(OpKind::RowGroupSum, a);
    n.i0 = group;
    n.value = Matrix(A.rows() / group, A.cols());
    for (std::size_t r = 0; r < A.rows(); ++r) K().axpy(A.cols(), 1.0, A.row(r), n.value.row(r / group));
    return a.tape->push(std::move(n));
}

Var row_max(Var a) {
    const Matrix& A = a.value();
    if (A.cols() == 0) throw Error("row_max of a matrix with no columns");
    Tape::Node n = make(OpKind::RowMax, a);
    n.value = Matrix(A.rows(), 1);
    n.partial = Matrix(A.rows(), 1);
    for (std::size_t r = 0; r < A.rows(); ++r) {
        const double* row = A.row(r);
        const std::size_t best = static_cast<std::size_t>(std::max_element(row, row + A.cols()) - row);
        n.value[r] = row[best];
        n.partial[r] = static_cast<double>(best);
    }
    return a.tape->push(std::move(n));
}

Var row_norm_l2(Var a) {
    const Matrix& A = a.value();
    Tape::Node n = make(OpKind::RowNormL2, a);
    n.value = Matrix(A.rows(), 1);
    n.partial = Matrix(A.rows(), A.cols());
    for (std::size_t r = 0; r < A.rows(); ++r) {
        const double nr = std::sqrt(K().dot(A.cols(), A.row(r), A.row(r)));
        n.value[r] = nr;
        if (nr > 0.0)
            for (std::size_t c = 0; c < A.cols(); ++c) n.partial(r, c) = A(r, c) / nr;
    }
    return a.tape->push(std::move(n));
}

Var row_norm_l1(Var a) {
    const Matrix& A = a.value();
    Tape::Node n = make(OpKind::RowNormL1, a);
    n.value = Matrix(A.rows(), 1);
    n.partial = Matrix(A.rows(), A.cols());
    for (std::size_t r = 0; r < A.rows(); ++r) {
        double s = 0.0;
        for (std::size_t c = 0; c < A.cols(); ++c) {
            const double x = A(r, c);
            s += std::abs(x);
            n.partial(r, c) = x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0);
        }
        n.value[r] = s;
    }
    return a.tape->push(std::move(n));
}

Var softmax_rows(Var a) {
    const Matrix& A = a.value();
    Tape::Node n = make(OpKind::Softmax, a);
    n.value = Matrix(A.rows(), A.cols());
    for (std::size_t r = 0; r < A.rows(); ++r) {
        const double* x = A.row(r);
        double* y = n.value.row(r);
        const double mx = *std::max_element(x, x + A.cols());
        double z = 0.0;
        for (std::size_t c = 0; c < A.cols(); ++c) z += (y[c] = std::exp(x[c] - mx));
        for (std::size_t c = 0; c < A.cols(); ++c) y[c] /= z;
    }
    return a.tape->push(std::move(n));
}

Var concat_cols(std::span<const Var> parts) {
    if (parts.empty()) throw Error("concat_cols of zero parts");
    Tape& t = *parts[0].tape;
    const std::size_t rows = parts[0].rows();
    std::size_t cols = 0;
    Tape::Node n;
    n.op = OpKind::ConcatCols;
    for (const Var& p : parts) {
        if (p.tape != &t) throw Error("concat_cols: operands live on different tapes");
        if (p.rows() != rows) shape_error("concat_cols", parts[0].value(), p.value());
        cols += p.cols();
        n.inputs.push_back(p.id);
        n.requires_grad = n.requires_grad || t.node(p.id).requires_grad;
    }
    n.value = Matrix(rows, cols);
    std::size_t offset = 0;
    for (const Var& p : parts) {
        const Matrix& P = p.value();
        for (std::size_t r = 0; r < rows; ++r) std::copy_n(P.row(r), P.cols(), n.value.row(r) + offset);
        offset += P.cols();
    }
    return t.push(std::move(n));
}

Var slice_cols(Var a, std::size_t begin, std::size_t end) {
    const Matrix& A = a.value();
    if (begin >= end || end > A.cols())
        throw Error("slice_cols: range [" + std::to_string(begin) + ", " + std::to_string(end) +
                    ") out of " + A.shape_str());
    Tape::Node n = make(OpKind::SliceCols, a);
    n.i0 = begin;
    n.i1 = end;
    n.value = Matrix(A.rows(), end - begin);
    for (std::size_t r = 0; r < A.rows(); ++r) std::copy(A.row(r) + begin, A.row(r) + end, n.value.row(r));
    return a.tape->push(std::move(n));
}

Var concat_rows(std::span<const Var> parts) {
    if (parts.empty()) throw Error("concat_rows of zero parts");
    Tape& t = *parts[0].tape;
    const std::size_t cols = parts[0].cols();
    std::size_t rows = 0;
    Tape::Node n;
    n.op = OpKind::ConcatRows;
    for (const Var& p : parts) {
        if (p.tape != &t) throw Error("concat_rows: operands live on different tapes");
        if (p.cols() != cols) shape_error("concat_rows", parts[0].value(), p.value());
        rows += p.rows();
        n.inputs.push_back(p.id);
        n.requires_grad = n.requires_grad || t.node(p.id).requires_grad;
    }
    n.value = Matrix(rows, cols);
    std::size_t offset = 0;
    for (const Var& p : parts) {
        std::copy_n(p.value().data(), p.value().size(), n.value.data() + offset);
        offset += p.value().size();
    }
    return t.push(std::move(n));
}

Var slice_rows(Var a, std::size_t begin, std::size_t end) {
    const Matrix& A = a.value();
    if (begin >= end || end > A.rows())
        throw Error("slice_rows: range [" + std::to_string(begin) + ", " + std::to_string(end) +
                    ") out of " + A.shape_str());
    Tape::Node n = make(OpKind::SliceRows, a);
    n.i0 = begin;
    n.i1 = end;
    n.value = Matrix(end - begin, A.cols());
    std::copy(A.row(begin), A.row(begin) + n.value.size(), n.value.data());
    return a.tape->push(std::move(n));
}

Var reshape(Var a, std::size_t rows, std::size_t cols) {
    Tape::Node n = make(OpKind::Reshape, a);
    n.value = a.value();
    n.value.reshape(rows, cols);
    return a.tape->push(std::move(n));
}

Var transpose(Var a) {
    Tape::Node n = make(OpKind::Transpose, a);
    n.value = a.value().transposed();
    return a.tape->push(std::move(n));
}

Var cumsum_exclusive(Var a) {
    const Matrix& A = a.value();
    Tape::Node n = make(OpKind::CumSumExclusive, a);
    n.value = Matrix(A.rows(), A.cols());
    for (std::size_t r = 0; r < A.rows(); ++r) {
        double run = 0.0;
        for (std::size_t c = 0; c < A.cols(); ++c) {
            n.value(r, c) = run;
            run += A(r, c);
        }
    }
    return a.tape->push(std::move(n));
}

Var mul_row_tiled(Var a, Var g) {
    Tape& t = same_tape(a, g, "mul_row_tiled");
    const Matrix& A = a.value();
    const Matrix& G = g.value();
    if (A.cols() != G.cols() || G.rows() == 0 || A.rows() % G.rows() != 0) shape_error("mul_row_tiled", A, G);
    Tape::Node n = make(OpKind::MulRowTiled, a, g);
    n.value = Matrix(A.rows(), A.cols());
    const std::size_t block = G.size();
    for (std::size_t b = 0; b < A.size() / block; ++b)
        K().mul(block, A.data() + b * block, G.data(), n.value.data() + b * block);
    return t.push(std::move(n));
}

}  // namespace mvps::ad

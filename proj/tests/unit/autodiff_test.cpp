// Copyright Contributors to the mvps-fusion Project
// SPDX-License-Identifier: Apache-2.0

#include "mvps/ad/adam.hpp"
#include "mvps/ad/tape.hpp"
#include "mvps/common/error.hpp"

#include "finite_difference.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <functional>
#include <random>
#include <string>

using namespace mvps::ad;
using mvps::testing::central_difference;
using mvps::testing::relative_error;

namespace {

Matrix random_matrix(std::size_t r, std::size_t c, std::mt19937_64& rng, double lo = -2.0, double hi = 2.0) {
    std::uniform_real_distribution<double> u(lo, hi);
    Matrix m(r, c);
    for (double& v : m.flat()) v = u(rng);
    return m;
}

// Worst relative error over every entry of every param.
double max_gradient_error(std::vector<Param*> params, const std::function<Var(Tape&)>& build) {
    for (Param* p : params) p->zero_grad();
    Tape tape;
    tape.backward(build(tape));
    double worst = 0.0;
    for (Param* p : params) {
        const Matrix analytic = p->grad;
        for (std::size_t i = 0; i < p->value.size(); ++i) {
            const double fd = central_difference(*p, i, build);
            worst = std::max(worst, relative_error(analytic[i], fd));
        }
    }
    return worst;
}

}  // namespace

TEST(Autodiff, SoftmaxOfZerosIsUniform) {
    Tape t;
    const Var s = softmax_rows(t.constant(Matrix(1, 3, 0.0)));
    for (std::size_t i = 0; i < 3; ++i) EXPECT_DOUBLE_EQ(s.value()[i], 1.0 / 3.0);
}

TEST(Autodiff, ReluDerivativeIsPiecewise) {
    for (auto [x, expect] : {std::pair{2.0, 1.0}, std::pair{-2.0, 0.0}}) {
        Param p("x", Matrix::scalar(x));
        Tape t;
        t.backward(sum(relu(t.param(p))));
        EXPECT_EQ(p.grad[0], expect);
    }
}

TEST(Autodiff, ExpDerivativeAtZeroIsOne) {
    Param p("x", Matrix::scalar(0.0));
    Tape t;
    t.backward(sum(exp(t.param(p))));
    EXPECT_DOUBLE_EQ(p.grad[0], 1.0);
}

TEST(Autodiff, LinearMapGradientIsBroadcastInput) {
    std::mt19937_64 rng(1);
    Param w("W", random_matrix(2, 3, rng));
    const Matrix x = random_matrix(3, 1, rng);
    Tape t;
    t.backward(sum(matmul(t.param(w), t.constant(x))));
    for (std::size_t r = 0; r < 2; ++r)
        for (std::size_t c = 0; c < 3; ++c) EXPECT_DOUBLE_EQ(w.grad(r, c), x[c]);
}

TEST(Autodiff, NonParticipatingParamGetsZero) {
    Param w("W", Matrix(2, 2, 1.0));
    w.grad.fill(5.0);
    Param other("b", Matrix(1, 1, 3.0));
    Tape t;
    const Var unused = t.param(w);
    (void)unused;
    t.backward(sum(t.param(other)));
    for (double g : w.grad.flat()) EXPECT_EQ(g, 0.0);
    EXPECT_EQ(other.grad[0], 1.0);
}

TEST(Autodiff, ShapeMismatchNamesBothShapes) {
    Tape t;
    const Var a = t.constant(Matrix(2, 3));
    const Var b = t.constant(Matrix(4, 5));
    try {
        (void)matmul(a, b);
        FAIL() << "expected shape error";
    } catch (const mvps::Error& e) {
        const std::string msg = e.what();
        EXPECT_NE(msg.find("(2 x 3)"), std::string::npos) << msg;
        EXPECT_NE(msg.find("(4 x 5)"), std::string::npos) << msg;
    }
    EXPECT_THROW((void)add(a, b), mvps::Error);
}

TEST(Autodiff, NonFiniteInputReportsNodeIndex) {
    Tape t;
    (void)t.constant(Matrix(1, 1, 1.0));
    try {
        (void)t.constant(Matrix(1, 1, std::nan("")));
        FAIL() << "expected non-finite error";
    } catch (const mvps::Error& e) {
        EXPECT_NE(std::string(e.what()).find("node 1"), std::string::npos) << e.what();
    }
    const Var neg_one = t.constant(Matrix(1, 1, -1.0));
    EXPECT_THROW((void)log(neg_one), mvps::Error);
}

TEST(Autodiff, BackwardRejectsNonScalarRoot) {
    Param p("x", Matrix(2, 1, 1.0));
    Tape t;
    EXPECT_THROW(t.backward(t.param(p)), mvps::Error);
}

TEST(Autodiff, EveryPrimitiveMatchesFiniteDifferences) {
    std::mt19937_64 rng(42);
    using Unary = std::function<Var(Var)>;
    const std::vector<std::pair<std::string, Unary>> unaries{
        {"relu", [](Var v) { return relu(v); }},
        {"softplus", [](Var v) { return softplus(v, 3.0); }},
        {"sigmoid", [](Var v) { return sigmoid(v); }},
        {"softplus_slope", [](Var v) { return softplus_slope(v, 3.0); }},
        {"exp", [](Var v) { return exp(v); }},
        {"sin", [](Var v) { return sin(v); }},
        {"cos", [](Var v) { return cos(v); }},
        {"abs", [](Var v) { return abs(v); }},
        {"square", [](Var v) { return square(v); }},
        {"clamp_min", [](Var v) { return clamp_min(v, 0.1); }},
        {"laplace_cdf", [](Var v) { return laplace_cdf(v); }},
        {"scale", [](Var v) { return scale(v, -1.7); }},
        {"add_const", [](Var v) { return add_const(v, 0.4); }},
        {"div", [](Var v) { return div(v, 2.5); }},
        {"row_norm_l2", [](Var v) { return row_norm_l2(v); }},
        {"row_norm_l1", [](Var v) { return row_norm_l1(v); }},
        {"row_sum", [](Var v) { return row_sum(v); }},
        {"row_max", [](Var v) { return row_max(v); }},
        {"softmax", [](Var v) { return softmax_rows(v); }},
        {"transpose", [](Var v) { return transpose(v); }},
        {"cumsum_exclusive", [](Var v) { return cumsum_exclusive(v); }},
        {"slice_cols", [](Var v) { return slice_cols(v, 1, 3); }},
        {"slice_rows", [](Var v) { return slice_rows(v, 1, 3); }},
        {"reshape", [](Var v) { return reshape(v, 2, 8); }},
        {"row_group_sum", [](Var v) { return row_group_sum(v, 2); }},
        {"mean", [](Var v) { return mean(v); }},
    };
    for (const auto& [name, op] : unaries) {
        Param x("x", random_matrix(4, 4, rng));
        const auto build = [&, op = op](Tape& t) {
            const Var y = op(t.param(x));
            Matrix w(y.rows(), y.cols());
            std::mt19937_64 wr(5);
            std::uniform_real_distribution<double> u(-1.0, 1.0);
            for (double& v : w.flat()) v = u(wr);
            return sum(mul(y, t.constant(w)));
        };
        EXPECT_LT(max_gradient_error({&x}, build), 1e-3) << name;
    }

    // Positive-domain primitives.
    for (const auto& [name, op] : std::vector<std::pair<std::string, Unary>>{
             {"log", [](Var v) { return log(v); }}, {"sqrt", [](Var v) { return sqrt(v); }},
             {"reciprocal", [](Var v) { return reciprocal(v); }}}) {
        Param x("x", random_matrix(3, 3, rng, 0.2, 2.0));
        EXPECT_LT(max_gradient_error({&x}, [&, op = op](Tape& t) { return sum(op(t.param(x))); }), 1e-3)
            << name;
    }

    // Binary and variadic primitives.
    Param a("a", random_matrix(4, 3, rng));
    Param b("b", random_matrix(4, 3, rng));
    Param m("m", random_matrix(3, 5, rng));
    Param row("row", random_matrix(1, 3, rng));
    Param col("col", random_matrix(4, 1, rng));
    Param s("s", random_matrix(1, 1, rng, 0.5, 2.0));
    Param g("g", random_matrix(2, 3, rng));
    const std::vector<std::pair<std::string, std::function<Var(Tape&)>>> binaries{
        {"matmul", [&](Tape& t) { return sum(sin(matmul(t.param(a), t.param(m)))); }},
        {"add", [&](Tape& t) { return sum(square(t.param(a) + t.param(b))); }},
        {"sub", [&](Tape& t) { return sum(square(t.param(a) - t.param(b))); }},
        {"mul", [&](Tape& t) { return sum(t.param(a) * t.param(b)); }},
        {"add_row", [&](Tape& t) { return sum(square(add_row(t.param(a), t.param(row)))); }},
        {"mul_col", [&](Tape& t) { return sum(square(mul_col(t.param(a), t.param(col)))); }},
        {"mul_scalar", [&](Tape& t) { return sum(square(mul_scalar(t.param(a), t.param(s)))); }},
        {"div_scalar", [&](Tape& t) { return sum(square(div_scalar(t.param(a), t.param(s)))); }},
        {"concat_cols",
         [&](Tape& t) {
             const Var parts[] = {t.param(a), t.param(b)};
             return sum(sin(concat_cols(parts)));
         }},
        {"concat_rows",
         [&](Tape& t) {
             const Var parts[] = {t.param(a), t.param(b)};
             return sum(sin(concat_rows(parts)));
         }},
        {"mul_row_tiled", [&](Tape& t) { return sum(sin(mul_row_tiled(t.param(a), t.param(g)))); }},
    };
    for (const auto& [name, build] : binaries)
        EXPECT_LT(max_gradient_error({&a, &b, &m, &row, &col, &s, &g}, build), 1e-3) << name;
}

TEST(Autodiff, RandomThreeLayerMlpMatchesFiniteDifferences) {
    std::mt19937_64 rng(2024);
    Param w1("w1", random_matrix(3, 8, rng, -1, 1)), b1("b1", random_matrix(1, 8, rng, -1, 1));
    Param w2("w2", random_matrix(8, 8, rng, -1, 1)), b2("b2", random_matrix(1, 8, rng, -1, 1));
    Param w3("w3", random_matrix(8, 1, rng, -1, 1)), b3("b3", random_matrix(1, 1, rng, -1, 1));
    const Matrix x = random_matrix(6, 3, rng);
    const auto build = [&](Tape& t) {
        Var h = softplus(add_row(matmul(t.constant(x), t.param(w1)), t.param(b1)), 2.0);
        h = softplus(add_row(matmul(h, t.param(w2)), t.param(b2)), 2.0);
        const Var out = add_row(matmul(h, t.param(w3)), t.param(b3));
        return mean(square(out));
    };
    EXPECT_LT(max_gradient_error({&w1, &b1, &w2, &b2, &w3, &b3}, build), 1e-3);
}

TEST(Autodiff, EvaluationIsDeterministic) {
    std::mt19937_64 rng(9);
    Param w("w", random_matrix(5, 5, rng));
    const Matrix x = random_matrix(7, 5, rng);
    auto run = [&] {
        Tape t;
        const Var loss = sum(softplus(matmul(t.constant(x), t.param(w)), 10.0));
        t.backward(loss);
        return std::pair{loss.item(), w.grad};
    };
    const auto first = run();
    const auto second = run();
    EXPECT_EQ(first.first, second.first);
    EXPECT_EQ(first.second, second.second);
}

TEST(Adam, ZeroGradientLeavesParametersUnchanged) {
    Param p("p", Matrix(2, 2, 0.7));
    Adam opt({&p}, {.lr = 0.1});
    p.zero_grad();
    ASSERT_TRUE(opt.step());
    for (double v : p.value.flat()) EXPECT_EQ(v, 0.7);
}

TEST(Adam, FirstStepMovesByLearningRate) {
    // Bias-corrected first step: m_hat = g, v_hat = g^2, so the update is
    // lr * g / (|g| + eps).
    Param p("p", Matrix::scalar(1.0));
    Adam opt({&p}, {.lr = 0.1});
    p.grad[0] = 1.0;
    ASSERT_TRUE(opt.step());
    EXPECT_NEAR(p.value[0], 1.0 - 0.1 / (1.0 + 1e-8), 1e-15);
}

TEST(Adam, ConstantGradientMovesMonotonically) {
    Param p("p", Matrix::scalar(0.0));
    Adam opt({&p}, {.lr = 0.01});
    double last = p.value[0];
    for (int i = 0; i < 200; ++i) {
        p.grad[0] = 2.5;
        ASSERT_TRUE(opt.step());
        EXPECT_LT(p.value[0], last);
        last = p.value[0];
    }
}

TEST(Adam, NonFiniteGradientSkipsUpdate) {
    Param p("p", Matrix(1, 2, 1.0));
    Adam opt({&p}, {.lr = 0.1});
    p.grad[0] = 1.0;
    p.grad[1] = std::numeric_limits<double>::infinity();
    EXPECT_FALSE(opt.step());
    EXPECT_EQ(p.value[0], 1.0);
    EXPECT_EQ(opt.steps(), 0);
}

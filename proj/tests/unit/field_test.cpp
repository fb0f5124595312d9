// Copyright Contributors to the mvps-fusion Project
// SPDX-License-Identifier: Apache-2.0

#include "finite_difference.hpp"
#include "mvps/common/error.hpp"
#include "mvps/field/encoding.hpp"
#include "mvps/field/networks.hpp"
#include "mvps/mesh/marching_cubes.hpp"
#include "mvps/mesh/metrics.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>

using mvps::Rng;
using mvps::Vec3;
using mvps::ad::Matrix;
using mvps::ad::Param;
using mvps::ad::Tape;
using mvps::ad::Var;
using namespace mvps::field;

namespace {

Matrix random_points(std::size_t n, std::uint64_t seed, double half = 1.0) {
    Rng rng(seed);
    std::uniform_real_distribution<double> u(-half, half);
    Matrix m(n, 3);
    for (double& v : m.flat()) v = u(rng);
    return m;
}

Matrix random_unit_rows(std::size_t n, std::uint64_t seed) {
    Rng rng(seed);
    std::normal_distribution<double> g(0.0, 1.0);
    Matrix m(n, 3);
    for (std::size_t i = 0; i < n; ++i) {
        const Vec3 d = mvps::normalized(Vec3{g(rng), g(rng), g(rng)});
        for (int a = 0; a < 3; ++a) m(i, a) = d[a];
    }
    return m;
}

SdfNetConfig small_sdf_config() {
    SdfNetConfig c;
    c.hidden_layers = 3;
    c.width = 16;
    c.skip_layers = {2};
    c.feature_dim = 5;
    c.octaves = 2;
    return c;
}

RadianceNetConfig small_radiance_config() {
    RadianceNetConfig c;
    c.hidden_layers = 2;
    c.width = 12;
    c.pos_octaves = 2;
    c.dir_octaves = 1;
    return c;
}

// Draws `count` (param, index) pairs from the list.
std::vector<std::pair<Param*, std::size_t>> pick_entries(const std::vector<Param*>& ps, int count,
                                                         std::uint64_t seed) {
    Rng rng(seed);
    std::vector<std::pair<Param*, std::size_t>> out;
    std::uniform_int_distribution<std::size_t> which(0, ps.size() - 1);
    while (static_cast<int>(out.size()) < count) {
        Param* p = ps[which(rng)];
        std::uniform_int_distribution<std::size_t> idx(0, p->value.size() - 1);
        out.emplace_back(p, idx(rng));
    }
    return out;
}

}  // namespace

TEST(Encoding, ZeroOctavesIsIdentity) {
    const Matrix x = random_points(4, 1);
    EXPECT_EQ(encode(x, 0), x);
}

TEST(Encoding, OriginGivesZeroSinesAndUnitCosines) {
    const Matrix e = encode(Matrix(1, 3, 0.0), 3);
    ASSERT_EQ(e.cols(), 21u);
    for (std::size_t k = 0; k < 3; ++k)
        for (int a = 0; a < 3; ++a) {
            EXPECT_EQ(e(0, 3 + 6 * k + a), 0.0);
            EXPECT_EQ(e(0, 6 + 6 * k + a), 1.0);
        }
}

TEST(Encoding, DimensionCountsRawInputPlusSinCos) {
    EXPECT_EQ(encoded_dim(6), 39u);
    EXPECT_EQ(encode(random_points(2, 3), 6).cols(), 39u);
}

TEST(Encoding, LayoutFollowsOctaveOrder) {
    Matrix x(1, 3);
    x(0, 0) = 0.1;
    x(0, 1) = -0.3;
    x(0, 2) = 0.7;
    const Matrix e = encode(x, 2);
    for (int a = 0; a < 3; ++a) {
        EXPECT_EQ(e(0, a), x(0, a));
        for (int k = 0; k < 2; ++k) {
            const double f = std::ldexp(std::numbers::pi, k);
            EXPECT_DOUBLE_EQ(e(0, 3 + 6 * k + a), std::sin(f * x(0, a)));
            EXPECT_DOUBLE_EQ(e(0, 6 + 6 * k + a), std::cos(f * x(0, a)));
        }
    }
}

TEST(Encoding, JacobianMatchesFiniteDifferences) {
    const Matrix x = random_points(3, 5);
    const int oct = 3;
    const Matrix J = encode_jacobian(x, oct);
    const std::size_t P = x.rows(), E = encoded_dim(oct);
    ASSERT_EQ(J.rows(), 3 * P);
    const double h = 1e-6;
    for (int a = 0; a < 3; ++a) {
        Matrix xp = x, xm = x;
        for (std::size_t p = 0; p < P; ++p) {
            xp(p, a) += h;
            xm(p, a) -= h;
        }
        const Matrix ep = encode(xp, oct), em = encode(xm, oct);
        for (std::size_t p = 0; p < P; ++p)
            for (std::size_t c = 0; c < E; ++c)
                EXPECT_NEAR(J(a * P + p, c), (ep(p, c) - em(p, c)) / (2 * h), 1e-6);
    }
}

TEST(SdfNet, DefaultShapeHasEightLayersAndFullFeature) {
    const SdfNet net(SdfNetConfig{}, 1);
    EXPECT_EQ(net.linear_layers(), 9u);
    EXPECT_EQ(net.feature_dim(), 256u);
    EXPECT_TRUE(net.is_skip(4));
    EXPECT_EQ(net.layer_input_dim(4), 256u + encoded_dim(6));
    Tape t;
    const SdfEval e = net.eval(t, random_points(3, 2), true);
    EXPECT_EQ(e.feature.cols(), 256u);
    EXPECT_EQ(e.grad.cols(), 3u);
}

TEST(SdfNet, GeometricInitSignsMatchSphere) {
    const SdfNetConfig cfg;
    const SdfNet net(cfg, 42);
    const Matrix dirs = random_unit_rows(50, 3);
    for (std::size_t i = 0; i < dirs.rows(); ++i) {
        const Vec3 d{dirs(i, 0), dirs(i, 1), dirs(i, 2)};
        EXPECT_LT(net.value(d * (0.5 * cfg.init_radius)), 0.0);
        EXPECT_GT(net.value(d * (2.0 * cfg.init_radius)), 0.0);
    }
}

TEST(SdfNet, FreshNetworkLevelSetIsSphere) {
    const SdfNetConfig cfg;
    const SdfNet net(cfg, 7);
    const auto m = mvps::mesh::marching_cubes(net, mvps::mesh::grid_around_sphere(1.0, 40));
    ASSERT_FALSE(m.empty());
    Rng rng(3);
    const auto pred = mvps::mesh::sample_surface(m, 5000, rng);
    std::vector<Vec3> ref;
    const Matrix dirs = random_unit_rows(5000, 9);
    for (std::size_t i = 0; i < dirs.rows(); ++i) ref.push_back(Vec3{dirs(i, 0), dirs(i, 1), dirs(i, 2)} * cfg.init_radius);
    EXPECT_LT(mvps::mesh::chamfer_l2(pred, ref), 0.05 * cfg.init_radius);
}

TEST(SdfNet, SphereFitTightensNarrowNetworks) {
    SdfNetConfig cfg;
    cfg.hidden_layers = 3;
    cfg.width = 32;
    cfg.skip_layers = {};
    cfg.feature_dim = 8;
    cfg.init_fit_steps = 300;
    const SdfNet net(cfg, 5);
    const Matrix pts = random_points(200, 8);
    const auto v = net.values(pts);
    double worst = 0.0;
    for (std::size_t i = 0; i < pts.rows(); ++i) {
        const double r = std::sqrt(pts(i, 0) * pts(i, 0) + pts(i, 1) * pts(i, 1) + pts(i, 2) * pts(i, 2));
        worst = std::max(worst, std::abs(v[i] - (r - cfg.init_radius)));
    }
    EXPECT_LT(worst, 0.05);
}

TEST(SdfNet, EvaluationIsDeterministic) {
    const SdfNet a(small_sdf_config(), 11), b(small_sdf_config(), 11);
    const Matrix pts = random_points(20, 4);
    EXPECT_EQ(a.values(pts), a.values(pts));
    EXPECT_EQ(a.values(pts), b.values(pts));
    Tape t1, t2;
    EXPECT_EQ(a.eval(t1, pts, true).grad.value(), a.eval(t2, pts, true).grad.value());
}

TEST(SdfNet, TapeFreeValuesMatchTapeEvaluation) {
    const SdfNet net(small_sdf_config(), 3);
    const Matrix pts = random_points(5000, 6);
    Tape t;
    const Matrix& s = net.eval(t, pts, false).sdf.value();
    const auto v = net.values(pts);
    for (std::size_t i = 0; i < pts.rows(); ++i) EXPECT_EQ(v[i], s[i]);
}

TEST(SdfNet, SpatialGradientMatchesFiniteDifferences) {
    const SdfNet net(small_sdf_config(), 12);
    const Matrix pts = random_points(10, 13);
    Tape t;
    const Matrix g = net.eval(t, pts, true).grad.value();
    const double h = 1e-6;
    for (std::size_t i = 0; i < pts.rows(); ++i)
        for (int a = 0; a < 3; ++a) {
            Vec3 p{pts(i, 0), pts(i, 1), pts(i, 2)}, q = p;
            p[a] += h;
            q[a] -= h;
            EXPECT_NEAR(g(i, a), (net.value(p) - net.value(q)) / (2 * h), 1e-5);
        }
}

TEST(SdfNet, ParameterGradientsMatchFiniteDifferences) {
    SdfNet net(small_sdf_config(), 21);
    const Matrix pts = random_points(6, 22);
    const Matrix target_grad = random_points(6, 24);
    const Matrix feature_weights = random_points(6 * 5 / 3, 25);
    auto build = [&](Tape& t) {
        const SdfEval e = net.eval(t, pts, true);
        Matrix wf(6, 5);
        for (std::size_t i = 0; i < wf.size(); ++i) wf[i] = feature_weights[i];
        // Quadratic in the spatial gradient so second-order paths are exercised.
        return sum(square(e.sdf)) + sum(square(e.grad - t.constant(target_grad))) +
               sum(mul(e.feature, t.constant(wf))) + sum(mul(net.alpha(t), net.beta(t)));
    };
    Tape t;
    const Var loss = build(t);
    for (Param* p : net.params()) p->zero_grad();
    t.backward(loss);
    for (const auto& [p, i] : pick_entries(net.params(), 10, 26)) {
        const double fd = mvps::testing::central_difference(*p, i, build, 1e-5);
        EXPECT_LT(mvps::testing::relative_error(p->grad[i], fd, 1e-7), 2e-3) << p->name << "[" << i << "]";
    }
}

TEST(SdfNet, DensityParametersStayPositive) {
    SdfNet net(small_sdf_config(), 2);
    EXPECT_NEAR(net.beta_value(), 0.1, 1e-15);
    EXPECT_NEAR(net.alpha_value(), 10.0, 1e-12);
    for (Param* p : net.params())
        if (p->name == "sdf.log_beta" || p->name == "sdf.log_alpha") p->value[0] = -40.0;
    EXPECT_GT(net.alpha_value(), 0.0);
    EXPECT_GT(net.beta_value(), 0.0);
    Tape t;
    EXPECT_GT(net.beta(t).item(), 0.0);
}

TEST(SdfNet, SkipLayerInputIsHiddenStateAndEncoding) {
    SdfNetConfig cfg = small_sdf_config();
    cfg.hidden_layers = 4;
    cfg.skip_layers = {4};  // the output layer reads the skip concatenation
    SdfNet net(cfg, 31);
    const std::size_t W = static_cast<std::size_t>(cfg.width);
    const std::size_t last = net.linear_layers() - 1;
    ASSERT_TRUE(net.is_skip(last));
    Param& w = net.weight(last);
    ASSERT_EQ(w.value.rows(), W + encoded_dim(cfg.octaves));
    // Silence every path except the skip: the output becomes enc(x) W_enc / sqrt 2 + b.
    for (std::size_t r = 0; r < W; ++r)
        for (std::size_t c = 0; c < w.value.cols(); ++c) w.value(r, c) = 0.0;
    const Matrix pts = random_points(7, 32);
    const Matrix enc = encode(pts, cfg.octaves);
    const auto v = net.values(pts);
    for (std::size_t i = 0; i < pts.rows(); ++i) {
        double expect = net.bias(last).value[0];
        for (std::size_t k = 0; k < enc.cols(); ++k) expect += enc(i, k) * w.value(W + k, 0) / std::sqrt(2.0);
        EXPECT_NEAR(v[i], expect, 1e-12);
    }
}

TEST(RadianceNet, OutputsStayInUnitCube) {
    const RadianceNet net(small_radiance_config(), 5, 3);
    const std::size_t n = 10000;
    Rng rng(4);
    std::normal_distribution<double> g(0.0, 20.0);
    Matrix z(n, 5);
    for (double& v : z.flat()) v = g(rng);
    Tape t;
    const Var rgb =
        net.eval(t, random_points(n, 1, 3.0), t.constant(random_unit_rows(n, 2)), random_unit_rows(n, 3), t.constant(z));
    ASSERT_EQ(rgb.cols(), 3u);
    for (double c : rgb.value().flat()) {
        EXPECT_GE(c, 0.0);
        EXPECT_LE(c, 1.0);
    }
}

TEST(RadianceNet, DeterministicUnderFixedParameters) {
    const RadianceNet a(small_radiance_config(), 5, 8), b(small_radiance_config(), 5, 8);
    const Matrix x = random_points(9, 1), n = random_unit_rows(9, 2), v = random_unit_rows(9, 3);
    const Matrix z = random_points(15, 4);
    Matrix zz(9, 5);
    for (std::size_t i = 0; i < zz.size(); ++i) zz[i] = z[i % z.size()];
    Tape t1, t2;
    EXPECT_EQ(a.eval(t1, x, t1.constant(n), v, t1.constant(zz)).value(),
              b.eval(t2, x, t2.constant(n), v, t2.constant(zz)).value());
}

TEST(RadianceNet, ParameterGradientsMatchFiniteDifferences) {
    RadianceNet net(small_radiance_config(), 5, 9);
    const Matrix x = random_points(7, 1), n = random_unit_rows(7, 2), v = random_unit_rows(7, 3);
    Matrix z(7, 5);
    Rng rng(5);
    std::normal_distribution<double> g(0.0, 1.0);
    for (double& e : z.flat()) e = g(rng);
    const Matrix target = random_points(7, 6);
    auto build = [&](Tape& t) {
        return sum(square(net.eval(t, x, t.constant(n), v, t.constant(z)) - t.constant(target)));
    };
    Tape t;
    const Var loss = build(t);
    for (Param* p : net.params()) p->zero_grad();
    t.backward(loss);
    for (const auto& [p, i] : pick_entries(net.params(), 10, 7)) {
        const double fd = mvps::testing::central_difference(*p, i, build, 1e-5);
        EXPECT_LT(mvps::testing::relative_error(p->grad[i], fd, 1e-7), 2e-3) << p->name << "[" << i << "]";
    }
}

TEST(RadianceNet, InputGradientsReachNormalsAndFeatures) {
    const RadianceNet net(small_radiance_config(), 5, 10);
    const Matrix x = random_points(3, 1), v = random_unit_rows(3, 3);
    Param n("n", random_unit_rows(3, 2)), z("z", Matrix(3, 5, 0.3));
    auto build = [&](Tape& t) { return sum(square(net.eval(t, x, t.param(n), v, t.param(z)))); };
    Tape t;
    const Var loss = build(t);
    n.zero_grad();
    z.zero_grad();
    t.backward(loss);
    for (std::size_t i = 0; i < 3; ++i) {
        EXPECT_LT(mvps::testing::relative_error(n.grad[i], mvps::testing::central_difference(n, i, build, 1e-6), 1e-8), 1e-4);
        EXPECT_LT(mvps::testing::relative_error(z.grad[i], mvps::testing::central_difference(z, i, build, 1e-6), 1e-8), 1e-4);
    }
}

TEST(FieldPair, SeedsAreIndependentPerNetwork) {
    FieldPair a(small_sdf_config(), small_radiance_config(), 1);
    FieldPair b(small_sdf_config(), small_radiance_config(), 2);
    EXPECT_NE(a.sdf.weight(0).value, b.sdf.weight(0).value);
    FieldPair c(small_sdf_config(), small_radiance_config(), 1);
    EXPECT_EQ(a.sdf.weight(0).value, c.sdf.weight(0).value);
    EXPECT_EQ(a.params().size(), a.sdf.params().size() + a.radiance.params().size());
}

class CheckpointTest : public ::testing::Test {
protected:
    void SetUp() override {
        dir_ = std::filesystem::temp_directory_path() /
               ("mvps_ckpt_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
        std::filesystem::remove_all(dir_);
        std::filesystem::create_directories(dir_);
    }
    void TearDown() override { std::filesystem::remove_all(dir_); }
    std::filesystem::path dir_;
};

TEST_F(CheckpointTest, RoundTripRestoresParametersAndOptimizer) {
    FieldPair fp(small_sdf_config(), small_radiance_config(), 3);
    for (Param* p : fp.params())
        for (double& v : p->value.flat()) v += 1e-3;  // move away from the seeded init
    CheckpointState st;
    st.epoch = 17;
    AdamSnapshot snap;
    snap.steps = 17;
    for (Param* p : fp.params()) {
        snap.m.push_back(Matrix(p->value.rows(), p->value.cols(), 0.25));
        snap.v.push_back(Matrix(p->value.rows(), p->value.cols(), 0.5));
    }
    st.adam = snap;
    const auto path = dir_ / "model.bin";
    save_checkpoint(path, fp, st);

    CheckpointState loaded;
    const auto back = load_checkpoint(path, &loaded);
    EXPECT_EQ(loaded.epoch, 17u);
    ASSERT_TRUE(loaded.adam.has_value());
    EXPECT_EQ(loaded.adam->steps, 17);
    EXPECT_EQ(loaded.adam->m, snap.m);
    EXPECT_EQ(loaded.adam->v, snap.v);
    EXPECT_EQ(back->sdf.config(), fp.sdf.config());
    EXPECT_EQ(back->radiance.config(), fp.radiance.config());
    const auto a = fp.params(), b = back->params();
    ASSERT_EQ(a.size(), b.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
        EXPECT_EQ(a[i]->name, b[i]->name);
        EXPECT_EQ(a[i]->value, b[i]->value);
    }
    const Matrix pts = random_points(10, 4);
    EXPECT_EQ(fp.sdf.values(pts), back->sdf.values(pts));
    EXPECT_EQ(fp.sdf.beta_value(), back->sdf.beta_value());
}

TEST_F(CheckpointTest, RejectsForeignFiles) {
    const auto path = dir_ / "bad.bin";
    std::ofstream(path) << "NOTACHECKPOINT";
    EXPECT_THROW(load_checkpoint(path), mvps::IoError);
    EXPECT_THROW(load_checkpoint(dir_ / "missing.bin"), mvps::IoError);
}

TEST_F(CheckpointTest, RejectsTruncatedFiles) {
    FieldPair fp(small_sdf_config(), small_radiance_config(), 3);
    const auto path = dir_ / "model.bin";
    save_checkpoint(path, fp, {});
    std::filesystem::resize_file(path, std::filesystem::file_size(path) / 2);
    EXPECT_THROW(load_checkpoint(path), mvps::IoError);
}

// Copyright Contributors to the mvps-fusion Project
// SPDX-License-Identifier: Apache-2.0

#include "mvps/common/error.hpp"
#include "mvps/prior/oracles.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

using namespace mvps;
using namespace mvps::prior;

namespace {

sim::Dataset make_dataset(sim::BrdfKind brdf, bool textured) {
    sim::DatasetSpec spec;
    spec.rig.views = 2;
    spec.rig.lights = 16;
    spec.rig.width = 48;
    spec.rig.height = 48;
    spec.scene.brdf.kind = brdf;
    spec.scene.textured = textured;
    if (brdf != sim::BrdfKind::Lambertian) spec.scene.brdf.specular = 0.5;
    return sim::render_dataset(spec);
}

const sim::Dataset& lambertian() {
    static const sim::Dataset ds = make_dataset(sim::BrdfKind::Lambertian, true);
    return ds;
}

const sim::Dataset& glossy() {
    static const sim::Dataset ds = make_dataset(sim::BrdfKind::Ward, false);
    return ds;
}

double percentile(std::vector<double> v, double q) {
    std::sort(v.begin(), v.end());
    return v[static_cast<std::size_t>(q * (v.size() - 1))];
}

Vec3 pixel3(const Image& img, int x, int y) { return {img.at(x, y, 0), img.at(x, y, 1), img.at(x, y, 2)}; }

double angle_deg(const Vec3& a, const Vec3& b) {
    return std::acos(std::clamp(dot(normalized(a), normalized(b)), -1.0, 1.0)) * 180.0 / std::numbers::pi;
}

}  // namespace

TEST(BlendHypotheses, UniformCosts) {
    const double d[] = {1.0, 2.0, 3.0}, c[] = {0.0, 0.0, 0.0};
    const BlendResult r = blend_hypotheses(d, c);
    EXPECT_DOUBLE_EQ(r.depth, 2.0);
    EXPECT_DOUBLE_EQ(r.confidence, 1.0 / 3.0);
    for (int H : {2, 5, 17}) {
        std::vector<double> dd(H, 1.0), cc(H, -3.0);
        EXPECT_NEAR(blend_hypotheses(dd, cc).confidence, 1.0 / H, 1e-15);
    }
}

TEST(BlendHypotheses, DominantCostSaturates) {
    const double d[] = {1.0, 2.0, 3.0}, c[] = {0.0, 100.0, 0.0};
    const BlendResult r = blend_hypotheses(d, c);
    EXPECT_NEAR(r.depth, 2.0, 1e-12);
    EXPECT_NEAR(r.confidence, 1.0, 1e-12);
    EXPECT_EQ(r.best, 1u);
}

TEST(BlendHypotheses, MatchesDirectSoftmax) {
    std::mt19937_64 rng(4);
    std::uniform_real_distribution<double> u(-3.0, 3.0), dep(0.5, 4.0);
    for (int trial = 0; trial < 100; ++trial) {
        std::vector<double> d(5), c(5);
        for (int j = 0; j < 5; ++j) d[j] = dep(rng), c[j] = u(rng);
        double z = 0.0;
        for (double v : c) z += std::exp(v);
        double depth = 0.0, best = -1e300, conf = 0.0;
        for (int j = 0; j < 5; ++j) {
            depth += d[j] * std::exp(c[j]) / z;
            if (c[j] > best) best = c[j], conf = std::exp(c[j]) / z;
        }
        const BlendResult r = blend_hypotheses(d, c);
        EXPECT_NEAR(r.depth, depth, 1e-12);
        EXPECT_NEAR(r.confidence, conf, 1e-12);
    }
}

TEST(BlendHypotheses, EmptyThrows) { EXPECT_THROW(blend_hypotheses({}, {}), Error); }

TEST(Gates, StrictThresholds) {
    EXPECT_TRUE(mvs_gate(0.95, 0.9));
    EXPECT_FALSE(mvs_gate(0.9, 0.9));
    EXPECT_TRUE(ps_gate({0.005, 0.003, 0.002}, 0.03));
    EXPECT_FALSE(ps_gate({0.03, 0.0, 0.0}, 0.03));
}

TEST(Gates, ApplyGatesZeroOutsideMask) {
    ViewPriors p;
    p.confidence = Image(2, 1, 1, 0.99f);
    p.variance = Image(2, 1, 3, 0.0f);
    Mask m(2, 1);
    m.at(0, 0) = 1;
    apply_gates(p, m, 0.9, 0.03);
    EXPECT_EQ(p.gate_mvs.at(0, 0), 1);
    EXPECT_EQ(p.gate_ps.at(0, 0), 1);
    EXPECT_EQ(p.gate_mvs.at(1, 0), 0);
    EXPECT_EQ(p.gate_ps.at(1, 0), 0);
}

TEST(MvsOracle, PeakedCostsRecoverDepth) {
    const auto& ds = lambertian();
    MvsConfig cfg;
    cfg.peak_noise = 0.0;
    cfg.texture_var_ref = 1e-30;  // every pixel fully textured
    for (std::size_t k = 0; k < ds.views.size(); ++k) {
        ViewPriors p;
        simulate_mvs(ds, k, cfg, 0.9, 7, p);
        const auto& v = ds.views[k];
        for (int y = 0; y < v.mask.height; ++y)
            for (int x = 0; x < v.mask.width; ++x) {
                if (!v.mask.at(x, y)) {
                    EXPECT_EQ(p.gate_mvs.at(x, y), 0);
                    continue;
                }
                EXPECT_LT(std::abs(p.depth.at(x, y) - v.gt_depth.at(x, y)), cfg.step);
                EXPECT_GT(p.confidence.at(x, y), 0.9f);
            }
    }
}

TEST(MvsOracle, FlatCostsOnGlossyAreGatedOut) {
    const auto& ds = glossy();
    MvsConfig cfg;
    cfg.glossy_flatness = 0.0;
    ViewPriors p;
    simulate_mvs(ds, 0, cfg, 0.9, 7, p);
    EXPECT_EQ(p.gate_mvs.count(), 0u);
    const auto& v = ds.views[0];
    for (int y = 0; y < v.mask.height; ++y)
        for (int x = 0; x < v.mask.width; ++x)
            if (v.mask.at(x, y)) EXPECT_NEAR(p.confidence.at(x, y), 1.0 / cfg.hypotheses, 1e-7);
}

TEST(MvsOracle, GateCountMonotoneInThreshold) {
    const auto& ds = lambertian();
    std::size_t last = SIZE_MAX;
    for (double tau : {0.1, 0.5, 0.8, 0.9, 0.95, 0.99}) {
        ViewPriors p;
        simulate_mvs(ds, 0, {}, tau, 3, p);
        EXPECT_LE(p.gate_mvs.count(), last);
        last = p.gate_mvs.count();
    }
}

TEST(PsOracle, EnsembleStatistics) {
    const std::vector<Vec3> same(10, Vec3{0.0, 0.6, 0.8});
    const NormalStats s = summarize_ensemble(same);
    EXPECT_EQ(s.variance, (Vec3{}));
    EXPECT_TRUE(ps_gate(s.variance, 0.03));

    const std::vector<Vec3> mixed{{0, 0, 1}, {0, 0, 2}, {3, 0, 0}};
    const NormalStats m = summarize_ensemble(mixed);
    EXPECT_NEAR(m.variance.x, 1.0 / 3.0, 1e-12);
    EXPECT_NEAR(m.variance.y, 0.0, 1e-12);
    EXPECT_NEAR(m.variance.z, 1.0 / 3.0, 1e-12);
    EXPECT_NEAR(norm(m.mean), 1.0, 1e-12);
}

TEST(PsOracle, DegenerateLightingThrows) {
    const std::vector<Vec3> lights{{1, 0, 0}, {0, 1, 0}, normalized(Vec3{1, 1, 0})};
    const std::vector<double> e(3, 1.0), obs{0.1, 0.2, 0.3};
    try {
        (void)lambertian_solve(lights, e, obs);
        FAIL();
    } catch (const Error& err) {
        EXPECT_NE(std::string(err.what()).find("degenerate lighting"), std::string::npos);
    }
}

TEST(PsOracle, LambertianNormalsAreAccurate) {
    const auto& ds = lambertian();
    PsConfig cfg;
    cfg.ensemble = 20;
    for (std::size_t k = 0; k < ds.views.size(); ++k) {
        ViewPriors p;
        simulate_ps(ds, k, cfg, 0.03, 9, p);
        const auto& v = ds.views[k];
        for (int y = 0; y < v.mask.height; ++y)
            for (int x = 0; x < v.mask.width; ++x) {
                if (!v.mask.at(x, y)) continue;
                const Vec3 n = pixel3(p.normal, x, y);
                EXPECT_NEAR(norm(n), 1.0, 1e-6);
                EXPECT_LT(angle_deg(n, pixel3(v.gt_normal, x, y)), 0.5) << x << "," << y;
            }
    }
}

TEST(PsOracle, SpecularPixelsGetHigherVariance) {
    const auto& ds = glossy();
    PsConfig cfg;
    cfg.ensemble = 30;
    ViewPriors p;
    simulate_ps(ds, 0, cfg, 0.03, 9, p);
    EXPECT_GT(p.gate_ps.count(), 0u);
    EXPECT_LT(p.gate_ps.count(), ds.views[0].mask.count());
}

TEST(Priors, GatingSoundness) {
    // MVS on the textured Lambertian scene, PS on the glossy one (the only
    // scene where the noise-free PS oracle rejects pixels).
    const OracleConfig cfg;
    {
        const auto& ds = lambertian();
        const auto pri = simulate_priors(ds, cfg, 1);
        std::vector<double> in, out;
        for (std::size_t k = 0; k < ds.views.size(); ++k)
            for (int y = 0; y < 48; ++y)
                for (int x = 0; x < 48; ++x) {
                    if (!ds.views[k].mask.at(x, y)) continue;
                    const double e = std::abs(pri[k].depth.at(x, y) - ds.views[k].gt_depth.at(x, y));
                    (pri[k].gate_mvs.at(x, y) ? in : out).push_back(e);
                }
        ASSERT_FALSE(in.empty());
        ASSERT_FALSE(out.empty());
        EXPECT_LT(percentile(in, 0.99), percentile(out, 0.99));
    }
    {
        const auto& ds = glossy();
        OracleConfig c = cfg;
        c.ps.ensemble = 30;
        const auto pri = simulate_priors(ds, c, 1);
        std::vector<double> in, out;
        for (std::size_t k = 0; k < ds.views.size(); ++k)
            for (int y = 0; y < 48; ++y)
                for (int x = 0; x < 48; ++x) {
                    if (!ds.views[k].mask.at(x, y)) continue;
                    const double e = angle_deg(pixel3(pri[k].normal, x, y), pixel3(ds.views[k].gt_normal, x, y));
                    (pri[k].gate_ps.at(x, y) ? in : out).push_back(e);
                }
        ASSERT_FALSE(in.empty());
        ASSERT_FALSE(out.empty());
        EXPECT_LT(percentile(in, 0.99), percentile(out, 0.99));
    }
}

TEST(LiftDepth, IdentityCameraAndRoundTrip) {
    sim::CameraView cam;
    cam.K(0, 2) = 1.5;
    cam.K(1, 2) = 0.5;
    cam.width = 3;
    cam.height = 1;
    ViewPriors p;
    p.depth = Image(3, 1, 1, 2.0f);
    p.gate_mvs = Mask(3, 1);
    p.gate_mvs.at(1, 0) = 1;
    const auto pts = lift_depth(cam, p);
    ASSERT_EQ(pts.size(), 1u);
    EXPECT_EQ(pts[0].point, (Vec3{0, 0, 2}));

    const auto& ds = lambertian();
    const auto pri = simulate_priors(ds, {}, 2);
    const sim::AnalyticScene scene(ds.spec.scene);
    const auto lifted = lift_depth(ds.cameras[1], pri[1]);
    EXPECT_EQ(lifted.size(), pri[1].gate_mvs.count());
    for (const auto& lp : lifted) {
        const Vec3 q = ds.cameras[1].project(lp.point);
        EXPECT_NEAR(q.x, lp.x + 0.5, 1e-9);
        EXPECT_NEAR(q.y, lp.y + 0.5, 1e-9);
        EXPECT_LT(std::abs(scene.sdf(lp.point)), 2 * MvsConfig{}.step);
    }
}

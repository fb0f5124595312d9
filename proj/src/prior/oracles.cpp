// Copyright Contributors to the mvps-fusion Project
// SPDX-License-Identifier: Apache-2.0

#include "mvps/prior/oracles.hpp"

#include "mvps/common/error.hpp"
#include "mvps/common/parallel.hpp"
#include "mvps/common/random.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace mvps::prior {

BlendResult blend_hypotheses(std::span<const double> depths, std::span<const double> costs) {
    if (depths.empty()) throw Error("blend_hypotheses: no hypotheses");
    if (depths.size() != costs.size()) throw Error("blend_hypotheses: depth/cost count mismatch");
    BlendResult r;
    r.best = static_cast<std::size_t>(std::max_element(costs.begin(), costs.end()) - costs.begin());
    const double peak = costs[r.best];
    double z = 0.0, acc = 0.0;
    for (std::size_t j = 0; j < costs.size(); ++j) {
        const double e = std::exp(costs[j] - peak);
        z += e;
        acc += e * depths[j];
    }
    r.depth = acc / z;
    r.confidence = 1.0 / z;
    return r;
}

namespace {

double gray(const Image& img, int x, int y) {
    return (static_cast<double>(img.at(x, y, 0)) + img.at(x, y, 1) + img.at(x, y, 2)) / 3.0;
}

// Variance of the gray median image over a square window, clipped to the image.
Image local_variance(const Image& median, int radius) {
    Image out(median.width, median.height, 1);
    for (int y = 0; y < median.height; ++y)
        for (int x = 0; x < median.width; ++x) {
            double s = 0.0, s2 = 0.0;
            int n = 0;
            for (int dy = -radius; dy <= radius; ++dy)
                for (int dx = -radius; dx <= radius; ++dx) {
                    const int xx = x + dx, yy = y + dy;
                    if (xx < 0 || yy < 0 || xx >= median.width || yy >= median.height) continue;
                    const double g = gray(median, xx, yy);
                    s += g;
                    s2 += g * g;
                    ++n;
                }
            const double m = s / n;
            out.at(x, y) = static_cast<float>(std::max(0.0, s2 / n - m * m));
        }
    return out;
}

bool solve3(double a[3][3], double b[3], Vec3& x) {
    const Mat3 m{{a[0][0], a[0][1], a[0][2], a[1][0], a[1][1], a[1][2], a[2][0], a[2][1], a[2][2]}};
    const double det = m.determinant();
    const double scale = std::max({std::abs(a[0][0]), std::abs(a[1][1]), std::abs(a[2][2]), 1e-300});
    if (std::abs(det) <= 1e-12 * scale * scale * scale) return false;
    x = m.inverse() * Vec3{b[0], b[1], b[2]};
    return true;
}

// Normal equations of the Lambertian model over the selected lights.
bool lambertian_fit(std::span<const Vec3> lights, std::span<const double> intensities,
                    std::span<const double> observed, std::span<const std::uint8_t> use, Vec3& b) {
    double ata[3][3] = {}, atb[3] = {};
    for (std::size_t j = 0; j < lights.size(); ++j) {
        if (!use.empty() && !use[j]) continue;
        const Vec3 row = lights[j] * intensities[j];
        for (int r = 0; r < 3; ++r) {
            for (int c = 0; c < 3; ++c) ata[r][c] += row[r] * row[c];
            atb[r] += row[r] * observed[j];
        }
    }
    return solve3(ata, atb, b);
}

}  // namespace

Vec3 lambertian_solve(std::span<const Vec3> lights, std::span<const double> intensities,
                      std::span<const double> observed) {
    Vec3 b;
    if (!lambertian_fit(lights, intensities, observed, {}, b)) throw Error("degenerate lighting: light matrix rank < 3");
    return b;
}

void simulate_mvs(const sim::Dataset& ds, std::size_t view, const MvsConfig& cfg, double tau, std::uint64_t seed,
                  ViewPriors& out) {
    if (cfg.hypotheses < 2) throw Error("MVS oracle needs at least 2 hypotheses");
    const auto& v = ds.views[view];
    const int w = v.mask.width, h = v.mask.height;
    out.depth = Image(w, h, 1);
    out.confidence = Image(w, h, 1);
    out.gate_mvs = Mask(w, h);
    const Image var = local_variance(v.median, cfg.window);
    const bool glossy = ds.spec.scene.brdf.kind != sim::BrdfKind::Lambertian && ds.spec.scene.brdf.specular > 0.0;
    const int H = cfg.hypotheses;
    const int max_shift = std::min(cfg.max_shift, std::max(0, (H - 1) / 2 - 2));
    // The sweep grid is misaligned by one offset per view, so an uninformative
    // cost leaves a depth bias shared by the whole view.
    Rng sweep_rng(derive_seed(seed, "sweep"));
    const double center_offset = std::uniform_int_distribution<int>(-max_shift, max_shift)(sweep_rng) * cfg.step;

    parallel_for(static_cast<std::size_t>(h), [&](std::size_t y0, std::size_t y1) {
        std::vector<double> depths(H), costs(H);
        for (int y = static_cast<int>(y0); y < static_cast<int>(y1); ++y)
            for (int x = 0; x < w; ++x) {
                if (!v.mask.at(x, y)) continue;
                Rng rng(derive_seed(seed, static_cast<std::uint64_t>(y) * w + x));
                std::normal_distribution<double> gauss(0.0, 1.0);
                const double truth = v.gt_depth.at(x, y);
                const double center = truth + center_offset;
                const double peak = truth + cfg.peak_noise * cfg.step * gauss(rng);
                double kappa = cfg.sharpness * std::clamp(var.at(x, y) / cfg.texture_var_ref, 0.0, 1.0);
                if (glossy) kappa *= cfg.glossy_flatness;
                for (int j = 0; j < H; ++j) {
                    depths[j] = center + (j - H / 2) * cfg.step;
                    const double u = (depths[j] - peak) / cfg.step;
                    costs[j] = -kappa * u * u;
                }
                const BlendResult b = blend_hypotheses(depths, costs);
                out.depth.at(x, y) = static_cast<float>(b.depth);
                out.confidence.at(x, y) = static_cast<float>(b.confidence);
                out.gate_mvs.at(x, y) = mvs_gate(out.confidence.at(x, y), tau);
            }
    });
}

NormalStats summarize_ensemble(std::span<const Vec3> members) {
    if (members.empty()) throw Error("empty normal ensemble");
    const double n = static_cast<double>(members.size());
    // Shifted by the first member so that identical members give exactly zero.
    const Vec3 ref = normalized(members[0]);
    Vec3 sum, sum2;
    for (const Vec3& m : members) {
        const Vec3 d = normalized(m) - ref;
        sum += d;
        sum2 += hadamard(d, d);
    }
    NormalStats s;
    s.mean = normalized(ref + sum / n);
    if (members.size() > 1) {
        s.variance = (sum2 - hadamard(sum, sum) / n) / (n - 1.0);
        for (int c = 0; c < 3; ++c) s.variance[c] = std::max(0.0, s.variance[c]);
    }
    return s;
}

void simulate_ps(const sim::Dataset& ds, std::size_t view, const PsConfig& cfg, double tau, std::uint64_t seed,
                 ViewPriors& out) {
    const auto& v = ds.views[view];
    const auto& rig = ds.lights[view];
    const std::size_t L = rig.directions.size();
    if (v.images.size() != L) throw Error("PS oracle needs all per-light images of view " + std::to_string(view));
    if (L < 3) throw Error("degenerate lighting: fewer than 3 lights");
    {
        std::vector<double> ones(L, 1.0);
        (void)lambertian_solve(rig.directions, rig.intensities, ones);
    }
    const int w = v.mask.width, h = v.mask.height;
    out.normal = Image(w, h, 3);
    out.variance = Image(w, h, 3);
    out.gate_ps = Mask(w, h);
    const sim::CameraView& cam = ds.cameras[view];

    parallel_for(static_cast<std::size_t>(h), [&](std::size_t y0, std::size_t y1) {
        std::vector<double> observed(L), perturbed(L);
        std::vector<std::uint8_t> lit(L), use(L);
        std::vector<Vec3> members;
        for (int y = static_cast<int>(y0); y < static_cast<int>(y1); ++y)
            for (int x = 0; x < w; ++x) {
                if (!v.mask.at(x, y)) continue;
                std::size_t n_lit = 0;
                double mean_intensity = 0.0;
                for (std::size_t j = 0; j < L; ++j) {
                    observed[j] = gray(v.images[j], x, y);
                    lit[j] = observed[j] > cfg.shadow_threshold;
                    n_lit += lit[j];
                    if (lit[j]) mean_intensity += observed[j];
                }
                Vec3 b;
                NormalStats stats;
                if (n_lit < 3 || !lambertian_fit(rig.directions, rig.intensities, observed, lit, b)) {
                    // Not enough illumination: fall back to facing the camera, never gated.
                    stats.mean = -cam.pixel_ray(x, y).dir;
                    stats.variance = {1.0, 1.0, 1.0};
                } else {
                    mean_intensity /= static_cast<double>(n_lit);
                    double res2 = 0.0, obs2 = 0.0;
                    for (std::size_t j = 0; j < L; ++j) {
                        if (!lit[j]) continue;
                        const double pred = rig.intensities[j] * dot(rig.directions[j], b);
                        res2 += (pred - observed[j]) * (pred - observed[j]);
                        obs2 += observed[j] * observed[j];
                    }
                    const double residual = std::sqrt(res2 / std::max(obs2, 1e-300));
                    const double noise = (cfg.base_noise + cfg.residual_gain * residual) * mean_intensity;

                    Rng rng(derive_seed(seed, static_cast<std::uint64_t>(y) * w + x));
                    std::bernoulli_distribution drop(cfg.drop_probability);
                    std::normal_distribution<double> gauss(0.0, 1.0);
                    members.clear();
                    for (int m = 0; m < cfg.ensemble; ++m) {
                        Vec3 bm = b;
                        for (int attempt = 0; attempt < 8; ++attempt) {
                            for (std::size_t j = 0; j < L; ++j) {
                                use[j] = lit[j] && !drop(rng);
                                perturbed[j] = observed[j] + (noise > 0.0 ? noise * gauss(rng) : 0.0);
                            }
                            if (lambertian_fit(rig.directions, rig.intensities, perturbed, use, bm)) break;
                            bm = b;
                        }
                        members.push_back(norm(bm) > 0.0 ? bm : b);
                    }
                    stats = summarize_ensemble(members);
                }
                for (int c = 0; c < 3; ++c) {
                    out.normal.at(x, y, c) = static_cast<float>(stats.mean[c]);
                    out.variance.at(x, y, c) = static_cast<float>(stats.variance[c]);
                }
                const Vec3 stored{out.variance.at(x, y, 0), out.variance.at(x, y, 1), out.variance.at(x, y, 2)};
                out.gate_ps.at(x, y) = ps_gate(stored, tau);
            }
    });
}

void apply_gates(ViewPriors& p, const Mask& mask, double tau_mvs, double tau_ps) {
    p.gate_mvs = Mask(mask.width, mask.height);
    p.gate_ps = Mask(mask.width, mask.height);
    for (int y = 0; y < mask.height; ++y)
        for (int x = 0; x < mask.width; ++x) {
            if (!mask.at(x, y)) continue;
            p.gate_mvs.at(x, y) = mvs_gate(p.confidence.at(x, y), tau_mvs);
            p.gate_ps.at(x, y) =
                ps_gate({p.variance.at(x, y, 0), p.variance.at(x, y, 1), p.variance.at(x, y, 2)}, tau_ps);
        }
}

std::vector<ViewPriors> simulate_priors(const sim::Dataset& ds, const OracleConfig& cfg, std::uint64_t seed) {
    const std::uint64_t mvs_seed = derive_seed(seed, "priors.mvs");
    const std::uint64_t ps_seed = derive_seed(seed, "priors.ps");
    std::vector<ViewPriors> out(ds.views.size());
    for (std::size_t k = 0; k < ds.views.size(); ++k) {
        simulate_mvs(ds, k, cfg.mvs, cfg.tau_mvs, derive_seed(mvs_seed, k), out[k]);
        simulate_ps(ds, k, cfg.ps, cfg.tau_ps, derive_seed(ps_seed, k), out[k]);
    }
    return out;
}

std::vector<LiftedPoint> lift_depth(const sim::CameraView& cam, const ViewPriors& p) {
    std::vector<LiftedPoint> pts;
    for (int y = 0; y < p.gate_mvs.height; ++y)
        for (int x = 0; x < p.gate_mvs.width; ++x)
            if (p.gate_mvs.at(x, y)) pts.push_back({x, y, cam.unproject(x + 0.5, y + 0.5, p.depth.at(x, y))});
    return pts;
}

}  // namespace mvps::prior

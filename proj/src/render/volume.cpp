// Copyright Contributors to the mvps-fusion Project
// SPDX-License-Identifier: Apache-2.0

#include "mvps/render/volume.hpp"

#include "mvps/common/error.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

namespace mvps::render {

double laplace_cdf(double u, double beta) {
    const double e = std::exp(-std::abs(u) / beta);
    return u <= 0.0 ? 0.5 * e : 1.0 - 0.5 * e;
}

double density(double s, double alpha, double beta) { return alpha * laplace_cdf(-s, beta); }

Var density(Var sdf, Var alpha, Var beta) { return mul_scalar(ad::laplace_cdf(div_scalar(-sdf, beta)), alpha); }

bool ray_bounds(const sim::Ray& ray, double bounding_radius, double& t_near, double& t_far) {
    if (!intersect_sphere(ray.origin, ray.dir, bounding_radius, t_near, t_far)) return false;
    t_near = std::max(t_near, 0.0);
    return t_far > t_near;
}

std::vector<double> stratified(double t_near, double t_far, int n, Rng& rng) {
    if (!(t_near < t_far)) throw Error("stratified sampling needs t_near < t_far");
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::vector<double> t(static_cast<std::size_t>(n));
    const double step = (t_far - t_near) / n;
    for (int j = 0; j < n; ++j) t[j] = t_near + (j + u(rng)) * step;
    return t;
}

std::vector<double> interval_weights(std::span<const double> t, std::span<const double> sdf, double alpha,
                                     double beta) {
    std::vector<double> w(t.size() > 0 ? t.size() - 1 : 0);
    double trans = 1.0;
    for (std::size_t j = 0; j + 1 < t.size(); ++j) {
        const double sigma = density(0.5 * (sdf[j] + sdf[j + 1]), alpha, beta);
        const double absorb = 1.0 - std::exp(-sigma * (t[j + 1] - t[j]));
        w[j] = trans * absorb;
        trans *= 1.0 - absorb;
    }
    return w;
}

std::vector<double> importance_resample(std::span<const double> t, std::span<const double> weights, int n,
                                        Rng& rng) {
    std::vector<double> cdf(weights.size() + 1, 0.0);
    for (std::size_t j = 0; j < weights.size(); ++j) cdf[j + 1] = cdf[j] + std::max(weights[j], 0.0);
    const double total = cdf.back();
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::vector<double> out(static_cast<std::size_t>(n));
    for (int k = 0; k < n; ++k) {
        if (!(total > 1e-12)) {
            out[k] = t.front() + u(rng) * (t.back() - t.front());
            continue;
        }
        const double target = u(rng) * total;
        auto it = std::upper_bound(cdf.begin() + 1, cdf.end(), target);
        std::size_t j = static_cast<std::size_t>(it - cdf.begin()) - 1;
        j = std::min(j, weights.size() - 1);
        const double frac = weights[j] > 0.0 ? (target - cdf[j]) / weights[j] : 0.5;
        out[k] = t[j] + std::clamp(frac, 0.0, 1.0) * (t[j + 1] - t[j]);
    }
    return out;
}

std::vector<RaySamples> sample_rays(const field::SdfField& f, const std::vector<sim::Ray>& rays,
                                    double bounding_radius, const SamplingConfig& cfg, Rng& rng) {
    if (cfg.n_uniform < 2) throw Error("need at least 2 uniform samples per ray");
    std::vector<RaySamples> out(rays.size());
    for (std::size_t r = 0; r < rays.size(); ++r) {
        if (!ray_bounds(rays[r], bounding_radius, out[r].t_near, out[r].t_far))
            throw Error("sample_rays: ray " + std::to_string(r) + " misses the bounding sphere");
        out[r].t = stratified(out[r].t_near, out[r].t_far, cfg.n_uniform, rng);
    }
    if (cfg.n_importance <= 0) return out;

    const auto nu = static_cast<std::size_t>(cfg.n_uniform);
    Matrix pts(rays.size() * nu, 3);
    for (std::size_t r = 0; r < rays.size(); ++r)
        for (std::size_t j = 0; j < nu; ++j) {
            const Vec3 p = rays[r].origin + rays[r].dir * out[r].t[j];
            for (int a = 0; a < 3; ++a) pts(r * nu + j, a) = p[a];
        }
    const std::vector<double> s = f.values(pts);
    Tape t;
    const double alpha = f.alpha(t).item(), beta = f.beta(t).item();
    for (std::size_t r = 0; r < rays.size(); ++r) {
        auto& ts = out[r].t;
        const std::span<const double> sr(s.data() + r * nu, nu);
        const std::vector<double> w = interval_weights(ts, sr, alpha, beta);
        std::vector<double> extra = importance_resample(ts, w, cfg.n_importance, rng);
        ts.insert(ts.end(), extra.begin(), extra.end());
        std::sort(ts.begin(), ts.end());
        // Keep the ordering strict so every spacing is positive.
        for (std::size_t j = 1; j < ts.size(); ++j)
            if (ts[j] <= ts[j - 1]) ts[j] = std::nextafter(ts[j - 1], out[r].t_far);
    }
    return out;
}

RenderOutput render_rays(Tape& t, const field::SdfField& f, const field::RadianceField* radiance,
                         const std::vector<sim::Ray>& rays, const std::vector<RaySamples>& samples, Var alpha,
                         Var beta, const RenderOptions& opts) {
    if (rays.size() != samples.size()) throw Error("render_rays: ray/sample count mismatch");
    if (rays.empty()) throw Error("render_rays: empty batch");
    RenderOutput out;
    out.rays = rays.size();
    out.samples = samples[0].t.size();
    const std::size_t R = out.rays, S = out.samples, P = R * S;
    out.points = Matrix(P, 3);
    out.view_dirs = Matrix(P, 3);
    out.deltas = Matrix(R, S);
    for (std::size_t r = 0; r < R; ++r) {
        const auto& ts = samples[r].t;
        if (ts.size() != S) throw Error("render_rays: every ray needs the same sample count");
        for (std::size_t j = 0; j < S; ++j) {
            const Vec3 p = rays[r].origin + rays[r].dir * ts[j];
            for (int a = 0; a < 3; ++a) {
                out.points(r * S + j, a) = p[a];
                out.view_dirs(r * S + j, a) = rays[r].dir[a];
            }
            out.deltas(r, j) = (j + 1 < S ? ts[j + 1] : samples[r].t_far) - ts[j];
        }
    }

    const bool need_grad = opts.normals || (opts.color && radiance != nullptr);
    out.geometry = f.eval(t, out.points, need_grad);
    const Var cdf = ad::laplace_cdf(div_scalar(-out.geometry.sdf, beta));  // P x 1, sigma / alpha
    out.sigma = reshape(mul_scalar(cdf, alpha), R, S);
    const Var optical = mul(out.sigma, t.constant(out.deltas));
    out.transmittance = exp(-cumsum_exclusive(optical));
    const Var absorb = add_const(-exp(-optical), 1.0);
    out.weights = mul(out.transmittance, absorb);
    const Var w_col = reshape(out.weights, P, 1);

    if (opts.normals) out.normal = row_group_sum(mul_col(out.geometry.grad, w_col), S);
    if (opts.color && radiance != nullptr) {
        const Var g = out.geometry.grad;
        const Var n = mul_col(g, reciprocal(add_const(row_norm_l2(g), 1e-12)));
        const Var rgb = radiance->eval(t, out.points, n, out.view_dirs, out.geometry.feature);
        out.color = row_group_sum(mul_col(rgb, w_col), S);
    }
    out.opacity = clamp(row_max(reshape(cdf, R, S)), opts.opacity_eps, 1.0 - opts.opacity_eps);
    return out;
}

std::vector<double> final_transmittance(const RenderOutput& out) {
    const Matrix& sigma = out.sigma.value();
    std::vector<double> T(out.rays, 1.0);
    for (std::size_t r = 0; r < out.rays; ++r) {
        double acc = 0.0;
        for (std::size_t j = 0; j < out.samples; ++j) acc += sigma(r, j) * out.deltas(r, j);
        T[r] = std::exp(-acc);
    }
    return T;
}

void write_ray_debug_csv(const std::filesystem::path& path, const RenderOutput& out,
                         const std::vector<RaySamples>& samples) {
    std::ofstream csv(path);
    if (!csv) throw IoError(path, "cannot open for writing");
    csv.precision(17);
    csv << "ray,j,t,sigma,T,w\n";
    const Matrix &sigma = out.sigma.value(), &T = out.transmittance.value(), &w = out.weights.value();
    for (std::size_t r = 0; r < out.rays; ++r)
        for (std::size_t j = 0; j < out.samples; ++j)
            csv << r << ',' << j << ',' << samples[r].t[j] << ',' << sigma(r, j) << ',' << T(r, j) << ','
                << w(r, j) << '\n';
}

}  // namespace mvps::render

// Copyright Contributors to the mvps-fusion Project
// SPDX-License-Identifier: Apache-2.0

#include "mvps/fusion/loss.hpp"

#include "mvps/common/error.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <sstream>

namespace mvps::fusion {

std::string ablation_name(const AblationFlags& f) {
    std::string s;
    auto add = [&](bool on, const char* name) {
        if (!on) return;
        if (!s.empty()) s += '+';
        s += name;
    };
    add(f.no_mvs, "no_mvs");
    add(f.no_ps, "no_ps");
    add(f.no_render, "no_render");
    add(f.no_uncertainty, "no_uncertainty");
    return s.empty() ? "full" : s;
}

AblationFlags parse_ablation(const std::string& s) {
    AblationFlags f;
    std::string tok;
    std::istringstream in(s);
    while (std::getline(in, tok, ',')) {
        std::istringstream parts(tok);
        std::string name;
        while (std::getline(parts, name, '+')) {
            if (name.empty() || name == "full") continue;
            if (name == "no_mvs") f.no_mvs = true;
            else if (name == "no_ps") f.no_ps = true;
            else if (name == "no_render") f.no_render = true;
            else if (name == "no_uncertainty") f.no_uncertainty = true;
            else throw Error("unknown ablation flag '" + name + "'");
        }
    }
    return f;
}

bool effective_mvs_gate(const RayRecord& r, const AblationFlags& f) {
    return f.no_uncertainty ? r.in_mask && r.prior_valid : r.c_mvs;
}

bool effective_ps_gate(const RayRecord& r, const AblationFlags& f) {
    return f.no_uncertainty ? r.in_mask && r.prior_valid : r.c_ps;
}

bool renders(const RayRecord& r, const AblationFlags& f) { return f.no_uncertainty || !(r.c_mvs && r.c_ps); }

LossValues values_of(const LossTerms& t) {
    return {t.mvs.item(), t.ps.item(), t.render.item(), t.mask.item(), t.eikonal.item(), t.total.item()};
}

Var mvs_term(Tape& t, const field::SdfField& f, const std::vector<Vec3>& points) {
    if (points.empty()) return t.constant(0.0);
    Matrix pts(points.size(), 3);
    for (std::size_t i = 0; i < points.size(); ++i)
        for (int a = 0; a < 3; ++a) pts(i, a) = points[i][a];
    return mean(abs(f.eval(t, pts, false).sdf));
}

namespace {

Matrix column_of(const std::vector<std::uint8_t>& sel) {
    Matrix m(sel.size(), 1);
    for (std::size_t i = 0; i < sel.size(); ++i) m[i] = sel[i] ? 1.0 : 0.0;
    return m;
}

Matrix rows_of(const std::vector<Vec3>& v) {
    Matrix m(v.size(), 3);
    for (std::size_t i = 0; i < v.size(); ++i)
        for (int a = 0; a < 3; ++a) m(i, a) = v[i][a];
    return m;
}

std::size_t count(const std::vector<std::uint8_t>& sel) {
    return static_cast<std::size_t>(std::count_if(sel.begin(), sel.end(), [](auto v) { return v != 0; }));
}

}  // namespace

Var ps_term(Tape& t, Var ray_normals, const std::vector<Vec3>& prior_normals, const std::vector<std::uint8_t>& gate) {
    const std::size_t n = count(gate);
    if (n == 0) return t.constant(0.0);
    const Var err = row_norm_l2(ray_normals - t.constant(rows_of(prior_normals)));
    return div(sum(mul(err, t.constant(column_of(gate)))), static_cast<double>(n));
}

Var render_term(Tape& t, Var colors, const std::vector<Vec3>& targets, const std::vector<std::uint8_t>& select) {
    const std::size_t n = count(select);
    if (n == 0) return t.constant(0.0);
    const Var err = row_norm_l1(colors - t.constant(rows_of(targets)));
    return div(sum(mul(err, t.constant(column_of(select)))), static_cast<double>(n));
}

Var mask_term(Tape& t, Var opacity, const std::vector<std::uint8_t>& outside, double lambda_m) {
    const std::size_t n = count(outside);
    if (n == 0) {
        spdlog::warn("mask term: no rays outside the mask in this batch");
        return t.constant(0.0);
    }
    const Var ce = -log(add_const(-opacity, 1.0));
    return scale(sum(mul(ce, t.constant(column_of(outside)))), lambda_m / static_cast<double>(n));
}

Var eikonal_term(Tape& t, const std::vector<Var>& grads, double lambda_e) {
    std::vector<Var> parts;
    for (const Var& g : grads)
        if (g.valid() && g.rows() > 0) parts.push_back(g);
    if (parts.empty()) return t.constant(0.0);
    const Var all = parts.size() == 1 ? parts[0] : concat_rows(parts);
    return scale(mean(square(add_const(row_norm_l2(all), -1.0))), lambda_e);
}

LossTerms total_loss(Tape& t, const TrainBatch& batch, const field::SdfField& f, const field::RadianceField& rad,
                     const LossConfig& cfg) {
    const auto& flags = cfg.flags;
    const std::size_t R = batch.rays.size();
    if (batch.samples.size() != R) throw Error("total_loss: batch samples not prepared");
    LossTerms out;
    const Var alpha = f.alpha(t), beta = f.beta(t);

    std::vector<sim::Ray> rays(R);
    std::vector<Vec3> colors(R), normals(R), mvs_points;
    std::vector<std::uint8_t> ps_gate(R), render_sel(R), outside(R);
    for (std::size_t i = 0; i < R; ++i) {
        const RayRecord& r = batch.rays[i];
        rays[i] = r.ray;
        colors[i] = r.color;
        normals[i] = r.ps_normal;
        ps_gate[i] = !flags.no_ps && effective_ps_gate(r, flags);
        render_sel[i] = !flags.no_render && renders(r, flags);
        outside[i] = !r.in_mask;
        if (!flags.no_mvs && effective_mvs_gate(r, flags)) mvs_points.push_back(r.mvs_point);
    }

    render::RenderOptions ro;
    ro.color = !flags.no_render;
    ro.normals = true;
    ro.opacity_eps = cfg.opacity_eps;
    out.rendered = render::render_rays(t, f, &rad, rays, batch.samples, alpha, beta, ro);

    out.mvs = flags.no_mvs ? t.constant(0.0) : mvs_term(t, f, mvs_points);
    out.ps = flags.no_ps ? t.constant(0.0) : ps_term(t, out.rendered.normal, normals, ps_gate);
    out.render = flags.no_render ? t.constant(0.0) : render_term(t, out.rendered.color, colors, render_sel);
    out.mask = mask_term(t, out.rendered.opacity, outside, cfg.lambda_m);

    std::vector<Var> grads{out.rendered.geometry.grad};
    if (batch.global_points.rows() > 0) grads.push_back(f.eval(t, batch.global_points, true).grad);
    out.eikonal = eikonal_term(t, grads, cfg.lambda_e);
    out.total = out.mvs + out.ps + out.render + out.mask + out.eikonal;
    return out;
}

}  // namespace mvps::fusion

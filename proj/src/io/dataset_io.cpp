// Copyright Contributors to the mvps-fusion Project
// SPDX-License-Identifier: Apache-2.0

#include "mvps/io/dataset_io.hpp"

#include "mvps/common/error.hpp"
#include "mvps/io/image_io.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

namespace mvps::io {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string numbered(const char* pattern, std::size_t i) {
    char buf[64];
    std::snprintf(buf, sizeof buf, pattern, static_cast<unsigned>(i));
    return buf;
}

json mat3_json(const Mat3& m) { return json(std::vector<double>(m.m.begin(), m.m.end())); }
json vec3_json(const Vec3& v) { return json::array({v.x, v.y, v.z}); }

template <class T>
T field(const json& j, const char* key, const fs::path& file) {
    if (!j.contains(key)) throw IoError(file, std::string("missing field '") + key + "'");
    try {
        return j.at(key).get<T>();
    } catch (const json::exception& e) {
        throw IoError(file, std::string("field '") + key + "': " + e.what());
    }
}

Mat3 mat3_field(const json& j, const char* key, const fs::path& file) {
    const auto v = field<std::vector<double>>(j, key, file);
    if (v.size() != 9) throw IoError(file, std::string("field '") + key + "' must hold 9 numbers (row-major 3x3)");
    Mat3 m;
    std::copy(v.begin(), v.end(), m.m.begin());
    return m;
}

Vec3 vec3_from(const std::vector<double>& v, const char* key, const fs::path& file) {
    if (v.size() != 3) throw IoError(file, std::string("field '") + key + "' must hold 3 numbers");
    return {v[0], v[1], v[2]};
}

void check_size(const Image& img, int w, int h, int c, const fs::path& file) {
    if (img.width != w || img.height != h || img.channels != c)
        throw IoError(file, "expected " + std::to_string(w) + "x" + std::to_string(h) + "x" + std::to_string(c) +
                                " image, found " + std::to_string(img.width) + "x" + std::to_string(img.height) +
                                "x" + std::to_string(img.channels));
}

Mask read_mask_checked(const fs::path& file, int w, int h, const std::string& what) {
    if (!fs::exists(file)) throw IoError(file, "missing " + what);
    Mask m = read_pgm(file);
    if (m.width != w || m.height != h) throw IoError(file, what + " has wrong resolution");
    return m;
}

}  // namespace

fs::path view_dir(const fs::path& root, std::size_t view) { return root / numbered("view_%03u", view); }

json read_json(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError(path, "cannot open for reading");
    try {
        return json::parse(in);
    } catch (const json::exception& e) {
        throw IoError(path, std::string("invalid JSON: ") + e.what());
    }
}

void write_text(const fs::path& path, const std::string& text) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError(path, "cannot open for writing");
    out << text;
    if (!out) throw IoError(path, "write failed");
}

void write_json(const fs::path& path, const json& j) { write_text(path, j.dump(2) + "\n"); }

json dataset_spec_to_json(const sim::DatasetSpec& s) {
    const auto& sc = s.scene;
    return {
        {"format_version", kFormatVersion},
        {"views", s.rig.views},
        {"lights", s.rig.lights},
        {"width", s.rig.width},
        {"height", s.rig.height},
        {"camera_radius", s.rig.radius},
        {"elevation_deg", s.rig.elevation_deg},
        {"alternate_elevation", s.rig.alternate_elevation},
        {"bounding_radius", sc.bounding_radius},
        {"shape", std::string(sim::shape_name(sc.shape))},
        {"sphere_radius", sc.sphere_radius},
        {"torus_major", sc.torus_major},
        {"torus_minor", sc.torus_minor},
        {"brdf", std::string(sim::brdf_name(sc.brdf.kind))},
        {"specular", sc.brdf.specular},
        {"shininess", sc.brdf.shininess},
        {"alpha_x", sc.brdf.alpha_x},
        {"alpha_y", sc.brdf.alpha_y},
        {"textured", sc.textured},
        {"base_albedo", vec3_json(sc.base_albedo)},
        {"noise_std", s.noise_std},
        {"seed", s.seed},
    };
}

sim::DatasetSpec dataset_spec_from_json(const json& j) {
    const fs::path file = "meta.json";
    sim::DatasetSpec s;
    if (field<int>(j, "format_version", file) != kFormatVersion) throw IoError(file, "unsupported format_version");
    s.rig.views = field<int>(j, "views", file);
    s.rig.lights = field<int>(j, "lights", file);
    s.rig.width = field<int>(j, "width", file);
    s.rig.height = field<int>(j, "height", file);
    s.rig.radius = field<double>(j, "camera_radius", file);
    s.rig.elevation_deg = field<double>(j, "elevation_deg", file);
    s.rig.alternate_elevation = field<bool>(j, "alternate_elevation", file);
    s.scene.bounding_radius = field<double>(j, "bounding_radius", file);
    s.rig.bounding_radius = s.scene.bounding_radius;
    s.scene.shape = sim::parse_shape(field<std::string>(j, "shape", file));
    s.scene.sphere_radius = field<double>(j, "sphere_radius", file);
    s.scene.torus_major = field<double>(j, "torus_major", file);
    s.scene.torus_minor = field<double>(j, "torus_minor", file);
    s.scene.brdf.kind = sim::parse_brdf(field<std::string>(j, "brdf", file));
    s.scene.brdf.specular = field<double>(j, "specular", file);
    s.scene.brdf.shininess = field<double>(j, "shininess", file);
    s.scene.brdf.alpha_x = field<double>(j, "alpha_x", file);
    s.scene.brdf.alpha_y = field<double>(j, "alpha_y", file);
    s.scene.textured = field<bool>(j, "textured", file);
    s.scene.base_albedo = vec3_from(field<std::vector<double>>(j, "base_albedo", file), "base_albedo", file);
    s.noise_std = field<double>(j, "noise_std", file);
    s.seed = field<std::uint64_t>(j, "seed", file);
    return s;
}

void save_dataset(const fs::path& root, const sim::Dataset& ds) {
    fs::create_directories(root);
    write_json(root / "meta.json", dataset_spec_to_json(ds.spec));

    json cams = json::array();
    for (std::size_t k = 0; k < ds.cameras.size(); ++k) {
        const auto& c = ds.cameras[k];
        json dirs = json::array();
        for (const Vec3& l : ds.lights[k].directions) dirs.push_back(vec3_json(l));
        cams.push_back({{"index", k},
                        {"width", c.width},
                        {"height", c.height},
                        {"K", mat3_json(c.K)},
                        {"R", mat3_json(c.R)},
                        {"t", vec3_json(c.t)},
                        {"light_directions", dirs},
                        {"light_intensities", ds.lights[k].intensities}});
    }
    write_json(root / "cameras.json",
               {{"format_version", kFormatVersion},
                {"convention", "row-major matrices; world point p = R (d K^-1 [u v 1]^T) + t; R camera-to-world; "
                               "camera axes x right, y down, z forward; pixel centers at half-integers"},
                {"views", cams}});

    for (std::size_t k = 0; k < ds.views.size(); ++k) {
        const fs::path dir = view_dir(root, k);
        const auto& v = ds.views[k];
        for (std::size_t j = 0; j < v.images.size(); ++j) write_pfm(dir / numbered("light_%03u.pfm", j), v.images[j]);
        write_pfm(dir / "median.pfm", v.median);
        write_pgm(dir / "mask.pgm", v.mask);
        write_pfm(dir / "gt_depth.pfm", v.gt_depth);
        write_pfm(dir / "gt_normal.pfm", v.gt_normal);
    }
}

sim::Dataset load_dataset(const fs::path& root, const LoadOptions& opts) {
    if (!fs::is_directory(root)) throw IoError(root, "dataset directory does not exist");
    sim::Dataset ds;
    const fs::path meta_path = root / "meta.json";
    try {
        ds.spec = dataset_spec_from_json(read_json(meta_path));
    } catch (const IoError& e) {
        if (e.path() == meta_path) throw;
        throw IoError(meta_path, e.what());
    }
    const int w = ds.spec.rig.width, h = ds.spec.rig.height;
    const auto n_views = static_cast<std::size_t>(ds.spec.rig.views);
    const auto n_lights = static_cast<std::size_t>(ds.spec.rig.lights);

    const fs::path cam_path = root / "cameras.json";
    const json cj = read_json(cam_path);
    const auto views = field<json>(cj, "views", cam_path);
    if (!views.is_array() || views.size() != n_views)
        throw IoError(cam_path, "field 'views' must list " + std::to_string(n_views) + " cameras");
    for (std::size_t k = 0; k < n_views; ++k) {
        const json& v = views[k];
        sim::CameraView cam;
        cam.K = mat3_field(v, "K", cam_path);
        cam.R = mat3_field(v, "R", cam_path);
        cam.t = vec3_from(field<std::vector<double>>(v, "t", cam_path), "t", cam_path);
        cam.width = field<int>(v, "width", cam_path);
        cam.height = field<int>(v, "height", cam_path);
        try {
            cam.validate(1e-6);
        } catch (const Error& e) {
            throw IoError(cam_path, "view " + std::to_string(k) + ": " + e.what());
        }
        if (cam.width != w || cam.height != h)
            throw IoError(cam_path, "view " + std::to_string(k) + ": resolution disagrees with meta.json");
        sim::LightRig lights;
        for (const auto& d : field<std::vector<std::vector<double>>>(v, "light_directions", cam_path)) {
            const Vec3 l = vec3_from(d, "light_directions", cam_path);
            if (std::abs(norm(l) - 1.0) > 1e-9)
                throw IoError(cam_path, "view " + std::to_string(k) + ": light direction is not unit length");
            lights.directions.push_back(l);
        }
        lights.intensities = field<std::vector<double>>(v, "light_intensities", cam_path);
        if (lights.directions.size() != n_lights || lights.intensities.size() != n_lights)
            throw IoError(cam_path, "view " + std::to_string(k) + ": expected " + std::to_string(n_lights) + " lights");
        for (double e : lights.intensities)
            if (!(e > 0.0)) throw IoError(cam_path, "view " + std::to_string(k) + ": light intensity must be positive");
        ds.cameras.push_back(cam);
        ds.lights.push_back(std::move(lights));
    }

    for (std::size_t k = 0; k < n_views; ++k) {
        const fs::path dir = view_dir(root, k);
        if (!fs::is_directory(dir)) throw IoError(dir, "missing directory for view " + std::to_string(k));
        sim::ViewImages v;
        v.mask = read_mask_checked(dir / "mask.pgm", w, h, "mask for view " + std::to_string(k));
        auto load = [&](const fs::path& p, int channels) {
            if (!fs::exists(p)) throw IoError(p, "missing file for view " + std::to_string(k));
            Image img = read_pfm(p);
            check_size(img, w, h, channels, p);
            return img;
        };
        if (opts.light_images)
            for (std::size_t j = 0; j < n_lights; ++j) v.images.push_back(load(dir / numbered("light_%03u.pfm", j), 3));
        v.median = load(dir / "median.pfm", 3);
        v.gt_depth = load(dir / "gt_depth.pfm", 1);
        v.gt_normal = load(dir / "gt_normal.pfm", 3);
        ds.views.push_back(std::move(v));
    }
    return ds;
}

void save_priors(const fs::path& root, const std::vector<prior::ViewPriors>& priors) {
    for (std::size_t k = 0; k < priors.size(); ++k) {
        const fs::path dir = view_dir(root, k);
        const auto& p = priors[k];
        write_pfm(dir / "prior_depth.pfm", p.depth);
        write_pfm(dir / "prior_conf.pfm", p.confidence);
        write_pfm(dir / "prior_normal.pfm", p.normal);
        write_pfm(dir / "prior_var.pfm", p.variance);
        write_pgm(dir / "gate_mvs.pgm", p.gate_mvs);
        write_pgm(dir / "gate_ps.pgm", p.gate_ps);
    }
}

bool has_priors(const fs::path& root, std::size_t views) {
    for (std::size_t k = 0; k < views; ++k)
        for (const char* f : {"prior_depth.pfm", "prior_conf.pfm", "prior_normal.pfm", "prior_var.pfm", "gate_mvs.pgm",
                              "gate_ps.pgm"})
            if (!fs::exists(view_dir(root, k) / f)) return false;
    return true;
}

std::vector<prior::ViewPriors> load_priors(const fs::path& root, std::size_t views) {
    std::vector<prior::ViewPriors> out;
    for (std::size_t k = 0; k < views; ++k) {
        const fs::path dir = view_dir(root, k);
        auto load = [&](const char* name) {
            const fs::path p = dir / name;
            if (!fs::exists(p)) throw IoError(p, "missing prior for view " + std::to_string(k));
            return read_pfm(p);
        };
        prior::ViewPriors p;
        p.depth = load("prior_depth.pfm");
        p.confidence = load("prior_conf.pfm");
        p.normal = load("prior_normal.pfm");
        p.variance = load("prior_var.pfm");
        const int w = p.depth.width, h = p.depth.height;
        check_size(p.confidence, w, h, 1, dir / "prior_conf.pfm");
        check_size(p.normal, w, h, 3, dir / "prior_normal.pfm");
        check_size(p.variance, w, h, 3, dir / "prior_var.pfm");
        p.gate_mvs = read_mask_checked(dir / "gate_mvs.pgm", w, h, "MVS gate for view " + std::to_string(k));
        p.gate_ps = read_mask_checked(dir / "gate_ps.pgm", w, h, "PS gate for view " + std::to_string(k));
        out.push_back(std::move(p));
    }
    return out;
}

}  // namespace mvps::io

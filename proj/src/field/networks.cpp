// Copyright Contributors to the mvps-fusion Project
// SPDX-License-Identifier: Apache-2.0

#include "mvps/field/networks.hpp"

#include "mvps/common/error.hpp"
#include "mvps/common/parallel.hpp"
#include "mvps/common/random.hpp"
#include "mvps/field/encoding.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numbers>

namespace mvps::field {

using ad::Param;

namespace {

Matrix gaussian(std::size_t rows, std::size_t cols, double mean, double stddev, Rng& rng) {
    std::normal_distribution<double> d(mean, stddev);
    Matrix m(rows, cols);
    for (double& v : m.flat()) v = d(rng);
    return m;
}

// Parameters enter the tape as trainable nodes for optimization and as plain
// constants for tape-free evaluation.
Var bind(Tape& t, const Param& p, bool trainable) {
    return trainable ? t.param(const_cast<Param&>(p)) : t.constant(p.value);
}

}  // namespace

// ---------------------------------------------------------------------------
// SdfNet

SdfNet::SdfNet(const SdfNetConfig& cfg, std::uint64_t seed) : cfg_(cfg) {
    if (cfg_.hidden_layers < 1 || cfg_.width < 1) throw Error("SDF network needs at least one hidden layer");
    if (cfg_.feature_dim < 0) throw Error("SDF feature dimension must be non-negative");
    for (int s : cfg_.skip_layers)
        if (s < 1 || s > cfg_.hidden_layers) throw Error("SDF skip layer " + std::to_string(s) + " out of range");
    Rng rng(seed);
    const std::size_t E = encoded_dim(cfg_.octaves);
    const auto W = static_cast<std::size_t>(cfg_.width);
    const std::size_t n_linear = static_cast<std::size_t>(cfg_.hidden_layers) + 1;
    for (std::size_t l = 0; l < n_linear; ++l) {
        const bool last = l + 1 == n_linear;
        const std::size_t in = l == 0 ? E : W + (is_skip(l) ? E : 0);
        const std::size_t out = last ? 1 + static_cast<std::size_t>(cfg_.feature_dim) : W;
        Matrix w, b(1, out);
        if (last) {
            // Output ~ |x| - r for wide layers: sdf column with positive mean weights.
            w = gaussian(in, out, 0.0, 1e-4, rng);
            const double mean = std::sqrt(std::numbers::pi) / std::sqrt(static_cast<double>(in));
            for (std::size_t r = 0; r < in; ++r) w(r, 0) += mean;
            b[0] = -cfg_.init_radius;
        } else {
            w = gaussian(in, out, 0.0, std::sqrt(2.0) / std::sqrt(static_cast<double>(out)), rng);
            // Fourier features start switched off so the initial surface is a sphere.
            const std::size_t first_fourier = l == 0 ? 3 : (is_skip(l) ? W + 3 : in);
            for (std::size_t r = first_fourier; r < in; ++r)
                for (std::size_t c = 0; c < out; ++c) w(r, c) = 0.0;
        }
        weights_.emplace_back("sdf.w" + std::to_string(l), std::move(w));
        biases_.emplace_back("sdf.b" + std::to_string(l), std::move(b));
    }
    log_alpha_ = Param("sdf.log_alpha", Matrix::scalar(-std::log(cfg_.beta_init)));
    log_beta_ = Param("sdf.log_beta", Matrix::scalar(std::log(cfg_.beta_init)));
    if (cfg_.init_fit_steps > 0) fit_sphere(derive_seed(seed, "init.fit"));
}

// Narrow networks drawn from the geometric init are only roughly spherical;
// a short regression onto the exact sphere distance tightens the start.
void SdfNet::fit_sphere(std::uint64_t seed) {
    constexpr std::size_t kPoints = 512;
    const double r0 = cfg_.init_radius, half = 2.0 * r0;
    std::vector<Param*> ps;
    for (std::size_t l = 0; l < weights_.size(); ++l) {
        ps.push_back(&weights_[l]);
        ps.push_back(&biases_[l]);
    }
    ad::Adam adam(ps, ad::AdamConfig{.lr = 1e-3});
    Rng rng(seed);
    std::uniform_real_distribution<double> u(-half, half);
    for (int step = 0; step < cfg_.init_fit_steps; ++step) {
        Matrix pts(kPoints, 3), target(kPoints, 1);
        for (std::size_t i = 0; i < kPoints; ++i) {
            for (int a = 0; a < 3; ++a) pts(i, a) = u(rng);
            target[i] = std::sqrt(pts(i, 0) * pts(i, 0) + pts(i, 1) * pts(i, 1) + pts(i, 2) * pts(i, 2)) - r0;
        }
        Tape t;
        const Var loss = mean(square(forward(t, pts, false, true).sdf - t.constant(target)));
        t.backward(loss);
        adam.step();
    }
}

bool SdfNet::is_skip(std::size_t l) const {
    return std::find(cfg_.skip_layers.begin(), cfg_.skip_layers.end(), static_cast<int>(l)) != cfg_.skip_layers.end();
}

SdfEval SdfNet::forward(Tape& t, const Matrix& pts, bool with_grad, bool trainable) const {
    const std::size_t P = pts.rows();
    const Var enc = t.constant(encode(pts, cfg_.octaves));
    const Var enc_jac = with_grad ? t.constant(encode_jacobian(pts, cfg_.octaves)) : Var{};
    const double inv_sqrt2 = 1.0 / std::sqrt(2.0);
    Var h = enc, J = enc_jac;
    SdfEval out;
    for (std::size_t l = 0; l < weights_.size(); ++l) {
        if (l > 0 && is_skip(l)) {
            const Var hv[] = {h, enc};
            h = scale(concat_cols(hv), inv_sqrt2);
            if (with_grad) {
                const Var jv[] = {J, enc_jac};
                J = scale(concat_cols(jv), inv_sqrt2);
            }
        }
        const Var w = bind(t, weights_[l], trainable);
        const Var pre = add_row(matmul(h, w), bind(t, biases_[l], trainable));
        if (l + 1 == weights_.size()) {
            out.sdf = slice_cols(pre, 0, 1);
            if (cfg_.feature_dim > 0) out.feature = slice_cols(pre, 1, pre.cols());
            if (with_grad) out.grad = stacked_to_rows(matmul(J, slice_cols(w, 0, 1)), P);
            break;
        }
        if (with_grad) J = mul_row_tiled(matmul(J, w), softplus_slope(pre, cfg_.softplus_beta));
        h = softplus(pre, cfg_.softplus_beta);
    }
    return out;
}

SdfEval SdfNet::eval(Tape& t, const Matrix& pts, bool with_grad) const { return forward(t, pts, with_grad, true); }

std::vector<double> SdfNet::values(const Matrix& pts) const {
    constexpr std::size_t kChunk = 2048;
    const std::size_t P = pts.rows();
    std::vector<double> out(P);
    const std::size_t chunks = (P + kChunk - 1) / kChunk;
    parallel_for(chunks, [&](std::size_t c0, std::size_t c1) {
        for (std::size_t c = c0; c < c1; ++c) {
            const std::size_t b = c * kChunk, e = std::min(P, b + kChunk);
            Matrix sub(e - b, 3);
            std::copy(pts.row(b), pts.row(b) + 3 * (e - b), sub.data());
            Tape t;
            const SdfEval ev = forward(t, sub, false, false);
            std::copy(ev.sdf.value().data(), ev.sdf.value().data() + (e - b), out.begin() + static_cast<long>(b));
        }
    });
    return out;
}

Var SdfNet::alpha(Tape& t) const { return exp(t.param(const_cast<Param&>(log_alpha_))); }
Var SdfNet::beta(Tape& t) const { return exp(t.param(const_cast<Param&>(log_beta_))); }
double SdfNet::alpha_value() const { return std::exp(log_alpha_.value[0]); }
double SdfNet::beta_value() const { return std::exp(log_beta_.value[0]); }

std::vector<Param*> SdfNet::params() {
    std::vector<Param*> ps;
    for (std::size_t l = 0; l < weights_.size(); ++l) {
        ps.push_back(&weights_[l]);
        ps.push_back(&biases_[l]);
    }
    ps.push_back(&log_alpha_);
    ps.push_back(&log_beta_);
    return ps;
}

std::vector<const Param*> SdfNet::params() const {
    std::vector<const Param*> out;
    for (Param* p : const_cast<SdfNet*>(this)->params()) out.push_back(p);
    return out;
}

// ---------------------------------------------------------------------------
// RadianceNet

RadianceNet::RadianceNet(const RadianceNetConfig& cfg, std::size_t feature_dim, std::uint64_t seed)
    : cfg_(cfg), feature_dim_(feature_dim) {
    if (cfg_.hidden_layers < 1 || cfg_.width < 1) throw Error("radiance network needs at least one hidden layer");
    Rng rng(seed);
    std::size_t in = input_dim();
    const auto W = static_cast<std::size_t>(cfg_.width);
    for (int l = 0; l <= cfg_.hidden_layers; ++l) {
        const bool last = l == cfg_.hidden_layers;
        const std::size_t out = last ? 3 : W;
        const double stddev = last ? 0.01 : std::sqrt(2.0 / static_cast<double>(in));
        weights_.emplace_back("rad.w" + std::to_string(l), gaussian(in, out, 0.0, stddev, rng));
        biases_.emplace_back("rad.b" + std::to_string(l), Matrix(1, out));
        in = out;
    }
}

std::size_t RadianceNet::input_dim() const {
    return encoded_dim(cfg_.pos_octaves) + 3 + encoded_dim(cfg_.dir_octaves) + feature_dim_;
}

Var RadianceNet::eval(Tape& t, const Matrix& pts, Var normals, const Matrix& view_dirs, Var feature) const {
    std::vector<Var> parts{t.constant(encode(pts, cfg_.pos_octaves)), normals,
                           t.constant(encode(view_dirs, cfg_.dir_octaves))};
    if (feature_dim_ > 0) {
        if (!feature.valid() || feature.cols() != feature_dim_)
            throw Error("radiance network expects " + std::to_string(feature_dim_) + " feature columns");
        parts.push_back(feature);
    }
    Var h = concat_cols(parts);
    for (std::size_t l = 0; l < weights_.size(); ++l) {
        h = add_row(matmul(h, bind(t, weights_[l], true)), bind(t, biases_[l], true));
        h = l + 1 == weights_.size() ? sigmoid(h) : relu(h);
    }
    return h;
}

std::vector<Param*> RadianceNet::params() {
    std::vector<Param*> ps;
    for (std::size_t l = 0; l < weights_.size(); ++l) {
        ps.push_back(&weights_[l]);
        ps.push_back(&biases_[l]);
    }
    return ps;
}

std::vector<const Param*> RadianceNet::params() const {
    std::vector<const Param*> out;
    for (Param* p : const_cast<RadianceNet*>(this)->params()) out.push_back(p);
    return out;
}

// ---------------------------------------------------------------------------
// FieldPair, configs, checkpoints

FieldPair::FieldPair(const SdfNetConfig& sdf_cfg, const RadianceNetConfig& rad_cfg, std::uint64_t seed)
    : sdf(sdf_cfg, derive_seed(seed, "init.sdf")),
      radiance(rad_cfg, static_cast<std::size_t>(sdf_cfg.feature_dim), derive_seed(seed, "init.radiance")) {}

std::vector<Param*> FieldPair::params() {
    std::vector<Param*> ps = sdf.params();
    for (Param* p : radiance.params()) ps.push_back(p);
    return ps;
}

nlohmann::json to_json(const SdfNetConfig& c) {
    return {{"hidden_layers", c.hidden_layers}, {"width", c.width},
            {"skip_layers", c.skip_layers},     {"feature_dim", c.feature_dim},
            {"softplus_beta", c.softplus_beta}, {"octaves", c.octaves},
            {"init_radius", c.init_radius},     {"beta_init", c.beta_init},
            {"init_fit_steps", c.init_fit_steps}};
}

nlohmann::json to_json(const RadianceNetConfig& c) {
    return {{"hidden_layers", c.hidden_layers},
            {"width", c.width},
            {"pos_octaves", c.pos_octaves},
            {"dir_octaves", c.dir_octaves}};
}

SdfNetConfig sdf_config_from_json(const nlohmann::json& j) {
    SdfNetConfig c;
    c.hidden_layers = j.at("hidden_layers").get<int>();
    c.width = j.at("width").get<int>();
    c.skip_layers = j.at("skip_layers").get<std::vector<int>>();
    c.feature_dim = j.at("feature_dim").get<int>();
    c.softplus_beta = j.at("softplus_beta").get<double>();
    c.octaves = j.at("octaves").get<int>();
    c.init_radius = j.at("init_radius").get<double>();
    c.beta_init = j.at("beta_init").get<double>();
    c.init_fit_steps = j.value("init_fit_steps", 0);
    return c;
}

RadianceNetConfig radiance_config_from_json(const nlohmann::json& j) {
    RadianceNetConfig c;
    c.hidden_layers = j.at("hidden_layers").get<int>();
    c.width = j.at("width").get<int>();
    c.pos_octaves = j.at("pos_octaves").get<int>();
    c.dir_octaves = j.at("dir_octaves").get<int>();
    return c;
}

namespace {

constexpr char kMagic[8] = {'M', 'V', 'P', 'S', 'C', 'K', 'P', 'T'};
constexpr std::uint32_t kCheckpointVersion = 1;

template <class T>
void put(std::ostream& out, const T& v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

void put_doubles(std::ostream& out, const Matrix& m) {
    out.write(reinterpret_cast<const char*>(m.data()), static_cast<std::streamsize>(m.size() * sizeof(double)));
}

class Reader {
public:
    explicit Reader(const std::filesystem::path& path) : path_(path), in_(path, std::ios::binary) {
        if (!in_) throw IoError(path, "cannot open checkpoint");
    }
    template <class T>
    T get() {
        T v{};
        bytes(reinterpret_cast<char*>(&v), sizeof(T));
        return v;
    }
    void bytes(char* dst, std::size_t n) {
        in_.read(dst, static_cast<std::streamsize>(n));
        if (static_cast<std::size_t>(in_.gcount()) != n) throw IoError(path_, "truncated checkpoint");
    }
    std::string string() {
        const auto n = get<std::uint64_t>();
        if (n > (1u << 20)) throw IoError(path_, "corrupt checkpoint string length");
        std::string s(n, '\0');
        bytes(s.data(), n);
        return s;
    }
    void doubles(Matrix& m) { bytes(reinterpret_cast<char*>(m.data()), m.size() * sizeof(double)); }
    const std::filesystem::path& path() const { return path_; }

private:
    std::filesystem::path path_;
    std::ifstream in_;
};

}  // namespace

void save_checkpoint(const std::filesystem::path& path, FieldPair& fields, const CheckpointState& state) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    // Write-then-rename so an interrupted run never leaves a torn checkpoint.
    const std::filesystem::path tmp = path.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary);
        if (!out) throw IoError(tmp, "cannot open for writing");
        out.write(kMagic, sizeof kMagic);
        put(out, kCheckpointVersion);
        put(out, state.epoch);
        const std::string arch =
            nlohmann::json{{"sdf", to_json(fields.sdf.config())}, {"radiance", to_json(fields.radiance.config())}}
                .dump();
        put(out, static_cast<std::uint64_t>(arch.size()));
        out.write(arch.data(), static_cast<std::streamsize>(arch.size()));
        const auto params = fields.params();
        put(out, static_cast<std::uint64_t>(params.size()));
        for (const Param* p : params) {
            put(out, static_cast<std::uint64_t>(p->name.size()));
            out.write(p->name.data(), static_cast<std::streamsize>(p->name.size()));
            put(out, static_cast<std::uint64_t>(p->value.rows()));
            put(out, static_cast<std::uint64_t>(p->value.cols()));
            put_doubles(out, p->value);
        }
        put(out, fields.sdf.alpha_value());
        put(out, fields.sdf.beta_value());
        put(out, static_cast<std::uint8_t>(state.adam.has_value()));
        if (state.adam) {
            if (state.adam->m.size() != params.size() || state.adam->v.size() != params.size())
                throw IoError(path, "optimizer state does not match the parameter list");
            put(out, state.adam->steps);
            for (std::size_t k = 0; k < params.size(); ++k) {
                put_doubles(out, state.adam->m[k]);
                put_doubles(out, state.adam->v[k]);
            }
        }
        if (!out) throw IoError(tmp, "write failed");
    }
    std::filesystem::rename(tmp, path);
}

std::unique_ptr<FieldPair> load_checkpoint(const std::filesystem::path& path, CheckpointState* state) {
    Reader r(path);
    char magic[8];
    r.bytes(magic, sizeof magic);
    if (std::memcmp(magic, kMagic, sizeof magic) != 0) throw IoError(path, "not a checkpoint (bad magic)");
    if (r.get<std::uint32_t>() != kCheckpointVersion) throw IoError(path, "unsupported checkpoint version");
    const auto epoch = r.get<std::uint64_t>();
    nlohmann::json arch;
    try {
        arch = nlohmann::json::parse(r.string());
    } catch (const nlohmann::json::exception& e) {
        throw IoError(path, std::string("bad architecture record: ") + e.what());
    }
    auto fields = std::make_unique<FieldPair>(sdf_config_from_json(arch.at("sdf")),
                                              radiance_config_from_json(arch.at("radiance")), 0);
    const auto params = fields->params();
    const auto count = r.get<std::uint64_t>();
    if (count != params.size()) throw IoError(path, "tensor count does not match the architecture");
    for (Param* p : params) {
        const std::string name = r.string();
        const auto rows = r.get<std::uint64_t>(), cols = r.get<std::uint64_t>();
        if (name != p->name || rows != p->value.rows() || cols != p->value.cols())
            throw IoError(path, "tensor '" + name + "' does not match expected '" + p->name + "' " +
                                    p->value.shape_str());
        r.doubles(p->value);
    }
    (void)r.get<double>();  // alpha and beta are derived from the log parameters
    (void)r.get<double>();
    const bool has_adam = r.get<std::uint8_t>() != 0;
    if (state != nullptr) {
        state->epoch = epoch;
        state->adam.reset();
        if (has_adam) {
            AdamSnapshot snap;
            snap.steps = r.get<std::int64_t>();
            for (const Param* p : params) {
                Matrix m(p->value.rows(), p->value.cols()), v(p->value.rows(), p->value.cols());
                r.doubles(m);
                r.doubles(v);
                snap.m.push_back(std::move(m));
                snap.v.push_back(std::move(v));
            }
            state->adam = std::move(snap);
        }
    }
    return fields;
}

}  // namespace mvps::field

// Copyright Contributors to the mvps-fusion Project
// SPDX-License-Identifier: Apache-2.0

#include "mvps/io/image_io.hpp"

#include "mvps/common/error.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>
#include <string>

namespace mvps::io {

namespace {

static_assert(std::endian::native == std::endian::little, "PFM writer assumes a little-endian host");

std::ofstream open_out(const std::filesystem::path& path) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError(path, "cannot open for writing");
    return out;
}

std::ifstream open_in(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError(path, "cannot open for reading");
    return in;
}

// Reads one whitespace-delimited header token and consumes exactly one
// trailing whitespace byte.
std::string header_token(std::istream& in, const std::filesystem::path& path) {
    std::string tok;
    if (!(in >> tok)) throw IoError(path, "truncated header");
    in.get();
    return tok;
}

int parse_dim(const std::string& tok, const std::filesystem::path& path) {
    try {
        std::size_t used = 0;
        const int v = std::stoi(tok, &used);
        if (used != tok.size() || v <= 0) throw std::invalid_argument(tok);
        return v;
    } catch (const std::exception&) {
        throw IoError(path, "bad image dimension '" + tok + "'");
    }
}

}  // namespace

void write_pfm(const std::filesystem::path& path, const Image& img) {
    if (img.channels != 1 && img.channels != 3) throw IoError(path, "PFM supports 1 or 3 channels");
    auto out = open_out(path);
    out << (img.channels == 3 ? "PF" : "Pf") << '\n' << img.width << ' ' << img.height << "\n-1.0\n";
    const std::size_t row = static_cast<std::size_t>(img.width) * img.channels;
    for (int y = img.height - 1; y >= 0; --y)
        out.write(reinterpret_cast<const char*>(img.data.data() + y * row), static_cast<std::streamsize>(row * 4));
    if (!out) throw IoError(path, "write failed");
}

Image read_pfm(const std::filesystem::path& path) {
    auto in = open_in(path);
    const std::string magic = header_token(in, path);
    int channels = 0;
    if (magic == "PF") channels = 3;
    else if (magic == "Pf") channels = 1;
    else throw IoError(path, "not a PFM file (magic '" + magic + "')");
    const int w = parse_dim(header_token(in, path), path);
    const int h = parse_dim(header_token(in, path), path);
    const std::string scale_tok = header_token(in, path);
    double scale = 0.0;
    try {
        scale = std::stod(scale_tok);
    } catch (const std::exception&) {
        throw IoError(path, "bad PFM scale '" + scale_tok + "'");
    }
    if (scale == 0.0) throw IoError(path, "PFM scale must be nonzero");
    if (scale > 0.0) throw IoError(path, "PFM endianness mismatch: big-endian data, expected little-endian");

    Image img(w, h, channels);
    const std::size_t row = static_cast<std::size_t>(w) * channels;
    for (int y = h - 1; y >= 0; --y) {
        in.read(reinterpret_cast<char*>(img.data.data() + y * row), static_cast<std::streamsize>(row * 4));
        if (in.gcount() != static_cast<std::streamsize>(row * 4))
            throw IoError(path, "truncated PFM: expected " + std::to_string(row * h * 4) + " data bytes");
    }
    return img;
}

void write_pgm(const std::filesystem::path& path, const Mask& mask) {
    auto out = open_out(path);
    out << "P5\n" << mask.width << ' ' << mask.height << "\n255\n";
    std::string bytes(mask.data.size(), '\0');
    for (std::size_t i = 0; i < mask.data.size(); ++i) bytes[i] = mask.data[i] ? static_cast<char>(255) : '\0';
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw IoError(path, "write failed");
}

Mask read_pgm(const std::filesystem::path& path) {
    auto in = open_in(path);
    if (header_token(in, path) != "P5") throw IoError(path, "not a binary PGM (P5) file");
    const int w = parse_dim(header_token(in, path), path);
    const int h = parse_dim(header_token(in, path), path);
    if (header_token(in, path) != "255") throw IoError(path, "PGM maxval must be 255");
    Mask m(w, h);
    std::string bytes(m.data.size(), '\0');
    in.read(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (in.gcount() != static_cast<std::streamsize>(bytes.size())) throw IoError(path, "truncated PGM");
    for (std::size_t i = 0; i < bytes.size(); ++i) m.data[i] = bytes[i] != '\0';
    return m;
}

}  // namespace mvps::io

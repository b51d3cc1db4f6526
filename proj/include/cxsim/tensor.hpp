#pragma once

#include <algorithm>
#include <array>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <variant>
#include <vector>

namespace cxsim {

// Dense row-major matrix of doubles. Internal arithmetic is double
// throughout; file payloads narrow to f32 (CXT) or u8 (PNG).
struct Matrix {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> data;

    Matrix() = default;
    Matrix(std::size_t r, std::size_t c, double fill = 0.0) : rows(r), cols(c), data(r * c, fill) {}
    Matrix(std::size_t r, std::size_t c, std::vector<double> values)
        : rows(r), cols(c), data(std::move(values)) {
        if (data.size() != rows * cols)
            throw std::invalid_argument("Matrix: data length does not match rows*cols");
    }

    double& at(std::size_t i, std::size_t j) { return data[i * cols + j]; }
    double at(std::size_t i, std::size_t j) const { return data[i * cols + j]; }
    double* row(std::size_t i) { return data.data() + i * cols; }
    const double* row(std::size_t i) const { return data.data() + i * cols; }
};

// H x W x C image, values kept in [0,1]. Construction clamps so that
// optimizer steps and file payloads can never leave the valid range.
struct ImageGrid {
    std::size_t height = 0;
    std::size_t width = 0;
    std::size_t channels = 1;
    std::vector<double> data;  // row-major (row, col, channel)

    ImageGrid() = default;
    ImageGrid(std::size_t h, std::size_t w, std::size_t c, std::vector<double> values)
        : height(h), width(w), channels(c), data(std::move(values)) {
        if (channels != 1 && channels != 3)
            throw std::invalid_argument("ImageGrid: channels must be 1 or 3");
        if (data.size() != height * width * channels)
            throw std::invalid_argument("ImageGrid: data length does not match dims");
        for (double& v : data) v = std::clamp(v, 0.0, 1.0);
    }
    ImageGrid(std::size_t h, std::size_t w, std::size_t c, double fill = 0.0)
        : ImageGrid(h, w, c, std::vector<double>(h * w * c, std::clamp(fill, 0.0, 1.0))) {}

    std::size_t pixel_count() const { return height * width * channels; }
    double& at(std::size_t r, std::size_t c, std::size_t ch) {
        return data[(r * width + c) * channels + ch];
    }
    double at(std::size_t r, std::size_t c, std::size_t ch) const {
        return data[(r * width + c) * channels + ch];
    }
};

// A set of N feature vectors of dimension D, optionally tagged with the
// (row, col) image position each feature came from.
struct FeatureSet {
    Matrix features;  // N x D
    std::optional<std::vector<std::array<std::size_t, 2>>> origins;

    FeatureSet() = default;
    explicit FeatureSet(Matrix m) : features(std::move(m)) {}
    FeatureSet(Matrix m, std::vector<std::array<std::size_t, 2>> o)
        : features(std::move(m)), origins(std::move(o)) {
        if (origins->size() != features.rows)
            throw std::invalid_argument("FeatureSet: origins length does not match feature count");
    }

    std::size_t count() const { return features.rows; }
    std::size_t dim() const { return features.cols; }
};

using TensorValue = std::variant<Matrix, ImageGrid>;

// ---------------------------------------------------------------------------
// CXT tensor file: "CXT1" magic, u32 ndim, ndim x u32 dims, then
// product(dims) f32 values, all little-endian, row-major, no padding.

namespace detail {

inline std::uint32_t read_u32_le(const unsigned char* p) {
    return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
           (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

inline void write_u32_le(std::uint32_t v, unsigned char* p) {
    p[0] = static_cast<unsigned char>(v & 0xff);
    p[1] = static_cast<unsigned char>((v >> 8) & 0xff);
    p[2] = static_cast<unsigned char>((v >> 16) & 0xff);
    p[3] = static_cast<unsigned char>((v >> 24) & 0xff);
}

struct FileCloser {
    void operator()(std::FILE* f) const {
        if (f) std::fclose(f);
    }
};

inline std::vector<unsigned char> read_file_bytes(const std::string& path) {
    std::unique_ptr<std::FILE, FileCloser> f(std::fopen(path.c_str(), "rb"));
    if (!f) throw std::runtime_error("cannot open file: " + path);
    std::vector<unsigned char> bytes;
    unsigned char buf[65536];
    std::size_t got;
    while ((got = std::fread(buf, 1, sizeof(buf), f.get())) > 0)
        bytes.insert(bytes.end(), buf, buf + got);
    if (std::ferror(f.get())) throw std::runtime_error("read error: " + path);
    return bytes;
}

inline void write_file_bytes(const std::string& path, const std::vector<unsigned char>& bytes) {
    std::unique_ptr<std::FILE, FileCloser> f(std::fopen(path.c_str(), "wb"));
    if (!f) throw std::runtime_error("cannot open file for writing: " + path);
    if (!bytes.empty() && std::fwrite(bytes.data(), 1, bytes.size(), f.get()) != bytes.size())
        throw std::runtime_error("write error: " + path);
    if (std::fflush(f.get()) != 0) throw std::runtime_error("write error: " + path);
}

inline float to_f32(double v) { return static_cast<float>(v); }

inline std::vector<unsigned char> encode_cxt(const std::vector<std::uint32_t>& dims,
                                             const std::vector<double>& values) {
    std::vector<unsigned char> out(4 + 4 + 4 * dims.size() + 4 * values.size());
    std::memcpy(out.data(), "CXT1", 4);
    write_u32_le(static_cast<std::uint32_t>(dims.size()), out.data() + 4);
    std::size_t off = 8;
    for (std::uint32_t d : dims) {
        write_u32_le(d, out.data() + off);
        off += 4;
    }
    for (double v : values) {
        float f = to_f32(v);
        std::uint32_t bits;
        std::memcpy(&bits, &f, 4);
        write_u32_le(bits, out.data() + off);
        off += 4;
    }
    return out;
}

}  // namespace detail

inline TensorValue load_tensor(const std::string& path) {
    const std::vector<unsigned char> bytes = detail::read_file_bytes(path);
    if (bytes.size() < 8 || std::memcmp(bytes.data(), "CXT1", 4) != 0)
        throw std::runtime_error("bad magic: " + path + " is not a CXT tensor file");
    const std::uint32_t ndim = detail::read_u32_le(bytes.data() + 4);
    if (ndim != 2 && ndim != 3)
        throw std::runtime_error("unsupported ndim " + std::to_string(ndim) + " in " + path);
    if (bytes.size() < 8 + 4ull * ndim)
        throw std::runtime_error("truncated header in " + path);
    std::vector<std::uint32_t> dims(ndim);
    std::uint64_t count = 1;
    for (std::uint32_t i = 0; i < ndim; ++i) {
        dims[i] = detail::read_u32_le(bytes.data() + 8 + 4 * i);
        if (dims[i] == 0) throw std::runtime_error("zero dimension in " + path);
        count *= dims[i];
        if (count > (1ull << 31))
            throw std::runtime_error("dim overflow in " + path);
    }
    const std::size_t payload_off = 8 + 4ull * ndim;
    if (bytes.size() < payload_off + 4 * count)
        throw std::runtime_error("truncated payload in " + path);
    if (bytes.size() > payload_off + 4 * count)
        throw std::runtime_error("trailing data in " + path);
    std::vector<double> values(count);
    for (std::uint64_t i = 0; i < count; ++i) {
        const std::uint32_t bits = detail::read_u32_le(bytes.data() + payload_off + 4 * i);
        float f;
        std::memcpy(&f, &bits, 4);
        values[i] = static_cast<double>(f);
    }
    if (ndim == 2) return Matrix(dims[0], dims[1], std::move(values));
    if (dims[2] != 1 && dims[2] != 3)
        throw std::runtime_error("3-d tensor in " + path +
                                    " has channels=" + std::to_string(dims[2]) + ", expected 1 or 3");
    return ImageGrid(dims[0], dims[1], dims[2], std::move(values));
}

inline void save_tensor(const Matrix& m, const std::string& path) {
    detail::write_file_bytes(path,
                             detail::encode_cxt({static_cast<std::uint32_t>(m.rows),
                                                 static_cast<std::uint32_t>(m.cols)},
                                                m.data));
}

inline void save_tensor(const ImageGrid& img, const std::string& path) {
    detail::write_file_bytes(path,
                             detail::encode_cxt({static_cast<std::uint32_t>(img.height),
                                                 static_cast<std::uint32_t>(img.width),
                                                 static_cast<std::uint32_t>(img.channels)},
                                                img.data));
}

inline void save_tensor(const TensorValue& t, const std::string& path) {
    std::visit([&](const auto& v) { save_tensor(v, path); }, t);
}

}  // namespace cxsim

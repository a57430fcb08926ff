#include "ldeq/grid.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <limits>
#include <memory>
#include <stdexcept>

namespace ldeq {

namespace {

std::size_t shape_product(const std::vector<std::size_t>& shape) {
    std::size_t n = 1;
    for (std::size_t d : shape) {
        if (d == 0) throw std::invalid_argument("zero dimension");
        if (d > std::numeric_limits<std::uint32_t>::max() || n > SIZE_MAX / d)
            throw std::invalid_argument("dimension overflow");
        n *= d;
    }
    return n;
}

} // namespace

Grid::Grid(std::vector<std::size_t> shape, double fill)
    : shape_(std::move(shape)), data_(shape_product(shape_), fill) {}

Grid::Grid(std::vector<std::size_t> shape, std::vector<double> data)
    : shape_(std::move(shape)), data_(std::move(data)) {
    if (shape_product(shape_) != data_.size())
        throw std::invalid_argument("shape/data size mismatch");
}

bool Grid::all_finite() const {
    for (double v : data_)
        if (!std::isfinite(v)) return false;
    return true;
}

std::size_t ParamVector::add_segment(std::string name, std::vector<std::size_t> shape) {
    std::size_t n = shape_product(shape);
    segments_.push_back({std::move(name), std::move(shape), data_.size(), n});
    data_.resize(data_.size() + n, 0.0);
    return segments_.size() - 1;
}

const ParamVector::Segment& ParamVector::segment(const std::string& name) const {
    for (const auto& s : segments_)
        if (s.name == name) return s;
    throw std::invalid_argument("unknown parameter segment: " + name);
}

double* ParamVector::segment_data(const std::string& name) {
    return data_.data() + segment(name).offset;
}

const double* ParamVector::segment_data(const std::string& name) const {
    return data_.data() + segment(name).offset;
}

bool ParamVector::same_layout(const ParamVector& other) const {
    if (segments_.size() != other.segments_.size()) return false;
    for (std::size_t i = 0; i < segments_.size(); ++i) {
        const auto& a = segments_[i];
        const auto& b = other.segments_[i];
        if (a.name != b.name || a.shape != b.shape || a.offset != b.offset) return false;
    }
    return true;
}

ParamVector ParamVector::zeros_like(const ParamVector& p) {
    ParamVector out;
    out.segments_ = p.segments_;
    out.data_.assign(p.data_.size(), 0.0);
    return out;
}

double norm2(const Grid& a) {
    if (a.empty()) throw std::invalid_argument("empty operand");
    double s = 0.0;
    for (double v : a.values()) s += v * v;
    return std::sqrt(s);
}

Grid axpy(double alpha, const Grid& x, const Grid& y) {
    if (!x.same_shape(y)) throw std::invalid_argument("axpy: shape mismatch");
    Grid out = y;
    for (std::size_t i = 0; i < out.size(); ++i) out[i] += alpha * x[i];
    return out;
}

double reduce_max(const Grid& a) {
    if (a.empty()) throw std::invalid_argument("empty operand");
    return *std::max_element(a.values().begin(), a.values().end());
}

std::vector<double> reduce_max_per_channel(const Grid& a) {
    if (a.empty()) throw std::invalid_argument("empty operand");
    std::size_t channels = a.shape().front();
    std::size_t stride = a.size() / channels;
    std::vector<double> out(channels);
    for (std::size_t c = 0; c < channels; ++c)
        out[c] = *std::max_element(a.data() + c * stride, a.data() + (c + 1) * stride);
    return out;
}

namespace {

constexpr char kMagic[4] = {'E', 'Q', 'G', '1'};

struct FileCloser {
    void operator()(std::FILE* f) const { if (f) std::fclose(f); }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

void put_u32(std::FILE* f, std::uint32_t v) {
    unsigned char b[4] = {static_cast<unsigned char>(v),
                          static_cast<unsigned char>(v >> 8),
                          static_cast<unsigned char>(v >> 16),
                          static_cast<unsigned char>(v >> 24)};
    if (std::fwrite(b, 1, 4, f) != 4) throw std::runtime_error("write failed");
}

bool get_u32(std::FILE* f, std::uint32_t& v) {
    unsigned char b[4];
    if (std::fread(b, 1, 4, f) != 4) return false;
    v = static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
        (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
    return true;
}

void put_f64(std::FILE* f, double v) {
    std::uint64_t u;
    std::memcpy(&u, &v, 8);
    unsigned char b[8];
    for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(u >> (8 * i));
    if (std::fwrite(b, 1, 8, f) != 8) throw std::runtime_error("write failed");
}

bool get_f64(std::FILE* f, double& v) {
    unsigned char b[8];
    if (std::fread(b, 1, 8, f) != 8) return false;
    std::uint64_t u = 0;
    for (int i = 0; i < 8; ++i) u |= static_cast<std::uint64_t>(b[i]) << (8 * i);
    std::memcpy(&v, &u, 8);
    return true;
}

} // namespace

void write_grid(const std::string& path, const Grid& g) {
    FilePtr f(std::fopen(path.c_str(), "wb"));
    if (!f) throw std::runtime_error("cannot open for write: " + path);
    if (std::fwrite(kMagic, 1, 4, f.get()) != 4) throw std::runtime_error("write failed");
    put_u32(f.get(), static_cast<std::uint32_t>(g.rank()));
    for (std::size_t d : g.shape()) put_u32(f.get(), static_cast<std::uint32_t>(d));
    for (double v : g.values()) put_f64(f.get(), v);
}

Grid read_grid(const std::string& path) {
    FilePtr f(std::fopen(path.c_str(), "rb"));
    if (!f) throw std::runtime_error("cannot open for read: " + path);
    char magic[4];
    if (std::fread(magic, 1, 4, f.get()) != 4 || std::memcmp(magic, kMagic, 4) != 0)
        throw std::runtime_error("malformed header: " + path);
    std::uint32_t rank;
    if (!get_u32(f.get(), rank)) throw std::runtime_error("malformed header: " + path);
    if (rank > 32) throw std::runtime_error("dimension overflow: " + path);
    std::vector<std::size_t> shape(rank);
    std::size_t total = 1;
    for (std::uint32_t i = 0; i < rank; ++i) {
        std::uint32_t d;
        if (!get_u32(f.get(), d)) throw std::runtime_error("malformed header: " + path);
        if (d == 0) throw std::runtime_error("malformed header: " + path);
        if (total > (SIZE_MAX / 16) / d) throw std::runtime_error("dimension overflow: " + path);
        shape[i] = d;
        total *= d;
    }
    std::vector<double> data(total);
    for (std::size_t i = 0; i < total; ++i)
        if (!get_f64(f.get(), data[i])) throw std::runtime_error("truncated payload: " + path);
    return Grid(std::move(shape), std::move(data));
}

} // namespace ldeq

#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

namespace ldeq {

// Dense row-major array of doubles. Channel-first for heatmap stacks (L x D x D).
class Grid {
public:
    Grid() = default;
    Grid(std::vector<std::size_t> shape, double fill = 0.0);
    Grid(std::vector<std::size_t> shape, std::vector<double> data);

    const std::vector<std::size_t>& shape() const { return shape_; }
    std::size_t rank() const { return shape_.size(); }
    std::size_t size() const { return data_.size(); }
    bool empty() const { return data_.empty(); }

    double* data() { return data_.data(); }
    const double* data() const { return data_.data(); }
    std::vector<double>& values() { return data_; }
    const std::vector<double>& values() const { return data_; }

    double& operator[](std::size_t i) { return data_[i]; }
    double operator[](std::size_t i) const { return data_[i]; }

    bool same_shape(const Grid& other) const { return shape_ == other.shape_; }
    bool all_finite() const;

    static Grid zeros_like(const Grid& g) { return Grid(g.shape()); }

private:
    std::vector<std::size_t> shape_;
    std::vector<double> data_;
};

// Flat parameter storage with a named segment layout.
class ParamVector {
public:
    struct Segment {
        std::string name;
        std::vector<std::size_t> shape;
        std::size_t offset;
        std::size_t size;
    };

    ParamVector() = default;

    // Appends a zero-initialized segment, returns its index.
    std::size_t add_segment(std::string name, std::vector<std::size_t> shape);

    const std::vector<Segment>& segments() const { return segments_; }
    const Segment& segment(const std::string& name) const;
    double* segment_data(const std::string& name);
    const double* segment_data(const std::string& name) const;

    std::size_t size() const { return data_.size(); }
    double& operator[](std::size_t i) { return data_[i]; }
    double operator[](std::size_t i) const { return data_[i]; }
    std::vector<double>& values() { return data_; }
    const std::vector<double>& values() const { return data_; }

    bool same_layout(const ParamVector& other) const;

    // Zero-filled copy with identical layout.
    static ParamVector zeros_like(const ParamVector& p);

private:
    std::vector<Segment> segments_;
    std::vector<double> data_;
};

double norm2(const Grid& a);
Grid axpy(double alpha, const Grid& x, const Grid& y);

double reduce_max(const Grid& a);
std::vector<double> reduce_max_per_channel(const Grid& a);

// "EQG1" binary format: magic, u32 rank, u32 dims, f64 payload, all little-endian.
void write_grid(const std::string& path, const Grid& g);
Grid read_grid(const std::string& path);

} // namespace ldeq

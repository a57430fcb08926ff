#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "ldeq/deq.hpp"
#include "ldeq/grid.hpp"

namespace ldeq {

struct Point2 {
    double x = 0.0;
    double y = 0.0;
};

// L points in normalized image coordinates [0,1]^2.
using LandmarkSet = std::vector<Point2>;

// Fixed toy architecture:
//   encoder: 3x3 conv 1->C (stride 2 when H > D), tanh; 3x3 conv C->C
//            (stride 2 when H > 2D), tanh  — brings H x H down to D x D
//   trunk:   concat(C encoded channels, L state channels) -> 3x3 conv to 2C,
//            tanh -> 3x3 conv to L (raw heatmaps)
struct ArchDescriptor {
    std::size_t image_size = 32;   // H == W
    std::size_t heatmap_size = 16; // D
    std::size_t num_landmarks = 4; // L
    std::size_t feature_channels = 8; // C
    double temperature = 2.5;

    void validate() const;
};

// Per-channel exp((z - max)/T); every channel max maps to exactly 1.
Grid normalize_heatmap(const Grid& z_raw, double T);

// Expected pixel-center coordinates under q = z / sum(z), scaled by D.
LandmarkSet softargmax(const Grid& heatmaps);
// Reverse-mode product of softargmax: dL/dheatmaps from per-landmark (gx, gy).
Grid softargmax_vjp(const Grid& heatmaps, const std::vector<Point2>& grad_pts);

// Mean over landmarks and coordinates of squared error, plus gradient w.r.t. pred.
std::pair<double, std::vector<Point2>> mse_loss(const LandmarkSet& pred, const LandmarkSet& gt);

// The concrete LDEQ map f(z, x; theta) = normalize(hourglass(x, z; theta), T),
// with hand-written VJPs satisfying the DeqModel contract.
class LandmarkModel : public DeqModel {
public:
    explicit LandmarkModel(ArchDescriptor arch);

    const ArchDescriptor& arch() const { return arch_; }

    // Fresh parameters, uniform in ±1/sqrt(fan_in) per layer.
    ParamVector init_params(std::uint64_t seed) const;
    // Zero-filled parameters with the model's segment layout.
    ParamVector zero_params() const;

    // Raw (un-normalized) heatmaps from the conv stack.
    Grid hourglass_forward(const Grid& x, const Grid& z, const ParamVector& theta) const;

    Grid forward(const Grid& z, const Grid& x, const ParamVector& theta) const override;
    Grid vjp_z(const Grid& z, const Grid& x, const ParamVector& theta,
               const Grid& u) const override;
    ParamVector vjp_theta(const Grid& z, const Grid& x, const ParamVector& theta,
                          const Grid& u) const override;

    Grid zero_state() const;
    std::vector<std::size_t> state_shape() const;
    std::vector<std::size_t> image_shape() const;

    // Checkpoint = parameter grid (EQG1) + JSON manifest of layout and arch.
    void save_params(const std::string& prefix, const ParamVector& theta) const;
    static std::pair<ArchDescriptor, ParamVector> load_params(const std::string& prefix);

private:
    struct Activations;
    Activations run(const Grid& z, const Grid& x, const ParamVector& theta) const;
    void backward(const Activations& acts, const Grid& x, const ParamVector& theta,
                  const Grid& u, Grid* dz, ParamVector* dtheta) const;

    ArchDescriptor arch_;
    std::size_t enc1_stride_ = 1;
    std::size_t enc2_stride_ = 1;
    std::size_t mid_size_ = 0; // spatial size after the first encoder conv
};

} // namespace ldeq

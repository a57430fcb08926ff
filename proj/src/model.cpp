#include "ldeq/model.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <stdexcept>

#include "ldeq/rng.hpp"

#include "json.hpp"

namespace ldeq {

namespace {

// 3x3 convolution, zero padding 1. OH = (H-1)/stride + 1.
void conv3x3(const double* in, std::size_t ic, std::size_t h, std::size_t w,
             const double* wt, const double* bias, std::size_t oc, std::size_t stride,
             double* out, std::size_t oh, std::size_t ow) {
    for (std::size_t o = 0; o < oc; ++o)
        for (std::size_t oy = 0; oy < oh; ++oy)
            for (std::size_t ox = 0; ox < ow; ++ox) {
                double acc = bias[o];
                for (std::size_t c = 0; c < ic; ++c) {
                    const double* inp = in + c * h * w;
                    const double* wp = wt + ((o * ic + c) * 9);
                    for (std::size_t ky = 0; ky < 3; ++ky) {
                        std::ptrdiff_t iy = static_cast<std::ptrdiff_t>(oy * stride + ky) - 1;
                        if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(h)) continue;
                        for (std::size_t kx = 0; kx < 3; ++kx) {
                            std::ptrdiff_t ix = static_cast<std::ptrdiff_t>(ox * stride + kx) - 1;
                            if (ix < 0 || ix >= static_cast<std::ptrdiff_t>(w)) continue;
                            acc += wp[ky * 3 + kx] * inp[iy * static_cast<std::ptrdiff_t>(w) + ix];
                        }
                    }
                }
                out[(o * oh + oy) * ow + ox] = acc;
            }
}

// Reverse-mode products of conv3x3. Any of din/dw/db may be null; all accumulate.
void conv3x3_vjp(const double* in, std::size_t ic, std::size_t h, std::size_t w,
                 const double* wt, std::size_t oc, std::size_t stride,
                 const double* u, std::size_t oh, std::size_t ow,
                 double* din, double* dw, double* db) {
    for (std::size_t o = 0; o < oc; ++o)
        for (std::size_t oy = 0; oy < oh; ++oy)
            for (std::size_t ox = 0; ox < ow; ++ox) {
                double g = u[(o * oh + oy) * ow + ox];
                if (g == 0.0) continue;
                if (db) db[o] += g;
                for (std::size_t c = 0; c < ic; ++c) {
                    const double* inp = in + c * h * w;
                    const double* wp = wt + ((o * ic + c) * 9);
                    double* dinp = din ? din + c * h * w : nullptr;
                    double* dwp = dw ? dw + ((o * ic + c) * 9) : nullptr;
                    for (std::size_t ky = 0; ky < 3; ++ky) {
                        std::ptrdiff_t iy = static_cast<std::ptrdiff_t>(oy * stride + ky) - 1;
                        if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(h)) continue;
                        for (std::size_t kx = 0; kx < 3; ++kx) {
                            std::ptrdiff_t ix = static_cast<std::ptrdiff_t>(ox * stride + kx) - 1;
                            if (ix < 0 || ix >= static_cast<std::ptrdiff_t>(w)) continue;
                            std::size_t ii = static_cast<std::size_t>(iy) * w +
                                             static_cast<std::size_t>(ix);
                            if (dinp) dinp[ii] += g * wp[ky * 3 + kx];
                            if (dwp) dwp[ky * 3 + kx] += g * inp[ii];
                        }
                    }
                }
            }
}

void tanh_inplace(Grid& g) {
    for (double& v : g.values()) v = std::tanh(v);
}

} // namespace

void ArchDescriptor::validate() const {
    if (image_size == 0 || heatmap_size == 0 || num_landmarks == 0 || feature_channels == 0)
        throw std::invalid_argument("arch: zero dimension");
    if (temperature <= 0) throw std::invalid_argument("arch: temperature must be positive");
    std::size_t ratio = image_size / heatmap_size;
    if (ratio * heatmap_size != image_size || (ratio != 1 && ratio != 2 && ratio != 4))
        throw std::invalid_argument("arch: image_size must be heatmap_size times 1, 2 or 4");
}

Grid normalize_heatmap(const Grid& z_raw, double T) {
    if (T <= 0) throw std::invalid_argument("temperature must be positive");
    if (!z_raw.all_finite()) throw std::invalid_argument("normalize_heatmap: non-finite input");
    std::size_t channels = z_raw.shape().front();
    std::size_t stride = z_raw.size() / channels;
    Grid out = z_raw;
    for (std::size_t c = 0; c < channels; ++c) {
        double* p = out.data() + c * stride;
        double m = p[0];
        for (std::size_t i = 1; i < stride; ++i) m = std::max(m, p[i]);
        for (std::size_t i = 0; i < stride; ++i) p[i] = std::exp((p[i] - m) / T);
    }
    return out;
}

LandmarkSet softargmax(const Grid& heatmaps) {
    std::size_t L = heatmaps.shape()[0];
    std::size_t D = heatmaps.shape()[1];
    LandmarkSet pts(L);
    for (std::size_t c = 0; c < L; ++c) {
        const double* p = heatmaps.data() + c * D * D;
        double s = 0.0, sx = 0.0, sy = 0.0;
        for (std::size_t i = 0; i < D; ++i)
            for (std::size_t j = 0; j < D; ++j) {
                double v = p[i * D + j];
                s += v;
                sx += v * (static_cast<double>(j) + 0.5);
                sy += v * (static_cast<double>(i) + 0.5);
            }
        if (s <= 0.0) throw std::runtime_error("softargmax: non-positive channel sum");
        pts[c].x = sx / (s * static_cast<double>(D));
        pts[c].y = sy / (s * static_cast<double>(D));
    }
    return pts;
}

Grid softargmax_vjp(const Grid& heatmaps, const std::vector<Point2>& grad_pts) {
    std::size_t L = heatmaps.shape()[0];
    std::size_t D = heatmaps.shape()[1];
    if (grad_pts.size() != L) throw std::invalid_argument("softargmax_vjp: length mismatch");
    LandmarkSet pts = softargmax(heatmaps);
    Grid out = Grid::zeros_like(heatmaps);
    for (std::size_t c = 0; c < L; ++c) {
        const double* p = heatmaps.data() + c * D * D;
        double s = 0.0;
        for (std::size_t i = 0; i < D * D; ++i) s += p[i];
        double gx = grad_pts[c].x, gy = grad_pts[c].y;
        double* o = out.data() + c * D * D;
        for (std::size_t i = 0; i < D; ++i)
            for (std::size_t j = 0; j < D; ++j) {
                double cx = (static_cast<double>(j) + 0.5) / static_cast<double>(D);
                double cy = (static_cast<double>(i) + 0.5) / static_cast<double>(D);
                o[i * D + j] = (gx * (cx - pts[c].x) + gy * (cy - pts[c].y)) / s;
            }
    }
    return out;
}

std::pair<double, std::vector<Point2>> mse_loss(const LandmarkSet& pred, const LandmarkSet& gt) {
    if (pred.size() != gt.size()) throw std::invalid_argument("mse_loss: length mismatch");
    double n = 2.0 * static_cast<double>(pred.size());
    double loss = 0.0;
    std::vector<Point2> grad(pred.size());
    for (std::size_t i = 0; i < pred.size(); ++i) {
        double dx = pred[i].x - gt[i].x;
        double dy = pred[i].y - gt[i].y;
        loss += (dx * dx + dy * dy) / n;
        grad[i].x = 2.0 * dx / n;
        grad[i].y = 2.0 * dy / n;
    }
    return {loss, std::move(grad)};
}

struct LandmarkModel::Activations {
    Grid e1;   // post-tanh, C x mid x mid
    Grid e2;   // post-tanh, C x D x D
    Grid cat;  // (C+L) x D x D
    Grid t1;   // post-tanh, 2C x D x D
    Grid raw;  // L x D x D
    Grid out;  // normalized, L x D x D
};

LandmarkModel::LandmarkModel(ArchDescriptor arch) : arch_(arch) {
    arch_.validate();
    std::size_t ratio = arch_.image_size / arch_.heatmap_size;
    enc1_stride_ = ratio >= 2 ? 2 : 1;
    enc2_stride_ = ratio == 4 ? 2 : 1;
    mid_size_ = (arch_.image_size - 1) / enc1_stride_ + 1;
}

ParamVector LandmarkModel::zero_params() const {
    std::size_t C = arch_.feature_channels, L = arch_.num_landmarks;
    ParamVector p;
    p.add_segment("enc1_w", {C, 1, 3, 3});
    p.add_segment("enc1_b", {C});
    p.add_segment("enc2_w", {C, C, 3, 3});
    p.add_segment("enc2_b", {C});
    p.add_segment("trunk1_w", {2 * C, C + L, 3, 3});
    p.add_segment("trunk1_b", {2 * C});
    p.add_segment("trunk2_w", {L, 2 * C, 3, 3});
    p.add_segment("trunk2_b", {L});
    return p;
}

ParamVector LandmarkModel::init_params(std::uint64_t seed) const {
    ParamVector p = zero_params();
    SplitMix64 rng(seed);
    for (const auto& seg : p.segments()) {
        // fan_in from the weight shape; biases share their layer's fan_in.
        std::size_t fan_in = 1;
        if (seg.shape.size() == 4) fan_in = seg.shape[1] * seg.shape[2] * seg.shape[3];
        else {
            const auto& w = p.segment(seg.name.substr(0, seg.name.size() - 2) + "_w");
            fan_in = w.shape[1] * w.shape[2] * w.shape[3];
        }
        double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
        for (std::size_t i = 0; i < seg.size; ++i)
            p[seg.offset + i] = rng.uniform(-bound, bound);
    }
    return p;
}

Grid LandmarkModel::zero_state() const {
    return Grid(state_shape());
}

std::vector<std::size_t> LandmarkModel::state_shape() const {
    return {arch_.num_landmarks, arch_.heatmap_size, arch_.heatmap_size};
}

std::vector<std::size_t> LandmarkModel::image_shape() const {
    return {1, arch_.image_size, arch_.image_size};
}

LandmarkModel::Activations LandmarkModel::run(const Grid& z, const Grid& x,
                                              const ParamVector& theta) const {
    std::size_t C = arch_.feature_channels, L = arch_.num_landmarks;
    std::size_t H = arch_.image_size, D = arch_.heatmap_size, M = mid_size_;
    if (z.shape() != state_shape()) throw std::invalid_argument("state shape mismatch");
    if (x.shape() != image_shape()) throw std::invalid_argument("image shape mismatch");
    if (!theta.same_layout(zero_params()))
        throw std::invalid_argument("theta layout mismatch");

    Activations a;
    a.e1 = Grid({C, M, M});
    conv3x3(x.data(), 1, H, H, theta.segment_data("enc1_w"), theta.segment_data("enc1_b"),
            C, enc1_stride_, a.e1.data(), M, M);
    tanh_inplace(a.e1);

    a.e2 = Grid({C, D, D});
    conv3x3(a.e1.data(), C, M, M, theta.segment_data("enc2_w"), theta.segment_data("enc2_b"),
            C, enc2_stride_, a.e2.data(), D, D);
    tanh_inplace(a.e2);

    a.cat = Grid({C + L, D, D});
    std::copy(a.e2.values().begin(), a.e2.values().end(), a.cat.values().begin());
    std::copy(z.values().begin(), z.values().end(), a.cat.values().begin() + C * D * D);

    a.t1 = Grid({2 * C, D, D});
    conv3x3(a.cat.data(), C + L, D, D, theta.segment_data("trunk1_w"),
            theta.segment_data("trunk1_b"), 2 * C, 1, a.t1.data(), D, D);
    tanh_inplace(a.t1);

    a.raw = Grid({L, D, D});
    conv3x3(a.t1.data(), 2 * C, D, D, theta.segment_data("trunk2_w"),
            theta.segment_data("trunk2_b"), L, 1, a.raw.data(), D, D);

    a.out = normalize_heatmap(a.raw, arch_.temperature);
    return a;
}

Grid LandmarkModel::hourglass_forward(const Grid& x, const Grid& z,
                                      const ParamVector& theta) const {
    return run(z, x, theta).raw;
}

Grid LandmarkModel::forward(const Grid& z, const Grid& x, const ParamVector& theta) const {
    return run(z, x, theta).out;
}

void LandmarkModel::backward(const Activations& a, const Grid& x, const ParamVector& theta,
                             const Grid& u, Grid* dz, ParamVector* dtheta) const {
    std::size_t C = arch_.feature_channels, L = arch_.num_landmarks;
    std::size_t H = arch_.image_size, D = arch_.heatmap_size, M = mid_size_;
    double T = arch_.temperature;

    // Through sigma: out = exp((raw - max)/T). The max contributes through its
    // argmax entry, so each channel's gradient sum is removed there.
    Grid draw = Grid::zeros_like(a.raw);
    for (std::size_t c = 0; c < L; ++c) {
        const double* rawc = a.raw.data() + c * D * D;
        const double* outc = a.out.data() + c * D * D;
        const double* uc = u.data() + c * D * D;
        double* dc = draw.data() + c * D * D;
        std::size_t amax = 0;
        double total = 0.0;
        for (std::size_t i = 0; i < D * D; ++i) {
            if (rawc[i] > rawc[amax]) amax = i;
            double g = uc[i] * outc[i] / T;
            dc[i] = g;
            total += g;
        }
        dc[amax] -= total;
    }

    Grid dt1 = Grid::zeros_like(a.t1);
    conv3x3_vjp(a.t1.data(), 2 * C, D, D, theta.segment_data("trunk2_w"), L, 1,
                draw.data(), D, D, dt1.data(),
                dtheta ? dtheta->segment_data("trunk2_w") : nullptr,
                dtheta ? dtheta->segment_data("trunk2_b") : nullptr);
    for (std::size_t i = 0; i < dt1.size(); ++i) dt1[i] *= 1.0 - a.t1[i] * a.t1[i];

    Grid dcat = Grid::zeros_like(a.cat);
    conv3x3_vjp(a.cat.data(), C + L, D, D, theta.segment_data("trunk1_w"), 2 * C, 1,
                dt1.data(), D, D, dcat.data(),
                dtheta ? dtheta->segment_data("trunk1_w") : nullptr,
                dtheta ? dtheta->segment_data("trunk1_b") : nullptr);

    if (dz) {
        std::copy(dcat.values().begin() + C * D * D, dcat.values().end(),
                  dz->values().begin());
    }
    if (!dtheta) return;

    Grid de2({C, D, D});
    std::copy(dcat.values().begin(), dcat.values().begin() + C * D * D, de2.values().begin());
    for (std::size_t i = 0; i < de2.size(); ++i) de2[i] *= 1.0 - a.e2[i] * a.e2[i];

    Grid de1 = Grid::zeros_like(a.e1);
    conv3x3_vjp(a.e1.data(), C, M, M, theta.segment_data("enc2_w"), C, enc2_stride_,
                de2.data(), D, D, de1.data(),
                dtheta->segment_data("enc2_w"), dtheta->segment_data("enc2_b"));
    for (std::size_t i = 0; i < de1.size(); ++i) de1[i] *= 1.0 - a.e1[i] * a.e1[i];

    conv3x3_vjp(x.data(), 1, H, H, theta.segment_data("enc1_w"), C, enc1_stride_,
                de1.data(), M, M, nullptr,
                dtheta->segment_data("enc1_w"), dtheta->segment_data("enc1_b"));
}

Grid LandmarkModel::vjp_z(const Grid& z, const Grid& x, const ParamVector& theta,
                          const Grid& u) const {
    Activations a = run(z, x, theta);
    Grid dz = Grid::zeros_like(z);
    backward(a, x, theta, u, &dz, nullptr);
    return dz;
}

ParamVector LandmarkModel::vjp_theta(const Grid& z, const Grid& x, const ParamVector& theta,
                                     const Grid& u) const {
    Activations a = run(z, x, theta);
    ParamVector dtheta = ParamVector::zeros_like(theta);
    backward(a, x, theta, u, nullptr, &dtheta);
    return dtheta;
}

void LandmarkModel::save_params(const std::string& prefix, const ParamVector& theta) const {
    write_grid(prefix + ".eqg", Grid({theta.size()}, theta.values()));
    nlohmann::json j;
    j["arch"] = {{"image_size", arch_.image_size},
                 {"heatmap_size", arch_.heatmap_size},
                 {"num_landmarks", arch_.num_landmarks},
                 {"feature_channels", arch_.feature_channels},
                 {"temperature", arch_.temperature}};
    j["segments"] = nlohmann::json::array();
    for (const auto& s : theta.segments())
        j["segments"].push_back({{"name", s.name}, {"shape", s.shape}, {"offset", s.offset}});
    std::ofstream f(prefix + ".json");
    if (!f) throw std::runtime_error("cannot write manifest: " + prefix + ".json");
    f << j.dump(2) << "\n";
}

std::pair<ArchDescriptor, ParamVector> LandmarkModel::load_params(const std::string& prefix) {
    std::ifstream f(prefix + ".json");
    if (!f) throw std::runtime_error("cannot read manifest: " + prefix + ".json");
    nlohmann::json j = nlohmann::json::parse(f);
    ArchDescriptor arch;
    arch.image_size = j["arch"]["image_size"];
    arch.heatmap_size = j["arch"]["heatmap_size"];
    arch.num_landmarks = j["arch"]["num_landmarks"];
    arch.feature_channels = j["arch"]["feature_channels"];
    arch.temperature = j["arch"]["temperature"];
    LandmarkModel model(arch);
    ParamVector theta = model.zero_params();
    Grid g = read_grid(prefix + ".eqg");
    if (g.size() != theta.size()) throw std::runtime_error("checkpoint size mismatch");
    // Manifest layout must match the model's own.
    std::size_t idx = 0;
    for (const auto& js : j["segments"]) {
        const auto& s = theta.segments().at(idx++);
        if (js["name"] != s.name || js["offset"] != s.offset)
            throw std::runtime_error("checkpoint layout mismatch");
    }
    theta.values() = g.values();
    return {arch, std::move(theta)};
}

} // namespace ldeq

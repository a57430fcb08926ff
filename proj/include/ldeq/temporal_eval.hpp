#pragma once

#include <string>
#include <utility>
#include <vector>

#include "ldeq/grid.hpp"
#include "ldeq/model.hpp"

namespace ldeq {

// Rectangular per-frame landmark sets for one video.
struct LandmarkTrack {
    std::string video_id;
    std::vector<LandmarkSet> frames;

    std::size_t num_frames() const { return frames.size(); }
    std::size_t num_landmarks() const { return frames.empty() ? 0 : frames.front().size(); }
    void check_rectangular() const;
};

struct NormSpec {
    // d0 = distance between these two ground-truth landmarks, per frame.
    std::size_t d0_index_a = 0;
    std::size_t d0_index_b = 1;
    // d1^2 = area of the axis-aligned box spanning all gt landmarks, per frame.
};

struct MetricResult {
    std::vector<double> per_frame; // NME: frames 1..N; NMF: frames 2..N
    double aggregate = 0.0;
};

// Per-frame mean of ||gt - pred|| / d0, aggregate mean over frames, x100.
MetricResult nme(const LandmarkTrack& pred, const LandmarkTrack& gt, const NormSpec& spec);

// Per-frame RMS over landmarks of ||r_n - r_{n-1}|| / d1, aggregate
// sqrt((1/N) sum_{n=2..N} NMF_n^2), x1e4.
MetricResult nmf(const LandmarkTrack& pred, const LandmarkTrack& gt, const NormSpec& spec);

// y_1 passes through; y_n = (1-w) y_{n-1} + w x_n. Smaller w smooths more.
LandmarkTrack ema_filter(const LandmarkTrack& track, double w);

// Adaptive low-pass: cutoff = min_cutoff + beta * |filtered derivative|.
LandmarkTrack one_euro_filter(const LandmarkTrack& track, double min_cutoff, double beta,
                              double d_cutoff, double fps);

// Centered least-squares polynomial smoothing; edges use mirror padding.
LandmarkTrack savgol_filter(const LandmarkTrack& track, std::size_t window,
                            std::size_t polyorder);

struct EnsembleStats {
    Grid mean;
    Grid stddev;    // sample standard deviation per element (0 when M == 1)
    Grid std_error; // stddev / sqrt(M)
};
EnsembleStats ensemble_mean(const std::vector<Grid>& members);

// CSV: header "video_id,frame,landmark,x,y", coordinates at 9 significant digits.
void write_track(const std::string& path, const LandmarkTrack& track);
LandmarkTrack read_track(const std::string& path);

} // namespace ldeq

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ldeq/grid.hpp"
#include "ldeq/temporal_eval.hpp"

namespace ldeq {

struct SceneSpec {
    std::size_t num_landmarks = 4;
    double blob_sigma = 1.5;        // pixels
    double ambiguity_prob = 0.0;    // chance a landmark is occluded/ambiguous
    double ambiguity_offset = 0.1;  // half-distance between the two label modes
    double noise_sigma = 0.02;
    std::size_t image_size = 32;

    void validate() const;
};

struct StillSample {
    Grid image; // 1 x H x H
    LandmarkSet labels;
    std::vector<bool> ambiguous;
};

struct VideoSequence {
    std::vector<Grid> frames;
    LandmarkTrack gt;
    std::vector<std::vector<bool>> ambiguity_mask; // per frame, per landmark
    double fps = 25.0;
    std::uint64_t seed = 0;
};

// Gaussian blobs at random positions. An ambiguous landmark has its blob
// erased and its label drawn uniformly from position +- offset along x.
StillSample gen_still(const SceneSpec& spec, std::uint64_t seed);

// Smooth sinusoidal trajectories (per-frame displacement <= 0.02). Inside
// [occlusion_begin, occlusion_end) the designated landmarks' blobs are erased
// while ground truth continues the trajectory.
VideoSequence gen_video(const SceneSpec& spec, std::size_t n_frames,
                        std::size_t occlusion_begin, std::size_t occlusion_end,
                        std::uint64_t seed);

// Benchmark subset: num_videos sequences with deterministic per-video seeds
// and occlusion windows drawn from `seed`.
std::vector<VideoSequence> gen_benchmark(const SceneSpec& spec, std::size_t num_videos,
                                         std::size_t num_frames, std::uint64_t seed);

// Directory layout: manifest.json, frames/NNNNN_FFFF.eqg, labels.csv, masks.csv.
void write_dataset(const std::string& dir, const std::vector<VideoSequence>& sequences);
std::vector<VideoSequence> read_dataset(const std::string& dir);

} // namespace ldeq

#include "ldeq/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <numbers>
#include <sstream>
#include <stdexcept>

#include "ldeq/rng.hpp"

#include "json.hpp"

namespace fs = std::filesystem;

namespace ldeq {

namespace {

constexpr double kMaxSpeed = 0.02; // per frame, normalized coordinates

double gaussian(SplitMix64& rng) {
    // Box-Muller; u1 in (0,1].
    double u1 = 1.0 - rng.next_double();
    double u2 = rng.next_double();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

// Landmark identity is encoded in blob brightness so that a frame-wise
// predictor can tell the otherwise identical blobs apart: amplitudes are
// spread over [0.4 + 0.6/L, 1.0], brightest for landmark 0.
double blob_amplitude(std::size_t l, std::size_t L) {
    return 0.4 + 0.6 * static_cast<double>(L - l) / static_cast<double>(L);
}

void render_blob(Grid& image, std::size_t h, const Point2& p, double sigma, double amp) {
    double cx = p.x * static_cast<double>(h) - 0.5;
    double cy = p.y * static_cast<double>(h) - 0.5;
    double inv = 1.0 / (2.0 * sigma * sigma);
    for (std::size_t i = 0; i < h; ++i)
        for (std::size_t j = 0; j < h; ++j) {
            double dx = static_cast<double>(j) - cx;
            double dy = static_cast<double>(i) - cy;
            image[i * h + j] += amp * std::exp(-(dx * dx + dy * dy) * inv);
        }
}

void add_noise(Grid& image, double sigma, SplitMix64& rng) {
    if (sigma <= 0.0) return;
    for (double& v : image.values()) v += sigma * gaussian(rng);
}

struct Trajectory {
    Point2 center;
    double amp_x, amp_y, period_x, period_y, phase_x, phase_y;

    Point2 at(double t) const {
        double two_pi = 2.0 * std::numbers::pi;
        return {center.x + amp_x * std::sin(two_pi * t / period_x + phase_x),
                center.y + amp_y * std::sin(two_pi * t / period_y + phase_y)};
    }
};

Trajectory random_trajectory(SplitMix64& rng) {
    Trajectory tr;
    tr.center = {rng.uniform(0.3, 0.7), rng.uniform(0.3, 0.7)};
    tr.period_x = rng.uniform(40.0, 80.0);
    tr.period_y = rng.uniform(40.0, 80.0);
    tr.phase_x = rng.uniform(0.0, 2.0 * std::numbers::pi);
    tr.phase_y = rng.uniform(0.0, 2.0 * std::numbers::pi);
    // Amplitude capped so trajectories stay in [0.1, 0.9]^2 and the per-frame
    // displacement never exceeds kMaxSpeed.
    tr.amp_x = std::min(kMaxSpeed * tr.period_x / (2.0 * std::numbers::pi), 0.2);
    tr.amp_y = std::min(kMaxSpeed * tr.period_y / (2.0 * std::numbers::pi), 0.2);
    return tr;
}

} // namespace

void SceneSpec::validate() const {
    if (num_landmarks == 0) throw std::invalid_argument("num_landmarks must be positive");
    if (blob_sigma <= 0.0) throw std::invalid_argument("blob_sigma must be positive");
    if (ambiguity_prob < 0.0 || ambiguity_prob > 1.0)
        throw std::invalid_argument("ambiguity_prob must be in [0,1]");
    if (ambiguity_offset < 0.0 || ambiguity_offset > 0.5)
        throw std::invalid_argument("ambiguity_offset must be in [0,0.5]");
    if (noise_sigma < 0.0) throw std::invalid_argument("noise_sigma must be nonnegative");
    if (image_size == 0) throw std::invalid_argument("image_size must be positive");
}

StillSample gen_still(const SceneSpec& spec, std::uint64_t seed) {
    spec.validate();
    SplitMix64 rng(seed);
    std::size_t h = spec.image_size;
    StillSample out;
    out.image = Grid({1, h, h});
    out.labels.resize(spec.num_landmarks);
    out.ambiguous.resize(spec.num_landmarks, false);
    for (std::size_t l = 0; l < spec.num_landmarks; ++l) {
        Point2 p{rng.uniform(0.15, 0.85), rng.uniform(0.15, 0.85)};
        bool ambiguous = rng.next_double() < spec.ambiguity_prob;
        out.ambiguous[l] = ambiguous;
        if (ambiguous) {
            // Blob erased; the label is one of the two modes along x.
            double sign = rng.next_double() < 0.5 ? -1.0 : 1.0;
            out.labels[l] = {p.x + sign * spec.ambiguity_offset, p.y};
        } else {
            render_blob(out.image, h, p, spec.blob_sigma,
                        blob_amplitude(l, spec.num_landmarks));
            out.labels[l] = p;
        }
    }
    add_noise(out.image, spec.noise_sigma, rng);
    return out;
}

VideoSequence gen_video(const SceneSpec& spec, std::size_t n_frames,
                        std::size_t occlusion_begin, std::size_t occlusion_end,
                        std::uint64_t seed) {
    spec.validate();
    if (n_frames == 0) throw std::invalid_argument("n_frames must be positive");
    if (occlusion_begin > occlusion_end || occlusion_end > n_frames)
        throw std::invalid_argument("invalid occlusion window");
    SplitMix64 rng(seed);
    std::size_t h = spec.image_size, L = spec.num_landmarks;

    std::vector<Trajectory> traj(L);
    std::vector<bool> designated(L, false);
    for (std::size_t l = 0; l < L; ++l) {
        traj[l] = random_trajectory(rng);
        designated[l] = rng.next_double() < spec.ambiguity_prob;
    }

    VideoSequence out;
    out.seed = seed;
    out.gt.video_id = "v" + std::to_string(seed);
    out.frames.reserve(n_frames);
    for (std::size_t n = 0; n < n_frames; ++n) {
        Grid frame({1, h, h});
        LandmarkSet gt(L);
        std::vector<bool> mask(L, false);
        bool in_window = n >= occlusion_begin && n < occlusion_end;
        for (std::size_t l = 0; l < L; ++l) {
            Point2 p = traj[l].at(static_cast<double>(n));
            gt[l] = p; // ground truth continues the smooth trajectory
            if (in_window && designated[l]) mask[l] = true;
            else render_blob(frame, h, p, spec.blob_sigma, blob_amplitude(l, L));
        }
        add_noise(frame, spec.noise_sigma, rng);
        out.frames.push_back(std::move(frame));
        out.gt.frames.push_back(std::move(gt));
        out.ambiguity_mask.push_back(std::move(mask));
    }
    return out;
}

std::vector<VideoSequence> gen_benchmark(const SceneSpec& spec, std::size_t num_videos,
                                         std::size_t num_frames, std::uint64_t seed) {
    if (num_frames < 4) throw std::invalid_argument("gen_benchmark: need at least 4 frames");
    std::vector<VideoSequence> out;
    out.reserve(num_videos);
    SplitMix64 windows(seed ^ 0x5DEECE66DULL);
    for (std::size_t v = 0; v < num_videos; ++v) {
        // Occlusion window somewhere in the middle half of the clip.
        std::size_t begin = num_frames / 8 + windows.below(num_frames / 4 + 1);
        std::size_t len = num_frames / 4 + windows.below(num_frames / 4 + 1);
        std::size_t end = std::min(begin + len, num_frames);
        out.push_back(gen_video(spec, num_frames, begin, end, seed * 1000 + v));
    }
    return out;
}

void write_dataset(const std::string& dir, const std::vector<VideoSequence>& sequences) {
    fs::create_directories(fs::path(dir) / "frames");
    nlohmann::json manifest;
    manifest["sequences"] = nlohmann::json::array();
    std::ofstream labels(fs::path(dir) / "labels.csv");
    std::ofstream masks(fs::path(dir) / "masks.csv");
    if (!labels || !masks) throw std::runtime_error("cannot write dataset: " + dir);
    labels << "video_id,frame,landmark,x,y\n";
    masks << "video_id,frame,landmark,occluded\n";
    char buf[96];
    for (std::size_t s = 0; s < sequences.size(); ++s) {
        const VideoSequence& seq = sequences[s];
        seq.gt.check_rectangular();
        if (seq.frames.size() != seq.gt.num_frames() ||
            seq.ambiguity_mask.size() != seq.frames.size())
            throw std::invalid_argument("sequence lengths disagree");
        nlohmann::json js;
        js["video_id"] = seq.gt.video_id;
        js["n_frames"] = seq.frames.size();
        js["num_landmarks"] = seq.gt.num_landmarks();
        js["fps"] = seq.fps;
        js["seed"] = seq.seed;
        for (std::size_t n = 0; n < seq.frames.size(); ++n) {
            std::snprintf(buf, sizeof buf, "%05zu_%04zu.eqg", s, n);
            write_grid((fs::path(dir) / "frames" / buf).string(), seq.frames[n]);
            js["frames"].push_back(std::string("frames/") + buf);
            for (std::size_t l = 0; l < seq.gt.num_landmarks(); ++l) {
                std::snprintf(buf, sizeof buf, "%.9g,%.9g", seq.gt.frames[n][l].x,
                              seq.gt.frames[n][l].y);
                labels << seq.gt.video_id << ',' << n << ',' << l << ',' << buf << '\n';
                masks << seq.gt.video_id << ',' << n << ',' << l << ','
                      << (seq.ambiguity_mask[n][l] ? 1 : 0) << '\n';
            }
        }
        manifest["sequences"].push_back(std::move(js));
    }
    std::ofstream mf(fs::path(dir) / "manifest.json");
    if (!mf) throw std::runtime_error("cannot write manifest: " + dir);
    mf << manifest.dump(2) << "\n";
}

std::vector<VideoSequence> read_dataset(const std::string& dir) {
    std::ifstream mf(fs::path(dir) / "manifest.json");
    if (!mf) throw std::runtime_error("cannot read manifest: " + dir);
    nlohmann::json manifest = nlohmann::json::parse(mf);

    // labels.csv and masks.csv hold all videos, keyed by video_id.
    std::map<std::string, std::map<std::pair<std::size_t, std::size_t>, Point2>> labels;
    std::map<std::string, std::map<std::pair<std::size_t, std::size_t>, bool>> masks;
    {
        std::ifstream lf(fs::path(dir) / "labels.csv");
        if (!lf) throw std::runtime_error("missing labels.csv in " + dir);
        std::string line;
        std::getline(lf, line);
        while (std::getline(lf, line)) {
            if (line.empty()) continue;
            std::istringstream ss(line);
            std::string id, n_s, l_s, x_s, y_s;
            std::getline(ss, id, ',');
            std::getline(ss, n_s, ',');
            std::getline(ss, l_s, ',');
            std::getline(ss, x_s, ',');
            std::getline(ss, y_s);
            labels[id][{std::stoul(n_s), std::stoul(l_s)}] = {std::stod(x_s), std::stod(y_s)};
        }
        std::ifstream kf(fs::path(dir) / "masks.csv");
        if (!kf) throw std::runtime_error("missing masks.csv in " + dir);
        std::getline(kf, line);
        while (std::getline(kf, line)) {
            if (line.empty()) continue;
            std::istringstream ss(line);
            std::string id, n_s, l_s, o_s;
            std::getline(ss, id, ',');
            std::getline(ss, n_s, ',');
            std::getline(ss, l_s, ',');
            std::getline(ss, o_s);
            masks[id][{std::stoul(n_s), std::stoul(l_s)}] = o_s == "1";
        }
    }

    std::vector<VideoSequence> out;
    for (const auto& js : manifest["sequences"]) {
        VideoSequence seq;
        seq.gt.video_id = js["video_id"];
        seq.fps = js["fps"];
        seq.seed = js["seed"];
        std::size_t n_frames = js["n_frames"];
        std::size_t L = js["num_landmarks"];
        if (js.value("frames", nlohmann::json::array()).size() != n_frames)
            throw std::runtime_error("manifest/file count mismatch for " + seq.gt.video_id);
        for (std::size_t n = 0; n < n_frames; ++n) {
            std::string rel = js["frames"][n];
            fs::path p = fs::path(dir) / rel;
            if (!fs::exists(p)) throw std::runtime_error("missing frame: " + rel);
            seq.frames.push_back(read_grid(p.string()));
            LandmarkSet gt(L);
            std::vector<bool> mask(L, false);
            for (std::size_t l = 0; l < L; ++l) {
                auto it = labels[seq.gt.video_id].find({n, l});
                if (it == labels[seq.gt.video_id].end())
                    throw std::runtime_error("missing label for " + seq.gt.video_id);
                gt[l] = it->second;
                auto mit = masks[seq.gt.video_id].find({n, l});
                mask[l] = mit != masks[seq.gt.video_id].end() && mit->second;
            }
            seq.gt.frames.push_back(std::move(gt));
            seq.ambiguity_mask.push_back(std::move(mask));
        }
        out.push_back(std::move(seq));
    }
    return out;
}

} // namespace ldeq

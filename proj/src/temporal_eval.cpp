#include "ldeq/temporal_eval.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <sstream>
#include <stdexcept>

#include "ldeq/detail/dense.hpp"

namespace ldeq {

namespace {

void check_aligned(const LandmarkTrack& pred, const LandmarkTrack& gt) {
    pred.check_rectangular();
    gt.check_rectangular();
    if (pred.num_frames() != gt.num_frames())
        throw std::invalid_argument("track length mismatch");
    if (pred.num_landmarks() != gt.num_landmarks())
        throw std::invalid_argument("track landmark-count mismatch");
}

double frame_d0(const LandmarkSet& gt, const NormSpec& spec, std::size_t frame) {
    const Point2& a = gt.at(spec.d0_index_a);
    const Point2& b = gt.at(spec.d0_index_b);
    double d0 = std::hypot(a.x - b.x, a.y - b.y);
    if (d0 <= 0.0)
        throw std::runtime_error("degenerate d0 at frame " + std::to_string(frame));
    return d0;
}

// Ground-truth bounding-box area of frame n.
double frame_d1sq(const LandmarkSet& gt, std::size_t frame) {
    double xmin = gt[0].x, xmax = gt[0].x, ymin = gt[0].y, ymax = gt[0].y;
    for (const Point2& p : gt) {
        xmin = std::min(xmin, p.x);
        xmax = std::max(xmax, p.x);
        ymin = std::min(ymin, p.y);
        ymax = std::max(ymax, p.y);
    }
    double area = (xmax - xmin) * (ymax - ymin);
    if (area <= 0.0)
        throw std::runtime_error("zero face area at frame " + std::to_string(frame));
    return area;
}

double one_euro_alpha(double cutoff, double fps) {
    return 1.0 / (1.0 + fps / (2.0 * std::numbers::pi * cutoff));
}

} // namespace

void LandmarkTrack::check_rectangular() const {
    std::size_t L = num_landmarks();
    for (const auto& f : frames)
        if (f.size() != L) throw std::invalid_argument("ragged track");
}

MetricResult nme(const LandmarkTrack& pred, const LandmarkTrack& gt, const NormSpec& spec) {
    check_aligned(pred, gt);
    std::size_t N = gt.num_frames(), L = gt.num_landmarks();
    MetricResult out;
    out.per_frame.reserve(N);
    double sum = 0.0;
    for (std::size_t n = 0; n < N; ++n) {
        double d0 = frame_d0(gt.frames[n], spec, n);
        double acc = 0.0;
        for (std::size_t l = 0; l < L; ++l) {
            double rx = gt.frames[n][l].x - pred.frames[n][l].x;
            double ry = gt.frames[n][l].y - pred.frames[n][l].y;
            acc += std::hypot(rx, ry) / d0;
        }
        double v = 100.0 * acc / static_cast<double>(L);
        out.per_frame.push_back(v);
        sum += v;
    }
    out.aggregate = sum / static_cast<double>(N);
    return out;
}

MetricResult nmf(const LandmarkTrack& pred, const LandmarkTrack& gt, const NormSpec&) {
    check_aligned(pred, gt);
    std::size_t N = gt.num_frames(), L = gt.num_landmarks();
    if (N < 2) throw std::invalid_argument("nmf needs at least 2 frames");
    MetricResult out;
    out.per_frame.reserve(N - 1);
    double sumsq = 0.0;
    for (std::size_t n = 1; n < N; ++n) {
        double d1sq = frame_d1sq(gt.frames[n], n);
        double acc = 0.0;
        for (std::size_t l = 0; l < L; ++l) {
            double dx = (gt.frames[n][l].x - pred.frames[n][l].x) -
                        (gt.frames[n - 1][l].x - pred.frames[n - 1][l].x);
            double dy = (gt.frames[n][l].y - pred.frames[n][l].y) -
                        (gt.frames[n - 1][l].y - pred.frames[n - 1][l].y);
            acc += (dx * dx + dy * dy) / d1sq;
        }
        double v = 1e4 * std::sqrt(acc / static_cast<double>(L));
        out.per_frame.push_back(v);
        sumsq += v * v;
    }
    out.aggregate = std::sqrt(sumsq / static_cast<double>(N));
    return out;
}

LandmarkTrack ema_filter(const LandmarkTrack& track, double w) {
    if (!(w > 0.0 && w <= 1.0)) throw std::invalid_argument("ema weight must be in (0,1]");
    track.check_rectangular();
    LandmarkTrack out = track;
    for (std::size_t n = 1; n < out.frames.size(); ++n)
        for (std::size_t l = 0; l < out.frames[n].size(); ++l) {
            out.frames[n][l].x = (1.0 - w) * out.frames[n - 1][l].x + w * track.frames[n][l].x;
            out.frames[n][l].y = (1.0 - w) * out.frames[n - 1][l].y + w * track.frames[n][l].y;
        }
    return out;
}

LandmarkTrack one_euro_filter(const LandmarkTrack& track, double min_cutoff, double beta,
                              double d_cutoff, double fps) {
    if (min_cutoff <= 0 || d_cutoff <= 0 || fps <= 0 || beta < 0)
        throw std::invalid_argument("one euro: non-positive parameter");
    track.check_rectangular();
    LandmarkTrack out = track;
    std::size_t N = track.num_frames(), L = track.num_landmarks();
    double ad = one_euro_alpha(d_cutoff, fps);
    // State per landmark coordinate: filtered value and filtered derivative.
    std::vector<double> xhat(2 * L), dhat(2 * L, 0.0);
    for (std::size_t l = 0; l < L; ++l) {
        xhat[2 * l] = track.frames.empty() ? 0.0 : track.frames[0][l].x;
        xhat[2 * l + 1] = track.frames.empty() ? 0.0 : track.frames[0][l].y;
    }
    for (std::size_t n = 1; n < N; ++n)
        for (std::size_t l = 0; l < L; ++l)
            for (int c = 0; c < 2; ++c) {
                double v = c == 0 ? track.frames[n][l].x : track.frames[n][l].y;
                double& xh = xhat[2 * l + c];
                double& dh = dhat[2 * l + c];
                double dv = (v - xh) * fps;
                dh = ad * dv + (1.0 - ad) * dh;
                double cutoff = min_cutoff + beta * std::fabs(dh);
                double a = one_euro_alpha(cutoff, fps);
                xh = a * v + (1.0 - a) * xh;
                (c == 0 ? out.frames[n][l].x : out.frames[n][l].y) = xh;
            }
    return out;
}

LandmarkTrack savgol_filter(const LandmarkTrack& track, std::size_t window,
                            std::size_t polyorder) {
    if (window % 2 == 0) throw std::invalid_argument("savgol: window must be odd");
    if (polyorder >= window) throw std::invalid_argument("savgol: polyorder must be < window");
    track.check_rectangular();
    std::size_t N = track.num_frames();
    if (N < window) throw std::invalid_argument("savgol: track shorter than window");
    std::size_t h = window / 2, p = polyorder;

    // Center-point weights from the least-squares normal equations:
    // w_t = sum_k s_k t^k with (A^T A) s = e_0, A_{t,k} = t^k.
    std::vector<std::vector<double>> G(p + 1, std::vector<double>(p + 1, 0.0));
    for (std::size_t a = 0; a <= p; ++a)
        for (std::size_t b = 0; b <= p; ++b)
            for (std::ptrdiff_t t = -static_cast<std::ptrdiff_t>(h);
                 t <= static_cast<std::ptrdiff_t>(h); ++t)
                G[a][b] += std::pow(static_cast<double>(t), static_cast<double>(a + b));
    std::vector<double> s(p + 1, 0.0);
    s[0] = 1.0;
    if (!detail::dense_solve(G, s)) throw std::runtime_error("savgol: singular system");
    std::vector<double> wts(window);
    for (std::size_t i = 0; i < window; ++i) {
        double t = static_cast<double>(i) - static_cast<double>(h);
        double acc = 0.0;
        for (std::size_t k = 0; k <= p; ++k) acc += s[k] * std::pow(t, static_cast<double>(k));
        wts[i] = acc;
    }

    auto mirror = [N](std::ptrdiff_t i) {
        if (i < 0) i = -i;
        std::ptrdiff_t last = static_cast<std::ptrdiff_t>(N) - 1;
        if (i > last) i = 2 * last - i;
        return static_cast<std::size_t>(i);
    };

    LandmarkTrack out = track;
    std::size_t L = track.num_landmarks();
    for (std::size_t n = 0; n < N; ++n)
        for (std::size_t l = 0; l < L; ++l) {
            double ax = 0.0, ay = 0.0;
            for (std::size_t i = 0; i < window; ++i) {
                std::size_t src = mirror(static_cast<std::ptrdiff_t>(n) +
                                         static_cast<std::ptrdiff_t>(i) -
                                         static_cast<std::ptrdiff_t>(h));
                ax += wts[i] * track.frames[src][l].x;
                ay += wts[i] * track.frames[src][l].y;
            }
            out.frames[n][l].x = ax;
            out.frames[n][l].y = ay;
        }
    return out;
}

EnsembleStats ensemble_mean(const std::vector<Grid>& members) {
    if (members.empty()) throw std::invalid_argument("ensemble: no members");
    for (const Grid& g : members)
        if (!g.same_shape(members.front()))
            throw std::invalid_argument("ensemble: heterogeneous shapes");
    double M = static_cast<double>(members.size());
    EnsembleStats out{Grid::zeros_like(members.front()), Grid::zeros_like(members.front()),
                      Grid::zeros_like(members.front())};
    for (const Grid& g : members)
        for (std::size_t i = 0; i < g.size(); ++i) out.mean[i] += g[i] / M;
    if (members.size() > 1) {
        for (const Grid& g : members)
            for (std::size_t i = 0; i < g.size(); ++i) {
                double d = g[i] - out.mean[i];
                out.stddev[i] += d * d / (M - 1.0);
            }
        for (std::size_t i = 0; i < out.stddev.size(); ++i) {
            out.stddev[i] = std::sqrt(out.stddev[i]);
            out.std_error[i] = out.stddev[i] / std::sqrt(M);
        }
    }
    return out;
}

void write_track(const std::string& path, const LandmarkTrack& track) {
    track.check_rectangular();
    std::ofstream f(path);
    if (!f) throw std::runtime_error("cannot write track: " + path);
    f << "video_id,frame,landmark,x,y\n";
    char buf[64];
    for (std::size_t n = 0; n < track.frames.size(); ++n)
        for (std::size_t l = 0; l < track.frames[n].size(); ++l) {
            std::snprintf(buf, sizeof buf, "%.9g,%.9g", track.frames[n][l].x,
                          track.frames[n][l].y);
            f << track.video_id << ',' << n << ',' << l << ',' << buf << '\n';
        }
}

LandmarkTrack read_track(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw std::runtime_error("cannot read track: " + path);
    std::string line;
    if (!std::getline(f, line) || line != "video_id,frame,landmark,x,y")
        throw std::runtime_error("missing columns in track file: " + path);
    LandmarkTrack track;
    std::vector<std::vector<std::pair<std::size_t, Point2>>> rows;
    while (std::getline(f, line)) {
        if (line.empty()) continue;
        std::istringstream ss(line);
        std::string id, frame_s, lm_s, x_s, y_s;
        if (!std::getline(ss, id, ',') || !std::getline(ss, frame_s, ',') ||
            !std::getline(ss, lm_s, ',') || !std::getline(ss, x_s, ',') ||
            !std::getline(ss, y_s))
            throw std::runtime_error("missing columns in track file: " + path);
        if (track.video_id.empty()) track.video_id = id;
        std::size_t n = std::stoul(frame_s), l = std::stoul(lm_s);
        if (n >= rows.size()) rows.resize(n + 1);
        rows[n].push_back({l, Point2{std::stod(x_s), std::stod(y_s)}});
    }
    track.frames.resize(rows.size());
    std::size_t L = rows.empty() ? 0 : rows.front().size();
    for (std::size_t n = 0; n < rows.size(); ++n) {
        if (rows[n].size() != L) throw std::runtime_error("ragged track");
        track.frames[n].resize(L);
        for (const auto& [l, pt] : rows[n]) {
            if (l >= L) throw std::runtime_error("ragged track");
            track.frames[n][l] = pt;
        }
    }
    return track;
}

} // namespace ldeq

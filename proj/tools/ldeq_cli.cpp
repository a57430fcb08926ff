// ldeq: config-driven experiment runner for the landmark DEQ toolkit.
//
// Subcommands: gen, train, infer, metrics, compare, gradcheck, solverbench.
// Exit codes: 0 success, 2 config error, 3 runtime error.

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <set>
#include <sstream>
#include <thread>

#include "CLI11.hpp"
#include "json.hpp"

#include "ldeq/deq.hpp"
#include "ldeq/inference.hpp"
#include "ldeq/model.hpp"
#include "ldeq/rng.hpp"
#include "ldeq/solvers.hpp"
#include "ldeq/synth.hpp"
#include "ldeq/temporal_eval.hpp"
#include "ldeq/training.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace ldeq;

namespace {

// ---------------------------------------------------------------------------
// Config: flat key = value file, '#' comments, unknown keys rejected.

struct Config {
    std::map<std::string, std::string> kv;

    bool has(const std::string& key) const { return kv.count(key) != 0; }

    std::string get_str(const std::string& key, const std::string& dflt) const {
        auto it = kv.find(key);
        return it == kv.end() ? dflt : it->second;
    }
    double get_num(const std::string& key, double dflt) const {
        auto it = kv.find(key);
        if (it == kv.end()) return dflt;
        try {
            std::size_t pos = 0;
            double v = std::stod(it->second, &pos);
            if (pos != it->second.size()) throw std::invalid_argument("trailing junk");
            return v;
        } catch (const std::exception&) {
            throw std::invalid_argument("invalid value for " + key + ": " + it->second);
        }
    }
    long get_int(const std::string& key, long dflt) const {
        double v = get_num(key, static_cast<double>(dflt));
        long r = static_cast<long>(v);
        if (static_cast<double>(r) != v)
            throw std::invalid_argument("invalid value for " + key + ": expected integer");
        return r;
    }
};

const std::set<std::string> kKnownKeys = {
    "dataset.num_videos",   "dataset.num_frames",    "dataset.num_landmarks",
    "dataset.image_size",   "dataset.ambiguity_prob", "dataset.ambiguity_offset",
    "dataset.noise_sigma",  "dataset.blob_sigma",    "dataset.seed",
    "arch.image_size",      "arch.heatmap_size",     "arch.num_landmarks",
    "arch.feature_channels", "arch.temperature",
    "solver.method",        "solver.tol",            "solver.max_iters",
    "train.epochs",         "train.learning_rate",   "train.seed",
    "train.num_stills",
    "infer.mode",           "infer.step_cap",        "infer.alpha",
    "filter.type",          "filter.ema_w",
    "filter.oneeuro_min_cutoff", "filter.oneeuro_beta", "filter.oneeuro_d_cutoff",
    "filter.savgol_window", "filter.savgol_polyorder",
    "compare.num_videos",   "compare.num_frames",    "compare.hard_ambiguity_prob",
    "compare.ema_sweep",
    "io.checkpoint",        "io.dataset_dir",        "io.output_dir",
};

std::string trim(const std::string& s) {
    std::size_t a = s.find_first_not_of(" \t\r");
    if (a == std::string::npos) return "";
    std::size_t b = s.find_last_not_of(" \t\r");
    return s.substr(a, b - a + 1);
}

Config load_config(const std::string& path) {
    Config cfg;
    if (path.empty()) return cfg;
    std::ifstream f(path);
    if (!f) throw std::invalid_argument("cannot open config: " + path);
    std::string line;
    int lineno = 0;
    while (std::getline(f, line)) {
        ++lineno;
        std::string s = trim(line);
        if (s.empty() || s[0] == '#') continue;
        std::size_t eq = s.find('=');
        if (eq == std::string::npos)
            throw std::invalid_argument("config line " + std::to_string(lineno) +
                                        ": expected key = value");
        std::string key = trim(s.substr(0, eq));
        std::string val = trim(s.substr(eq + 1));
        if (!kKnownKeys.count(key))
            throw std::invalid_argument("unknown config key: " + key);
        if (cfg.kv.count(key)) throw std::invalid_argument("duplicate config key: " + key);
        cfg.kv[key] = val;
    }
    return cfg;
}

// ---------------------------------------------------------------------------
// Typed views over the config.

SceneSpec scene_spec(const Config& cfg) {
    SceneSpec s;
    s.num_landmarks = static_cast<std::size_t>(cfg.get_int("dataset.num_landmarks", 4));
    s.image_size = static_cast<std::size_t>(cfg.get_int("dataset.image_size", 32));
    s.ambiguity_prob = cfg.get_num("dataset.ambiguity_prob", 0.0);
    s.ambiguity_offset = cfg.get_num("dataset.ambiguity_offset", 0.1);
    s.noise_sigma = cfg.get_num("dataset.noise_sigma", 0.02);
    s.blob_sigma = cfg.get_num("dataset.blob_sigma", 1.5);
    s.validate();
    return s;
}

ArchDescriptor arch_desc(const Config& cfg) {
    ArchDescriptor a;
    a.image_size = static_cast<std::size_t>(cfg.get_int("arch.image_size", 32));
    a.heatmap_size = static_cast<std::size_t>(cfg.get_int("arch.heatmap_size", 16));
    a.num_landmarks = static_cast<std::size_t>(cfg.get_int("arch.num_landmarks", 4));
    a.feature_channels = static_cast<std::size_t>(cfg.get_int("arch.feature_channels", 8));
    a.temperature = cfg.get_num("arch.temperature", 2.5);
    a.validate();
    return a;
}

SolverConfig solver_config(const Config& cfg) {
    SolverConfig s;
    s.method = parse_solver_method(cfg.get_str("solver.method", "fpi"));
    s.tol = cfg.get_num("solver.tol", 1e-8);
    s.max_iters = static_cast<int>(cfg.get_int("solver.max_iters", 200));
    return s;
}

struct CliOpts {
    std::string config_path;
    std::string out_dir;
    long seed = -1; // -1: take from config
    int workers = 1;
    std::string pred_path, gt_path; // metrics only
};

std::uint64_t effective_seed(const Config& cfg, const CliOpts& opts, const std::string& key,
                             std::uint64_t dflt) {
    if (opts.seed >= 0) return static_cast<std::uint64_t>(opts.seed);
    return static_cast<std::uint64_t>(cfg.get_int(key, static_cast<long>(dflt)));
}

fs::path out_dir(const Config& cfg, const CliOpts& opts) {
    std::string d = opts.out_dir.empty() ? cfg.get_str("io.output_dir", "out") : opts.out_dir;
    fs::create_directories(d);
    return d;
}

// ---------------------------------------------------------------------------
// Shared inference helpers.

LandmarkTrack apply_filter(const Config& cfg, const LandmarkTrack& track) {
    std::string type = cfg.get_str("filter.type", "none");
    if (type == "none") return track;
    if (type == "ema") return ema_filter(track, cfg.get_num("filter.ema_w", 0.5));
    if (type == "oneeuro")
        return one_euro_filter(track, cfg.get_num("filter.oneeuro_min_cutoff", 1.0),
                               cfg.get_num("filter.oneeuro_beta", 0.1),
                               cfg.get_num("filter.oneeuro_d_cutoff", 1.0), 25.0);
    if (type == "savgol")
        return savgol_filter(track,
                             static_cast<std::size_t>(cfg.get_int("filter.savgol_window", 5)),
                             static_cast<std::size_t>(cfg.get_int("filter.savgol_polyorder", 2)));
    throw std::invalid_argument("unknown filter.type: " + type);
}

struct VideoRun {
    LandmarkTrack track;
    std::vector<FrameDiagnostics> diag;
    std::vector<Grid> states;
};

VideoRun run_cold(const LandmarkModel& model, const ParamVector& theta,
                  const VideoSequence& video, const SolverConfig& solver) {
    VideoRun out;
    out.track.video_id = video.gt.video_id;
    Grid z0 = model.zero_state();
    for (std::size_t n = 0; n < video.frames.size(); ++n) {
        ColdResult r = infer_cold(model, video.frames[n], theta, z0, solver);
        FrameDiagnostics d;
        d.iters = r.solve.iters;
        d.residual = r.solve.residual;
        d.dist_to_prev =
            out.states.empty() ? 0.0 : norm2(axpy(-1.0, out.states.back(), r.heatmaps));
        out.track.frames.push_back(r.landmarks);
        out.diag.push_back(d);
        out.states.push_back(r.heatmaps);
    }
    return out;
}

VideoRun run_rwr(const LandmarkModel& model, const ParamVector& theta,
                 const VideoSequence& video, const RwrConfig& cfg) {
    RwrResult r = infer_rwr(model, video.frames, theta, model.zero_state(), cfg);
    VideoRun out;
    out.track = std::move(r.track);
    out.track.video_id = video.gt.video_id;
    out.diag = std::move(r.diagnostics);
    out.states = std::move(r.states);
    return out;
}

VideoRun run_relaxed(const LandmarkModel& model, const ParamVector& theta,
                     const VideoSequence& video, const RwrConfig& cfg) {
    VideoRun out;
    out.track.video_id = video.gt.video_id;
    for (std::size_t n = 0; n < video.frames.size(); ++n) {
        FrameDiagnostics d;
        Grid z;
        if (n == 0) {
            ColdResult r = infer_cold(model, video.frames[0], theta, model.zero_state(),
                                      cfg.base);
            z = r.heatmaps;
            d.iters = r.solve.iters;
            d.residual = r.solve.residual;
        } else {
            RelaxedResult r = solve_relaxed(model, video.frames[n], theta, out.states.back(),
                                            cfg);
            z = std::move(r.z);
            d.iters = static_cast<int>(r.objective_trace.size()) - 1;
            d.residual = r.objective_trace.back();
            d.dist_to_prev = norm2(axpy(-1.0, out.states.back(), z));
        }
        out.track.frames.push_back(softargmax(z));
        out.diag.push_back(d);
        out.states.push_back(std::move(z));
    }
    return out;
}

// Run `fn(v)` over [0, n) on `workers` threads; slots keep results ordered.
template <typename Fn>
void parallel_for(std::size_t n, int workers, Fn&& fn) {
    workers = std::max(1, std::min<int>(workers, static_cast<int>(n ? n : 1)));
    if (workers == 1) {
        for (std::size_t v = 0; v < n; ++v) fn(v);
        return;
    }
    std::vector<std::thread> pool;
    std::exception_ptr err;
    std::mutex err_mu;
    for (int w = 0; w < workers; ++w)
        pool.emplace_back([&, w] {
            try {
                for (std::size_t v = static_cast<std::size_t>(w); v < n;
                     v += static_cast<std::size_t>(workers))
                    fn(v);
            } catch (...) {
                std::lock_guard<std::mutex> lk(err_mu);
                if (!err) err = std::current_exception();
            }
        });
    for (auto& t : pool) t.join();
    if (err) std::rethrow_exception(err);
}

// ---------------------------------------------------------------------------
// Subcommands.

int cmd_gen(const Config& cfg, const CliOpts& opts) {
    SceneSpec spec = scene_spec(cfg);
    std::size_t num_videos = static_cast<std::size_t>(cfg.get_int("dataset.num_videos", 10));
    std::size_t num_frames = static_cast<std::size_t>(cfg.get_int("dataset.num_frames", 40));
    std::uint64_t seed = effective_seed(cfg, opts, "dataset.seed", 1);
    auto videos = gen_benchmark(spec, num_videos, num_frames, seed);
    fs::path dir = out_dir(cfg, opts);
    write_dataset(dir.string(), videos);
    std::cout << "wrote " << videos.size() << " videos to " << dir.string() << "\n";
    return 0;
}

int cmd_train(const Config& cfg, const CliOpts& opts) {
    ArchDescriptor arch = arch_desc(cfg);
    SceneSpec spec = scene_spec(cfg);
    if (spec.num_landmarks != arch.num_landmarks || spec.image_size != arch.image_size)
        throw std::invalid_argument("dataset and arch disagree on landmarks or image size");

    TrainConfig tc;
    tc.epochs = static_cast<int>(cfg.get_int("train.epochs", 30));
    tc.learning_rate = cfg.get_num("train.learning_rate", 0.05);
    tc.seed = effective_seed(cfg, opts, "train.seed", 1);
    tc.solver = solver_config(cfg);

    std::size_t num_stills = static_cast<std::size_t>(cfg.get_int("train.num_stills", 256));
    std::vector<StillSample> data;
    for (std::size_t i = 0; i < num_stills; ++i) data.push_back(gen_still(spec, tc.seed * 10000 + i));

    LandmarkModel model(arch);
    TrainResult r = train(model, data, tc);

    fs::path dir = out_dir(cfg, opts);
    model.save_params((dir / "model").string(), r.theta);
    std::ofstream loss(dir / "loss.csv");
    loss << "epoch,loss\n";
    for (std::size_t e = 0; e < r.loss_curve.size(); ++e) {
        char buf[48];
        std::snprintf(buf, sizeof buf, "%zu,%.9g\n", e, r.loss_curve[e]);
        loss << buf;
    }
    std::cout << "final loss " << r.loss_curve.back() << ", checkpoint at "
              << (dir / "model").string() << "\n";
    return 0;
}

std::pair<ArchDescriptor, ParamVector> load_checkpoint(const Config& cfg) {
    std::string prefix = cfg.get_str("io.checkpoint", "");
    if (prefix.empty()) throw std::invalid_argument("io.checkpoint is required");
    return LandmarkModel::load_params(prefix);
}

int cmd_infer(const Config& cfg, const CliOpts& opts) {
    auto [arch, theta] = load_checkpoint(cfg);
    LandmarkModel model(arch);

    std::string dsdir = cfg.get_str("io.dataset_dir", "");
    if (dsdir.empty()) throw std::invalid_argument("io.dataset_dir is required");
    auto videos = read_dataset(dsdir);

    std::string mode = cfg.get_str("infer.mode", "cold");
    RwrConfig rc;
    rc.base = solver_config(cfg);
    rc.step_cap = static_cast<int>(cfg.get_int("infer.step_cap", 2));
    rc.alpha = cfg.get_num("infer.alpha", 0.5);

    fs::path dir = out_dir(cfg, opts);
    std::ofstream diag(dir / "diagnostics.csv");
    diag << "video_id,frame,iters,residual,dist_to_prev\n";
    for (const VideoSequence& video : videos) {
        VideoRun run;
        if (mode == "cold") run = run_cold(model, theta, video, rc.base);
        else if (mode == "rwr") run = run_rwr(model, theta, video, rc);
        else if (mode == "relaxed") run = run_relaxed(model, theta, video, rc);
        else throw std::invalid_argument("unknown infer.mode: " + mode);
        LandmarkTrack filtered = apply_filter(cfg, run.track);
        write_track((dir / ("pred_" + video.gt.video_id + ".csv")).string(), filtered);
        write_track((dir / ("gt_" + video.gt.video_id + ".csv")).string(), video.gt);
        for (std::size_t n = 0; n < run.diag.size(); ++n) {
            char buf[96];
            std::snprintf(buf, sizeof buf, "%s,%zu,%d,%.9g,%.9g\n",
                          video.gt.video_id.c_str(), n, run.diag[n].iters,
                          run.diag[n].residual, run.diag[n].dist_to_prev);
            diag << buf;
        }
    }
    std::cout << "inferred " << videos.size() << " videos (" << mode << ") into "
              << dir.string() << "\n";
    return 0;
}

int cmd_metrics(const Config& cfg, const CliOpts& opts) {
    if (opts.pred_path.empty() || opts.gt_path.empty())
        throw std::invalid_argument("--pred and --gt are required");
    LandmarkTrack pred = read_track(opts.pred_path);
    LandmarkTrack gt = read_track(opts.gt_path);
    NormSpec norm;
    MetricResult n = nme(pred, gt, norm);
    MetricResult f = nmf(pred, gt, norm);
    json out = {
        {"video_id", gt.video_id},
        {"num_frames", gt.num_frames()},
        {"nme", n.aggregate},
        {"nmf", f.aggregate},
    };
    fs::path dir = out_dir(cfg, opts);
    std::ofstream(dir / "metrics.json") << out.dump(2) << "\n";
    std::cout << out.dump() << "\n";
    return 0;
}

struct CompareRow {
    std::string method, subset;
    double nme = 0.0, nmf = 0.0, mean_iters = 0.0;
};

int cmd_compare(const Config& cfg, const CliOpts& opts) {
    auto [arch, theta] = load_checkpoint(cfg);
    LandmarkModel model(arch);

    SceneSpec spec = scene_spec(cfg);
    if (spec.num_landmarks != arch.num_landmarks || spec.image_size != arch.image_size)
        throw std::invalid_argument("dataset and arch disagree on landmarks or image size");
    std::size_t num_videos = static_cast<std::size_t>(cfg.get_int("compare.num_videos", 50));
    std::size_t num_frames = static_cast<std::size_t>(cfg.get_int("compare.num_frames", 40));
    double hard_prob = cfg.get_num("compare.hard_ambiguity_prob", 0.8);
    std::uint64_t seed = effective_seed(cfg, opts, "dataset.seed", 1);

    std::vector<double> ema_sweep;
    {
        std::istringstream ss(cfg.get_str("compare.ema_sweep", "0.9,0.5,0.15,0.05"));
        std::string tok;
        while (std::getline(ss, tok, ',')) ema_sweep.push_back(std::stod(trim(tok)));
    }

    RwrConfig rc;
    rc.base = solver_config(cfg);
    rc.step_cap = static_cast<int>(cfg.get_int("infer.step_cap", 2));

    NormSpec norm;
    std::vector<CompareRow> rows;
    for (const std::string& subset : {std::string("easy"), std::string("hard")}) {
        SceneSpec sub = spec;
        sub.ambiguity_prob = subset == "easy" ? 0.0 : hard_prob;
        std::uint64_t sub_seed = subset == "easy" ? seed : seed + 500000;
        auto videos = gen_benchmark(sub, num_videos, num_frames, sub_seed);

        std::vector<VideoRun> cold(videos.size()), rwr(videos.size());
        parallel_for(videos.size(), opts.workers, [&](std::size_t v) {
            cold[v] = run_cold(model, theta, videos[v], rc.base);
            rwr[v] = run_rwr(model, theta, videos[v], rc);
        });

        auto score = [&](const std::string& method,
                         const std::function<LandmarkTrack(const VideoRun&)>& pick,
                         const std::vector<VideoRun>& runs) {
            CompareRow row{method, subset, 0.0, 0.0, 0.0};
            std::size_t frames = 0;
            for (std::size_t v = 0; v < videos.size(); ++v) {
                LandmarkTrack t = pick(runs[v]);
                row.nme += nme(t, videos[v].gt, norm).aggregate;
                row.nmf += nmf(t, videos[v].gt, norm).aggregate;
                for (const FrameDiagnostics& d : runs[v].diag) row.mean_iters += d.iters;
                frames += runs[v].diag.size();
            }
            row.nme /= static_cast<double>(videos.size());
            row.nmf /= static_cast<double>(videos.size());
            row.mean_iters /= static_cast<double>(frames);
            rows.push_back(row);
        };

        score("cold", [](const VideoRun& r) { return r.track; }, cold);
        for (double w : ema_sweep) {
            char name[32];
            std::snprintf(name, sizeof name, "cold+ema(%g)", w);
            score(name, [w](const VideoRun& r) { return ema_filter(r.track, w); }, cold);
        }
        score("cold+oneeuro",
              [&](const VideoRun& r) {
                  return one_euro_filter(r.track, cfg.get_num("filter.oneeuro_min_cutoff", 1.0),
                                         cfg.get_num("filter.oneeuro_beta", 0.1),
                                         cfg.get_num("filter.oneeuro_d_cutoff", 1.0), 25.0);
              },
              cold);
        score("cold+savgol",
              [&](const VideoRun& r) {
                  return savgol_filter(
                      r.track, static_cast<std::size_t>(cfg.get_int("filter.savgol_window", 5)),
                      static_cast<std::size_t>(cfg.get_int("filter.savgol_polyorder", 2)));
              },
              cold);
        char rwr_name[32];
        std::snprintf(rwr_name, sizeof rwr_name, "rwr(K=%d)", rc.step_cap);
        score(rwr_name, [](const VideoRun& r) { return r.track; }, rwr);
    }

    fs::path dir = out_dir(cfg, opts);
    json jrows = json::array();
    std::ofstream csv(dir / "compare.csv");
    csv << "method,subset,nme,nmf,mean_iters\n";
    for (const CompareRow& r : rows) {
        jrows.push_back({{"method", r.method},
                         {"subset", r.subset},
                         {"nme", r.nme},
                         {"nmf", r.nmf},
                         {"mean_iters", r.mean_iters}});
        char buf[160];
        std::snprintf(buf, sizeof buf, "%s,%s,%.9g,%.9g,%.9g\n", r.method.c_str(),
                      r.subset.c_str(), r.nme, r.nmf, r.mean_iters);
        csv << buf;
    }
    json out = {{"num_videos", num_videos}, {"num_frames", num_frames},
                {"seed", seed},            {"rows", jrows}};
    std::ofstream(dir / "compare.json") << out.dump(2) << "\n";
    std::cout << out.dump(2) << "\n";
    return 0;
}

int cmd_gradcheck(const Config& cfg, const CliOpts& opts) {
    (void)cfg;
    GradCheckConfig gc;
    if (opts.seed >= 0) gc.num_seeds = std::max(1, static_cast<int>(opts.seed % 100));
    GradCheckReport rep = grad_check(gc);
    json out = {{"rel_err_implicit_vs_unrolled", rep.rel_err_implicit_vs_unrolled},
                {"rel_err_implicit_vs_fd", rep.rel_err_implicit_vs_fd},
                {"max_rel_err", rep.max_rel_err},
                {"pass", rep.max_rel_err < 1e-3}};
    std::cout << out.dump(2) << "\n";
    if (rep.max_rel_err >= 1e-3) throw std::runtime_error("gradient check failed");
    return 0;
}

int cmd_solverbench(const Config& cfg, const CliOpts&) {
    // Seeded 16-dim linear contractions; all solvers must agree with a
    // dense direct solve, reported with iteration counts.
    SolverConfig base = solver_config(cfg);
    base.tol = 1e-10;
    base.max_iters = 1000;
    json runs = json::array();
    double worst = 0.0;
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        const std::size_t n = 16;
        SplitMix64 rng(seed * 77 + 5);
        std::vector<double> A(n * n), b(n);
        for (double& v : A) v = rng.uniform(-1.0, 1.0);
        // scale to spectral radius ~0.5 via a few power iterations
        std::vector<double> x(n, 1.0);
        double lam = 1.0;
        for (int it = 0; it < 60; ++it) {
            std::vector<double> y(n, 0.0);
            for (std::size_t i = 0; i < n; ++i)
                for (std::size_t j = 0; j < n; ++j) y[i] += A[i * n + j] * x[j];
            lam = 0.0;
            for (double v : y) lam = std::max(lam, std::fabs(v));
            for (std::size_t i = 0; i < n; ++i) x[i] = y[i] / lam;
        }
        for (double& v : A) v *= 0.5 / lam;
        for (double& v : b) v = rng.uniform(-1.0, 1.0);

        FixedPointMap F([&](const Grid& z) {
            Grid out({n});
            for (std::size_t i = 0; i < n; ++i) {
                double acc = b[i];
                for (std::size_t j = 0; j < n; ++j) acc += A[i * n + j] * z[j];
                out[i] = acc;
            }
            return out;
        });

        json entry = {{"seed", seed}};
        Grid z0({n});
        for (SolverMethod m : {SolverMethod::fpi, SolverMethod::anderson, SolverMethod::broyden}) {
            SolverConfig sc = base;
            sc.method = m;
            SolverResult r = solve(F, z0, sc);
            // cross-check all methods against each other via the fpi result
            entry[solver_method_name(m)] = {{"iters", r.iters}, {"residual", r.residual}};
            if (m == SolverMethod::fpi) entry["z0_norm"] = norm2(r.z_star);
            worst = std::max(worst, r.residual);
        }
        runs.push_back(entry);
    }
    json out = {{"runs", runs}, {"worst_residual", worst}};
    std::cout << out.dump(2) << "\n";
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"landmark DEQ experiment runner"};
    app.require_subcommand(1);

    CliOpts opts;
    app.add_option("--config", opts.config_path, "key = value config file");
    app.add_option("--seed", opts.seed, "override config seed");
    app.add_option("--workers", opts.workers, "worker threads for compare");
    app.add_option("--out", opts.out_dir, "output directory (overrides io.output_dir)");

    auto* gen = app.add_subcommand("gen", "generate a synthetic video dataset");
    auto* train = app.add_subcommand("train", "train the landmark model on stills");
    auto* infer = app.add_subcommand("infer", "run cold/rwr/relaxed inference on a dataset");
    auto* metrics = app.add_subcommand("metrics", "NME/NMF for a predicted track");
    metrics->add_option("--pred", opts.pred_path, "predicted track CSV");
    metrics->add_option("--gt", opts.gt_path, "ground-truth track CSV");
    auto* compare = app.add_subcommand("compare", "RwR vs filter baselines, easy and hard");
    auto* gradcheck = app.add_subcommand("gradcheck", "three-way gradient agreement");
    auto* solverbench = app.add_subcommand("solverbench", "solver benchmark on contractions");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        Config cfg = load_config(opts.config_path);
        if (gen->parsed()) return cmd_gen(cfg, opts);
        if (train->parsed()) return cmd_train(cfg, opts);
        if (infer->parsed()) return cmd_infer(cfg, opts);
        if (metrics->parsed()) return cmd_metrics(cfg, opts);
        if (compare->parsed()) return cmd_compare(cfg, opts);
        if (gradcheck->parsed()) return cmd_gradcheck(cfg, opts);
        if (solverbench->parsed()) return cmd_solverbench(cfg, opts);
    } catch (const std::invalid_argument& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    }
    return 0;
}

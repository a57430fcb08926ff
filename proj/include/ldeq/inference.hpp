#pragma once

#include <vector>

#include "ldeq/deq.hpp"
#include "ldeq/model.hpp"
#include "ldeq/solvers.hpp"
#include "ldeq/temporal_eval.hpp"

namespace ldeq {

struct RwrConfig {
    int step_cap = 2; // K: hard iteration limit for warm-started frames
    SolverConfig base;
    double alpha = 0.5;     // penalty weight of the explicit relaxed objective
    int relaxed_steps = 200;
    double relaxed_lr = 0.1;
};

struct ColdResult {
    Grid heatmaps;
    LandmarkSet landmarks;
    SolverResult solve;
};

// Per-frame solve from zeros, then softargmax.
ColdResult infer_cold(const DeqModel& model, const Grid& frame, const ParamVector& theta,
                      const Grid& z0, const SolverConfig& cfg);

struct FrameDiagnostics {
    int iters = 0;
    double residual = 0.0;
    double dist_to_prev = 0.0; // norm2(z_n - z_{n-1})
};

struct RwrResult {
    LandmarkTrack track;
    std::vector<FrameDiagnostics> diagnostics;
    std::vector<Grid> states;
};

// Frame 1 solves from zeros; frame n > 1 warm-starts at the previous state and
// runs at most K iterations (fewer when already at tolerance).
RwrResult infer_rwr(const DeqModel& model, const std::vector<Grid>& frames,
                    const ParamVector& theta, const Grid& z0, const RwrConfig& cfg);

struct RelaxedResult {
    Grid z;
    std::vector<double> objective_trace;
};

// Gradient descent with backtracking on
//   ||f(z, x) - z||^2 + alpha/2 ||z - z_prev||^2.
RelaxedResult solve_relaxed(const DeqModel& model, const Grid& frame, const ParamVector& theta,
                            const Grid& z_prev, const RwrConfig& cfg);

} // namespace ldeq

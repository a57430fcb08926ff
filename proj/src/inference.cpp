#include "ldeq/inference.hpp"

#include <cmath>
#include <stdexcept>

namespace ldeq {

ColdResult infer_cold(const DeqModel& model, const Grid& frame, const ParamVector& theta,
                      const Grid& z0, const SolverConfig& cfg) {
    ColdResult out;
    out.solve = deq_forward(model, frame, theta, z0, cfg);
    out.heatmaps = out.solve.z_star;
    out.landmarks = softargmax(out.heatmaps);
    return out;
}

RwrResult infer_rwr(const DeqModel& model, const std::vector<Grid>& frames,
                    const ParamVector& theta, const Grid& z0, const RwrConfig& cfg) {
    if (frames.empty()) throw std::invalid_argument("infer_rwr: empty frame list");
    if (cfg.step_cap < 1) throw std::invalid_argument("infer_rwr: step cap must be >= 1");
    RwrResult out;
    out.track.video_id = "rwr";
    Grid z = z0;
    for (std::size_t n = 0; n < frames.size(); ++n) {
        SolverConfig sc = cfg.base;
        if (n > 0) sc.max_iters = std::min(sc.max_iters, cfg.step_cap);
        SolverResult r;
        try {
            r = deq_forward(model, frames[n], theta, z, sc);
        } catch (const std::runtime_error& e) {
            throw std::runtime_error("frame " + std::to_string(n) + ": " + e.what());
        }
        FrameDiagnostics d;
        d.iters = r.iters;
        d.residual = r.residual;
        d.dist_to_prev = n > 0 ? norm2(axpy(-1.0, z, r.z_star)) : 0.0;
        out.track.frames.push_back(softargmax(r.z_star));
        out.diagnostics.push_back(d);
        z = r.z_star;
        out.states.push_back(z);
    }
    return out;
}

RelaxedResult solve_relaxed(const DeqModel& model, const Grid& frame, const ParamVector& theta,
                            const Grid& z_prev, const RwrConfig& cfg) {
    if (cfg.alpha < 0.0) throw std::invalid_argument("solve_relaxed: alpha must be >= 0");
    auto objective = [&](const Grid& z) {
        Grid r = axpy(-1.0, z, model.forward(z, frame, theta));
        double fit = norm2(r);
        double prox = norm2(axpy(-1.0, z_prev, z));
        return fit * fit + 0.5 * cfg.alpha * prox * prox;
    };

    RelaxedResult out;
    out.z = z_prev;
    double obj = objective(out.z);
    if (!std::isfinite(obj)) throw std::runtime_error("solve_relaxed: non-finite objective");
    out.objective_trace.push_back(obj);

    for (int k = 0; k < cfg.relaxed_steps; ++k) {
        Grid r = axpy(-1.0, out.z, model.forward(out.z, frame, theta));
        // d/dz ||f(z)-z||^2 = 2 (vjp_z(z, r) - r); prox term adds alpha (z - z_prev).
        Grid g = model.vjp_z(out.z, frame, theta, r);
        for (std::size_t i = 0; i < g.size(); ++i)
            g[i] = 2.0 * (g[i] - r[i]) + cfg.alpha * (out.z[i] - z_prev[i]);
        double gnorm_sq = 0.0;
        for (double v : g.values()) gnorm_sq += v * v;
        if (gnorm_sq == 0.0) break;

        // Backtracking halving with an Armijo acceptance test.
        double lr = cfg.relaxed_lr;
        bool accepted = false;
        for (int t = 0; t < 40; ++t) {
            Grid trial = axpy(-lr, g, out.z);
            double cand = objective(trial);
            if (std::isfinite(cand) && cand <= obj - 1e-4 * lr * gnorm_sq) {
                out.z = std::move(trial);
                obj = cand;
                accepted = true;
                break;
            }
            lr *= 0.5;
        }
        if (!accepted) break; // stationary to machine precision
        out.objective_trace.push_back(obj);
    }
    return out;
}

} // namespace ldeq

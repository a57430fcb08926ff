#include "ldeq/training.hpp"

#include <cmath>
#include <cstdio>
#include <stdexcept>

#include "ldeq/deq.hpp"
#include "ldeq/rng.hpp"

namespace ldeq {

namespace {

double rel_err(const ParamVector& a, const ParamVector& b) {
    double num = 0.0, na = 0.0, nb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        double d = a[i] - b[i];
        num += d * d;
        na += a[i] * a[i];
        nb += b[i] * b[i];
    }
    return std::sqrt(num) / std::max({std::sqrt(na), std::sqrt(nb), 1e-12});
}

// Training loss and its heatmap gradient at an equilibrium.
std::pair<double, Grid> loss_at_state(const Grid& z_star, const LandmarkSet& gt) {
    LandmarkSet pred = softargmax(z_star);
    auto [loss, grad_pts] = mse_loss(pred, gt);
    return {loss, softargmax_vjp(z_star, grad_pts)};
}

} // namespace

TrainResult train(const LandmarkModel& model, const std::vector<StillSample>& dataset,
                  const TrainConfig& cfg) {
    if (cfg.epochs < 1 || cfg.learning_rate < 0.0)
        throw std::invalid_argument("train: invalid config");
    if (dataset.empty()) throw std::invalid_argument("train: empty dataset");

    TrainResult out;
    out.theta = model.init_params(cfg.seed);
    std::vector<double> m(out.theta.size(), 0.0), v(out.theta.size(), 0.0);
    long t = 0;

    SplitMix64 shuffle_rng(cfg.seed ^ 0xA5A5A5A5A5A5A5A5ULL);
    std::vector<std::size_t> order(dataset.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

    Grid z0 = model.zero_state();
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        for (std::size_t i = order.size(); i > 1; --i)
            std::swap(order[i - 1], order[shuffle_rng.below(i)]);
        double epoch_loss = 0.0;
        std::size_t counted = 0, diverged = 0;
        for (std::size_t idx : order) {
            const StillSample& ex = dataset[idx];
            SolverResult fwd;
            try {
                fwd = deq_forward(model, ex.image, out.theta, z0, cfg.solver);
            } catch (const std::runtime_error& e) {
                ++diverged;
                ++out.skipped_examples;
                std::fprintf(stderr, "train: skipping example %zu: %s\n", idx, e.what());
                if (diverged * 10 > dataset.size())
                    throw std::runtime_error("train: solver diverged on > 10% of examples");
                continue;
            }
            if (!fwd.converged) {
                // A gradient taken at a non-equilibrium is unreliable and a
                // single bad step can push the map further out of the
                // contractive regime; drop the example instead.
                ++out.skipped_examples;
                continue;
            }
            out.peak_retained_doubles =
                std::max(out.peak_retained_doubles, fwd.z_star.size());
            auto [loss, dL_dz] = loss_at_state(fwd.z_star, ex.labels);
            epoch_loss += loss;
            ++counted;
            ParamVector grad =
                deq_backward(model, ex.image, out.theta, fwd.z_star, dL_dz, cfg.solver);
            if (cfg.clip_norm > 0.0) {
                double gn = 0.0;
                for (std::size_t j = 0; j < grad.size(); ++j) gn += grad[j] * grad[j];
                gn = std::sqrt(gn);
                if (gn > cfg.clip_norm) {
                    double scale = cfg.clip_norm / gn;
                    for (std::size_t j = 0; j < grad.size(); ++j) grad[j] *= scale;
                }
            }
            ++t;
            double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(t));
            double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(t));
            for (std::size_t j = 0; j < out.theta.size(); ++j) {
                m[j] = cfg.beta1 * m[j] + (1.0 - cfg.beta1) * grad[j];
                v[j] = cfg.beta2 * v[j] + (1.0 - cfg.beta2) * grad[j] * grad[j];
                out.theta[j] -= cfg.learning_rate * (m[j] / bc1) /
                                (std::sqrt(v[j] / bc2) + cfg.adam_eps);
            }
        }
        out.loss_curve.push_back(counted ? epoch_loss / static_cast<double>(counted) : 0.0);
    }
    return out;
}

double eval_stills_nme(const LandmarkModel& model, const ParamVector& theta,
                       const std::vector<StillSample>& stills, const SolverConfig& solver) {
    if (stills.empty()) throw std::invalid_argument("eval: empty set");
    Grid z0 = model.zero_state();
    double total = 0.0;
    for (const StillSample& ex : stills) {
        SolverResult fwd = deq_forward(model, ex.image, theta, z0, solver);
        LandmarkSet pred = softargmax(fwd.z_star);
        double d0 = std::hypot(ex.labels[0].x - ex.labels[1].x,
                               ex.labels[0].y - ex.labels[1].y);
        if (d0 <= 0.0) throw std::runtime_error("eval: degenerate d0");
        double acc = 0.0;
        for (std::size_t l = 0; l < pred.size(); ++l)
            acc += std::hypot(pred[l].x - ex.labels[l].x, pred[l].y - ex.labels[l].y) / d0;
        total += 100.0 * acc / static_cast<double>(pred.size());
    }
    return total / static_cast<double>(stills.size());
}

GradCheckReport grad_check(const GradCheckConfig& cfg) {
    LandmarkModel model(cfg.arch);
    SolverConfig solver;
    solver.tol = cfg.tol;
    solver.max_iters = 400;

    GradCheckReport report;
    for (int s = 0; s < cfg.num_seeds; ++s) {
        std::uint64_t seed = 1000 + static_cast<std::uint64_t>(s);
        ParamVector theta = model.init_params(seed);
        SceneSpec spec;
        spec.num_landmarks = cfg.arch.num_landmarks;
        spec.image_size = cfg.arch.image_size;
        StillSample ex = gen_still(spec, seed * 7 + 3);
        Grid z0 = model.zero_state();

        SolverResult fwd = deq_forward(model, ex.image, theta, z0, solver);
        auto [loss0, dL_dz] = loss_at_state(fwd.z_star, ex.labels);
        (void)loss0;
        ParamVector g_implicit =
            deq_backward(model, ex.image, theta, fwd.z_star, dL_dz, solver);

        auto dz_fn = [&](const Grid& z) { return loss_at_state(z, ex.labels).second; };
        UnrolledResult unrolled =
            unrolled_backward(model, ex.image, theta, z0, cfg.unroll_steps, dz_fn);

        auto loss_of_theta = [&](const ParamVector& th) {
            SolverResult r = deq_forward(model, ex.image, th, z0, solver);
            return loss_at_state(r.z_star, ex.labels).first;
        };
        ParamVector g_fd = finite_diff_grad(loss_of_theta, theta, cfg.eps);

        report.rel_err_implicit_vs_unrolled.push_back(rel_err(g_implicit, unrolled.grad));
        report.rel_err_implicit_vs_fd.push_back(rel_err(g_implicit, g_fd));
        report.max_rel_err = std::max({report.max_rel_err,
                                       report.rel_err_implicit_vs_unrolled.back(),
                                       report.rel_err_implicit_vs_fd.back()});
    }
    return report;
}

} // namespace ldeq

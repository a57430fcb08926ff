#include "ldeq/solvers.hpp"

#include <cmath>
#include <deque>
#include <stdexcept>

#include "ldeq/detail/dense.hpp"

namespace ldeq {

namespace {

constexpr double kDenomFloor = 1e-8;

double dot(const std::vector<double>& a, const std::vector<double>& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

double rel_residual(const Grid& Fz, const Grid& z) {
    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < z.size(); ++i) {
        double d = Fz[i] - z[i];
        num += d * d;
        den += z[i] * z[i];
    }
    return std::sqrt(num) / std::max(std::sqrt(den), kDenomFloor);
}

[[noreturn]] void throw_divergence(int iter) {
    throw std::runtime_error("divergence (non-finite) at iteration " + std::to_string(iter));
}

using detail::dense_solve;

// Shared driver: `step` maps (z, Fz, iter) to the next iterate.
template <typename StepFn>
SolverResult iterate(const FixedPointMap& F, const Grid& z0, const SolverConfig& cfg,
                     StepFn&& step) {
    if (cfg.tol <= 0 || cfg.max_iters < 1)
        throw std::invalid_argument("invalid solver config");
    long evals_before = F.evals();
    SolverResult r;
    if (cfg.record_trace) r.trace.emplace();
    Grid z = z0;
    for (int k = 1; k <= cfg.max_iters; ++k) {
        Grid Fz = F(z);
        if (!Fz.same_shape(z)) throw std::runtime_error("fixed-point map changed shape");
        double res = rel_residual(Fz, z);
        if (!Fz.all_finite() || !std::isfinite(res)) throw_divergence(k);
        r.iters = k;
        r.residual = res;
        if (r.trace) r.trace->push_back(res);
        if (res <= cfg.tol) {
            r.converged = true;
            r.z_star = std::move(z);
            r.evals = F.evals() - evals_before;
            return r;
        }
        // Not converged: take the step. At the cap the post-step iterate is
        // returned ("last iterate"); its residual is the one measured above.
        z = step(z, Fz, k);
        if (k == cfg.max_iters) r.z_star = std::move(z);
    }
    r.evals = F.evals() - evals_before;
    return r;
}

} // namespace

SolverMethod parse_solver_method(const std::string& name) {
    if (name == "fpi") return SolverMethod::fpi;
    if (name == "anderson") return SolverMethod::anderson;
    if (name == "broyden") return SolverMethod::broyden;
    throw std::invalid_argument("unknown solver method: " + name);
}

std::string solver_method_name(SolverMethod m) {
    switch (m) {
        case SolverMethod::fpi: return "fpi";
        case SolverMethod::anderson: return "anderson";
        case SolverMethod::broyden: return "broyden";
    }
    return "?";
}

SolverResult solve_fpi(const FixedPointMap& F, const Grid& z0, const SolverConfig& cfg) {
    return iterate(F, z0, cfg, [](const Grid&, Grid& Fz, int) { return std::move(Fz); });
}

SolverResult solve_anderson(const FixedPointMap& F, const Grid& z0, const SolverConfig& cfg) {
    if (cfg.anderson_window < 0 || cfg.anderson_damping <= 0 || cfg.anderson_damping > 1 ||
        cfg.anderson_reg < 0)
        throw std::invalid_argument("invalid anderson config");
    const double beta = cfg.anderson_damping;
    const std::size_t m = static_cast<std::size_t>(cfg.anderson_window);

    // History of iterates and residuals g_k = F(z_k) - z_k, newest last.
    std::deque<std::vector<double>> zs, gs;

    auto step = [&](const Grid& z, const Grid& Fz, int) {
        std::size_t n = z.size();
        std::vector<double> g(n);
        for (std::size_t i = 0; i < n; ++i) g[i] = Fz[i] - z[i];
        zs.push_back(z.values());
        gs.push_back(g);
        if (zs.size() > m + 1) { zs.pop_front(); gs.pop_front(); }

        Grid next = z;
        std::size_t cols = zs.size() - 1;
        if (cols > 0) {
            // Difference columns dg_j, dz_j between consecutive history entries.
            std::vector<std::vector<double>> dg(cols), dz(cols);
            for (std::size_t j = 0; j < cols; ++j) {
                dg[j].resize(n);
                dz[j].resize(n);
                for (std::size_t i = 0; i < n; ++i) {
                    dg[j][i] = gs[j + 1][i] - gs[j][i];
                    dz[j][i] = zs[j + 1][i] - zs[j][i];
                }
            }
            // Regularized normal equations (dGᵀdG + reg·I) γ = dGᵀ g.
            std::vector<std::vector<double>> G(cols, std::vector<double>(cols));
            std::vector<double> rhs(cols);
            for (std::size_t a = 0; a < cols; ++a) {
                for (std::size_t b = 0; b <= a; ++b)
                    G[a][b] = G[b][a] = dot(dg[a], dg[b]);
                G[a][a] += cfg.anderson_reg;
                rhs[a] = dot(dg[a], g);
            }
            if (dense_solve(G, rhs)) {
                for (std::size_t i = 0; i < n; ++i) {
                    double acc = z[i] + beta * g[i];
                    for (std::size_t j = 0; j < cols; ++j)
                        acc -= rhs[j] * (dz[j][i] + beta * dg[j][i]);
                    next[i] = acc;
                }
                return next;
            }
            // Singular despite regularization: one damped FPI step.
        }
        for (std::size_t i = 0; i < n; ++i) next[i] = z[i] + beta * g[i];
        return next;
    };
    return iterate(F, z0, cfg, step);
}

SolverResult solve_broyden(const FixedPointMap& F, const Grid& z0, const SolverConfig& cfg) {
    // Good Broyden on g(z) = F(z) - z; inverse-Jacobian approximation
    // B = -I + Σ u_i v_iᵀ stored as two lists of update vectors.
    std::vector<std::vector<double>> us, vs;

    auto apply_B = [&](const std::vector<double>& x) {
        std::vector<double> out(x.size());
        for (std::size_t i = 0; i < x.size(); ++i) out[i] = -x[i];
        for (std::size_t k = 0; k < us.size(); ++k) {
            double c = dot(vs[k], x);
            for (std::size_t i = 0; i < x.size(); ++i) out[i] += c * us[k][i];
        }
        return out;
    };
    auto apply_Bt = [&](const std::vector<double>& x) {
        std::vector<double> out(x.size());
        for (std::size_t i = 0; i < x.size(); ++i) out[i] = -x[i];
        for (std::size_t k = 0; k < us.size(); ++k) {
            double c = dot(us[k], x);
            for (std::size_t i = 0; i < x.size(); ++i) out[i] += c * vs[k][i];
        }
        return out;
    };

    bool have_prev = false;
    std::vector<double> g_prev, dz_prev;

    auto step = [&](const Grid& z, const Grid& Fz, int) {
        std::size_t n = z.size();
        std::vector<double> g(n);
        for (std::size_t i = 0; i < n; ++i) g[i] = Fz[i] - z[i];

        if (have_prev) {
            std::vector<double> dgv(n);
            for (std::size_t i = 0; i < n; ++i) dgv[i] = g[i] - g_prev[i];
            std::vector<double> Bdg = apply_B(dgv);
            double denom = dot(dz_prev, Bdg);
            if (std::fabs(denom) >= 1e-12) {
                std::vector<double> u(n);
                for (std::size_t i = 0; i < n; ++i) u[i] = (dz_prev[i] - Bdg[i]) / denom;
                std::vector<double> v = apply_Bt(dz_prev);
                us.push_back(std::move(u));
                vs.push_back(std::move(v));
            }
        }

        std::vector<double> d = apply_B(g);
        Grid next = z;
        dz_prev.resize(n);
        for (std::size_t i = 0; i < n; ++i) {
            dz_prev[i] = -d[i];
            next[i] = z[i] - d[i];
        }
        g_prev = std::move(g);
        have_prev = true;
        return next;
    };
    return iterate(F, z0, cfg, step);
}

SolverResult solve(const FixedPointMap& F, const Grid& z0, const SolverConfig& cfg) {
    switch (cfg.method) {
        case SolverMethod::fpi: return solve_fpi(F, z0, cfg);
        case SolverMethod::anderson: return solve_anderson(F, z0, cfg);
        case SolverMethod::broyden: return solve_broyden(F, z0, cfg);
    }
    throw std::invalid_argument("unknown solver method");
}

} // namespace ldeq

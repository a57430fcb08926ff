#include "ldeq/deq.hpp"

#include <cmath>
#include <cstdio>
#include <stdexcept>
#include <vector>

namespace ldeq {

SolverResult deq_forward(const DeqModel& model, const Grid& x, const ParamVector& theta,
                         const Grid& z0, const SolverConfig& cfg) {
    FixedPointMap F([&](const Grid& z) { return model.forward(z, x, theta); });
    return solve(F, z0, cfg);
}

ParamVector deq_backward(const DeqModel& model, const Grid& x, const ParamVector& theta,
                         const Grid& z_star, const Grid& dL_dz, const SolverConfig& cfg) {
    // Equilibrium quality gate: a sloppy z* biases the gradient.
    Grid fz = model.forward(z_star, x, theta);
    double res = norm2(axpy(-1.0, z_star, fz)) / std::max(norm2(z_star), 1e-8);
    if (res > 10.0 * cfg.tol)
        std::fprintf(stderr, "deq_backward: warning: residual %.3e exceeds 10x tol %.3e\n",
                     res, cfg.tol);

    bool zero_seed = true;
    for (double v : dL_dz.values())
        if (v != 0.0) { zero_seed = false; break; }
    if (zero_seed) return ParamVector::zeros_like(theta);

    // Linear fixed point u = dL_dz + uᵀ·∂f/∂z.
    FixedPointMap B([&](const Grid& u) {
        return axpy(1.0, dL_dz, model.vjp_z(z_star, x, theta, u));
    });
    SolverResult r;
    try {
        r = solve(B, dL_dz, cfg);
    } catch (const std::runtime_error&) {
        throw std::runtime_error("backward fixed point diverged");
    }
    return model.vjp_theta(z_star, x, theta, r.z_star);
}

UnrolledResult unrolled_backward(const DeqModel& model, const Grid& x, const ParamVector& theta,
                                 const Grid& z0, int n_steps,
                                 const std::function<Grid(const Grid&)>& dL_dz_fn) {
    if (n_steps < 1) throw std::invalid_argument("n_steps must be >= 1");
    std::vector<Grid> iterates;
    iterates.reserve(static_cast<std::size_t>(n_steps) + 1);
    iterates.push_back(z0);
    for (int k = 0; k < n_steps; ++k) {
        Grid z = model.forward(iterates.back(), x, theta);
        if (!z.all_finite())
            throw std::runtime_error("non-finite iterate at step " + std::to_string(k + 1));
        iterates.push_back(std::move(z));
    }
    UnrolledResult out;
    out.retained_doubles = iterates.size() * z0.size();
    out.z_final = iterates.back();

    Grid u = dL_dz_fn(iterates.back());
    ParamVector grad = ParamVector::zeros_like(theta);
    for (int k = n_steps; k >= 1; --k) {
        const Grid& zin = iterates[static_cast<std::size_t>(k) - 1];
        ParamVector gt = model.vjp_theta(zin, x, theta, u);
        for (std::size_t i = 0; i < grad.size(); ++i) grad[i] += gt[i];
        if (k > 1) u = model.vjp_z(zin, x, theta, u);
    }
    out.grad = std::move(grad);
    return out;
}

ParamVector finite_diff_grad(const std::function<double(const ParamVector&)>& loss,
                             const ParamVector& theta, double eps) {
    if (eps < 1e-7 || eps > 1e-3) throw std::invalid_argument("eps out of range");
    ParamVector grad = ParamVector::zeros_like(theta);
    ParamVector probe = theta;
    for (std::size_t i = 0; i < theta.size(); ++i) {
        double v = theta[i];
        probe[i] = v + eps;
        double lp = loss(probe);
        probe[i] = v - eps;
        double lm = loss(probe);
        probe[i] = v;
        grad[i] = (lp - lm) / (2.0 * eps);
    }
    return grad;
}

} // namespace ldeq

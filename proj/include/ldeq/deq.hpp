#pragma once

#include <functional>

#include "ldeq/grid.hpp"
#include "ldeq/solvers.hpp"

namespace ldeq {

// Parametric map f(z, x; theta) with reverse-mode products w.r.t. z and theta.
class DeqModel {
public:
    virtual ~DeqModel() = default;
    virtual Grid forward(const Grid& z, const Grid& x, const ParamVector& theta) const = 0;
    // uᵀ·∂f/∂z
    virtual Grid vjp_z(const Grid& z, const Grid& x, const ParamVector& theta,
                       const Grid& u) const = 0;
    // uᵀ·∂f/∂θ
    virtual ParamVector vjp_theta(const Grid& z, const Grid& x, const ParamVector& theta,
                                  const Grid& u) const = 0;
};

// Solves z = f(z, x; theta) from z0. Only z* is retained for the backward pass.
SolverResult deq_forward(const DeqModel& model, const Grid& x, const ParamVector& theta,
                         const Grid& z0, const SolverConfig& cfg);

// Implicit-function-theorem gradient: solves u = dL_dz + uᵀ·∂f/∂z at z*, then
// returns uᵀ·∂f/∂θ. Equivalent to -dL/dz*·J_g⁻¹·∂f/∂θ with J_g = ∂f/∂z - I.
ParamVector deq_backward(const DeqModel& model, const Grid& x, const ParamVector& theta,
                         const Grid& z_star, const Grid& dL_dz, const SolverConfig& cfg);

// Verification oracle: unrolls n_steps of plain fixed-point iteration, keeps every
// iterate, and backpropagates through the whole chain. Memory is linear in n_steps.
// Returns the gradient and reports how many doubles were retained for backward.
struct UnrolledResult {
    ParamVector grad;
    Grid z_final;
    std::size_t retained_doubles = 0;
};
UnrolledResult unrolled_backward(const DeqModel& model, const Grid& x, const ParamVector& theta,
                                 const Grid& z0, int n_steps,
                                 const std::function<Grid(const Grid&)>& dL_dz_fn);

// Central finite differences of a scalar loss over every theta coordinate.
ParamVector finite_diff_grad(const std::function<double(const ParamVector&)>& loss,
                             const ParamVector& theta, double eps);

} // namespace ldeq

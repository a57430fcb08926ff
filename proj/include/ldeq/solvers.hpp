#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "ldeq/grid.hpp"

namespace ldeq {

// z -> F(z), same shape in and out. Evaluation count is observable.
class FixedPointMap {
public:
    explicit FixedPointMap(std::function<Grid(const Grid&)> fn) : fn_(std::move(fn)) {}

    Grid operator()(const Grid& z) const {
        ++evals_;
        return fn_(z);
    }

    long evals() const { return evals_; }
    void reset_evals() const { evals_ = 0; }

private:
    std::function<Grid(const Grid&)> fn_;
    mutable long evals_ = 0;
};

enum class SolverMethod { fpi, anderson, broyden };

SolverMethod parse_solver_method(const std::string& name);
std::string solver_method_name(SolverMethod m);

struct SolverConfig {
    SolverMethod method = SolverMethod::fpi;
    double tol = 1e-6;
    int max_iters = 100;
    int anderson_window = 5;
    double anderson_damping = 1.0;
    double anderson_reg = 1e-4;
    bool record_trace = false;
};

struct SolverResult {
    Grid z_star;
    double residual = 0.0;   // norm2(F(z)-z) / max(norm2(z), 1e-8)
    int iters = 0;
    bool converged = false;
    std::optional<std::vector<double>> trace;
    long evals = 0;
};

SolverResult solve_fpi(const FixedPointMap& F, const Grid& z0, const SolverConfig& cfg);
SolverResult solve_anderson(const FixedPointMap& F, const Grid& z0, const SolverConfig& cfg);
SolverResult solve_broyden(const FixedPointMap& F, const Grid& z0, const SolverConfig& cfg);
SolverResult solve(const FixedPointMap& F, const Grid& z0, const SolverConfig& cfg);

} // namespace ldeq

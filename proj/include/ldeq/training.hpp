#pragma once

#include <cstdint>
#include <vector>

#include "ldeq/model.hpp"
#include "ldeq/solvers.hpp"
#include "ldeq/synth.hpp"

namespace ldeq {

struct TrainConfig {
    int epochs = 30;
    double learning_rate = 0.05;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double adam_eps = 1e-8;
    double clip_norm = 5.0; // global gradient-norm clip; 0 disables
    std::uint64_t seed = 1;
    SolverConfig solver; // train-time forward and backward solves
};

struct TrainResult {
    ParamVector theta;
    std::vector<double> loss_curve; // mean loss per epoch
    // Largest forward-solve state retained for any backward call (doubles).
    std::size_t peak_retained_doubles = 0;
    int skipped_examples = 0;
};

// Eq.-style constrained training: per still, equilibrium from zeros ->
// softargmax -> MSE -> implicit gradient -> Adam update, batch size 1.
TrainResult train(const LandmarkModel& model, const std::vector<StillSample>& dataset,
                  const TrainConfig& cfg);

// Mean NME (percent) over stills, d0 from gt landmarks 0 and 1.
double eval_stills_nme(const LandmarkModel& model, const ParamVector& theta,
                       const std::vector<StillSample>& stills, const SolverConfig& solver);

struct GradCheckConfig {
    ArchDescriptor arch{16, 8, 2, 4, 2.5}; // tiny instance
    int num_seeds = 5;
    double tol = 1e-10;
    double eps = 1e-5;
    int unroll_steps = 60;
};

struct GradCheckReport {
    std::vector<double> rel_err_implicit_vs_unrolled;
    std::vector<double> rel_err_implicit_vs_fd;
    double max_rel_err = 0.0;
};

// Three-way agreement of the implicit gradient, the unrolled oracle and
// central finite differences, on random tiny instances.
GradCheckReport grad_check(const GradCheckConfig& cfg);

} // namespace ldeq

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>

#include "ldeq/inference.hpp"
#include "ldeq/rng.hpp"

using namespace ldeq;

namespace {

// f(z, x) = A z + x over a 1x2x2 state; A symmetric PSD with spectral radius
// < 1 so warm-started iterates move monotonically toward the fixed point.
class LinearContraction : public DeqModel {
public:
    explicit LinearContraction(std::array<double, 16> A) : A_(A) {}

    Grid forward(const Grid& z, const Grid& x, const ParamVector&) const override {
        Grid out({1, 2, 2});
        for (std::size_t i = 0; i < 4; ++i) {
            double acc = x[i];
            for (std::size_t j = 0; j < 4; ++j) acc += A_[i * 4 + j] * z[j];
            out[i] = acc;
        }
        return out;
    }
    Grid vjp_z(const Grid&, const Grid&, const ParamVector&, const Grid& u) const override {
        Grid out({1, 2, 2});
        for (std::size_t j = 0; j < 4; ++j) {
            double acc = 0.0;
            for (std::size_t i = 0; i < 4; ++i) acc += u[i] * A_[i * 4 + j];
            out[j] = acc;
        }
        return out;
    }
    ParamVector vjp_theta(const Grid&, const Grid&, const ParamVector& theta,
                          const Grid&) const override {
        return ParamVector::zeros_like(theta);
    }

    // Direct solve of (I - A) z = x for the reference fixed point.
    Grid fixed_point(const Grid& x) const {
        std::array<std::array<double, 5>, 4> M{};
        for (std::size_t i = 0; i < 4; ++i) {
            for (std::size_t j = 0; j < 4; ++j)
                M[i][j] = (i == j ? 1.0 : 0.0) - A_[i * 4 + j];
            M[i][4] = x[i];
        }
        for (std::size_t c = 0; c < 4; ++c) {
            std::size_t p = c;
            for (std::size_t r = c + 1; r < 4; ++r)
                if (std::fabs(M[r][c]) > std::fabs(M[p][c])) p = r;
            std::swap(M[c], M[p]);
            for (std::size_t r = 0; r < 4; ++r) {
                if (r == c) continue;
                double f = M[r][c] / M[c][c];
                for (std::size_t k = c; k <= 4; ++k) M[r][k] -= f * M[c][k];
            }
        }
        Grid z({1, 2, 2});
        for (std::size_t i = 0; i < 4; ++i) z[i] = M[i][4] / M[i][i];
        return z;
    }

private:
    std::array<double, 16> A_;
};

std::array<double, 16> psd_contraction() {
    // diag-dominant symmetric matrix with eigenvalues in (0, 1)
    return {0.40, 0.05, 0.02, 0.01, //
            0.05, 0.35, 0.03, 0.02, //
            0.02, 0.03, 0.45, 0.04, //
            0.01, 0.02, 0.04, 0.30};
}

Grid positive_frame(std::uint64_t seed) {
    Grid x({1, 2, 2});
    SplitMix64 rng(seed);
    for (std::size_t i = 0; i < 4; ++i) x[i] = rng.uniform(0.2, 0.8);
    return x;
}

// Scalar map f(z) = 0.5 z on a 1x1x1 state; relaxed objective has the closed
// form minimizer z = alpha / (alpha + 0.5) for z_prev = 1.
class HalfScalar : public DeqModel {
public:
    Grid forward(const Grid& z, const Grid&, const ParamVector&) const override {
        Grid out({1, 1, 1});
        out[0] = 0.5 * z[0];
        return out;
    }
    Grid vjp_z(const Grid&, const Grid&, const ParamVector&, const Grid& u) const override {
        Grid out({1, 1, 1});
        out[0] = 0.5 * u[0];
        return out;
    }
    ParamVector vjp_theta(const Grid&, const Grid&, const ParamVector& theta,
                          const Grid&) const override {
        return ParamVector::zeros_like(theta);
    }
};

class Expansive : public DeqModel {
public:
    Grid forward(const Grid& z, const Grid&, const ParamVector&) const override {
        Grid out = z;
        for (double& v : out.values()) v = 3.0 * v + 1.0;
        return out;
    }
    Grid vjp_z(const Grid&, const Grid&, const ParamVector&, const Grid& u) const override {
        Grid out = u;
        for (double& v : out.values()) v *= 3.0;
        return out;
    }
    ParamVector vjp_theta(const Grid&, const Grid&, const ParamVector& theta,
                          const Grid&) const override {
        return ParamVector::zeros_like(theta);
    }
};

SolverConfig tight_cfg() {
    SolverConfig cfg;
    cfg.method = SolverMethod::fpi;
    cfg.tol = 1e-12;
    cfg.max_iters = 500;
    return cfg;
}

} // namespace

TEST_CASE("infer_cold reaches the direct-solve fixed point") {
    LinearContraction model(psd_contraction());
    ParamVector theta;
    Grid x = positive_frame(3);
    Grid z0({1, 2, 2});
    ColdResult r = infer_cold(model, x, theta, z0, tight_cfg());
    Grid ref = model.fixed_point(x);
    CHECK(norm2(axpy(-1.0, ref, r.heatmaps)) < 1e-9);
    CHECK(r.solve.converged);
    CHECK(r.landmarks.size() == 1);
}

TEST_CASE("identical frames: later frames converge immediately") {
    LinearContraction model(psd_contraction());
    ParamVector theta;
    std::vector<Grid> frames(6, positive_frame(4));
    RwrConfig cfg;
    cfg.base = tight_cfg();
    cfg.base.tol = 1e-10;
    cfg.step_cap = 2;
    RwrResult r = infer_rwr(model, frames, theta, model.forward(Grid({1, 2, 2}), frames[0], theta),
                            cfg);
    REQUIRE(r.diagnostics.size() == 6);
    for (std::size_t n = 1; n < 6; ++n) {
        CHECK(r.diagnostics[n].iters <= 1);
        CHECK(norm2(axpy(-1.0, r.states[0], r.states[n])) < 1e-9);
        CHECK(r.track.frames[n][0].x == doctest::Approx(r.track.frames[0][0].x).epsilon(1e-9));
    }
}

TEST_CASE("uncapped warm start matches cold inference") {
    LinearContraction model(psd_contraction());
    ParamVector theta;
    std::vector<Grid> frames;
    for (std::uint64_t s = 10; s < 15; ++s) frames.push_back(positive_frame(s));
    RwrConfig cfg;
    cfg.base = tight_cfg();
    cfg.step_cap = 500; // effectively no cap
    Grid z0({1, 2, 2});
    RwrResult rwr = infer_rwr(model, frames, theta, z0, cfg);
    for (std::size_t n = 0; n < frames.size(); ++n) {
        ColdResult cold = infer_cold(model, frames[n], theta, z0, cfg.base);
        CHECK(norm2(axpy(-1.0, cold.heatmaps, rwr.states[n])) < 1e-9);
    }
}

TEST_CASE("step cap limits warm-started frames but not the first") {
    LinearContraction model(psd_contraction());
    ParamVector theta;
    std::vector<Grid> frames;
    for (std::uint64_t s = 20; s < 24; ++s) frames.push_back(positive_frame(s));
    RwrConfig cfg;
    cfg.base = tight_cfg();
    cfg.step_cap = 2;
    RwrResult r = infer_rwr(model, frames, theta, Grid({1, 2, 2}), cfg);
    CHECK(r.diagnostics[0].iters > 2); // cold solve needs many iterations
    for (std::size_t n = 1; n < frames.size(); ++n) CHECK(r.diagnostics[n].iters <= 2);
    CHECK_THROWS(infer_rwr(model, {}, theta, Grid({1, 2, 2}), cfg));
    RwrConfig bad = cfg;
    bad.step_cap = 0;
    CHECK_THROWS(infer_rwr(model, frames, theta, Grid({1, 2, 2}), bad));
}

TEST_CASE("rwr divergence reports the frame index") {
    Expansive model;
    ParamVector theta;
    RwrConfig cfg;
    cfg.base = tight_cfg();
    cfg.base.max_iters = 2000;
    CHECK_THROWS_WITH_AS(infer_rwr(model, {positive_frame(1)}, theta, Grid({1, 2, 2}), cfg),
                         doctest::Contains("frame 0"), std::runtime_error);
}

TEST_CASE("proximity: capped warm start stays closer to the previous state") {
    LinearContraction model(psd_contraction());
    ParamVector theta;
    RwrConfig cfg;
    cfg.base = tight_cfg();
    cfg.step_cap = 2;
    Grid z0({1, 2, 2});
    for (std::uint64_t s = 30; s < 40; ++s) {
        std::vector<Grid> frames{positive_frame(s), positive_frame(s + 100)};
        RwrResult rwr = infer_rwr(model, frames, theta, z0, cfg);
        ColdResult cold = infer_cold(model, frames[1], theta, z0, cfg.base);
        const Grid& z_prev = rwr.states[0];
        double d_rwr = norm2(axpy(-1.0, z_prev, rwr.states[1]));
        double d_cold = norm2(axpy(-1.0, z_prev, cold.heatmaps));
        CHECK(d_rwr <= d_cold + 1e-12);
        CHECK(rwr.diagnostics[1].dist_to_prev == doctest::Approx(d_rwr).epsilon(1e-12));
    }
}

TEST_CASE("solve_relaxed scalar closed form") {
    HalfScalar model;
    ParamVector theta;
    Grid x({1, 1, 1});
    Grid z_prev({1, 1, 1});
    z_prev[0] = 1.0;

    RwrConfig cfg;
    cfg.alpha = 0.5;
    cfg.relaxed_steps = 400;
    cfg.relaxed_lr = 0.1;
    RelaxedResult r = solve_relaxed(model, x, theta, z_prev, cfg);
    CHECK(r.z[0] == doctest::Approx(0.5).epsilon(1e-6));

    cfg.alpha = 0.0;
    CHECK(solve_relaxed(model, x, theta, z_prev, cfg).z[0] ==
          doctest::Approx(0.0).epsilon(1e-6));

    cfg.alpha = 1e6;
    CHECK(std::fabs(solve_relaxed(model, x, theta, z_prev, cfg).z[0] - 1.0) < 1e-3);

    cfg.alpha = -1.0;
    CHECK_THROWS(solve_relaxed(model, x, theta, z_prev, cfg));
}

TEST_CASE("solve_relaxed objective trace is non-increasing") {
    LinearContraction model(psd_contraction());
    ParamVector theta;
    Grid x = positive_frame(7);
    Grid z_prev({1, 2, 2}, 0.1);
    RwrConfig cfg;
    cfg.alpha = 0.5;
    RelaxedResult r = solve_relaxed(model, x, theta, z_prev, cfg);
    REQUIRE(r.objective_trace.size() >= 2);
    for (std::size_t k = 1; k < r.objective_trace.size(); ++k)
        CHECK(r.objective_trace[k] <= r.objective_trace[k - 1]);
    // minimizer of the quadratic sits strictly between z_prev and z*
    CHECK(r.objective_trace.back() < r.objective_trace.front());
}

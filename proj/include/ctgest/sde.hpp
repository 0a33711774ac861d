#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "ctgest/rng.hpp"

namespace ctgest {

struct TimeGrid {
    double t_start = 0.0;
    double t_end = 0.0;
    double step = 0.0;

    TimeGrid(double t0, double t1, double dt) : t_start(t0), t_end(t1), step(dt) {
        if (!(dt > 0.0)) {
            throw std::invalid_argument("TimeGrid: step must be positive");
        }
        if (!(t1 > t0)) {
            throw std::invalid_argument("TimeGrid: t_end must exceed t_start");
        }
        const double span = (t1 - t0) / dt;
        const auto n = static_cast<long long>(std::llround(span));
        if (std::abs(span - static_cast<double>(n)) > 1e-9) {
            throw std::invalid_argument("TimeGrid: (t_end - t_start)/step is not a whole number");
        }
        n_points_ = static_cast<std::size_t>(n) + 1;
    }

    std::size_t n_points() const { return n_points_; }
    std::size_t n_steps() const { return n_points_ - 1; }
    double time(std::size_t j) const { return t_start + static_cast<double>(j) * step; }

    // grid index of an on-grid time; off-grid times are a structural error
    std::size_t index_of(double t) const {
        const auto j = static_cast<long long>(std::llround((t - t_start) / step));
        if (j < 0 || static_cast<std::size_t>(j) >= n_points_ ||
            std::abs(time(static_cast<std::size_t>(j)) - t) > 1e-9) {
            throw std::runtime_error("TimeGrid: time " + std::to_string(t) + " is not on the grid");
        }
        return static_cast<std::size_t>(j);
    }

private:
    std::size_t n_points_ = 0;
};

struct OuParams {
    double theta = 0.0;  // mean-reversion rate
    double sigma = 0.0;  // diffusion scale

    void validate() const {
        if (!(theta > 0.0) || !(sigma >= 0.0)) {
            throw std::invalid_argument("OuParams: need theta > 0 and sigma >= 0");
        }
    }
    double stationary_sd() const { return sigma / std::sqrt(2.0 * theta); }
};

// one draw from the mean-reverting process's stationary law N(0, sigma/sqrt(2 theta))
inline double stationary_draw(const OuParams& params, RngStream& rng) {
    params.validate();
    return params.stationary_sd() * rng.next_normal();
}

// Exact Gaussian transition over a step of length dt:
//   e' = e * exp(-theta dt) + N(0, sigma^2 (1 - exp(-2 theta dt)) / (2 theta)).
// Grid coarseness therefore never biases the law of the path.
inline double ou_step(const OuParams& p, double e, double dt, RngStream& rng) {
    const double decay = std::exp(-p.theta * dt);
    const double sd = p.sigma * std::sqrt(-std::expm1(-2.0 * p.theta * dt) / (2.0 * p.theta));
    return e * decay + sd * rng.next_normal();
}

inline std::vector<double> simulate_ou(const OuParams& params, const TimeGrid& grid,
                                       double e0, RngStream& rng) {
    params.validate();
    std::vector<double> e(grid.n_points());
    e[0] = e0;
    // the grid step is constant, so the transition coefficients are too
    const double decay = std::exp(-params.theta * grid.step);
    const double sd =
        params.sigma * std::sqrt(-std::expm1(-2.0 * params.theta * grid.step) / (2.0 * params.theta));
    for (std::size_t j = 0; j + 1 < e.size(); ++j) {
        e[j + 1] = e[j] * decay + sd * rng.next_normal();
    }
    return e;
}

struct RandomEnvParams {
    Eigen::MatrixXd generator;      // CTMC generator, rows sum to 0
    std::vector<OuParams> regimes;  // per environment state

    void validate() const {
        const auto m = generator.rows();
        if (m < 1 || generator.cols() != m) {
            throw std::invalid_argument("RandomEnvParams: generator must be square");
        }
        if (static_cast<Eigen::Index>(regimes.size()) != m) {
            throw std::invalid_argument("RandomEnvParams: one regime per environment state");
        }
        for (Eigen::Index i = 0; i < m; ++i) {
            double row = 0.0;
            for (Eigen::Index j = 0; j < m; ++j) {
                if (i != j && generator(i, j) < 0.0) {
                    throw std::invalid_argument("RandomEnvParams: off-diagonal rates must be >= 0");
                }
                row += generator(i, j);
            }
            if (std::abs(row) > 1e-9) {
                throw std::invalid_argument("RandomEnvParams: generator rows must sum to 0");
            }
        }
        for (const auto& r : regimes) r.validate();
    }
};

// stationary distribution of the environment chain: pi' Q = 0, sum pi = 1
inline Eigen::VectorXd ctmc_stationary(const Eigen::MatrixXd& generator) {
    const auto m = generator.rows();
    Eigen::MatrixXd a(m + 1, m);
    a.topRows(m) = generator.transpose();
    a.bottomRows(1).setOnes();
    Eigen::VectorXd b = Eigen::VectorXd::Zero(m + 1);
    b(m) = 1.0;
    return a.colPivHouseholderQr().solve(b);
}

// Exact event times of the environment chain on (t0, t1]: exponential holding
// times at rate -Q[j][j], next state proportional to the off-diagonal rates.
inline std::vector<std::pair<double, int>> sample_ctmc_events(
    const RandomEnvParams& env, double t0, double t1, int j0, RngStream& rng) {
    std::vector<std::pair<double, int>> events;
    double t = t0;
    int j = j0;
    const auto m = env.generator.rows();
    while (true) {
        const double rate = -env.generator(j, j);
        if (!(rate > 0.0)) break;  // absorbing state: no draw consumed
        t += rng.next_exponential(rate);
        if (t >= t1) break;
        // next state proportional to off-diagonal rates; the final candidate
        // absorbs any floating-point slack in the cumulative scan
        int next = j;
        const double u = rng.next_double() * rate;
        double cum = 0.0;
        for (Eigen::Index jj = 0; jj < m; ++jj) {
            if (jj == j || env.generator(j, jj) <= 0.0) continue;
            cum += env.generator(j, jj);
            next = static_cast<int>(jj);
            if (u < cum) break;
        }
        events.emplace_back(t, next);
        j = next;
    }
    return events;
}

// environment state at every grid point (right-continuous projection)
inline std::vector<int> simulate_ctmc(const RandomEnvParams& env, const TimeGrid& grid,
                                      int j0, RngStream& rng) {
    env.validate();
    if (j0 < 0 || j0 >= static_cast<int>(env.regimes.size())) {
        throw std::invalid_argument("simulate_ctmc: initial state out of range");
    }
    const auto events = sample_ctmc_events(env, grid.t_start, grid.t_end, j0, rng);
    std::vector<int> states(grid.n_points());
    std::size_t ev = 0;
    int j = j0;
    for (std::size_t g = 0; g < states.size(); ++g) {
        const double t = grid.time(g);
        while (ev < events.size() && events[ev].first <= t) {
            j = events[ev].second;
            ++ev;
        }
        states[g] = j;
    }
    return states;
}

// Mean-reverting diffusion whose (theta, sigma) switch with the environment
// chain; the diffusion level is continuous across switches. The environment's
// initial state is drawn from its stationary law (no draw when there is only
// one state, so a one-state environment replays exactly as simulate_ou).
inline std::vector<double> simulate_ou_random_env(const RandomEnvParams& env,
                                                  const TimeGrid& grid, double e0,
                                                  RngStream& rng) {
    env.validate();
    int j0 = 0;
    if (env.regimes.size() > 1) {
        const Eigen::VectorXd pi = ctmc_stationary(env.generator);
        const double u = rng.next_double();
        double cum = 0.0;
        for (Eigen::Index j = 0; j < pi.size(); ++j) {
            cum += pi(j);
            if (u < cum) {
                j0 = static_cast<int>(j);
                break;
            }
        }
    }
    const auto events = sample_ctmc_events(env, grid.t_start, grid.t_end, j0, rng);

    std::vector<double> e(grid.n_points());
    e[0] = e0;
    std::size_t ev = 0;
    int j = j0;
    for (std::size_t g = 0; g + 1 < e.size(); ++g) {
        double t = grid.time(g);
        const double t_next = grid.time(g + 1);
        double x = e[g];
        bool interrupted = false;
        while (ev < events.size() && events[ev].first <= t_next) {
            const double te = events[ev].first;
            if (te > t) {
                x = ou_step(env.regimes[j], x, te - t, rng);
                t = te;
                interrupted = true;
            }
            j = events[ev].second;
            ++ev;
        }
        // an uninterrupted step has length grid.step by construction; using
        // it directly (rather than t_next - t, which picks up rounding from
        // the grid times) keeps event-free stretches bit-identical to
        // simulate_ou
        if (!interrupted) {
            e[g + 1] = ou_step(env.regimes[j], x, grid.step, rng);
        } else {
            e[g + 1] = (t_next > t) ? ou_step(env.regimes[j], x, t_next - t, rng) : x;
        }
    }
    return e;
}

struct IntensityParams {
    double alpha0 = 0.0, alpha1 = 0.0, alpha2 = 0.0, alpha3 = 0.0;

    void validate() const {
        if (!std::isfinite(alpha0) || !std::isfinite(alpha1) || !std::isfinite(alpha2) ||
            !std::isfinite(alpha3)) {
            throw std::invalid_argument("IntensityParams: coefficients must be finite");
        }
    }
    // log-linear flip rate in the current treatment state and covariate value
    double operator()(int a, double y) const {
        return std::exp(alpha0 + alpha1 * a + alpha2 * y + alpha3 * a * y);
    }
};

struct TreatmentPath {
    std::vector<int> a;       // right-continuous state at each grid point
    std::vector<int> jumps;   // running flip count
    std::size_t coarse_steps = 0;  // steps where rate*dt exceeded 0.5 (grid too coarse)
};

// single Bernoulli-thinning step: flip with probability min(1, rate*dt)
inline bool treatment_flip(double rate, double dt, RngStream& rng, std::size_t& coarse) {
    if (!(rate >= 0.0)) {
        throw std::invalid_argument("treatment intensity must be finite and nonnegative");
    }
    if (rate * dt > 0.5) ++coarse;
    const double p = std::min(1.0, rate * dt);
    return rng.next_double() < p;
}

// Binary treatment driven by a state-dependent flip intensity, thinned on the
// grid: over each step the state flips with probability min(1, rate*dt). At
// most one flip per step; the intensity is read at the left endpoint.
template <class Intensity>
TreatmentPath simulate_treatment(Intensity&& intensity, const TimeGrid& grid, int a0,
                                 const std::vector<double>& covariate_path, RngStream& rng) {
    if (covariate_path.size() != grid.n_points()) {
        throw std::invalid_argument("simulate_treatment: covariate path not aligned with grid");
    }
    if (a0 != 0 && a0 != 1) {
        throw std::invalid_argument("simulate_treatment: a0 must be 0 or 1");
    }
    TreatmentPath out;
    out.a.resize(grid.n_points());
    out.jumps.resize(grid.n_points());
    out.a[0] = a0;
    out.jumps[0] = 0;
    for (std::size_t j = 0; j + 1 < out.a.size(); ++j) {
        const double rate = intensity(out.a[j], covariate_path[j]);
        const bool flip = treatment_flip(rate, grid.step, rng, out.coarse_steps);
        out.a[j + 1] = flip ? 1 - out.a[j] : out.a[j];
        out.jumps[j + 1] = out.jumps[j] + (flip ? 1 : 0);
    }
    return out;
}

}  // namespace ctgest

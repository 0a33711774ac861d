#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "ctgest/mathutil.hpp"
#include "ctgest/rng.hpp"
#include "ctgest/sde.hpp"

namespace ctgest {

enum class ModelId { M1, M2, M3, M4 };

inline std::string to_string(ModelId id) {
    switch (id) {
        case ModelId::M1: return "M1";
        case ModelId::M2: return "M2";
        case ModelId::M3: return "M3";
        case ModelId::M4: return "M4";
    }
    throw std::invalid_argument("unknown model id");
}

inline ModelId model_from_string(const std::string& s) {
    if (s == "M1" || s == "m1") return ModelId::M1;
    if (s == "M2" || s == "m2") return ModelId::M2;
    if (s == "M3" || s == "m3") return ModelId::M3;
    if (s == "M4" || s == "m4") return ModelId::M4;
    throw std::invalid_argument("unknown model '" + s + "' (expected M1..M4)");
}

// deterministic rank-preserving effect model: Y_t = Y0_t + psi * integral of A
struct CausalModel {
    double psi = 1.0;
    double baseline_constant = 100.0;

    void validate() const {
        if (!std::isfinite(psi) || !std::isfinite(baseline_constant)) {
            throw std::invalid_argument("CausalModel: parameters must be finite");
        }
    }
};

struct ModelConfig {
    ModelId model_id = ModelId::M1;
    TimeGrid grid{0.0, 5.0, 0.01};
    std::size_t n_subjects = 1000;
    CausalModel causal{};
    OuParams ou{0.2, 1.0};
    std::optional<RandomEnvParams> env{};  // required for M2
    IntensityParams intensity{-0.2, -0.3, -0.005, 0.007};

    // M4 pieces: deterministic-rate regimes plus a leading-indicator covariate
    double m4_high_threshold = 101.0;
    double m4_low_threshold = 99.0;
    double m4_regime_rate = 2.8;
    std::array<double, 2> m3_weights{0.8, 0.2};   // weights on (e_{t-1}, e_t)
    std::array<double, 3> m4_mix{0.2, 0.8, 0.5};  // weights on (Y_t, Y0_{t+lead}, eta_t)
    double lead_time = 0.5;

    std::size_t k_max() const {
        return static_cast<std::size_t>(std::llround(grid.t_end - grid.t_start));
    }
    // grid steps per unit time (visits sit at integer times)
    std::size_t steps_per_unit() const {
        return static_cast<std::size_t>(std::llround(1.0 / grid.step));
    }
    std::size_t lead_steps() const {
        return static_cast<std::size_t>(std::llround(lead_time / grid.step));
    }

    void validate() const {
        causal.validate();
        intensity.validate();
        if (n_subjects < 1) {
            throw std::invalid_argument("ModelConfig: n_subjects must be >= 1");
        }
        if (std::abs(grid.t_start) > 1e-12) {
            throw std::invalid_argument("ModelConfig: observation grid must start at t=0");
        }
        const double k = grid.t_end - grid.t_start;
        if (k < 1.0 - 1e-9 || std::abs(k - std::llround(k)) > 1e-9) {
            throw std::invalid_argument("ModelConfig: horizon must be a whole number of visits");
        }
        const auto su = steps_per_unit();
        if (su < 1 || std::abs(static_cast<double>(su) * grid.step - 1.0) > 1e-9) {
            throw std::invalid_argument("ModelConfig: grid step must divide the unit visit spacing");
        }
        if (model_id == ModelId::M2) {
            if (!env) throw std::invalid_argument("ModelConfig: M2 needs environment parameters");
            env->validate();
        } else {
            ou.validate();
        }
        if (model_id == ModelId::M4) {
            if (!(lead_time > 0.0) ||
                std::abs(static_cast<double>(lead_steps()) * grid.step - lead_time) > 1e-9) {
                throw std::invalid_argument(
                    "ModelConfig: lead_time must be a positive multiple of the grid step");
            }
            if (!(m4_high_threshold > m4_low_threshold)) {
                throw std::invalid_argument("ModelConfig: need high threshold > low threshold");
            }
            if (!(m4_regime_rate >= 0.0)) {
                throw std::invalid_argument("ModelConfig: regime rate must be >= 0");
            }
        }
    }
};

struct ContinuousPath {
    TimeGrid grid;
    std::vector<double> y0;      // treatment-free outcome
    std::vector<double> y;       // observed outcome = y0 + psi * cum_a
    std::vector<int> a;          // right-continuous binary treatment state
    std::vector<double> cum_a;   // exact integral of a up to each grid point
    std::vector<double> l_minus; // leading-indicator covariate (M4 only, else empty)
    std::size_t coarse_steps = 0;

    explicit ContinuousPath(const TimeGrid& g) : grid(g) {}
};

inline std::vector<double> apply_effect(const std::vector<double>& y0,
                                        const std::vector<double>& cum_a, double psi) {
    if (y0.size() != cum_a.size()) {
        throw std::invalid_argument("apply_effect: sequences differ in length");
    }
    std::vector<double> y(y0.size());
    for (std::size_t j = 0; j < y.size(); ++j) y[j] = y0[j] + psi * cum_a[j];
    return y;
}

// Integral of the right-continuous step function a: the value AT a grid time
// excludes any flip occurring at that time (left-limit convention). Computed
// as (active step count) * step so unit-time exposures come out exact.
inline std::vector<double> integrate_treatment(const std::vector<int>& a, const TimeGrid& grid) {
    if (a.size() != grid.n_points()) {
        throw std::invalid_argument("integrate_treatment: path not aligned with grid");
    }
    std::vector<double> cum(a.size());
    cum[0] = 0.0;
    long long active = 0;
    for (std::size_t j = 0; j + 1 < a.size(); ++j) {
        active += a[j];
        cum[j + 1] = static_cast<double>(active) * grid.step;
    }
    return cum;
}

// One subject's continuous history. Substream layout (fixed so components can
// be replayed independently): 0 = outcome noise, 1 = leading-indicator noise,
// 2 = treatment thinning, 3 = initial treatment state.
inline ContinuousPath generate_subject(const ModelConfig& cfg, RngStream& rng) {
    cfg.validate();
    const TimeGrid& grid = cfg.grid;
    const std::size_t n = grid.n_points();
    RngStream noise = rng.substream(0);
    RngStream thinning = rng.substream(2);

    ContinuousPath path(grid);
    path.y0.resize(n);
    path.y.resize(n);
    path.a.resize(n);
    path.cum_a.resize(n);

    const double c = cfg.causal.baseline_constant;
    std::vector<double> y0_ext;  // M4: treatment-free outcome through t_end + lead_time
    std::vector<double> eta;     // M4: independent noise in the leading indicator
    const std::size_t lead = (cfg.model_id == ModelId::M4) ? cfg.lead_steps() : 0;

    switch (cfg.model_id) {
        case ModelId::M1: {
            const double e0 = stationary_draw(cfg.ou, noise);
            const auto e = simulate_ou(cfg.ou, grid, e0, noise);
            for (std::size_t j = 0; j < n; ++j) path.y0[j] = c + e[j];
            break;
        }
        case ModelId::M2: {
            // diffusion starts in the first regime's stationary law; the
            // environment state itself is drawn inside the simulator
            const double e0 = stationary_draw(cfg.env->regimes.front(), noise);
            const auto e = simulate_ou_random_env(*cfg.env, grid, e0, noise);
            for (std::size_t j = 0; j < n; ++j) path.y0[j] = c + e[j];
            break;
        }
        case ModelId::M3: {
            // moving average of the driving process: needs e back to t = -1,
            // so simulate from a stationary draw one unit before the origin
            const TimeGrid ext(grid.t_start - 1.0, grid.t_end, grid.step);
            const std::size_t su = cfg.steps_per_unit();
            const double e0 = stationary_draw(cfg.ou, noise);
            const auto e = simulate_ou(cfg.ou, ext, e0, noise);
            for (std::size_t j = 0; j < n; ++j) {
                path.y0[j] = c + cfg.m3_weights[0] * e[j] + cfg.m3_weights[1] * e[j + su];
            }
            break;
        }
        case ModelId::M4: {
            // leading indicator reads Y0 half a visit ahead, so simulate the
            // treatment-free outcome past the horizon
            const TimeGrid ext(grid.t_start, grid.t_end + cfg.lead_time, grid.step);
            const double e0 = stationary_draw(cfg.ou, noise);
            const auto e = simulate_ou(cfg.ou, ext, e0, noise);
            y0_ext.resize(ext.n_points());
            for (std::size_t j = 0; j < y0_ext.size(); ++j) y0_ext[j] = c + e[j];
            for (std::size_t j = 0; j < n; ++j) path.y0[j] = y0_ext[j];

            RngStream eta_rng = rng.substream(1);
            const double eta0 = stationary_draw(cfg.ou, eta_rng);
            eta = simulate_ou(cfg.ou, grid, eta0, eta_rng);
            path.l_minus.resize(n);
            break;
        }
    }

    // initial treatment state depends on the concurrent outcome level
    {
        RngStream init_rng = rng.substream(3);
        const double p0 = expit(cfg.intensity.alpha0 + cfg.intensity.alpha2 * path.y0[0]);
        path.a[0] = init_rng.next_double() < p0 ? 1 : 0;
    }
    path.cum_a[0] = 0.0;
    path.y[0] = path.y0[0];

    // co-simulate treatment and outcome: the flip intensity at each step reads
    // the current state, then the outcome advances with the updated exposure
    long long active = 0;
    for (std::size_t j = 0; j + 1 < n; ++j) {
        double rate;
        if (cfg.model_id == ModelId::M4) {
            path.l_minus[j] = cfg.m4_mix[0] * path.y[j] + cfg.m4_mix[1] * y0_ext[j + lead] +
                              cfg.m4_mix[2] * eta[j];
            // the deterministic-rate regimes read the same covariate the
            // exponential intensity does, at its current and lagged values
            const bool lag_ready = j >= lead;
            if (lag_ready && path.a[j] == 1 && path.l_minus[j] > cfg.m4_high_threshold &&
                path.l_minus[j - lead] > cfg.m4_high_threshold) {
                rate = cfg.m4_regime_rate;
            } else if (lag_ready && path.a[j] == 0 && path.l_minus[j] < cfg.m4_low_threshold &&
                       path.l_minus[j - lead] < cfg.m4_low_threshold) {
                rate = cfg.m4_regime_rate;
            } else {
                rate = cfg.intensity(path.a[j], path.l_minus[j]);
            }
        } else {
            rate = cfg.intensity(path.a[j], path.y[j]);
        }
        const bool flip = treatment_flip(rate, grid.step, thinning, path.coarse_steps);
        path.a[j + 1] = flip ? 1 - path.a[j] : path.a[j];
        active += path.a[j];
        path.cum_a[j + 1] = static_cast<double>(active) * grid.step;
        path.y[j + 1] = path.y0[j + 1] + cfg.causal.psi * path.cum_a[j + 1];
    }
    if (cfg.model_id == ModelId::M4) {
        path.l_minus[n - 1] = cfg.m4_mix[0] * path.y[n - 1] + cfg.m4_mix[1] * y0_ext[n - 1 + lead] +
                              cfg.m4_mix[2] * eta[n - 1];
    }
    return path;
}

inline std::vector<ContinuousPath> generate_dataset(const ModelConfig& cfg,
                                                    std::uint64_t master_seed) {
    cfg.validate();
    std::vector<ContinuousPath> subjects;
    subjects.reserve(cfg.n_subjects);
    for (std::size_t i = 0; i < cfg.n_subjects; ++i) {
        RngStream rng(master_seed, i);
        subjects.push_back(generate_subject(cfg, rng));
    }
    return subjects;
}

// stock two-regime environment used by the M2 simulation model
inline RandomEnvParams default_two_regime_env() {
    RandomEnvParams env;
    env.generator = Eigen::MatrixXd(2, 2);
    env.generator << -1.0, 1.0, 1.0, -1.0;
    env.regimes = {OuParams{0.2, 1.0}, OuParams{1.0, 0.5}};
    return env;
}

}  // namespace ctgest

#pragma once

#include <atomic>
#include <cmath>
#include <cstdlib>
#include <numeric>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "ctgest/config.hpp"
#include "ctgest/dgp.hpp"
#include "ctgest/estimators.hpp"
#include "ctgest/panel.hpp"

namespace ctgest {

// simulate -> discretize one subject at a time; continuous paths are large
// at fine grids and only their visit projections are kept
inline PanelDataset simulate_panel(const ModelConfig& cfg, std::uint64_t master_seed) {
    cfg.validate();
    PanelDataset panel;
    panel.k_max = cfg.k_max();
    if (cfg.model_id == ModelId::M4) panel.l_names = {"lead"};
    std::vector<int> visits(panel.k_max + 1);
    std::iota(visits.begin(), visits.end(), 0);
    panel.subjects.reserve(cfg.n_subjects);
    for (std::size_t i = 0; i < cfg.n_subjects; ++i) {
        RngStream rng(master_seed, i);
        const ContinuousPath path = generate_subject(cfg, rng);
        panel.subjects.push_back(discretize(path, visits, std::to_string(i)));
    }
    panel.validate();
    return panel;
}

struct StudyConfig {
    ModelConfig model{};
    std::vector<EstimatorSpec> estimators;
    std::size_t replications = 200;
    std::uint64_t master_seed = 1;
    double ci_level = 0.95;
    std::string output{};
    std::size_t workers = 0;  // 0: CTGEST_WORKERS, then hardware concurrency

    void validate() const {
        model.validate();
        if (estimators.empty()) throw std::invalid_argument("study: no estimators configured");
        if (replications < 1) throw std::invalid_argument("study: replications must be >= 1");
        if (!(ci_level > 0.0 && ci_level < 1.0)) {
            throw std::invalid_argument("study: ci_level must be inside (0, 1)");
        }
    }
};

inline std::vector<EstimatorSpec> default_estimators(ModelId id) {
    const bool with_l = id == ModelId::M4;
    std::vector<EstimatorSpec> out;
    for (const auto kind : {EstimatorKind::naive, EstimatorKind::modified,
                            EstimatorKind::controlling_future}) {
        EstimatorSpec spec;
        spec.propensity = simulation_spec(kind, with_l);
        out.push_back(std::move(spec));
    }
    return out;
}

namespace detail {

inline void reject_unknown_keys(const ConfigFile& file, const std::string& section,
                                std::initializer_list<const char*> known) {
    for (const auto& key : file.keys(section)) {
        bool ok = false;
        for (const char* k : known) ok = ok || key == k;
        if (!ok) {
            throw std::runtime_error("config: unknown key '" + key + "' in section [" + section +
                                     "]");
        }
    }
}

}  // namespace detail

inline ModelConfig load_model_config(const ConfigFile& file) {
    detail::reject_unknown_keys(
        file, "model",
        {"id", "n", "step", "horizon", "psi", "baseline", "theta", "sigma", "alpha0", "alpha1",
         "alpha2", "alpha3", "high_threshold", "low_threshold", "regime_rate", "lead_time",
         "m3_weights", "m4_mix", "env_generator", "env_theta", "env_sigma"});
    ModelConfig cfg;
    cfg.model_id = model_from_string(file.get_string("model", "id", "M1"));
    cfg.n_subjects = file.get_size("model", "n", cfg.n_subjects);
    const double step = file.get_double("model", "step", cfg.grid.step);
    const double horizon = file.get_double("model", "horizon", cfg.grid.t_end);
    cfg.grid = TimeGrid(0.0, horizon, step);
    cfg.causal.psi = file.get_double("model", "psi", cfg.causal.psi);
    cfg.causal.baseline_constant = file.get_double("model", "baseline", cfg.causal.baseline_constant);
    cfg.ou.theta = file.get_double("model", "theta", cfg.ou.theta);
    cfg.ou.sigma = file.get_double("model", "sigma", cfg.ou.sigma);
    cfg.intensity.alpha0 = file.get_double("model", "alpha0", cfg.intensity.alpha0);
    cfg.intensity.alpha1 = file.get_double("model", "alpha1", cfg.intensity.alpha1);
    cfg.intensity.alpha2 = file.get_double("model", "alpha2", cfg.intensity.alpha2);
    cfg.intensity.alpha3 = file.get_double("model", "alpha3", cfg.intensity.alpha3);
    cfg.m4_high_threshold = file.get_double("model", "high_threshold", cfg.m4_high_threshold);
    cfg.m4_low_threshold = file.get_double("model", "low_threshold", cfg.m4_low_threshold);
    cfg.m4_regime_rate = file.get_double("model", "regime_rate", cfg.m4_regime_rate);
    cfg.lead_time = file.get_double("model", "lead_time", cfg.lead_time);
    if (file.has("model", "m3_weights")) {
        const auto w = file.get_double_list("model", "m3_weights");
        if (w.size() != 2) throw std::runtime_error("config: m3_weights needs 2 numbers");
        cfg.m3_weights = {w[0], w[1]};
    }
    if (file.has("model", "m4_mix")) {
        const auto w = file.get_double_list("model", "m4_mix");
        if (w.size() != 3) throw std::runtime_error("config: m4_mix needs 3 numbers");
        cfg.m4_mix = {w[0], w[1], w[2]};
    }
    if (cfg.model_id == ModelId::M2) {
        if (file.has("model", "env_generator")) {
            RandomEnvParams env;
            // generator rows separated by ';', entries by whitespace
            const std::string raw = file.get_string("model", "env_generator");
            std::vector<std::vector<double>> rows;
            std::stringstream row_ss(raw);
            std::string row;
            while (std::getline(row_ss, row, ';')) {
                std::istringstream cell_ss(row);
                std::vector<double> cells;
                double v = 0.0;
                while (cell_ss >> v) cells.push_back(v);
                if (!cells.empty()) rows.push_back(std::move(cells));
            }
            const auto m = rows.size();
            env.generator = Eigen::MatrixXd(m, m);
            for (std::size_t i = 0; i < m; ++i) {
                if (rows[i].size() != m) {
                    throw std::runtime_error("config: env_generator must be square");
                }
                for (std::size_t j = 0; j < m; ++j) env.generator(i, j) = rows[i][j];
            }
            const auto thetas = file.get_double_list("model", "env_theta");
            const auto sigmas = file.get_double_list("model", "env_sigma");
            if (thetas.size() != m || sigmas.size() != m) {
                throw std::runtime_error("config: env_theta/env_sigma must list one value per state");
            }
            for (std::size_t j = 0; j < m; ++j) env.regimes.push_back({thetas[j], sigmas[j]});
            cfg.env = std::move(env);
        } else {
            cfg.env = default_two_regime_env();
        }
    }
    cfg.validate();
    return cfg;
}

inline StudyConfig load_study_config(const ConfigFile& file) {
    StudyConfig cfg;
    cfg.model = load_model_config(file);
    detail::reject_unknown_keys(file, "estimators",
                                {"use", "naive_terms", "modified_terms",
                                 "controlling_future_terms"});
    detail::reject_unknown_keys(file, "study",
                                {"replications", "seed", "ci_level", "output", "workers"});

    auto use = file.get_word_list("estimators", "use");
    if (use.empty()) use = {"naive", "modified", "controlling_future"};
    const bool with_l = cfg.model.model_id == ModelId::M4;
    for (const auto& word : use) {
        const EstimatorKind kind = kind_from_string(word);
        EstimatorSpec spec;
        spec.propensity = simulation_spec(kind, with_l);
        const std::string terms_key = to_string(kind) + "_terms";
        if (file.has("estimators", terms_key)) {
            spec.propensity.terms.clear();
            for (const auto& t : file.get_word_list("estimators", terms_key)) {
                spec.propensity.terms.push_back(term_from_string(t));
            }
        }
        cfg.estimators.push_back(std::move(spec));
    }

    cfg.replications = file.get_size("study", "replications", cfg.replications);
    cfg.master_seed = file.get_u64("study", "seed", cfg.master_seed);
    cfg.ci_level = file.get_double("study", "ci_level", cfg.ci_level);
    cfg.output = file.get_string("study", "output", cfg.output);
    cfg.workers = file.get_size("study", "workers", cfg.workers);
    cfg.validate();
    return cfg;
}

// replication RNG roots are hashed, not sequential, so any subset of
// replications can run in any order on any thread layout
inline std::uint64_t replication_seed(std::uint64_t master_seed, std::size_t rep_index) {
    return mix64(master_seed ^ mix64(0x9E3779B97F4A7C15ull + rep_index));
}

struct ReplicationResult {
    struct PerEstimator {
        bool ok = false;
        double psi_hat = std::numeric_limits<double>::quiet_NaN();
        double se = std::numeric_limits<double>::quiet_NaN();
        bool covered = false;
        std::string error;
    };
    std::vector<PerEstimator> estimators;
};

inline ReplicationResult run_replication(const StudyConfig& cfg, std::size_t rep_index) {
    ReplicationResult out;
    out.estimators.resize(cfg.estimators.size());
    PanelDataset panel;
    try {
        panel = simulate_panel(cfg.model, replication_seed(cfg.master_seed, rep_index));
    } catch (const std::exception& err) {
        for (auto& pe : out.estimators) pe.error = err.what();
        return out;
    }
    const double z = norm_quantile(0.5 * (1.0 + cfg.ci_level));
    for (std::size_t e = 0; e < cfg.estimators.size(); ++e) {
        auto& pe = out.estimators[e];
        try {
            const EstimateResult res = solve(panel, cfg.estimators[e]);
            if (!res.converged) {
                pe.error = res.message.empty() ? "did not converge" : res.message;
                continue;
            }
            if (res.std_errors.size() == 0 || !std::isfinite(res.std_errors[0]) ||
                res.std_errors[0] <= 0.0) {
                pe.error = "degenerate standard error";
                continue;
            }
            pe.ok = true;
            pe.psi_hat = res.theta_hat.psi;
            pe.se = res.std_errors[0];
            pe.covered = std::abs(pe.psi_hat - cfg.model.causal.psi) <= z * pe.se;
        } catch (const std::exception& err) {
            pe.error = err.what();
        }
    }
    return out;
}

struct EstimatorSummary {
    std::string name;
    std::size_t n_used = 0;
    std::size_t n_failed = 0;
    double mean_estimate = std::numeric_limits<double>::quiet_NaN();
    double sd_estimates = std::numeric_limits<double>::quiet_NaN();
    double se_mean = std::numeric_limits<double>::quiet_NaN();
    double abs_bias = std::numeric_limits<double>::quiet_NaN();
    double coverage = std::numeric_limits<double>::quiet_NaN();
    double mean_se = std::numeric_limits<double>::quiet_NaN();
};

struct StudySummary {
    std::vector<EstimatorSummary> estimators;
    std::vector<ReplicationResult> replications;  // full per-replication audit
};

inline std::size_t resolve_workers(std::size_t requested) {
    if (requested > 0) return requested;
    if (const char* env = std::getenv("CTGEST_WORKERS")) {
        char* end = nullptr;
        const unsigned long v = std::strtoul(env, &end, 10);
        if (end && *end == '\0' && v > 0) return static_cast<std::size_t>(v);
    }
    const unsigned hc = std::thread::hardware_concurrency();
    return hc > 0 ? hc : 1;
}

inline StudySummary run_study(const StudyConfig& cfg) {
    cfg.validate();
    StudySummary out;
    out.replications.resize(cfg.replications);

    const std::size_t workers = std::min(resolve_workers(cfg.workers), cfg.replications);
    if (workers <= 1) {
        for (std::size_t r = 0; r < cfg.replications; ++r) {
            out.replications[r] = run_replication(cfg, r);
        }
    } else {
        std::atomic<std::size_t> next{0};
        auto drain = [&] {
            while (true) {
                const std::size_t r = next.fetch_add(1);
                if (r >= cfg.replications) break;
                out.replications[r] = run_replication(cfg, r);
            }
        };
        std::vector<std::thread> pool;
        pool.reserve(workers);
        for (std::size_t t = 0; t < workers; ++t) pool.emplace_back(drain);
        for (auto& t : pool) t.join();
    }

    for (std::size_t e = 0; e < cfg.estimators.size(); ++e) {
        EstimatorSummary s;
        s.name = to_string(cfg.estimators[e].propensity.kind);
        double sum = 0.0, sum_se = 0.0;
        std::size_t covered = 0;
        std::vector<double> used;
        for (const auto& rep : out.replications) {
            const auto& pe = rep.estimators[e];
            if (!pe.ok) continue;
            used.push_back(pe.psi_hat);
            sum += pe.psi_hat;
            sum_se += pe.se;
            covered += pe.covered ? 1 : 0;
        }
        s.n_used = used.size();
        s.n_failed = cfg.replications - s.n_used;
        if (s.n_used > 0) {
            s.mean_estimate = sum / static_cast<double>(s.n_used);
            s.abs_bias = std::abs(s.mean_estimate - cfg.model.causal.psi);
            s.coverage = static_cast<double>(covered) / static_cast<double>(s.n_used);
            s.mean_se = sum_se / static_cast<double>(s.n_used);
        }
        if (s.n_used > 1) {
            double ss = 0.0;
            for (const double v : used) ss += (v - s.mean_estimate) * (v - s.mean_estimate);
            s.sd_estimates = std::sqrt(ss / static_cast<double>(s.n_used - 1));
            s.se_mean = s.sd_estimates / std::sqrt(static_cast<double>(s.n_used));
        }
        out.estimators.push_back(std::move(s));
    }
    return out;
}

// --- report writers ----------------------------------------------------------
// Key-value sections in a fixed order, full float precision: reruns with the
// same seed must produce byte-identical files.

namespace detail {

inline std::string fmt_or_absent(double v, bool present) {
    return present ? format_double(v) : std::string("absent");
}

}  // namespace detail

inline std::string write_study_report(const StudyConfig& cfg, const StudySummary& summary) {
    std::ostringstream os;
    os << "# monte carlo study report\n";
    os << "[study]\n";
    os << "model = " << to_string(cfg.model.model_id) << "\n";
    os << "n_subjects = " << cfg.model.n_subjects << "\n";
    os << "horizon = " << detail::format_double(cfg.model.grid.t_end) << "\n";
    os << "grid_step = " << detail::format_double(cfg.model.grid.step) << "\n";
    os << "psi_true = " << detail::format_double(cfg.model.causal.psi) << "\n";
    os << "replications = " << cfg.replications << "\n";
    os << "master_seed = " << cfg.master_seed << "\n";
    os << "ci_level = " << detail::format_double(cfg.ci_level) << "\n";
    for (std::size_t e = 0; e < summary.estimators.size(); ++e) {
        const auto& s = summary.estimators[e];
        os << "\n[estimator " << s.name << "]\n";
        os << "n_used = " << s.n_used << "\n";
        os << "n_failed = " << s.n_failed << "\n";
        os << "mean_estimate = " << detail::fmt_or_absent(s.mean_estimate, s.n_used > 0) << "\n";
        os << "sd_estimates = " << detail::fmt_or_absent(s.sd_estimates, s.n_used > 1) << "\n";
        os << "se_mean = " << detail::fmt_or_absent(s.se_mean, s.n_used > 1) << "\n";
        os << "abs_bias = " << detail::fmt_or_absent(s.abs_bias, s.n_used > 0) << "\n";
        os << "coverage = " << detail::fmt_or_absent(s.coverage, s.n_used > 0) << "\n";
        os << "mean_se = " << detail::fmt_or_absent(s.mean_se, s.n_used > 0) << "\n";
    }
    for (std::size_t e = 0; e < summary.estimators.size(); ++e) {
        const auto& s = summary.estimators[e];
        os << "\n[replications " << s.name << "]\n";
        os << "rep,psi_hat,se,covered\n";
        for (std::size_t r = 0; r < summary.replications.size(); ++r) {
            const auto& pe = summary.replications[r].estimators[e];
            if (pe.ok) {
                os << r << ',' << detail::format_double(pe.psi_hat) << ','
                   << detail::format_double(pe.se) << ',' << (pe.covered ? 1 : 0) << "\n";
            } else {
                os << r << ",absent,absent,absent\n";
            }
        }
    }
    return os.str();
}

inline std::string write_estimate_report(const std::string& name,
                                         const std::vector<std::string>& coef_names,
                                         const EstimateResult& res) {
    std::ostringstream os;
    os << "[estimate " << name << "]\n";
    os << "converged = " << (res.converged ? 1 : 0) << "\n";
    os << "iterations = " << res.iterations << "\n";
    os << "residual_norm = " << detail::format_double(res.final_residual_norm) << "\n";
    if (!res.message.empty()) os << "note = " << res.message << "\n";
    if (res.converged) {
        os << "psi_hat = " << detail::format_double(res.theta_hat.psi) << "\n";
        os << "se_psi = " << detail::format_double(res.std_errors.size() > 0 ? res.std_errors[0]
                                                                             : 0.0)
           << "\n";
        os << "rank_ok = " << (res.identification.rank_ok ? 1 : 0) << "\n";
        os << "cond_b = " << detail::format_double(res.identification.cond_b) << "\n";
        os << "cond_cov_u = " << detail::format_double(res.identification.cond_cov_u) << "\n";
        for (std::size_t c = 0; c < coef_names.size(); ++c) {
            os << "beta_" << coef_names[c] << " = "
               << detail::format_double(res.theta_hat.beta[static_cast<Eigen::Index>(c)]) << "\n";
        }
        for (std::size_t c = 0; c < coef_names.size(); ++c) {
            os << "se_beta_" << coef_names[c] << " = "
               << detail::format_double(res.std_errors[static_cast<Eigen::Index>(c) + 1]) << "\n";
        }
    }
    return os.str();
}

inline std::string write_diagnostic_report(const std::string& label, const DiagnosticResult& diag) {
    std::ostringstream os;
    os << "[diagnostic " << label << "]\n";
    os << "n_rows = " << diag.n_rows << "\n";
    os << "converged = " << (diag.converged ? 1 : 0) << "\n";
    os << "separation = " << (diag.separation ? 1 : 0) << "\n";
    os << "coef,estimate,se,z,p\n";
    for (const auto& row : diag.coef) {
        os << row.name << ',' << detail::format_double(row.estimate) << ','
           << detail::format_double(row.std_error) << ',' << detail::format_double(row.z) << ','
           << detail::format_double(row.p_value) << "\n";
    }
    return os.str();
}

}  // namespace ctgest

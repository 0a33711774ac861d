// command-line front end: simulate panels, fit estimators, run monte carlo
// studies, and run the sequential-randomization diagnostic.

#include <CLI11.hpp>

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "ctgest/mc.hpp"

namespace {

void write_text(const std::string& path, const std::string& text) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << text;
    if (!out) throw std::runtime_error("write failed for " + path);
}

// estimators for a loaded panel: lag-free design using whatever covariate
// blocks the file actually carries
std::vector<std::pair<std::string, ctgest::EstimatorSpec>> panel_estimators(
    const ctgest::PanelDataset& panel, const std::string& which) {
    std::vector<ctgest::EstimatorKind> kinds;
    if (which == "all") {
        kinds = {ctgest::EstimatorKind::naive, ctgest::EstimatorKind::modified,
                 ctgest::EstimatorKind::controlling_future};
    } else {
        kinds = {ctgest::kind_from_string(which)};
    }
    std::vector<std::pair<std::string, ctgest::EstimatorSpec>> out;
    for (const auto kind : kinds) {
        ctgest::EstimatorSpec spec;
        spec.propensity = ctgest::survey_spec(kind, !panel.v_names.empty(), !panel.l_names.empty());
        // on a three-visit panel the future-controlling design has a single
        // response visit, the first one, where the rebased cumulative
        // exposure is identically zero; keeping the term would make the fit
        // singular without conditioning on anything
        if (kind == ctgest::EstimatorKind::controlling_future && panel.k_max == 2) {
            auto& terms = spec.propensity.terms;
            terms.erase(std::remove(terms.begin(), terms.end(), ctgest::Term::cum_a),
                        terms.end());
        }
        out.emplace_back(ctgest::to_string(kind), std::move(spec));
    }
    return out;
}

ctgest::ModelConfig model_from_cli(const std::string& config_path, const std::string& model_name,
                                   std::optional<std::size_t> n, std::optional<double> step,
                                   std::optional<double> horizon, std::optional<double> psi) {
    ctgest::ModelConfig cfg;
    if (!config_path.empty()) {
        cfg = ctgest::load_model_config(ctgest::ConfigFile::parse_file(config_path));
    }
    if (!model_name.empty()) cfg.model_id = ctgest::model_from_string(model_name);
    if (cfg.model_id == ctgest::ModelId::M2 && !cfg.env) cfg.env = ctgest::default_two_regime_env();
    if (n) cfg.n_subjects = *n;
    if (step || horizon) {
        cfg.grid = ctgest::TimeGrid(0.0, horizon.value_or(cfg.grid.t_end),
                                    step.value_or(cfg.grid.step));
    }
    if (psi) cfg.causal.psi = *psi;
    cfg.validate();
    return cfg;
}

void dump_trace(const ctgest::ContinuousPath& path, const std::string& out_path) {
    std::ofstream out(out_path);
    if (!out) throw std::runtime_error("cannot write " + out_path);
    const bool with_l = !path.l_minus.empty();
    out << "t,y0,y,a,cum_a";
    if (with_l) out << ",l_lead";
    out << "\n";
    for (std::size_t j = 0; j < path.y.size(); ++j) {
        out << ctgest::detail::format_double(path.grid.time(j)) << ','
            << ctgest::detail::format_double(path.y0[j]) << ','
            << ctgest::detail::format_double(path.y[j]) << ',' << path.a[j] << ','
            << ctgest::detail::format_double(path.cum_a[j]);
        if (with_l) out << ',' << ctgest::detail::format_double(path.l_minus[j]);
        out << "\n";
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"continuous-time treatment-process causal inference toolkit"};
    app.require_subcommand(1);

    // --- simulate ------------------------------------------------------------
    auto* sim = app.add_subcommand("simulate", "simulate a panel from a data-generating model");
    std::string sim_config, sim_model, sim_out, sim_trace;
    std::optional<std::size_t> sim_n;
    std::optional<double> sim_step, sim_horizon, sim_psi;
    std::uint64_t sim_seed = 1;
    sim->add_option("--config", sim_config, "model config file");
    sim->add_option("--model", sim_model, "model id (M1..M4)");
    sim->add_option("--n", sim_n, "number of subjects");
    sim->add_option("--step", sim_step, "simulation grid step");
    sim->add_option("--horizon", sim_horizon, "number of visits (integer horizon)");
    sim->add_option("--psi", sim_psi, "true treatment effect");
    sim->add_option("--seed", sim_seed, "master seed");
    sim->add_option("--out", sim_out, "output panel CSV")->required();
    sim->add_option("--trace", sim_trace, "also dump subject 0's continuous path to this CSV");

    // --- estimate ------------------------------------------------------------
    auto* est = app.add_subcommand("estimate", "fit estimators to a panel CSV");
    std::string est_panel, est_name = "all", est_out;
    ctgest::PanelSchema est_schema;
    est->add_option("--panel", est_panel, "input panel CSV")->required();
    est->add_option("--estimator", est_name, "naive|modified|controlling_future|all");
    est->add_option("--out", est_out, "write the report to this file as well");
    est->add_option("--id-col", est_schema.id, "id column name");
    est->add_option("--visit-col", est_schema.visit, "visit column name");
    est->add_option("--y-col", est_schema.y, "outcome column name");
    est->add_option("--a-col", est_schema.a, "treatment column name");
    est->add_option("--cum-col", est_schema.cum_a, "cumulative-treatment column name");
    est->add_option("--l-prefix", est_schema.l_prefix, "time-varying covariate column prefix");
    est->add_option("--v-prefix", est_schema.v_prefix, "baseline covariate column prefix");

    // --- montecarlo ----------------------------------------------------------
    auto* mc = app.add_subcommand("montecarlo", "run a replicated simulation study");
    std::string mc_config, mc_out;
    std::optional<std::uint64_t> mc_seed;
    std::optional<std::size_t> mc_workers;
    mc->add_option("--config", mc_config, "study config file")->required();
    mc->add_option("--seed", mc_seed, "override the study master seed");
    mc->add_option("--out", mc_out, "override the report output path");
    mc->add_option("--workers", mc_workers, "override the worker count");

    // --- diagnose ------------------------------------------------------------
    auto* diag = app.add_subcommand("diagnose",
                                    "sequential-randomization diagnostic regressions");
    std::string diag_config, diag_model = "M4", diag_panel, diag_out;
    std::size_t diag_n = 10000, diag_k = 2, diag_m = 4;
    std::uint64_t diag_seed = 1;
    double diag_psi = 0.0;
    diag->add_option("--config", diag_config, "model config file");
    diag->add_option("--model", diag_model, "model id to simulate (M1..M4)");
    diag->add_option("--n", diag_n, "number of simulated subjects");
    diag->add_option("--seed", diag_seed, "master seed");
    diag->add_option("--k", diag_k, "treatment visit");
    diag->add_option("--m", diag_m, "future outcome visit");
    diag->add_option("--panel", diag_panel,
                     "diagnose a panel CSV instead (putative outcomes at --psi)");
    diag->add_option("--psi", diag_psi, "effect used for putative treatment-free outcomes");
    diag->add_option("--out", diag_out, "write the report to this file as well");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        if (sim->parsed()) {
            const auto cfg = model_from_cli(sim_config, sim_model, sim_n, sim_step, sim_horizon,
                                            sim_psi);
            const auto panel = ctgest::simulate_panel(cfg, sim_seed);
            ctgest::write_panel_csv(panel, sim_out);
            std::cout << "wrote " << panel.n_subjects() << " subjects x " << (panel.k_max + 1)
                      << " visits to " << sim_out << "\n";
            if (!sim_trace.empty()) {
                ctgest::RngStream rng(sim_seed, 0);
                dump_trace(ctgest::generate_subject(cfg, rng), sim_trace);
                std::cout << "wrote subject 0 trace to " << sim_trace << "\n";
            }
        } else if (est->parsed()) {
            const auto panel = ctgest::read_panel_csv(est_panel, est_schema);
            std::string report;
            for (const auto& [name, spec] : panel_estimators(panel, est_name)) {
                const auto res = ctgest::solve(panel, spec);
                const auto design = ctgest::build_design(panel, spec.propensity, 0.0);
                report += ctgest::write_estimate_report(name, design.col_names, res);
                report += "\n";
            }
            std::cout << report;
            if (!est_out.empty()) write_text(est_out, report);
        } else if (mc->parsed()) {
            auto cfg = ctgest::load_study_config(ctgest::ConfigFile::parse_file(mc_config));
            if (mc_seed) cfg.master_seed = *mc_seed;
            if (mc_out.size()) cfg.output = mc_out;
            if (mc_workers) cfg.workers = *mc_workers;
            const auto summary = ctgest::run_study(cfg);
            const std::string report = ctgest::write_study_report(cfg, summary);
            if (!cfg.output.empty()) {
                write_text(cfg.output, report);
                std::cout << "wrote study report to " << cfg.output << "\n";
            }
            // echo the summary sections (everything before the per-replication lists)
            const auto cut = report.find("\n[replications ");
            std::cout << (cut == std::string::npos ? report : report.substr(0, cut + 1));
        } else if (diag->parsed()) {
            std::string report;
            if (!diag_panel.empty()) {
                const auto panel = ctgest::read_panel_csv(diag_panel);
                std::vector<std::vector<double>> y0;
                y0.reserve(panel.n_subjects());
                for (const auto& s : panel.subjects) {
                    std::vector<double> row(panel.k_max + 1);
                    for (std::size_t k = 0; k <= panel.k_max; ++k) {
                        row[k] = s.y_star[k] - diag_psi * s.cum_a[k];
                    }
                    y0.push_back(std::move(row));
                }
                report += ctgest::write_diagnostic_report(
                    "ignoring_future",
                    ctgest::ignorability_diagnostic(panel, y0, diag_k, diag_m, false));
                report += "\n";
                report += ctgest::write_diagnostic_report(
                    "controlling_future",
                    ctgest::ignorability_diagnostic(panel, y0, diag_k, diag_m, true));
            } else {
                auto cfg = model_from_cli(diag_config, diag_model, diag_n, std::nullopt,
                                          std::nullopt, std::nullopt);
                const auto panel = ctgest::simulate_panel(cfg, diag_seed);
                report += ctgest::write_diagnostic_report(
                    "ignoring_future",
                    ctgest::ignorability_diagnostic(panel, diag_k, diag_m, false));
                report += "\n";
                report += ctgest::write_diagnostic_report(
                    "controlling_future",
                    ctgest::ignorability_diagnostic(panel, diag_k, diag_m, true));
            }
            std::cout << report;
            if (!diag_out.empty()) write_text(diag_out, report);
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}

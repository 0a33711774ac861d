#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "ctgest/mathutil.hpp"
#include "ctgest/panel.hpp"

namespace ctgest {

enum class EstimatorKind { naive, modified, controlling_future };

inline std::string to_string(EstimatorKind k) {
    switch (k) {
        case EstimatorKind::naive: return "naive";
        case EstimatorKind::modified: return "modified";
        case EstimatorKind::controlling_future: return "controlling_future";
    }
    throw std::invalid_argument("unknown estimator kind");
}

inline EstimatorKind kind_from_string(const std::string& s) {
    if (s == "naive") return EstimatorKind::naive;
    if (s == "modified") return EstimatorKind::modified;
    if (s == "controlling_future" || s == "controlling-future" || s == "cf") {
        return EstimatorKind::controlling_future;
    }
    throw std::invalid_argument("unknown estimator '" + s +
                                "' (expected naive|modified|controlling_future)");
}

// Closed vocabulary of design terms. Keeping the set closed means the
// derivative of any design entry with respect to the causal parameter is known
// exactly: it is -cum_a[k+1] on the future-outcome term and 0 elsewhere.
enum class Term { constant, a_lag, y_lag, y_now, cum_a, l_now, l_lag, v, y0_next };

inline std::string to_string(Term t) {
    switch (t) {
        case Term::constant: return "const";
        case Term::a_lag: return "a_lag";
        case Term::y_lag: return "y_lag";
        case Term::y_now: return "y_now";
        case Term::cum_a: return "cum_a";
        case Term::l_now: return "l_now";
        case Term::l_lag: return "l_lag";
        case Term::v: return "v";
        case Term::y0_next: return "y0_next";
    }
    throw std::invalid_argument("unknown design term");
}

inline Term term_from_string(const std::string& s) {
    if (s == "const") return Term::constant;
    if (s == "a_lag") return Term::a_lag;
    if (s == "y_lag") return Term::y_lag;
    if (s == "y_now") return Term::y_now;
    if (s == "cum_a") return Term::cum_a;
    if (s == "l_now") return Term::l_now;
    if (s == "l_lag") return Term::l_lag;
    if (s == "v") return Term::v;
    if (s == "y0_next") return Term::y0_next;
    throw std::invalid_argument("unknown design term '" + s + "'");
}

struct PropensitySpec {
    EstimatorKind kind = EstimatorKind::modified;
    std::vector<Term> terms;
    // inclusive visit range where the model applies; derived from the terms
    // and the panel horizon when not set explicitly
    std::optional<std::pair<int, int>> k_range{};

    bool has(Term t) const { return std::find(terms.begin(), terms.end(), t) != terms.end(); }
    bool has_lag_terms() const { return has(Term::a_lag) || has(Term::y_lag) || has(Term::l_lag); }

    void validate(const PanelDataset& panel) const {
        if (terms.empty()) throw std::invalid_argument("propensity: empty term list");
        switch (kind) {
            case EstimatorKind::naive:
                if (has(Term::cum_a) || has(Term::y0_next)) {
                    throw std::invalid_argument(
                        "propensity: naive design admits neither cum_a nor y0_next");
                }
                break;
            case EstimatorKind::modified:
                if (!has(Term::cum_a) || has(Term::y0_next)) {
                    throw std::invalid_argument(
                        "propensity: modified design needs cum_a and excludes y0_next");
                }
                break;
            case EstimatorKind::controlling_future:
                if (!has(Term::y0_next)) {
                    throw std::invalid_argument(
                        "propensity: controlling_future design needs y0_next");
                }
                break;
        }
        if ((has(Term::l_now) || has(Term::l_lag)) && panel.l_names.empty()) {
            throw std::invalid_argument("propensity: design uses l terms but panel has none");
        }
        if (has(Term::v) && panel.v_names.empty()) {
            throw std::invalid_argument("propensity: design uses v terms but panel has none");
        }
        const auto [lo, hi] = visit_range(panel.k_max);
        if (lo > hi) {
            throw std::invalid_argument("propensity: empty visit range (panel horizon too short)");
        }
    }

    // Default range: start at 1 when the design needs lagged values, stop one
    // visit before the horizon (the response at K has no outcome after it),
    // and one earlier still when the future-outcome term must look ahead of
    // the paired outcome.
    std::pair<int, int> visit_range(std::size_t panel_k_max) const {
        if (k_range) return *k_range;
        const int k = static_cast<int>(panel_k_max);
        const int lo = has_lag_terms() ? 1 : 0;
        const int hi = (kind == EstimatorKind::controlling_future) ? k - 2 : k - 1;
        return {lo, hi};
    }
};

// simulation-style designs built around lagged treatment and outcome
inline PropensitySpec simulation_spec(EstimatorKind kind, bool with_l = false) {
    PropensitySpec spec;
    spec.kind = kind;
    spec.terms = {Term::constant, Term::a_lag, Term::y_lag, Term::y_now};
    if (kind != EstimatorKind::naive) spec.terms.push_back(Term::cum_a);
    if (with_l) {
        spec.terms.push_back(Term::l_lag);
        spec.terms.push_back(Term::l_now);
    }
    if (kind == EstimatorKind::controlling_future) spec.terms.push_back(Term::y0_next);
    return spec;
}

// lag-free design on current levels and baseline covariates; suits short
// panels where visit 0 rows would otherwise be lost to lags
inline PropensitySpec survey_spec(EstimatorKind kind, bool with_v = true, bool with_l = true) {
    PropensitySpec spec;
    spec.kind = kind;
    spec.terms = {Term::constant};
    if (with_v) spec.terms.push_back(Term::v);
    if (with_l) spec.terms.push_back(Term::l_now);
    spec.terms.push_back(Term::y_now);
    if (kind != EstimatorKind::naive) spec.terms.push_back(Term::cum_a);
    if (kind == EstimatorKind::controlling_future) spec.terms.push_back(Term::y0_next);
    return spec;
}

struct DesignRow {
    std::size_t subject = 0;  // index into panel.subjects
    std::size_t k = 0;        // visit of the response
    int a = 0;                // response A*_k
    Eigen::VectorXd x;        // expanded covariate vector
    double c_next = 0.0;      // cum_a[k+1], the psi-sensitivity of the y0_next entry
};

struct DesignMatrix {
    std::vector<std::string> col_names;
    long y0_col = -1;  // column holding the future-outcome entry, -1 if none
    std::vector<DesignRow> rows;

    std::size_t n_cols() const { return col_names.size(); }
};

// Expand the term list into per-(subject, visit) rows at a given value of the
// causal parameter. Only the y0_next entry depends on it:
//   y0_next = Y*_{k+1} - psi * cum_a[k+1].
// Rows whose lags or lookahead fall outside the recorded visits are omitted.
inline DesignMatrix build_design(const PanelDataset& panel, const PropensitySpec& spec,
                                 double psi) {
    spec.validate(panel);
    DesignMatrix design;
    for (const Term t : spec.terms) {
        switch (t) {
            case Term::l_now:
                for (const auto& n : panel.l_names) design.col_names.push_back("l_now_" + n);
                break;
            case Term::l_lag:
                for (const auto& n : panel.l_names) design.col_names.push_back("l_lag_" + n);
                break;
            case Term::v:
                for (const auto& n : panel.v_names) design.col_names.push_back("v_" + n);
                break;
            case Term::y0_next:
                design.y0_col = static_cast<long>(design.col_names.size());
                design.col_names.push_back("y0_next");
                break;
            default:
                design.col_names.push_back(to_string(t));
        }
    }
    const auto n_cols = static_cast<Eigen::Index>(design.col_names.size());
    const auto [k_lo, k_hi] = spec.visit_range(panel.k_max);
    const int k_top = static_cast<int>(panel.k_max);

    for (std::size_t i = 0; i < panel.subjects.size(); ++i) {
        const auto& s = panel.subjects[i];
        for (int k = std::max(k_lo, 0); k <= std::min(k_hi, k_top); ++k) {
            if (k == 0 && spec.has_lag_terms()) continue;       // lag unavailable
            if (k + 1 > k_top && spec.has(Term::y0_next)) continue;  // lookahead unavailable
            DesignRow row;
            row.subject = i;
            row.k = static_cast<std::size_t>(k);
            row.a = s.a_star[static_cast<std::size_t>(k)];
            row.x.resize(n_cols);
            Eigen::Index c = 0;
            const auto ku = static_cast<std::size_t>(k);
            for (const Term t : spec.terms) {
                switch (t) {
                    case Term::constant: row.x[c++] = 1.0; break;
                    case Term::a_lag: row.x[c++] = s.a_star[ku - 1]; break;
                    case Term::y_lag: row.x[c++] = s.y_star[ku - 1]; break;
                    case Term::y_now: row.x[c++] = s.y_star[ku]; break;
                    case Term::cum_a: row.x[c++] = s.cum_a[ku]; break;
                    case Term::l_now:
                        for (std::size_t j = 0; j < panel.l_names.size(); ++j) {
                            row.x[c++] = s.l_minus[ku][j];
                        }
                        break;
                    case Term::l_lag:
                        for (std::size_t j = 0; j < panel.l_names.size(); ++j) {
                            row.x[c++] = s.l_minus[ku - 1][j];
                        }
                        break;
                    case Term::v:
                        for (std::size_t j = 0; j < panel.v_names.size(); ++j) {
                            row.x[c++] = s.v[j];
                        }
                        break;
                    case Term::y0_next:
                        row.c_next = s.cum_a[ku + 1];
                        row.x[c++] = s.y_star[ku + 1] - psi * row.c_next;
                        break;
                }
            }
            design.rows.push_back(std::move(row));
        }
    }
    return design;
}

inline constexpr double kProbFloor = 1e-12;

inline double clamp_prob(double p) {
    return std::min(1.0 - kProbFloor, std::max(kProbFloor, p));
}

// logistic propensity with clamping so estimating-equation weights stay finite
inline double logistic(const Eigen::VectorXd& x, const Eigen::VectorXd& beta) {
    if (x.size() != beta.size()) {
        throw std::invalid_argument("logistic: design and coefficient dimensions differ");
    }
    return clamp_prob(expit(x.dot(beta)));
}

// gradient of the propensity with respect to the coefficients
inline Eigen::VectorXd logistic_grad(const Eigen::VectorXd& x, const Eigen::VectorXd& beta) {
    const double p = logistic(x, beta);
    return p * (1.0 - p) * x;
}

}  // namespace ctgest

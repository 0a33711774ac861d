#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "ctgest/mathutil.hpp"
#include "ctgest/panel.hpp"
#include "ctgest/propensity.hpp"

namespace ctgest {

// ---------------------------------------------------------------------------
// The three estimators share one estimating-equation shape
//
//   U(psi, beta) = sum over subjects i and visit pairs (k, m) of
//                  [A*_{ik} - p(x_{ik}(psi) . beta)] * [Y0*_{im}(psi); x_{ik}(psi)]
//
// and differ only in the design x and in how the putative treatment-free
// outcome Y0*(psi) is formed:
//   naive     subtracts psi times the count of treated visits before m,
//   modified  subtracts psi times the exact exposure integral cum_a[m],
//   controlling_future additionally puts Y0*_{k+1}(psi) into the design.
// The system is square: one equation per propensity coefficient plus one for
// the outcome-weighted residual that identifies psi.
// ---------------------------------------------------------------------------

struct EstimatorSpec {
    PropensitySpec propensity;
    // explicit (k, m) outcome pairings; when absent, every admissible pair is
    // used: k < m <= K, strengthened to k+1 < m for controlling_future
    std::optional<std::vector<std::pair<int, int>>> pairs{};
};

struct Theta {
    double psi = 0.0;
    Eigen::VectorXd beta;

    Eigen::Index dim() const { return 1 + beta.size(); }
    Eigen::VectorXd pack() const {
        Eigen::VectorXd v(dim());
        v[0] = psi;
        v.tail(beta.size()) = beta;
        return v;
    }
    static Theta unpack(const Eigen::VectorXd& v) {
        Theta t;
        t.psi = v[0];
        t.beta = v.tail(v.size() - 1);
        return t;
    }
};

struct IdentificationInfo {
    bool rank_ok = false;
    double cond_b = std::numeric_limits<double>::infinity();
    double cond_cov_u = std::numeric_limits<double>::infinity();
};

struct EstimateResult {
    Theta theta_hat;
    Eigen::MatrixXd covariance;
    Eigen::VectorXd std_errors;
    bool converged = false;
    std::size_t iterations = 0;
    double final_residual_norm = std::numeric_limits<double>::infinity();
    IdentificationInfo identification{};
    std::string message;
};

namespace detail {

// Rows grouped by response visit k: the pair sum collapses to per-row
// aggregates because the residual does not depend on m. For row (i, k) with
// paired outcomes M(k):
//   sum_y = sum of Y*_{im},  sum_c = sum of the psi-multipliers of Y0*_{im},
//   n_m = |M(k)|; then sum_m Y0*_{im}(psi) = sum_y - psi * sum_c.
struct EstimatorWorkspace {
    DesignMatrix design;  // rows built at psi = 0
    std::vector<double> sum_y, sum_c, n_m;
    long y0_col = -1;
    Eigen::Index q = 0;  // design columns
    std::size_t n_subjects = 0;
};

inline EstimatorWorkspace build_workspace(const PanelDataset& panel, const EstimatorSpec& spec) {
    EstimatorWorkspace w;
    w.design = build_design(panel, spec.propensity, 0.0);
    w.y0_col = w.design.y0_col;
    w.q = static_cast<Eigen::Index>(w.design.n_cols());
    w.n_subjects = panel.n_subjects();
    const int k_top = static_cast<int>(panel.k_max);
    const bool future = spec.propensity.kind == EstimatorKind::controlling_future;
    const int gap = future ? 2 : 1;  // smallest admissible m - k

    // explicit pair list -> per-k outcome sets
    std::vector<std::vector<int>> m_of_k(panel.k_max + 1);
    if (spec.pairs) {
        if (spec.pairs->empty()) throw std::invalid_argument("estimator: empty pair set");
        for (const auto& [k, m] : *spec.pairs) {
            if (k < 0 || k > k_top || m > k_top || m - k < gap) {
                throw std::invalid_argument("estimator: pair (" + std::to_string(k) + "," +
                                            std::to_string(m) + ") violates the pairing rule");
            }
            m_of_k[static_cast<std::size_t>(k)].push_back(m);
        }
    } else {
        for (int k = 0; k <= k_top; ++k) {
            for (int m = k + gap; m <= k_top; ++m) {
                m_of_k[static_cast<std::size_t>(k)].push_back(m);
            }
        }
    }

    std::vector<DesignRow> kept;
    std::size_t total_pairs = 0;
    for (auto& row : w.design.rows) {
        const auto& ms = m_of_k[row.k];
        if (ms.empty()) continue;
        const auto& s = panel.subjects[row.subject];
        double sum_y = 0.0, sum_c = 0.0;
        for (const int m : ms) {
            const auto mu = static_cast<std::size_t>(m);
            sum_y += s.y_star[mu];
            if (spec.propensity.kind == EstimatorKind::naive) {
                // treated-visit count before m, ignoring between-visit exposure
                double count = 0.0;
                for (std::size_t l = 0; l < mu; ++l) count += s.a_star[l];
                sum_c += count;
            } else {
                sum_c += s.cum_a[mu];
            }
        }
        w.sum_y.push_back(sum_y);
        w.sum_c.push_back(sum_c);
        w.n_m.push_back(static_cast<double>(ms.size()));
        total_pairs += ms.size();
        kept.push_back(std::move(row));
    }
    w.design.rows = std::move(kept);
    if (total_pairs == 0) throw std::invalid_argument("estimator: empty pair set");
    return w;
}

// design vector at the requested psi (only the future-outcome entry moves)
inline void row_design_at(const EstimatorWorkspace& w, std::size_t r, double psi,
                          Eigen::VectorXd& x) {
    x = w.design.rows[r].x;
    if (w.y0_col >= 0) x[w.y0_col] -= psi * w.design.rows[r].c_next;
}

inline Eigen::VectorXd eval_u(const EstimatorWorkspace& w, const Theta& theta) {
    Eigen::VectorXd u = Eigen::VectorXd::Zero(1 + w.q);
    Eigen::VectorXd x(w.q);
    for (std::size_t r = 0; r < w.design.rows.size(); ++r) {
        const auto& row = w.design.rows[r];
        row_design_at(w, r, theta.psi, x);
        const double p = logistic(x, theta.beta);
        const double resid = row.a - p;
        u[0] += resid * (w.sum_y[r] - theta.psi * w.sum_c[r]);
        u.tail(w.q) += (resid * w.n_m[r]) * x;
    }
    return u;
}

// analytic Jacobian dU/d(psi, beta); column 0 is the psi derivative
inline Eigen::MatrixXd eval_jacobian(const EstimatorWorkspace& w, const Theta& theta) {
    const Eigen::Index d = 1 + w.q;
    Eigen::MatrixXd jac = Eigen::MatrixXd::Zero(d, d);
    Eigen::VectorXd x(w.q);
    for (std::size_t r = 0; r < w.design.rows.size(); ++r) {
        const auto& row = w.design.rows[r];
        row_design_at(w, r, theta.psi, x);
        const double p = logistic(x, theta.beta);
        const double wgt = p * (1.0 - p);
        const double resid = row.a - p;
        const double sum_y0 = w.sum_y[r] - theta.psi * w.sum_c[r];
        const double n_m = w.n_m[r];

        // beta block: d(resid)/d(beta) = -p(1-p) x, design is beta-free
        jac.row(0).tail(w.q) -= (wgt * sum_y0) * x.transpose();
        jac.bottomRightCorner(w.q, w.q) -= (wgt * n_m) * (x * x.transpose());

        // psi column: the residual moves through the future-outcome design
        // entry, and the outcome stack moves through its psi-multipliers
        double dresid = 0.0;
        if (w.y0_col >= 0) dresid = wgt * row.c_next * theta.beta[w.y0_col];
        jac(0, 0) += dresid * sum_y0 - resid * w.sum_c[r];
        jac.col(0).tail(w.q) += (dresid * n_m) * x;
        if (w.y0_col >= 0) jac(1 + w.y0_col, 0) -= resid * n_m * row.c_next;
    }
    return jac;
}

// per-subject score outer products (the clustering that makes the sandwich
// honest about within-subject dependence across visit pairs)
inline Eigen::MatrixXd eval_meat(const EstimatorWorkspace& w, const Theta& theta) {
    const Eigen::Index d = 1 + w.q;
    Eigen::MatrixXd meat = Eigen::MatrixXd::Zero(d, d);
    Eigen::VectorXd u_i = Eigen::VectorXd::Zero(d);
    Eigen::VectorXd x(w.q);
    std::size_t current = w.design.rows.empty() ? 0 : w.design.rows.front().subject;
    for (std::size_t r = 0; r < w.design.rows.size(); ++r) {
        const auto& row = w.design.rows[r];
        if (row.subject != current) {
            meat.noalias() += u_i * u_i.transpose();
            u_i.setZero();
            current = row.subject;
        }
        row_design_at(w, r, theta.psi, x);
        const double p = logistic(x, theta.beta);
        const double resid = row.a - p;
        u_i[0] += resid * (w.sum_y[r] - theta.psi * w.sum_c[r]);
        u_i.tail(w.q) += (resid * w.n_m[r]) * x;
    }
    if (!w.design.rows.empty()) meat.noalias() += u_i * u_i.transpose();
    return meat;
}

inline double cond_2norm(const Eigen::MatrixXd& m) {
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(m);
    const auto& sv = svd.singularValues();
    if (sv.size() == 0 || sv(sv.size() - 1) <= 0.0) {
        return std::numeric_limits<double>::infinity();
    }
    return sv(0) / sv(sv.size() - 1);
}

}  // namespace detail

inline IdentificationInfo identification_check(const Eigen::MatrixXd& b,
                                               const Eigen::MatrixXd& cov_u,
                                               double tol = 1e-10) {
    if (b.rows() != b.cols() || cov_u.rows() != cov_u.cols() || b.rows() != cov_u.rows()) {
        throw std::invalid_argument("identification_check: need square matrices of equal size");
    }
    IdentificationInfo info;
    info.cond_b = detail::cond_2norm(b);
    info.cond_cov_u = detail::cond_2norm(cov_u);
    info.rank_ok = info.cond_b < 1.0 / tol && info.cond_cov_u < 1.0 / tol;
    return info;
}

inline Eigen::VectorXd estimating_function(const PanelDataset& panel, const EstimatorSpec& spec,
                                           const Theta& theta) {
    const auto w = detail::build_workspace(panel, spec);
    if (theta.beta.size() != w.q) {
        throw std::invalid_argument("estimating_function: coefficient dimension mismatch");
    }
    return detail::eval_u(w, theta);
}

// --- plain logistic maximum likelihood (initialization and diagnostics) -----

struct LogisticFit {
    Eigen::VectorXd beta;
    Eigen::VectorXd std_errors;
    Eigen::MatrixXd cov;
    double loglik = 0.0;
    bool converged = false;
    bool separation = false;
    std::size_t iterations = 0;
};

inline LogisticFit fit_logistic(const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
                                std::size_t max_iter = 100) {
    if (x.rows() != y.size()) {
        throw std::invalid_argument("fit_logistic: row count mismatch");
    }
    const Eigen::Index n = x.rows(), q = x.cols();
    LogisticFit fit;
    fit.beta = Eigen::VectorXd::Zero(q);
    const double inf = std::numeric_limits<double>::infinity();

    Eigen::VectorXd p(n), wgt(n);
    for (fit.iterations = 0; fit.iterations < max_iter; ++fit.iterations) {
        for (Eigen::Index i = 0; i < n; ++i) {
            p[i] = clamp_prob(expit(x.row(i).dot(fit.beta)));
            wgt[i] = p[i] * (1.0 - p[i]);
        }
        if ((y - p).lpNorm<Eigen::Infinity>() <= 2.0 * kProbFloor) {
            // every response fitted at the clamp boundary on its own side:
            // the likelihood has no interior maximum
            fit.separation = true;
            break;
        }
        Eigen::VectorXd grad = x.transpose() * (y - p);
        Eigen::MatrixXd info = x.transpose() * wgt.asDiagonal() * x;
        Eigen::FullPivLU<Eigen::MatrixXd> lu(info);
        if (!lu.isInvertible()) {
            fit.separation = true;
            break;
        }
        Eigen::VectorXd step = lu.solve(grad);
        fit.beta += step;
        if (fit.beta.lpNorm<Eigen::Infinity>() > 1e4) {
            // coefficients running away: separated or quasi-separated data
            fit.separation = true;
            break;
        }
        if (step.lpNorm<Eigen::Infinity>() < 1e-10) {
            fit.converged = true;
            ++fit.iterations;
            break;
        }
    }
    if (fit.converged) {
        Eigen::MatrixXd info = Eigen::MatrixXd::Zero(q, q);
        fit.loglik = 0.0;
        for (Eigen::Index i = 0; i < n; ++i) {
            const double pi = clamp_prob(expit(x.row(i).dot(fit.beta)));
            info.noalias() += (pi * (1.0 - pi)) * (x.row(i).transpose() * x.row(i));
            fit.loglik += y[i] > 0.5 ? std::log(pi) : std::log(1.0 - pi);
        }
        Eigen::FullPivLU<Eigen::MatrixXd> lu(info);
        if (lu.isInvertible()) {
            fit.cov = lu.inverse();
            fit.std_errors = fit.cov.diagonal().cwiseMax(0.0).cwiseSqrt();
        } else {
            fit.separation = true;
            fit.std_errors = Eigen::VectorXd::Constant(q, inf);
        }
    } else {
        fit.std_errors = Eigen::VectorXd::Constant(q, inf);
        fit.loglik = -inf;
    }
    return fit;
}

// --- Newton solver ----------------------------------------------------------

inline EstimateResult solve(const PanelDataset& panel, const EstimatorSpec& spec,
                            std::optional<Theta> init = std::nullopt) {
    EstimateResult res;
    detail::EstimatorWorkspace w = detail::build_workspace(panel, spec);
    const std::size_t n = w.n_subjects;

    // no variation in the response leaves the residuals uninformative; the
    // logistic fit would diverge, so fail fast instead of chasing it
    {
        bool any0 = false, any1 = false;
        for (const auto& row : w.design.rows) (row.a ? any1 : any0) = true;
        if (!any0 || !any1) {
            res.message = "treatment is constant across all design rows";
            res.theta_hat.beta = Eigen::VectorXd::Zero(w.q);
            return res;
        }
    }

    Theta theta;
    if (init) {
        if (init->beta.size() != w.q) {
            throw std::invalid_argument("solve: initial coefficient dimension mismatch");
        }
        theta = *init;
    } else {
        // start from the null effect and the plain propensity fit under it
        theta.psi = 0.0;
        Eigen::MatrixXd x(w.design.rows.size(), w.q);
        Eigen::VectorXd y(w.design.rows.size());
        for (std::size_t r = 0; r < w.design.rows.size(); ++r) {
            x.row(r) = w.design.rows[r].x.transpose();
            y[r] = w.design.rows[r].a;
        }
        const LogisticFit init_fit = fit_logistic(x, y);
        theta.beta = init_fit.converged ? init_fit.beta : Eigen::VectorXd::Zero(w.q);
    }

    Eigen::VectorXd u = detail::eval_u(w, theta);
    double u_norm = u.lpNorm<Eigen::Infinity>();
    const double tol_u = 1e-8 * static_cast<double>(n);

    for (std::size_t iter = 1; iter <= 100; ++iter) {
        res.iterations = iter;
        if (u_norm < tol_u) {
            res.converged = true;
            break;
        }
        const Eigen::MatrixXd jac = detail::eval_jacobian(w, theta);
        Eigen::FullPivLU<Eigen::MatrixXd> lu(jac);
        if (!lu.isInvertible()) {
            res.message = "singular estimating-equation Jacobian";
            res.identification.cond_b = detail::cond_2norm(jac);
            break;
        }
        const Eigen::VectorXd step = lu.solve(-u);

        // damped update: halve until the residual norm actually drops
        double scale = 1.0;
        bool accepted = false;
        Theta trial;
        Eigen::VectorXd u_trial;
        for (int h = 0; h <= 30; ++h) {
            trial = Theta::unpack(theta.pack() + scale * step);
            u_trial = detail::eval_u(w, trial);
            if (u_trial.lpNorm<Eigen::Infinity>() < u_norm) {
                accepted = true;
                break;
            }
            scale *= 0.5;
        }
        if (!accepted) {
            res.message = "line search stalled";
            break;
        }
        const double step_norm = (scale * step).lpNorm<Eigen::Infinity>();
        theta = trial;
        u = std::move(u_trial);
        u_norm = u.lpNorm<Eigen::Infinity>();
        if (theta.beta.lpNorm<Eigen::Infinity>() > 1e6) {
            res.message = "propensity coefficients diverged";
            break;
        }
        if (step_norm < 1e-10) {
            // Newton steps shrink with the residual near a regular root, so a
            // vanishing accepted step means numerical stationarity
            res.converged = true;
            break;
        }
    }
    if (!res.converged && res.message.empty()) {
        res.converged = u_norm < tol_u;
        if (!res.converged) res.message = "iteration limit reached";
    }

    res.theta_hat = theta;
    res.final_residual_norm = u_norm / static_cast<double>(n);
    if (!res.converged) return res;

    const Eigen::MatrixXd b = detail::eval_jacobian(w, theta);
    const Eigen::MatrixXd meat = detail::eval_meat(w, theta);
    res.identification = identification_check(b, meat);
    Eigen::FullPivLU<Eigen::MatrixXd> lu(b);
    if (!lu.isInvertible()) {
        res.message = "bread matrix singular at the solution";
        res.identification.rank_ok = false;
        return res;
    }
    const Eigen::MatrixXd b_inv = lu.inverse();
    res.covariance = b_inv * meat * b_inv.transpose();
    res.std_errors = res.covariance.diagonal().cwiseMax(0.0).cwiseSqrt();
    return res;
}

inline Eigen::MatrixXd sandwich_cov(const PanelDataset& panel, const EstimatorSpec& spec,
                                    const Theta& theta_hat) {
    const auto w = detail::build_workspace(panel, spec);
    if (theta_hat.beta.size() != w.q) {
        throw std::invalid_argument("sandwich_cov: coefficient dimension mismatch");
    }
    const Eigen::MatrixXd b = detail::eval_jacobian(w, theta_hat);
    const Eigen::MatrixXd meat = detail::eval_meat(w, theta_hat);
    Eigen::FullPivLU<Eigen::MatrixXd> lu(b);
    if (!lu.isInvertible()) {
        throw std::runtime_error("sandwich_cov: bread matrix singular (condition number " +
                                 std::to_string(detail::cond_2norm(b)) + ")");
    }
    const Eigen::MatrixXd b_inv = lu.inverse();
    return b_inv * meat * b_inv.transpose();
}

// --- ignorability diagnostic -------------------------------------------------
// Logistic regression of the treatment state at visit k on recorded history
// plus the treatment-free outcome at a later visit m. Under sequential
// randomization the future-outcome coefficient is zero; a leading-indicator
// covariate shows up as a significantly positive coefficient unless the next
// visit's treatment-free outcome is also controlled for.

struct DiagnosticRow {
    std::string name;
    double estimate = 0.0;
    double std_error = 0.0;
    double z = 0.0;
    double p_value = 1.0;
};

struct DiagnosticResult {
    std::vector<DiagnosticRow> coef;
    long idx_y0_future = -1;  // coefficient on the treatment-free outcome at m
    long idx_y0_next = -1;    // coefficient on the one at k+1 (if controlled)
    bool separation = false;
    bool converged = false;
    std::size_t n_rows = 0;

    const DiagnosticRow& y0_future() const { return coef.at(static_cast<std::size_t>(idx_y0_future)); }
    const DiagnosticRow& y0_next() const { return coef.at(static_cast<std::size_t>(idx_y0_next)); }
};

inline DiagnosticResult ignorability_diagnostic(const PanelDataset& panel,
                                                const std::vector<std::vector<double>>& y0_star,
                                                std::size_t k, std::size_t m,
                                                bool with_future_control) {
    if (k < 1 || m > panel.k_max || m <= k) {
        throw std::invalid_argument("diagnostic: need 1 <= k < m <= panel horizon");
    }
    if (with_future_control && m <= k + 1) {
        throw std::invalid_argument("diagnostic: future control needs m > k+1");
    }
    if (y0_star.size() != panel.n_subjects()) {
        throw std::invalid_argument("diagnostic: one treatment-free outcome row per subject");
    }

    DiagnosticResult out;
    std::vector<std::string> names{"const", "cum_a"};
    for (const auto& n : panel.l_names) names.push_back("l_lag_" + n);
    for (const auto& n : panel.l_names) names.push_back("l_now_" + n);
    names.emplace_back("a_lag");
    names.emplace_back("y_now");
    names.emplace_back("y_lag");
    if (with_future_control) {
        out.idx_y0_next = static_cast<long>(names.size());
        names.emplace_back("y0_next");
    }
    out.idx_y0_future = static_cast<long>(names.size());
    names.emplace_back("y0_future");

    const auto n = static_cast<Eigen::Index>(panel.n_subjects());
    const auto q = static_cast<Eigen::Index>(names.size());
    Eigen::MatrixXd x(n, q);
    Eigen::VectorXd y(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        const auto& s = panel.subjects[static_cast<std::size_t>(i)];
        const auto& y0 = y0_star[static_cast<std::size_t>(i)];
        if (y0.size() != panel.k_max + 1) {
            throw std::invalid_argument("diagnostic: treatment-free outcomes misaligned for subject " +
                                        s.id);
        }
        Eigen::Index c = 0;
        x(i, c++) = 1.0;
        x(i, c++) = s.cum_a[k];
        for (std::size_t j = 0; j < panel.l_names.size(); ++j) x(i, c++) = s.l_minus[k - 1][j];
        for (std::size_t j = 0; j < panel.l_names.size(); ++j) x(i, c++) = s.l_minus[k][j];
        x(i, c++) = s.a_star[k - 1];
        x(i, c++) = s.y_star[k];
        x(i, c++) = s.y_star[k - 1];
        if (with_future_control) x(i, c++) = y0[k + 1];
        x(i, c++) = y0[m];
        y[i] = s.a_star[k];
    }

    const LogisticFit fit = fit_logistic(x, y);
    out.separation = fit.separation;
    out.converged = fit.converged;
    out.n_rows = static_cast<std::size_t>(n);
    for (Eigen::Index c = 0; c < q; ++c) {
        DiagnosticRow row;
        row.name = names[static_cast<std::size_t>(c)];
        row.estimate = fit.converged ? fit.beta[c] : std::numeric_limits<double>::quiet_NaN();
        row.std_error = fit.std_errors[c];
        row.z = std::isfinite(row.std_error) && row.std_error > 0.0 ? row.estimate / row.std_error
                                                                    : 0.0;
        row.p_value = std::isfinite(row.std_error) && row.std_error > 0.0 ? wald_pvalue(row.z) : 1.0;
        out.coef.push_back(std::move(row));
    }
    return out;
}

// convenience overload pulling the simulation-recorded treatment-free outcomes
inline DiagnosticResult ignorability_diagnostic(const PanelDataset& panel, std::size_t k,
                                                std::size_t m, bool with_future_control) {
    if (!panel.has_y0()) {
        throw std::invalid_argument("diagnostic: panel carries no treatment-free outcomes");
    }
    std::vector<std::vector<double>> y0;
    y0.reserve(panel.n_subjects());
    for (const auto& s : panel.subjects) y0.push_back(s.y0_star);
    return ignorability_diagnostic(panel, y0, k, m, with_future_control);
}

}  // namespace ctgest

// Estimating-equation tests: frozen-value checks on a hand-built panel,
// analytic-vs-numeric Jacobian agreement, an independent profiled root as a
// solver oracle, sandwich covariance behaviour, and the failure paths.

#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <utility>
#include <vector>

#include "ctgest/dgp.hpp"
#include "ctgest/estimators.hpp"
#include "ctgest/panel.hpp"
#include "ctgest/propensity.hpp"

using namespace ctgest;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {

// two subjects, four visits, values chosen by hand; every frozen number in
// this file was computed from these inputs with an independent implementation
PanelDataset oracle_panel() {
    PanelDataset panel;
    panel.k_max = 3;
    PanelSubject s1;
    s1.id = "s1";
    s1.y_star = {100.0, 101.5, 99.0, 102.0};
    s1.a_star = {0, 1, 1, 0};
    s1.cum_a = {0.0, 0.4, 1.3, 1.9};
    PanelSubject s2;
    s2.id = "s2";
    s2.y_star = {98.5, 100.0, 103.0, 101.0};
    s2.a_star = {1, 0, 1, 1};
    s2.cum_a = {0.0, 0.7, 1.0, 1.6};
    panel.subjects = {s1, s2};
    return panel;
}

Theta theta_point(EstimatorKind kind) {
    Theta t;
    t.psi = 0.8;
    std::vector<double> b{0.3, -0.4, 0.02, -0.03};
    if (kind != EstimatorKind::naive) b.push_back(0.1);
    if (kind == EstimatorKind::controlling_future) b.push_back(-0.05);
    t.beta = Eigen::Map<const Eigen::VectorXd>(b.data(), static_cast<Eigen::Index>(b.size()));
    return t;
}

PanelDataset m1_panel(std::size_t n, std::uint64_t seed, double psi = 1.0) {
    ModelConfig cfg;
    cfg.n_subjects = n;
    cfg.causal.psi = psi;
    return discretize_dataset(generate_dataset(cfg, seed), cfg.k_max());
}

Eigen::MatrixXd fd_jacobian(const PanelDataset& panel, const EstimatorSpec& spec,
                            const Theta& theta) {
    const Eigen::VectorXd packed = theta.pack();
    const auto d = packed.size();
    Eigen::MatrixXd jac(d, d);
    for (Eigen::Index j = 0; j < d; ++j) {
        const double h = 1e-5 * std::max(1.0, std::abs(packed[j]));
        Eigen::VectorXd up = packed, dn = packed;
        up[j] += h;
        dn[j] -= h;
        jac.col(j) = (estimating_function(panel, spec, Theta::unpack(up)) -
                      estimating_function(panel, spec, Theta::unpack(dn))) /
                     (2.0 * h);
    }
    return jac;
}

// propensity fit alone, at a fixed effect value. In the stacked system each
// visit-k assignment row appears once per paired outcome m, so the
// coefficient subvector of the estimating function is the score of a
// logistic fit with every row replicated by its pairing count; replicating
// rows reproduces that exactly without a weighted fitter.
LogisticFit profile_beta(const PanelDataset& panel, const PropensitySpec& pspec, double psi) {
    const DesignMatrix design = build_design(panel, pspec, psi);
    const int k_top = static_cast<int>(panel.k_max);
    const int gap = pspec.kind == EstimatorKind::controlling_future ? 2 : 1;
    Eigen::Index total = 0;
    for (const auto& row : design.rows) {
        total += std::max(0, k_top - static_cast<int>(row.k) - gap + 1);
    }
    const auto q = static_cast<Eigen::Index>(design.n_cols());
    Eigen::MatrixXd x(total, q);
    Eigen::VectorXd y(total);
    Eigen::Index at = 0;
    for (const auto& row : design.rows) {
        const int copies = std::max(0, k_top - static_cast<int>(row.k) - gap + 1);
        for (int c = 0; c < copies; ++c, ++at) {
            x.row(at) = row.x.transpose();
            y[at] = row.a;
        }
    }
    return fit_logistic(x, y);
}

}  // namespace

TEST_CASE("estimating function reproduces frozen values on the hand-built panel",
          "[estimators]") {
    const PanelDataset panel = oracle_panel();

    const std::vector<std::pair<EstimatorKind, std::vector<double>>> expected{
        {EstimatorKind::naive,
         {227.99642328925728, 2.2945356339599385, 0.25052780427384314, 231.29432170783582,
          232.81247213031298}},
        {EstimatorKind::modified,
         {218.9115329237155, 2.2029389856643657, 0.19838125335765322, 222.13532717465696,
          223.58668539227213, 1.7680702239755033}},
        {EstimatorKind::controlling_future,
         {99.90280955289504, 0.9942398838602929, -0.0020868718589552014, 99.42711869381772,
          100.91847851960817, 0.3970698919864306, 97.38689068627232}},
    };

    for (const auto& [kind, want] : expected) {
        EstimatorSpec spec{simulation_spec(kind)};
        const Eigen::VectorXd u = estimating_function(panel, spec, theta_point(kind));
        REQUIRE(u.size() == static_cast<Eigen::Index>(want.size()));
        for (Eigen::Index j = 0; j < u.size(); ++j) {
            INFO("kind index " << static_cast<int>(kind) << ", component " << j);
            REQUIRE_THAT(u[j], WithinAbs(want[static_cast<std::size_t>(j)], 1e-9));
        }
    }

    // spelling out the default pairing explicitly must not change anything
    EstimatorSpec listed{simulation_spec(EstimatorKind::modified)};
    listed.pairs = std::vector<std::pair<int, int>>{{1, 2}, {1, 3}, {2, 3}};
    const Eigen::VectorXd u_listed =
        estimating_function(panel, listed, theta_point(EstimatorKind::modified));
    EstimatorSpec dflt{simulation_spec(EstimatorKind::modified)};
    const Eigen::VectorXd u_dflt =
        estimating_function(panel, dflt, theta_point(EstimatorKind::modified));
    REQUIRE((u_listed.array() == u_dflt.array()).all());

    EstimatorSpec cf_listed{simulation_spec(EstimatorKind::controlling_future)};
    cf_listed.pairs = std::vector<std::pair<int, int>>{{1, 3}};
    const Eigen::VectorXd u_cf =
        estimating_function(panel, cf_listed, theta_point(EstimatorKind::controlling_future));
    EstimatorSpec cf_dflt{simulation_spec(EstimatorKind::controlling_future)};
    REQUIRE((u_cf.array() ==
             estimating_function(panel, cf_dflt, theta_point(EstimatorKind::controlling_future))
                 .array())
                .all());
}

TEST_CASE("theta packs the effect parameter ahead of the coefficients", "[estimators]") {
    Theta t;
    t.psi = 2.5;
    t.beta = Eigen::Vector3d(0.1, -0.2, 0.3);
    const Eigen::VectorXd v = t.pack();
    REQUIRE(v.size() == 4);
    REQUIRE(v[0] == 2.5);
    REQUIRE(v[3] == 0.3);
    const Theta back = Theta::unpack(v);
    REQUIRE(back.psi == t.psi);
    REQUIRE((back.beta.array() == t.beta.array()).all());
}

TEST_CASE("logistic fit reproduces a frozen maximum-likelihood solution", "[estimators]") {
    Eigen::MatrixXd x(12, 3);
    x << 1, 0.5, -1.2,  //
        1, -0.3, 0.8,   //
        1, 1.5, 0.1,    //
        1, -0.7, -0.4,  //
        1, 0.2, 1.9,    //
        1, 0.9, -0.6,   //
        1, -1.1, 0.3,   //
        1, 0.4, 0.9,    //
        1, -0.2, -1.5,  //
        1, 1.2, 0.6,    //
        1, -0.8, -0.9,  //
        1, 0.1, 0.2;
    Eigen::VectorXd y(12);
    y << 1, 1, 1, 0, 1, 1, 0, 1, 0, 0, 0, 0;

    const LogisticFit fit = fit_logistic(x, y);
    REQUIRE(fit.converged);
    REQUIRE_FALSE(fit.separation);
    const std::vector<double> beta{-0.23358425926005755, 1.5588687863101498, 0.649103833570297};
    const std::vector<double> se{0.7177547137054774, 1.052370145504611, 0.7355075912186999};
    for (Eigen::Index j = 0; j < 3; ++j) {
        REQUIRE_THAT(fit.beta[j], WithinAbs(beta[static_cast<std::size_t>(j)], 1e-9));
        REQUIRE_THAT(fit.std_errors[j], WithinAbs(se[static_cast<std::size_t>(j)], 1e-9));
        REQUIRE_THAT(fit.std_errors[j], WithinAbs(std::sqrt(fit.cov(j, j)), 1e-12));
    }
    REQUIRE_THAT(fit.loglik, WithinAbs(-6.182556549553156, 1e-9));
}

TEST_CASE("logistic fit flags perfectly separated data", "[estimators]") {
    Eigen::MatrixXd x(8, 2);
    Eigen::VectorXd y(8);
    const double vals[8] = {-2.0, -1.5, -1.0, -0.5, 0.5, 1.0, 1.5, 2.0};
    for (Eigen::Index r = 0; r < 8; ++r) {
        x(r, 0) = 1.0;
        x(r, 1) = vals[r];
        y[r] = vals[r] > 0.0 ? 1.0 : 0.0;
    }
    const LogisticFit fit = fit_logistic(x, y);
    REQUIRE(fit.separation);
    REQUIRE_FALSE(fit.converged);
}

TEST_CASE("analytic jacobian agrees with central finite differences", "[estimators]") {
    const PanelDataset panel = m1_panel(80, 91);

    for (const auto kind : {EstimatorKind::naive, EstimatorKind::modified,
                            EstimatorKind::controlling_future}) {
        EstimatorSpec spec{simulation_spec(kind)};
        Theta theta = theta_point(kind);
        theta.psi = 0.3;
        theta.beta.setConstant(0.01);  // keeps every fitted probability interior

        const auto w = detail::build_workspace(panel, spec);
        const Eigen::MatrixXd analytic = detail::eval_jacobian(w, theta);
        const Eigen::MatrixXd numeric = fd_jacobian(panel, spec, theta);
        REQUIRE(analytic.rows() == theta.dim());
        for (Eigen::Index r = 0; r < analytic.rows(); ++r) {
            for (Eigen::Index c = 0; c < analytic.cols(); ++c) {
                INFO("kind " << static_cast<int>(kind) << " entry (" << r << "," << c << ")");
                REQUIRE_THAT(numeric(r, c),
                             WithinAbs(analytic(r, c), 1e-5 * (1.0 + std::abs(analytic(r, c)))));
            }
        }
    }
}

TEST_CASE("score clustering sums per-subject contributions exactly", "[estimators]") {
    const PanelDataset panel = m1_panel(40, 317);
    EstimatorSpec spec{simulation_spec(EstimatorKind::modified)};
    Theta theta = theta_point(EstimatorKind::modified);
    theta.psi = 0.5;
    theta.beta.setConstant(0.005);

    const auto w = detail::build_workspace(panel, spec);
    const Eigen::MatrixXd meat = detail::eval_meat(w, theta);

    Eigen::MatrixXd expected = Eigen::MatrixXd::Zero(theta.dim(), theta.dim());
    for (const auto& s : panel.subjects) {
        PanelDataset solo;
        solo.k_max = panel.k_max;
        solo.subjects = {s};
        const Eigen::VectorXd u_i = estimating_function(solo, spec, theta);
        expected.noalias() += u_i * u_i.transpose();
    }
    REQUIRE((meat - expected).lpNorm<Eigen::Infinity>() <=
            1e-9 * expected.lpNorm<Eigen::Infinity>());
}

TEST_CASE("sandwich covariance matches frozen reference values", "[estimators]") {
    // the bundled survey panel: 450 subjects, three visits, baseline and
    // time-varying covariates, so the coefficient block is well conditioned
    const PanelDataset panel = read_panel_csv(CTGEST_DATA_DIR "/growth_panel.csv");

    {
        EstimatorSpec spec{survey_spec(EstimatorKind::modified)};
        Theta th;
        th.psi = -0.3;
        th.beta.resize(9);
        th.beta << 0.2, 0.01, -0.005, 0.15, 0.05, -0.1, -0.2, -0.01, 0.08;
        const Eigen::VectorXd u = estimating_function(panel, spec, th);
        REQUIRE_THAT(u[0], WithinRel(-9781.845753744574, 1e-9));
        REQUIRE_THAT(u[1], WithinRel(-98.890837387824, 1e-9));
        REQUIRE_THAT(u[2], WithinRel(-5478.01879970872, 1e-9));

        const Eigen::MatrixXd cov = sandwich_cov(panel, spec, th);
        const std::vector<double> diag{
            0.03769210303218607,   10.33966457206401,     0.00045046459130028416,
            0.00020774926283405678, 0.023283542245104163, 0.022796776136777972,
            0.01235428764817861,   0.019958493041527164,  0.0013756800179130948,
            0.12121432453843406};
        REQUIRE(cov.rows() == 10);
        for (std::size_t j = 0; j < diag.size(); ++j) {
            const auto c = static_cast<Eigen::Index>(j);
            REQUIRE_THAT(cov(c, c), WithinRel(diag[j], 1e-8));
        }
    }

    {
        // with three visits the future-controlling design responds only at
        // the first visit, where cumulative exposure is identically zero, so
        // that term is removed to keep the fit nonsingular
        EstimatorSpec spec{survey_spec(EstimatorKind::controlling_future)};
        auto& terms = spec.propensity.terms;
        terms.erase(std::remove(terms.begin(), terms.end(), Term::cum_a), terms.end());
        Theta th;
        th.psi = -0.3;
        th.beta.resize(9);
        th.beta << 0.2, 0.01, -0.005, 0.15, 0.05, -0.1, -0.2, -0.01, 0.005;
        const Eigen::VectorXd u = estimating_function(panel, spec, th);
        REQUIRE_THAT(u[0], WithinRel(-9441.169358757812, 1e-9));
        REQUIRE_THAT(u[1], WithinRel(-95.160614505246, 1e-9));
        REQUIRE_THAT(u[2], WithinRel(-5238.937131675168, 1e-9));

        const Eigen::MatrixXd cov = sandwich_cov(panel, spec, th);
        const std::vector<double> diag{
            36.50385092264988,    1182.5695162066095, 0.14747693173127768,
            0.0005660487706014354, 0.06391203599630176, 0.669641076442335,
            0.5961097297240335,   0.0420129137285458, 0.2570741717917463,
            1.4119255196262754};
        REQUIRE(cov.rows() == 10);
        for (std::size_t j = 0; j < diag.size(); ++j) {
            const auto c = static_cast<Eigen::Index>(j);
            REQUIRE_THAT(cov(c, c), WithinRel(diag[j], 1e-8));
        }
    }
}

TEST_CASE("sandwich covariance rejects a rank-deficient stacked system", "[estimators]") {
    // two subjects supply four assignment rows against five coefficients:
    // the hand-built panel cannot identify the full design, and the bread
    // matrix must be reported as singular rather than silently inverted
    const PanelDataset panel = oracle_panel();
    EstimatorSpec mod{simulation_spec(EstimatorKind::modified)};
    REQUIRE_THROWS_WITH(sandwich_cov(panel, mod, theta_point(EstimatorKind::modified)),
                        Catch::Matchers::ContainsSubstring("singular"));
}

TEST_CASE("solver root agrees with a profiled grid search", "[estimators]") {
    const PanelDataset panel = m1_panel(400, 2718);

    for (const auto kind : {EstimatorKind::modified, EstimatorKind::controlling_future}) {
        EstimatorSpec spec{simulation_spec(kind)};
        const EstimateResult fit = solve(panel, spec);
        REQUIRE(fit.converged);

        // scan the effect parameter; at each value refit the propensity
        // coefficients by maximum likelihood and evaluate the remaining
        // scalar equation, then bracket its sign change
        double prev_psi = fit.theta_hat.psi - 0.05;
        LogisticFit prof = profile_beta(panel, spec.propensity, prev_psi);
        REQUIRE(prof.converged);
        double prev_u0 =
            estimating_function(panel, spec, Theta{prev_psi, prof.beta})[0];
        bool bracketed = false;
        double root = 0.0;
        for (int step = 1; step <= 50; ++step) {
            const double psi = fit.theta_hat.psi - 0.05 + 0.002 * step;
            prof = profile_beta(panel, spec.propensity, psi);
            REQUIRE(prof.converged);
            const double u0 = estimating_function(panel, spec, Theta{psi, prof.beta})[0];
            if (prev_u0 == 0.0 || (prev_u0 < 0.0) != (u0 < 0.0)) {
                root = prev_psi + (psi - prev_psi) * prev_u0 / (prev_u0 - u0);
                bracketed = true;
                break;
            }
            prev_psi = psi;
            prev_u0 = u0;
        }
        REQUIRE(bracketed);
        REQUIRE_THAT(root, WithinAbs(fit.theta_hat.psi, 0.01));
    }
}

TEST_CASE("estimators recover the effect they are built for", "[estimators]") {
    const PanelDataset panel = m1_panel(4000, 77);

    const EstimateResult mod = solve(panel, EstimatorSpec{simulation_spec(EstimatorKind::modified)});
    REQUIRE(mod.converged);
    REQUIRE(mod.identification.rank_ok);
    REQUIRE(mod.std_errors[0] > 0.0);
    REQUIRE(mod.std_errors[0] < 0.2);
    REQUIRE(std::abs(mod.theta_hat.psi - 1.0) <= 3.0 * mod.std_errors[0]);

    const EstimateResult cf =
        solve(panel, EstimatorSpec{simulation_spec(EstimatorKind::controlling_future)});
    REQUIRE(cf.converged);
    REQUIRE(cf.identification.rank_ok);
    REQUIRE(std::abs(cf.theta_hat.psi - 1.0) <= 3.0 * cf.std_errors[0]);

    // ignoring between-visit exposure attenuates the recovered effect
    const EstimateResult naive = solve(panel, EstimatorSpec{simulation_spec(EstimatorKind::naive)});
    REQUIRE(naive.converged);
    REQUIRE(naive.theta_hat.psi < 0.9);

    // and a null effect is recovered as such
    const PanelDataset null_panel = m1_panel(2000, 313, 0.0);
    const EstimateResult null_fit =
        solve(null_panel, EstimatorSpec{simulation_spec(EstimatorKind::modified)});
    REQUIRE(null_fit.converged);
    REQUIRE(std::abs(null_fit.theta_hat.psi) <= 3.0 * null_fit.std_errors[0]);
}

TEST_CASE("duplicating every subject halves the sandwich covariance", "[estimators]") {
    const PanelDataset panel = m1_panel(150, 5);
    PanelDataset doubled = panel;
    for (const auto& s : panel.subjects) {
        PanelSubject copy = s;
        copy.id += "_dup";
        doubled.subjects.push_back(std::move(copy));
    }

    EstimatorSpec spec{simulation_spec(EstimatorKind::modified)};
    const EstimateResult base = solve(panel, spec);
    const EstimateResult twice = solve(doubled, spec);
    REQUIRE(base.converged);
    REQUIRE(twice.converged);
    REQUIRE_THAT(twice.theta_hat.psi, WithinAbs(base.theta_hat.psi, 1e-9));
    for (Eigen::Index j = 0; j < base.covariance.rows(); ++j) {
        REQUIRE_THAT(twice.covariance(j, j), WithinRel(base.covariance(j, j) / 2.0, 1e-6));
        REQUIRE_THAT(twice.std_errors[j], WithinRel(base.std_errors[j] / std::sqrt(2.0), 1e-6));
    }
}

TEST_CASE("identification check measures conditioning of both matrices", "[estimators]") {
    const Eigen::MatrixXd eye = Eigen::MatrixXd::Identity(3, 3);
    const IdentificationInfo ok = identification_check(eye, eye);
    REQUIRE(ok.rank_ok);
    REQUIRE_THAT(ok.cond_b, WithinAbs(1.0, 1e-12));
    REQUIRE_THAT(ok.cond_cov_u, WithinAbs(1.0, 1e-12));

    Eigen::MatrixXd degenerate = eye;
    degenerate.col(2) = degenerate.col(1);  // collinear columns
    const IdentificationInfo bad = identification_check(degenerate, eye);
    REQUIRE_FALSE(bad.rank_ok);
    REQUIRE(bad.cond_b > 1e10);

    REQUIRE_THROWS_AS(identification_check(eye, Eigen::MatrixXd::Identity(2, 2)),
                      std::invalid_argument);
}

TEST_CASE("degenerate inputs fail fast with clear messages", "[estimators]") {
    // constant treatment: the propensity fit has nothing to explain
    PanelDataset constant;
    constant.k_max = 2;
    for (int i = 0; i < 4; ++i) {
        PanelSubject s;
        s.id = "c" + std::to_string(i);
        s.y_star = {100.0, 101.0 + i, 102.0};
        s.a_star = {1, 1, 1};
        s.cum_a = {0.0, 1.0, 2.0};
        constant.subjects.push_back(std::move(s));
    }
    const EstimateResult res =
        solve(constant, EstimatorSpec{simulation_spec(EstimatorKind::modified)});
    REQUIRE_FALSE(res.converged);
    REQUIRE(res.message == "treatment is constant across all design rows");

    const PanelDataset panel = oracle_panel();

    // coefficient vector sized for the wrong design
    EstimatorSpec mod{simulation_spec(EstimatorKind::modified)};
    Theta short_theta;
    short_theta.beta = Eigen::Vector3d::Zero();
    REQUIRE_THROWS_AS(estimating_function(panel, mod, short_theta), std::invalid_argument);

    // pair lists that leave nothing to estimate or break the ordering rule
    EstimatorSpec empty_pairs{simulation_spec(EstimatorKind::modified)};
    empty_pairs.pairs = std::vector<std::pair<int, int>>{};
    REQUIRE_THROWS_WITH(estimating_function(panel, empty_pairs, theta_point(EstimatorKind::modified)),
                        Catch::Matchers::ContainsSubstring("empty pair set"));

    EstimatorSpec dangling{simulation_spec(EstimatorKind::modified)};
    dangling.pairs = std::vector<std::pair<int, int>>{{0, 2}};  // no design row at visit 0
    REQUIRE_THROWS_WITH(estimating_function(panel, dangling, theta_point(EstimatorKind::modified)),
                        Catch::Matchers::ContainsSubstring("empty pair set"));

    EstimatorSpec too_close{simulation_spec(EstimatorKind::controlling_future)};
    too_close.pairs = std::vector<std::pair<int, int>>{{2, 3}};  // adjacent outcome is reserved
    REQUIRE_THROWS_WITH(
        estimating_function(panel, too_close, theta_point(EstimatorKind::controlling_future)),
        Catch::Matchers::ContainsSubstring("pairing rule"));
}

TEST_CASE("solver is deterministic and insensitive to the starting point", "[estimators]") {
    const PanelDataset panel = m1_panel(200, 11);
    EstimatorSpec spec{simulation_spec(EstimatorKind::modified)};

    const EstimateResult a = solve(panel, spec);
    const EstimateResult b = solve(panel, spec);
    REQUIRE(a.converged);
    REQUIRE(a.theta_hat.psi == b.theta_hat.psi);
    REQUIRE((a.theta_hat.beta.array() == b.theta_hat.beta.array()).all());
    REQUIRE((a.covariance.array() == b.covariance.array()).all());
    REQUIRE(a.iterations == b.iterations);

    Theta warm;
    warm.psi = 0.7;
    warm.beta = a.theta_hat.beta;
    const EstimateResult c = solve(panel, spec, warm);
    REQUIRE(c.converged);
    REQUIRE_THAT(c.theta_hat.psi, WithinAbs(a.theta_hat.psi, 1e-7));
}

TEST_CASE("treatment-assignment diagnostic separates signal from noise", "[estimators]") {
    // sequentially randomized data: the later treatment-free outcome should
    // carry no information about today's treatment state
    ModelConfig cfg;
    cfg.n_subjects = 2500;
    PanelDataset panel = discretize_dataset(generate_dataset(cfg, 424), cfg.k_max());
    REQUIRE(panel.has_y0());

    const DiagnosticResult plain = ignorability_diagnostic(panel, 2, 4, false);
    REQUIRE(plain.converged);
    REQUIRE(plain.n_rows == 2500);
    REQUIRE(plain.y0_future().name == "y0_future");
    REQUIRE(std::abs(plain.y0_future().z) < 3.0);

    const DiagnosticResult controlled = ignorability_diagnostic(panel, 2, 4, true);
    REQUIRE(controlled.converged);
    REQUIRE(controlled.y0_next().name == "y0_next");
    REQUIRE(std::abs(controlled.y0_future().z) < 3.0);

    // recorded covariates widen the regression when present
    ModelConfig m4;
    m4.model_id = ModelId::M4;
    m4.n_subjects = 200;
    PanelDataset with_l = discretize_dataset(generate_dataset(m4, 777), m4.k_max());
    const DiagnosticResult wide = ignorability_diagnostic(with_l, 2, 4, true);
    REQUIRE(wide.coef.size() == 9);
    REQUIRE(wide.coef[2].name == "l_lag_lead");
    REQUIRE(wide.coef[3].name == "l_now_lead");
    REQUIRE(wide.idx_y0_next == 7);
    REQUIRE(wide.idx_y0_future == 8);

    // argument validation
    REQUIRE_THROWS_AS(ignorability_diagnostic(panel, 0, 3, false), std::invalid_argument);
    REQUIRE_THROWS_AS(ignorability_diagnostic(panel, 3, 3, false), std::invalid_argument);
    REQUIRE_THROWS_AS(ignorability_diagnostic(panel, 2, 3, true), std::invalid_argument);
    REQUIRE_THROWS_AS(ignorability_diagnostic(panel, 2, 9, false), std::invalid_argument);
    std::vector<std::vector<double>> short_list(panel.n_subjects() - 1);
    REQUIRE_THROWS_AS(ignorability_diagnostic(panel, short_list, 2, 4, false),
                      std::invalid_argument);
    std::vector<std::vector<double>> ragged(panel.n_subjects());  // rows of the wrong length
    REQUIRE_THROWS_AS(ignorability_diagnostic(panel, ragged, 2, 4, false),
                      std::invalid_argument);

    const PanelDataset bare = oracle_panel();
    REQUIRE_THROWS_AS(ignorability_diagnostic(bare, 1, 3, false), std::invalid_argument);
}

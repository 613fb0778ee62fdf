#include "doctest.h"

#include <cvqkd/errors.hpp>
#include <cvqkd/monte_carlo.hpp>

#include <cmath>

using namespace cvqkd;

namespace {

SimConfig homodyne_cfg() {
    SimConfig cfg;
    cfg.src.V = 0.5;
    cfg.src.Vx = 10.0;
    cfg.src.Vp = 10.0;
    cfg.T = 0.5;
    cfg.eps = 0.05;
    cfg.scheme = MeasurementScheme::biased_homodyne(0.5);
    cfg.m = 4000;
    cfg.n = 4000;
    cfg.repetitions = 400;
    cfg.seed = 11;
    return cfg;
}

const VarianceReportRow& row(const std::vector<VarianceReportRow>& rows,
                             const std::string& name) {
    for (const auto& r : rows)
        if (r.quantity == name) return r;
    REQUIRE(false);
    return rows.front();
}

}  // namespace

TEST_CASE("simulation configs are validated") {
    auto cfg = homodyne_cfg();
    CHECK_NOTHROW(cfg.validate());
    cfg.T = 0.0;
    CHECK_THROWS_AS(cfg.validate(), DomainError);
    cfg = homodyne_cfg();
    cfg.eps = -0.1;
    CHECK_THROWS_AS(cfg.validate(), DomainError);
    cfg = homodyne_cfg();
    cfg.repetitions = 0;
    CHECK_THROWS_AS(cfg.validate(), DomainError);
    cfg = homodyne_cfg();
    cfg.m = 0;
    CHECK_THROWS_AS(cfg.validate(), DomainError);
    cfg = homodyne_cfg();
    cfg.scheme = MeasurementScheme::heterodyne(0.6);
    cfg.n = 5000;  // split detection needs m == n
    CHECK_THROWS_AS(cfg.validate(), DomainError);
    cfg = homodyne_cfg();
    cfg.src.Vx = 0.0;
    cfg.src.Vp = 0.0;
    CHECK_THROWS_AS(cfg.validate(), DomainError);
}

TEST_CASE("sampling is deterministic and thread count invariant") {
    auto cfg = homodyne_cfg();
    cfg.repetitions = 32;
    auto a = simulate_block(cfg, 1);
    auto b = simulate_block(cfg, 4);
    auto c = simulate_block(cfg, 8);
    REQUIRE(a.reps.size() == 32);
    REQUIRE(b.reps.size() == 32);
    for (size_t i = 0; i < a.reps.size(); ++i) {
        CHECK(a.reps[i].T_hat == b.reps[i].T_hat);
        CHECK(a.reps[i].V_eps_x == b.reps[i].V_eps_x);
        CHECK(a.reps[i].V_eps_p == b.reps[i].V_eps_p);
        CHECK(a.reps[i].T_hat == c.reps[i].T_hat);
    }

    auto cfg2 = cfg;
    cfg2.seed = 12;
    auto d = simulate_block(cfg2, 1);
    bool any_diff = false;
    for (size_t i = 0; i < a.reps.size(); ++i)
        any_diff = any_diff || d.reps[i].T_hat != a.reps[i].T_hat;
    CHECK(any_diff);
}

TEST_CASE("homodyne estimators are unbiased and match the variance formulas") {
    auto cfg = homodyne_cfg();
    auto result = simulate_block(cfg, 4);
    auto rows = empirical_variance_report(result, cfg);

    auto& t = row(rows, "T_hat");
    CHECK(std::abs(t.true_value - 0.5) < 1e-15);
    CHECK_FALSE(t.bias_flagged);
    CHECK(t.rse_defined);
    CHECK(t.within_5rse);

    auto& ex = row(rows, "V_eps_x");
    CHECK(std::abs(ex.true_value - 0.025) < 1e-15);
    CHECK_FALSE(ex.bias_flagged);
    CHECK(ex.within_5rse);

    auto& ep = row(rows, "V_eps_p");
    CHECK(std::abs(ep.true_value - 0.025) < 1e-15);
    CHECK_FALSE(ep.bias_flagged);
    CHECK(ep.within_5rse);

    // formula variances at these sizes
    auto stats = estimator_variances_homodyne(cfg.src, cfg.T, cfg.eps, 4000, 4000);
    CHECK(std::abs(t.formula_var - stats.var_T) < 1e-15);
    CHECK(std::abs(ex.formula_var - stats.var_eps_x) < 1e-15);
    CHECK(std::abs(ep.formula_var - stats.var_eps_p) < 1e-15);
}

TEST_CASE("trusted and untrusted noise shift the estimator targets") {
    auto cfg = homodyne_cfg();
    cfg.src.dV_trusted = 1.0;
    cfg.src.dV_untrusted = 0.2;
    cfg.T = 0.9;
    auto rows = empirical_variance_report(simulate_block(cfg, 4), cfg);
    // the p estimator subtracts the trusted part but keeps the untrusted one
    CHECK(std::abs(row(rows, "V_eps_p").true_value - 0.9 * (0.05 + 0.2)) < 1e-15);
    CHECK(std::abs(row(rows, "V_eps_x").true_value - 0.9 * 0.05) < 1e-15);
    CHECK_FALSE(row(rows, "T_hat").bias_flagged);
    CHECK_FALSE(row(rows, "V_eps_p").bias_flagged);
    CHECK(row(rows, "V_eps_p").within_5rse);
}

TEST_CASE("pooled symmetric estimator appears only in the coherent symmetric case") {
    auto cfg = homodyne_cfg();
    cfg.src.V = 1.0;
    cfg.src.Vx = 5.0;
    cfg.src.Vp = 5.0;
    auto rows = empirical_variance_report(simulate_block(cfg, 4), cfg);
    auto& joint = row(rows, "V_eps_joint");
    CHECK(std::abs(joint.formula_var -
                   coherent_symmetric_noise_variance(0.025, 4000, 4000)) < 1e-15);
    CHECK(joint.within_5rse);
    CHECK_FALSE(joint.bias_flagged);

    auto squeezed = homodyne_cfg();
    auto rows2 = empirical_variance_report(simulate_block(squeezed, 4), squeezed);
    for (const auto& r : rows2) CHECK(r.quantity != "V_eps_joint");
}

TEST_CASE("split detection estimators with vacuum correction") {
    auto cfg = homodyne_cfg();
    cfg.scheme = MeasurementScheme::heterodyne(0.6);
    cfg.m = cfg.n = 4000;
    auto rows = empirical_variance_report(simulate_block(cfg, 4), cfg);
    for (const char* q : {"T_hat", "V_eps_x", "V_eps_p"}) {
        CHECK_FALSE(row(rows, q).bias_flagged);
        CHECK(row(rows, q).within_5rse);
    }
    auto stats = estimator_variances_heterodyne(cfg.src, cfg.T, cfg.eps, 4000, 4000, 0.6);
    CHECK(std::abs(row(rows, "V_eps_x").formula_var - stats.var_eps_x) < 1e-15);
    CHECK(std::abs(row(rows, "V_eps_p").formula_var - stats.var_eps_p) < 1e-15);
}

TEST_CASE("verbatim split scaling is flagged as biased") {
    auto cfg = homodyne_cfg();
    cfg.scheme = MeasurementScheme::heterodyne(0.5);
    cfg.m = cfg.n = 4000;
    cfg.verbatim_het_scaling = true;
    auto rows = empirical_variance_report(simulate_block(cfg, 4), cfg);
    // rescaling the outcomes by 1/t instead of 1/sqrt(t) without vacuum
    // subtraction overshoots the noise estimate
    CHECK(row(rows, "V_eps_x").bias_flagged);
    CHECK(row(rows, "V_eps_x").mean_bias_sigma > 0);
}

TEST_CASE("noiseless lossless channel estimates are clean") {
    SimConfig cfg;
    cfg.src.V = 0.5;
    cfg.src.Vx = 8.0;
    cfg.src.Vp = 8.0;
    cfg.T = 1.0;
    cfg.eps = 0.0;
    cfg.scheme = MeasurementScheme::biased_homodyne(0.5);
    cfg.m = cfg.n = 2000;
    cfg.repetitions = 200;
    cfg.seed = 3;
    auto rows = empirical_variance_report(simulate_block(cfg, 2), cfg);
    CHECK(std::abs(row(rows, "T_hat").empirical_mean - 1.0) < 0.01);
    CHECK(std::abs(row(rows, "V_eps_x").empirical_mean) < 0.01);
    CHECK_FALSE(row(rows, "T_hat").bias_flagged);
}

TEST_CASE("single repetition leaves the spread undefined") {
    auto cfg = homodyne_cfg();
    cfg.repetitions = 1;
    auto rows = empirical_variance_report(simulate_block(cfg, 1), cfg);
    CHECK_FALSE(row(rows, "T_hat").rse_defined);
    CHECK_FALSE(row(rows, "T_hat").within_5rse);
}

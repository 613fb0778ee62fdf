#include "doctest.h"

#include <cvqkd/errors.hpp>
#include <cvqkd/finite_size.hpp>

#include <cmath>

using namespace cvqkd;

namespace {

SourceSpec source(double V, double Vx, double Vp, double dvt = 0.0, double dvu = 0.0) {
    SourceSpec s;
    s.V = V;
    s.Vx = Vx;
    s.Vp = Vp;
    s.dV_trusted = dvt;
    s.dV_untrusted = dvu;
    return s;
}

BlockAllocation alloc(double N, double m, double n, double n_k, bool disclose = false) {
    BlockAllocation a;
    a.N = N;
    a.m = m;
    a.n = n;
    a.n_k = n_k;
    a.disclose = disclose;
    return a;
}

}  // namespace

TEST_CASE("privacy amplification correction") {
    CHECK(std::abs(delta_n(1e7) - 0.012948917972150444) < 1e-12);
    CHECK(delta_n(1e6) > delta_n(1e7));
    CHECK(delta_n(1e10) < 1e-3);
    // quadruple the samples, halve the correction
    CHECK(std::abs(delta_n(4e8) - 0.5 * delta_n(1e8)) < 1e-15);
    CHECK_THROWS_AS(delta_n(0.0), DomainError);
    CHECK_THROWS_AS(delta_n(-5.0), DomainError);
    CHECK_THROWS_AS(delta_n(1e7, 0.0), DomainError);
    CHECK_THROWS_AS(delta_n(1e7, 3.0), DomainError);
}

TEST_CASE("worst case offsets with floors") {
    EstimatorStats stats{1e-4, 4e-6, 9e-6};
    auto b = worst_case_bounds(0.5, 0.02, 0.03, stats);
    CHECK(std::abs(b.T_low - (0.5 - 6.5 * 0.01)) < 1e-15);
    CHECK(std::abs(b.V_eps_x_up - (0.02 + 6.5 * 0.002)) < 1e-15);
    CHECK(std::abs(b.V_eps_p_up - (0.03 + 6.5 * 0.003)) < 1e-15);

    auto floored = worst_case_bounds(1e-15, -0.5, -0.5, stats);
    CHECK(floored.T_low == 1e-12);
    CHECK(floored.V_eps_x_up == 0.0);
    CHECK(floored.V_eps_p_up == 0.0);

    auto wide = worst_case_bounds(0.05, 0.0, 0.0, stats, 6.5);
    CHECK(wide.T_low == 1e-12);  // offset exceeds the estimate

    CHECK_THROWS_AS(worst_case_bounds(0.5, 0.0, 0.0, stats, -1.0), DomainError);
    CHECK_THROWS_AS(worst_case_bounds(0.5, 0.0, 0.0, EstimatorStats{-1.0, 0.0, 0.0}),
                    DomainError);
}

TEST_CASE("block allocation constraints per reception type") {
    using K = MeasurementScheme::Kind;
    CHECK_NOTHROW(alloc(1e6, 4e5, 5e5, 4e5).validate(K::HomodyneX));
    CHECK_NOTHROW(alloc(1e6, 4e5, 4e5, 2e5, true).validate(K::BiasedHomodyne));
    CHECK_THROWS_AS(alloc(1e6, 5e5, 4e5, 2e5, true).validate(K::BiasedHomodyne), DomainError);
    CHECK_THROWS_AS(alloc(1e6, 7e5, 7e5, 1e5).validate(K::HomodyneX), DomainError);
    CHECK_THROWS_AS(alloc(1e6, 4e5, 5e5, 2e6).validate(K::HomodyneX), DomainError);
    CHECK_THROWS_AS(alloc(0, 0, 0, 0).validate(K::HomodyneX), DomainError);
    CHECK_THROWS_AS(alloc(1e6, -1, 5e5, 1e5).validate(K::HomodyneX), DomainError);

    // split reception samples both quadratures in every round
    CHECK_NOTHROW(alloc(1e6, 1e6, 1e6, 1e6).validate(K::Heterodyne));
    CHECK_THROWS_AS(alloc(1e6, 4e5, 5e5, 4e5).validate(K::Heterodyne), DomainError);
    CHECK_NOTHROW(alloc(1e6, 4e5, 4e5, 6e5, true).validate(K::Heterodyne));
    CHECK_THROWS_AS(alloc(1e6, 4e5, 4e5, 7e5, true).validate(K::Heterodyne), DomainError);
}

TEST_CASE("estimator variances for switched homodyne") {
    auto st = estimator_variances_homodyne(source(0.5, 10, 10), 0.5, 0.05, 1e4, 1e4);
    CHECK(std::abs(st.var_T - 0.0001115) < 1e-12);
    CHECK(std::abs(st.var_eps_x - 0.000148) < 1e-12);
    CHECK(std::abs(st.var_eps_p - 0.000576625) < 1e-12);

    // trusted preparation noise changes both the p noise reference and the
    // correlator weighting
    auto tr = estimator_variances_homodyne(source(0.5, 10, 10, 1.0, 0.05), 0.9, 0.05, 2e4, 1e4);
    CHECK(std::abs(tr.var_T - 0.00023272) < 1e-12);
    CHECK(std::abs(tr.var_eps_x - 9.35825e-05) < 1e-13);
    CHECK(std::abs(tr.var_eps_p - 0.0026013) < 1e-12);

    // doubling the sample counts halves every variance
    auto half = estimator_variances_homodyne(source(0.5, 10, 10), 0.5, 0.05, 2e4, 2e4);
    CHECK(std::abs(half.var_T - st.var_T / 2) < 1e-15);
    CHECK(std::abs(half.var_eps_x - st.var_eps_x / 2) < 1e-15);
    CHECK(std::abs(half.var_eps_p - st.var_eps_p / 2) < 1e-15);

    CHECK_THROWS_AS(estimator_variances_homodyne(source(0.5, 10, 10), 0.5, 0.05, 0, 1e4),
                    DomainError);
    CHECK_THROWS_AS(estimator_variances_homodyne(source(0.5, 10, 10), 1.5, 0.05, 1e4, 1e4),
                    DomainError);
}

TEST_CASE("estimator variances for split detection") {
    auto st = estimator_variances_heterodyne(source(0.5, 10, 10), 0.5, 0.05, 1e4, 1e4, 0.6);
    CHECK(std::abs(st.var_T - 0.00012233333333333334) < 1e-13);
    CHECK(std::abs(st.var_eps_x - 0.00044626388888888906) < 1e-13);
    CHECK(std::abs(st.var_eps_p - 0.0019524583333333334) < 1e-12);

    // the vacuum penalty of the split always inflates the variances relative
    // to dedicated homodyne with the same sample counts
    auto hom = estimator_variances_homodyne(source(0.5, 10, 10), 0.5, 0.05, 1e4, 1e4);
    CHECK(st.var_eps_x > hom.var_eps_x);
    CHECK(st.var_eps_p > hom.var_eps_p);

    // starving one arm makes the pooled transmittance estimate useless: the
    // dark arm contributes pure vacuum at full weight
    auto dark = estimator_variances_heterodyne(source(0.5, 10, 10), 0.5, 0.05, 1e4, 1e4,
                                               1.0 - 1e-9);
    CHECK(dark.var_T > 100 * st.var_T);
    CHECK(dark.var_eps_p > 100 * st.var_eps_p);

    CHECK_THROWS_AS(estimator_variances_heterodyne(source(0.5, 10, 10), 0.5, 0.05, 1e4, 1e4, 0.0),
                    DomainError);
}

TEST_CASE("pooled noise variance in the symmetric coherent case") {
    CHECK(std::abs(coherent_symmetric_noise_variance(0.025, 1e4, 1e4) -
                   2 * 1.025 * 1.025 / 2e4) < 1e-15);
    CHECK_THROWS_AS(coherent_symmetric_noise_variance(0.025, 0, 0), DomainError);
}

TEST_CASE("finite block key converges to the asymptotic rate") {
    auto src = source(0.5, 10, 10);
    auto ch = ChannelSpec::fixed(std::pow(10.0, -0.2), 0.05);
    auto scheme = MeasurementScheme::homodyne_x();
    const auto side = ReconciliationSide::Reverse;

    const double k_inf = key_rate_asymptotic(src, ch, scheme, side, 0.95).key_rate;
    REQUIRE(k_inf > 0);

    double prev = -1.0, prev_gap = 1e300;
    for (double N : {1e6, 1e8, 1e10, 1e12}) {
        auto r = key_rate_finite(src, ch, scheme, side, 0.95, alloc(N, N / 4, N / 4, N));
        CHECK(r.rate.key_rate <= k_inf + 1e-12);
        CHECK(r.rate.key_rate >= prev - 1e-12);
        const double gap = k_inf - r.rate.key_rate;
        CHECK(gap <= prev_gap + 1e-12);
        prev = r.rate.key_rate;
        prev_gap = gap;
    }
    CHECK(prev_gap < 1e-3);
}

TEST_CASE("finite block bookkeeping") {
    auto src = source(0.5, 10, 10);
    auto ch = ChannelSpec::fixed(std::pow(10.0, -0.2), 0.05);
    auto scheme = MeasurementScheme::homodyne_x();
    const auto side = ReconciliationSide::Reverse;
    const double N = 1e7;

    auto r = key_rate_finite(src, ch, scheme, side, 0.95, alloc(N, N / 2, N / 2, N / 2));
    CHECK(r.rate.key_rate > 0);
    CHECK(r.bounds.T_low < std::pow(10.0, -0.2));
    CHECK(r.bounds.V_eps_x_up > std::pow(10.0, -0.2) * 0.05);
    CHECK(std::abs(r.delta - delta_n(N / 2)) < 1e-15);

    // the disclose flag constrains the bookkeeping but identical counts give
    // the identical rate
    auto kept = key_rate_finite(src, ch, scheme, side, 0.95, alloc(N, N / 4, N / 4, N / 2));
    auto burned = key_rate_finite(src, ch, scheme, side, 0.95,
                                  alloc(N, N / 4, N / 4, N / 2, true));
    CHECK(std::abs(kept.rate.key_rate - burned.rate.key_rate) < 1e-12);

    // more estimation samples tighten the worst-case channel
    auto tight = key_rate_finite(src, ch, scheme, side, 0.95, alloc(N, N / 2, N / 2, N / 2));
    auto loose = key_rate_finite(src, ch, scheme, side, 0.95, alloc(N, N / 10, N / 10, N / 2));
    CHECK(tight.bounds.T_low > loose.bounds.T_low);
    CHECK(tight.rate.key_rate > loose.rate.key_rate);

    // a hopeless channel clamps at zero
    auto dead = key_rate_finite(src, ChannelSpec::fixed(0.05, 0.5), scheme, side, 0.95,
                                alloc(1e5, 4e4, 4e4, 2e4));
    CHECK(dead.rate.key_rate == 0.0);

    CHECK_THROWS_AS(key_rate_finite(src, ChannelSpec::fading({{0.5, 1.0}}, 0.0), scheme, side,
                                    0.95, alloc(N, N / 2, N / 2, N / 2)),
                    DomainError);
}

TEST_CASE("worst case bounds shrink the finite key against the true channel rate") {
    auto src = source(0.5, 10, 10, 0.5, 0.02);
    auto ch = ChannelSpec::fixed(0.6, 0.03);
    auto scheme = MeasurementScheme::biased_homodyne(0.5);
    for (double N : {1e7, 1e9}) {
        auto r = key_rate_finite(src, ch, scheme, ReconciliationSide::Reverse, 0.95,
                                 alloc(N, N / 4, N / 4, N / 2));
        auto full = key_rate_asymptotic(src, ch, scheme, ReconciliationSide::Reverse, 0.95);
        CHECK(r.rate.key_rate < full.key_rate);
        CHECK(r.rate.key_rate > 0);
    }
}

#include "cvqkd/finite_size.hpp"

#include <algorithm>
#include <cmath>

namespace cvqkd {

namespace {

void check_counts(double m, double n) {
    if (!(m >= 1) || !(n >= 1)) {
        throw DomainError("estimation needs at least one sample per quadrature");
    }
}

void check_channel_params(double T, double eps) {
    if (!(T > 0) || T > 1) throw DomainError("transmittance must lie in (0, 1]");
    if (!(eps >= 0)) throw DomainError("excess noise must be non-negative");
}

} // namespace

void BlockAllocation::validate(MeasurementScheme::Kind kind) const {
    if (!(N >= 1)) throw DomainError("block size N must be at least 1");
    if (!(m >= 0) || !(n >= 0) || !(n_k >= 0)) {
        throw DomainError("allocation counts must be non-negative");
    }
    const bool split = kind == MeasurementScheme::Kind::Heterodyne;
    if (split) {
        if (m != n) throw DomainError("split detection measures both quadratures per round: m must equal n");
        if (m > N) throw DomainError("estimation rounds exceed block size");
        if (disclose ? (m + n_k > N) : (n_k > N)) {
            throw DomainError("allocation exceeds block size");
        }
        return;
    }
    if (disclose) {
        if (m + n + n_k > N) throw DomainError("disclosed allocation m+n+n_k exceeds block size");
    } else {
        if (m + n > N) throw DomainError("estimation rounds m+n exceed block size");
        if (n_k > N) throw DomainError("key rounds exceed block size");
    }
}

EstimatorStats estimator_variances_homodyne(const SourceSpec& src, double T, double eps,
                                            double m, double n) {
    src.validate();
    check_channel_params(T, eps);
    check_counts(m, n);

    const Real t = T, e = eps;
    const Real v = src.V;
    const Real vx = src.Vx;
    const Real vp = src.Vp;
    const Real dvt = src.dV_trusted;
    const Real dvu = src.dV_untrusted;

    if (n * vp + m * vx <= 0) {
        throw DomainError("transmittance estimation needs nonzero pooled modulation");
    }

    // The sender's data variance in p is the raw modulation; the trusted
    // preparation noise rides along in the received variance, hence the
    // dvt shifts below.
    const Real v_nx = 1 + t * (v + e - 1);
    const Real v_np = 1 + t * (1 / v + e + dvu - 1);
    const Real weight = n * vp + m * vx;
    const Real ups2 = 4 * t *
                      (n * vp * (v_np + dvt + 2 * t * vp) + m * vx * (v_nx + 2 * t * vx)) /
                      (weight * weight);

    EstimatorStats st;
    st.var_T = static_cast<double>(ups2);
    st.var_eps_x = static_cast<double>((2 / Real(m)) * v_nx * v_nx + (1 - v) * (1 - v) * ups2);
    const Real recv_p = 1 + t * (1 / v + dvt + e + dvu - 1);
    const Real slope_p = 1 - 1 / v - dvt;
    st.var_eps_p = static_cast<double>((2 / Real(n)) * recv_p * recv_p + slope_p * slope_p * ups2);
    return st;
}

EstimatorStats estimator_variances_heterodyne(const SourceSpec& src, double T, double eps,
                                              double m, double n, double t_het) {
    src.validate();
    check_channel_params(T, eps);
    check_counts(m, n);
    if (!(t_het > 0 && t_het < 1)) {
        throw DomainError("detector beamsplitter transmittance must lie in (0, 1)");
    }

    const Real t = T, e = eps, th = t_het;
    const Real v = src.V;
    const Real vx = src.Vx;
    const Real vp = src.Vp;
    const Real dvt = src.dV_trusted;
    const Real dvu = src.dV_untrusted;

    if (n * vp + m * vx <= 0) {
        throw DomainError("transmittance estimation needs nonzero pooled modulation");
    }

    // Arm rescaling turns the detector vacuum into a 1/t (resp. 1/(1-t))
    // noise floor on top of the channel output.
    const Real v_nx = 1 / th + t * (v + e - 1);
    const Real v_np = 1 / (1 - th) + t * (1 / v + e + dvu - 1);
    const Real weight = n * vp + m * vx;
    const Real ups2 = 4 * t *
                      (n * vp * (v_np + dvt + 2 * t * vp) + m * vx * (v_nx + 2 * t * vx)) /
                      (weight * weight);

    EstimatorStats st;
    st.var_T = static_cast<double>(ups2);
    st.var_eps_x = static_cast<double>((2 / Real(m)) * v_nx * v_nx + (1 - v) * (1 - v) * ups2);
    const Real recv_p = 1 / (1 - th) + t * (1 / v + dvt + e + dvu - 1);
    const Real slope_p = 1 - 1 / v - dvt;
    st.var_eps_p = static_cast<double>((2 / Real(n)) * recv_p * recv_p + slope_p * slope_p * ups2);
    return st;
}

WorstCaseBounds worst_case_bounds(double T_hat, double eps_x_hat, double eps_p_hat,
                                  const EstimatorStats& stats, double confidence) {
    if (!(confidence >= 0)) throw DomainError("confidence multiple must be non-negative");
    if (!(stats.var_T >= 0) || !(stats.var_eps_x >= 0) || !(stats.var_eps_p >= 0)) {
        throw DomainError("estimator variances must be non-negative and finite");
    }
    WorstCaseBounds b;
    b.T_low = std::max(1e-12, T_hat - confidence * std::sqrt(stats.var_T));
    b.V_eps_x_up = std::max(0.0, eps_x_hat + confidence * std::sqrt(stats.var_eps_x));
    b.V_eps_p_up = std::max(0.0, eps_p_hat + confidence * std::sqrt(stats.var_eps_p));
    return b;
}

double delta_n(double n, double eps_bar) {
    if (!(n >= 1)) throw DomainError("key block length must be at least 1");
    if (!(eps_bar > 0) || eps_bar >= 1) throw DomainError("eps_bar must lie in (0, 1)");
    return 7.0 * std::sqrt(std::log2(2.0 / eps_bar) / n);
}

double coherent_symmetric_noise_variance(double V_eps, double m, double n) {
    if (!(V_eps >= 0)) throw DomainError("noise variance must be non-negative");
    check_counts(m, n);
    return 2.0 * (1.0 + V_eps) * (1.0 + V_eps) / (m + n);
}

FiniteKeyResult key_rate_finite(const SourceSpec& src, const ChannelSpec& ch,
                                const MeasurementScheme& scheme, ReconciliationSide side,
                                double beta, const BlockAllocation& alloc,
                                double eps_bar, double confidence) {
    src.validate();
    ch.validate();
    scheme.validate();
    if (ch.kind != ChannelSpec::Kind::Fixed) {
        throw DomainError("finite-size analysis assumes a stable channel");
    }
    alloc.validate(scheme.kind);

    const EstimatorStats stats =
        scheme.kind == MeasurementScheme::Kind::Heterodyne
            ? estimator_variances_heterodyne(src, ch.T, ch.epsilon, alloc.m, alloc.n,
                                             scheme.t_het)
            : estimator_variances_homodyne(src, ch.T, ch.epsilon, alloc.m, alloc.n);

    // Planning mode: plug in the expected estimates for the assumed true
    // channel. The x estimator targets T*eps, the p estimator additionally
    // absorbs the untrusted preparation noise.
    const double ex_hat = ch.T * ch.epsilon;
    const double ep_hat = ch.T * (ch.epsilon + src.dV_untrusted);
    const WorstCaseBounds bounds = worst_case_bounds(ch.T, ex_hat, ep_hat, stats, confidence);

    // The worst-case output noises already contain every untrusted
    // contribution, so the inner evaluation must not add dV_untrusted again.
    SourceSpec inner_src = src;
    inner_src.dV_untrusted = 0.0;
    detail::EffectiveChannel eff;
    eff.t_cross = std::sqrt(static_cast<Real>(bounds.T_low));
    eff.t_diag = bounds.T_low;
    eff.extra_x = static_cast<Real>(bounds.V_eps_x_up) / static_cast<Real>(bounds.T_low);
    eff.extra_p = static_cast<Real>(bounds.V_eps_p_up) / static_cast<Real>(bounds.T_low);

    const KeyRateResult inner = detail::evaluate_key(inner_src, eff, scheme, side, beta);
    const double delta = delta_n(alloc.n_k, eps_bar);

    FiniteKeyResult out;
    out.bounds = bounds;
    out.delta = delta;
    out.rate = inner;
    out.rate.key_rate = std::max(0.0, alloc.n_k / alloc.N * (inner.key_rate - delta));
    return out;
}

} // namespace cvqkd

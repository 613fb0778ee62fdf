#pragma once

#include "cvqkd/security.hpp"

namespace cvqkd {

/// How a block of N transmitted states is split between channel estimation
/// and key generation. Counts are real-valued so that huge blocks (1e12) and
/// fractional planning values are representable.
///
/// For switched homodyne reception, m rounds measure x and n rounds measure
/// p; with disclose = false the same rounds may also enter the key
/// (m + n <= N, n_k <= N), with disclose = true the estimation rounds are
/// published and lost (m + n + n_k <= N). For split (heterodyne) reception
/// every round yields both quadratures, so m = n <= N is required and the
/// disclosed case needs m + n_k <= N.
struct BlockAllocation {
    double N = 0;
    double m = 0;
    double n = 0;
    double n_k = 0;
    bool disclose = false;

    void validate(MeasurementScheme::Kind kind) const;
};

/// Variances of the transmittance and excess-noise estimators.
struct EstimatorStats {
    double var_T = 0.0;      ///< Var of the transmittance estimate
    double var_eps_x = 0.0;  ///< Var of the x channel-noise estimate (targets T*eps)
    double var_eps_p = 0.0;  ///< Var of the p channel-noise estimate (targets T*(eps+dV_untrusted))
};

/// Worst-case parameter values at the chosen confidence multiple.
struct WorstCaseBounds {
    double T_low = 0.0;
    double V_eps_x_up = 0.0;
    double V_eps_p_up = 0.0;
};

/// Estimator variances for switched homodyne estimation with m x-samples and
/// n p-samples. Covers both quadratures jointly: the transmittance estimate
/// pools the correlators of both. Trusted preparation noise (src.dV_trusted)
/// enters through its dedicated variance variants.
EstimatorStats estimator_variances_homodyne(const SourceSpec& src, double T, double eps,
                                            double m, double n);

/// Same for split detection with beamsplitter transmittance t_het; the arm
/// rescaling adds a vacuum penalty visible in the noise variances.
EstimatorStats estimator_variances_heterodyne(const SourceSpec& src, double T, double eps,
                                              double m, double n, double t_het);

/// T_low = max(1e-12, T_hat - c*sqrt(var_T)); noise bounds are the estimates
/// plus c standard deviations, floored at 0. The default c = 6.5 corresponds
/// to an estimation error probability of 1e-10 per parameter.
WorstCaseBounds worst_case_bounds(double T_hat, double eps_x_hat, double eps_p_hat,
                                  const EstimatorStats& stats, double confidence = 6.5);

/// Privacy-amplification correction 7*sqrt(log2(2/eps_bar)/n) in bits.
double delta_n(double n, double eps_bar = 1e-10);

/// Variance of the pooled noise estimator in the symmetric coherent-state
/// case: 2*(1+V_eps)^2/(m+n).
double coherent_symmetric_noise_variance(double V_eps, double m, double n);

/// Finite-size key rate with its worst-case intermediates.
struct FiniteKeyResult {
    KeyRateResult rate;
    WorstCaseBounds bounds;
    double delta = 0.0;  ///< privacy-amplification correction applied
};

/// Finite-size key rate: (n_k/N) * [K_inf(worst-case channel) - delta_n(n_k)],
/// clamped at zero. Estimates are taken at their expected values for the
/// given true channel (planning mode); the confidence offsets model the
/// worst-case estimation error.
FiniteKeyResult key_rate_finite(const SourceSpec& src, const ChannelSpec& ch,
                                const MeasurementScheme& scheme, ReconciliationSide side,
                                double beta, const BlockAllocation& alloc,
                                double eps_bar = 1e-10, double confidence = 6.5);

} // namespace cvqkd

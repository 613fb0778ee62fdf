#pragma once

#include "cvqkd/security.hpp"

namespace cvqkd {

/// First and half-order moments of a fluctuating transmittance.
struct FadingMoments {
    double mean_T = 1.0;
    double mean_sqrtT = 1.0;
    double var_sqrtT = 0.0;  ///< mean_T - mean_sqrtT^2, >= 0 by Jensen

    /// Builds moments directly from (mean_T, var_sqrtT); mean_sqrtT is
    /// recovered as sqrt(mean_T - var_sqrtT).
    static FadingMoments from_mean_and_variance(double mean_T, double var_sqrtT);

    void validate() const;
};

/// Moments of a discrete transmittance distribution (ChannelSpec::Kind::Fading).
FadingMoments fading_moments(const ChannelSpec& ch);

/// Three-mode covariance matrix averaged over the transmittance distribution:
/// correlations scale with <sqrt(T)>, receiver variances with <T>; the excess
/// noise eps is channel-input-referred, entering as <T>*eps.
CovarianceMatrix build_cm_fading(const SourceSpec& src, const FadingMoments& mom, double eps);

/// Mutual information of the x branch over the averaged channel. Raises
/// DomainError when the fluctuations wipe out the conditional variance.
double fading_mutual_information(const SourceSpec& src, const FadingMoments& mom, double eps);

/// Output-referred equivalent noises induced by transmittance fluctuations:
/// eps_x = Var(sqrtT)*(V+Vx-1), eps_p = Var(sqrtT)*(1/V+Vp+dV_t+dV_u-1).
/// These always count as untrusted.
struct FadingEquivalentNoise {
    double eps_x = 0.0;
    double eps_p = 0.0;
};

FadingEquivalentNoise fading_equivalent_noise(const SourceSpec& src, const FadingMoments& mom);

/// Asymptotic key rate of the x-homodyne protocol over the averaged channel.
KeyRateResult key_rate_fading(const SourceSpec& src, const FadingMoments& mom, double eps,
                              ReconciliationSide side, double beta);

} // namespace cvqkd

#include "cvqkd/fading.hpp"

#include <cmath>

namespace cvqkd {

FadingMoments FadingMoments::from_mean_and_variance(double mean_T, double var_sqrtT) {
    if (!(mean_T > 0) || mean_T > 1) throw DomainError("mean transmittance must lie in (0, 1]");
    if (!(var_sqrtT >= 0)) throw DomainError("transmittance fluctuation variance must be >= 0");
    if (var_sqrtT >= mean_T) {
        throw DomainError("Var(sqrtT) must stay below mean_T (Jensen bound)");
    }
    FadingMoments m;
    m.mean_T = mean_T;
    m.var_sqrtT = var_sqrtT;
    m.mean_sqrtT = std::sqrt(mean_T - var_sqrtT);
    return m;
}

void FadingMoments::validate() const {
    if (!(mean_T > 0) || mean_T > 1) throw DomainError("mean transmittance must lie in (0, 1]");
    if (!(mean_sqrtT > 0)) throw DomainError("mean sqrt transmittance must be positive");
    if (mean_sqrtT * mean_sqrtT > mean_T * (1 + 1e-12)) {
        throw DomainError("moments violate the Jensen bound mean_sqrtT^2 <= mean_T");
    }
    if (var_sqrtT < -1e-15) throw DomainError("negative fluctuation variance");
}

FadingMoments fading_moments(const ChannelSpec& ch) {
    ch.validate();
    if (ch.kind != ChannelSpec::Kind::Fading) {
        throw DomainError("fading_moments expects a fading channel specification");
    }
    Real mean_t = 0, mean_s = 0;
    for (const FadingPoint& pt : ch.distribution) {
        mean_t += static_cast<Real>(pt.weight) * static_cast<Real>(pt.T);
        mean_s += static_cast<Real>(pt.weight) * std::sqrt(static_cast<Real>(pt.T));
    }
    FadingMoments m;
    m.mean_T = static_cast<double>(mean_t);
    m.mean_sqrtT = static_cast<double>(mean_s);
    m.var_sqrtT = std::max(0.0, static_cast<double>(mean_t - mean_s * mean_s));
    m.validate();
    return m;
}

CovarianceMatrix build_cm_fading(const SourceSpec& src, const FadingMoments& mom, double eps) {
    src.validate();
    mom.validate();
    if (!(eps >= 0)) throw DomainError("excess noise must be non-negative");
    return CovarianceMatrix(detail::three_mode_cm(
        src, mom.mean_sqrtT, mom.mean_T, eps,
        static_cast<Real>(eps) + static_cast<Real>(src.dV_untrusted)));
}

double fading_mutual_information(const SourceSpec& src, const FadingMoments& mom, double eps) {
    src.validate();
    mom.validate();
    if (!(eps >= 0)) throw DomainError("excess noise must be non-negative");
    if (!(src.Vx > 0)) return 0.0;
    const Real vb = static_cast<Real>(mom.mean_T) *
                        (static_cast<Real>(src.V) + static_cast<Real>(src.Vx) +
                         static_cast<Real>(eps) - 1) + 1;
    const Real c = static_cast<Real>(mom.mean_sqrtT) * static_cast<Real>(src.Vx);
    const Real denom = vb - c * c / static_cast<Real>(src.Vx);
    if (!(denom > 0)) {
        throw DomainError("transmittance fluctuations leave no positive conditional variance");
    }
    return mutual_information(src.Vx, static_cast<double>(vb), static_cast<double>(c));
}

FadingEquivalentNoise fading_equivalent_noise(const SourceSpec& src, const FadingMoments& mom) {
    src.validate();
    mom.validate();
    const Real var = mom.var_sqrtT;
    FadingEquivalentNoise out;
    out.eps_x = static_cast<double>(
        var * (static_cast<Real>(src.V) + static_cast<Real>(src.Vx) - 1));
    out.eps_p = static_cast<double>(
        var * (1 / static_cast<Real>(src.V) + static_cast<Real>(src.Vp) +
               static_cast<Real>(src.dV_trusted) + static_cast<Real>(src.dV_untrusted) - 1));
    return out;
}

KeyRateResult key_rate_fading(const SourceSpec& src, const FadingMoments& mom, double eps,
                              ReconciliationSide side, double beta) {
    mom.validate();
    if (!(eps >= 0)) throw DomainError("excess noise must be non-negative");
    detail::EffectiveChannel eff;
    eff.t_cross = mom.mean_sqrtT;
    eff.t_diag = mom.mean_T;
    eff.extra_x = eps;
    eff.extra_p = static_cast<Real>(eps) + static_cast<Real>(src.dV_untrusted);
    return detail::evaluate_key(src, eff, MeasurementScheme::homodyne_x(), side, beta);
}

} // namespace cvqkd

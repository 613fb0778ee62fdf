#pragma once

#include <vector>

#include "cvqkd/gaussian.hpp"

namespace cvqkd {

/// Prepare-and-measure source description in shot-noise units.
///
/// V   squeezed-quadrature variance of the carrier state (V = 1 is coherent),
/// Vx  modulation variance applied to the squeezed quadrature x,
/// Vp  modulation variance applied to the antisqueezed quadrature p,
/// dV_trusted    p-quadrature preparation noise known to (and purified by)
///               the sender, excluded from the eavesdropper's purification,
/// dV_untrusted  p-quadrature preparation noise attributed to the eavesdropper.
struct SourceSpec {
    double V = 1.0;
    double Vx = 0.0;
    double Vp = 0.0;
    double dV_trusted = 0.0;
    double dV_untrusted = 0.0;

    /// Total effective p modulation seen downstream: Vp + dV_trusted.
    double Vp_eff() const { return Vp + dV_trusted; }

    void validate() const;
};

/// Variances of the entangled two-mode source that reproduces the
/// prepare-and-measure statistics: squeezed variances V1, V2 of the two
/// entangled beams and the variance Vm of the trusted modulation added to
/// the p quadratures of both sender modes.
struct EBEquivalents {
    double V1 = 0.0;
    double V2 = 0.0;
    double Vm = 0.0;
};

/// One transmittance value with its occurrence probability.
struct FadingPoint {
    double T = 1.0;
    double weight = 1.0;
};

/// Channel between sender and receiver.
struct ChannelSpec {
    enum class Kind { Fixed, Fading };

    Kind kind = Kind::Fixed;
    double T = 1.0;        ///< transmittance (Fixed)
    double epsilon = 0.0;  ///< excess noise, input-referred, in shot-noise units
    std::vector<FadingPoint> distribution;  ///< transmittance distribution (Fading)

    static ChannelSpec fixed(double T, double epsilon);
    static ChannelSpec fading(std::vector<FadingPoint> distribution, double epsilon);

    void validate() const;
};

/// Measured quadrature variances and global purity of a squeezed state that
/// passed through loss.
struct NoisySqueezedState {
    double var_x = 1.0;
    double var_p = 1.0;
    double purity = 1.0;
};

/// Split of an observed noisy squeezed state into an effective pure-ish
/// carrier variance V plus independent per-quadrature noises.
struct NoiseSplit {
    double V = 1.0;
    double eps_x = 0.0;
    double eps_p = 0.0;
};

/// Entangled-source variances reproducing the prepare-and-measure protocol.
/// Raises SingularModulationError when Vx (or the derived modulation Vm)
/// is too small for the mapping to exist.
EBEquivalents eb_equivalents(const SourceSpec& src);

/// Three-mode covariance matrix (sender modes A1, A2; receiver mode B) after
/// a fixed channel, for the receiver that homodynes mode B directly.
CovarianceMatrix build_cm_homodyne(const SourceSpec& src, const ChannelSpec& ch);

/// Four-mode covariance matrix (A1, A2, B, B') where the receiver splits
/// mode B on a beamsplitter of transmittance t_het, homodyning x on the kept
/// arm B and p on the tapped arm B'.
CovarianceMatrix build_cm_heterodyne(const SourceSpec& src, const ChannelSpec& ch, double t_het);

/// Single-mode covariance matrix held by the eavesdropper when the channel
/// is pure loss (the beamsplitter output that does not reach the receiver),
/// with the trusted preparation noise excluded from her knowledge of p.
CovarianceMatrix pure_loss_eve_cm(const SourceSpec& src, double T);

/// Quadrature variances and purity of an initially pure squeezed state
/// (squeezed variance Vs) after passing a beamsplitter of transmittance eta.
NoisySqueezedState noisy_state_from_loss(double Vs, double eta);

/// Splits an observed (var_x, var_p) pair into NoiseSplit{V, eps_x, eps_p}
/// with V = var_x - eps_x and eps_p = var_p - 1/V. Valid range for eps_x is
/// [0, var_x - 1/var_p]; outside it raises AllocationOutOfRangeError.
NoiseSplit allocate_noise(const NoisySqueezedState& state, double eps_x);

namespace detail {

/// Generalized three-mode builder. The receiver-mode diagonal entries are
/// t_diag*(base + extra - 1) + 1 and the sender-receiver correlations scale
/// with t_cross; a fixed channel of transmittance T has t_diag = T and
/// t_cross = sqrt(T). extra_x / extra_p are the untrusted noise totals added
/// on top of the transmitted state in x and p.
Mat three_mode_cm(const SourceSpec& src, Real t_cross, Real t_diag, Real extra_x, Real extra_p);

/// Same generalization for the four-mode split-receiver layout.
Mat four_mode_cm(const SourceSpec& src, Real t_cross, Real t_diag, Real extra_x, Real extra_p,
                 Real t_het);

} // namespace detail

} // namespace cvqkd

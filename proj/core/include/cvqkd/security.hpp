#pragma once

#include "cvqkd/protocol.hpp"

namespace cvqkd {

enum class ReconciliationSide { Direct, Reverse };

/// How the receiver measures, and what happens to the antisqueezed-quadrature
/// data in the split-detection case.
struct MeasurementScheme {
    enum class Kind { HomodyneX, HomodyneP, BiasedHomodyne, Heterodyne };

    /// Fate of the p-arm data when Kind::Heterodyne:
    ///   UseForKey  both arms feed the key,
    ///   Discard    the p arm is thrown away unseen,
    ///   Disclose   the p arm is published for channel estimation.
    enum class ASData { UseForKey, Discard, Disclose };

    Kind kind = Kind::HomodyneX;
    double r_switch = 0.5;  ///< fraction of rounds measuring x (BiasedHomodyne)
    double t_het = 0.5;     ///< receiver beamsplitter transmittance (Heterodyne)
    ASData as_data = ASData::UseForKey;

    static MeasurementScheme homodyne_x();
    static MeasurementScheme homodyne_p();
    static MeasurementScheme biased_homodyne(double r_switch);
    static MeasurementScheme heterodyne(double t_het, ASData as_data = ASData::UseForKey);

    void validate() const;
};

struct KeyRateResult {
    double mutual_info = 0.0;  ///< bits per state, summed over key-carrying branches
    double holevo = 0.0;       ///< eavesdropper information bound, same accounting
    double key_rate = 0.0;     ///< bits per state, clamped at zero per branch
    double beta = 1.0;
    ReconciliationSide side = ReconciliationSide::Reverse;
};

/// Mutual information (bits) of two jointly Gaussian variables with variances
/// va, vb and covariance cab: 0.5*log2(va*vb / (va*vb - cab^2)).
double mutual_information(double va, double vb, double cab);

/// Eavesdropper information bound chi for a protocol covariance matrix.
/// Accepts the layouts produced by this library: two modes (A, B), three
/// modes (A1, A2, B) or four modes (A1, A2, B, B'). For BiasedHomodyne the
/// x and p branch bounds are summed. Reverse reconciliation conditions on
/// the receiver measurement, direct on the sender's.
double holevo_bound(const CovarianceMatrix& cm, const MeasurementScheme& scheme,
                    ReconciliationSide side);

/// Asymptotic secret fraction for a fixed channel.
KeyRateResult key_rate_asymptotic(const SourceSpec& src, const ChannelSpec& ch,
                                  const MeasurementScheme& scheme, ReconciliationSide side,
                                  double beta);

/// Closed-form limit of the eavesdropper bound over a pure-loss channel when
/// the trusted preparation noise is taken arbitrarily large.
double pure_loss_limits(const SourceSpec& src, double T, ReconciliationSide side);

/// Two-mode covariance matrix of a source with explicit per-quadrature noise
/// (modulation in x only), before any channel. Mode 0 is the sender, mode 1
/// the transmitted beam.
CovarianceMatrix allocation_cm(double V, double Vx, double eps_x, double eps_p);

/// Which quadrature carries all of the source noise in the two-mode model.
enum class NoiseAllocation { AllInSqueezed, AllInAS };

/// Closed-form eavesdropper bound for the two-mode source model with all the
/// noise eps_max placed in one quadrature.
double allocation_holevo(double V, double Vx, NoiseAllocation allocation, double eps_max,
                         ReconciliationSide side);

/// Direct-reconciliation key (beta = 1, no channel) of an x-modulated noisy
/// squeezed source whose observed noise is split with the given eps_x:
/// 0.5*log2(1 + Vx/var_x) minus the numerically evaluated chi.
double dr_key_with_allocation(const NoisySqueezedState& state, double Vx, double eps_x);

struct WorstCaseAllocation {
    double eps_x = 0.0;
    double key = 0.0;
};

/// Noise split most favorable to the eavesdropper: minimizes the key over
/// the admissible eps_x interval.
WorstCaseAllocation worst_case_allocation(const NoisySqueezedState& state, double Vx,
                                          ReconciliationSide side);

namespace detail {

/// Channel abstraction shared by the fixed, fading and finite-size paths:
/// correlations scale with t_cross, receiver variances are built with t_diag,
/// and extra_x / extra_p are the untrusted noise totals entering the
/// receiver-mode diagonal (already including any untrusted preparation term).
struct EffectiveChannel {
    Real t_cross = 1;
    Real t_diag = 1;
    Real extra_x = 0;
    Real extra_p = 0;
};

KeyRateResult evaluate_key(const SourceSpec& src, const EffectiveChannel& ch,
                           const MeasurementScheme& scheme, ReconciliationSide side, double beta);

} // namespace detail

} // namespace cvqkd

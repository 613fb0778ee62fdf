#pragma once

#include "cvqkd/fading.hpp"
#include "cvqkd/finite_size.hpp"

namespace cvqkd {

/// T = 10^(-db_per_km * km / 10); the default 0.2 dB/km models standard fiber.
double transmittance_from_distance_km(double km, double db_per_km = 0.2);

/// A fully specified protocol whose key rate can be evaluated in one call.
/// The fading regime reads the transmittance statistics from `fading` and the
/// excess noise from ch.epsilon; the other regimes use the fixed channel.
struct ProtocolSetting {
    enum class Regime { Asymptotic, Finite, Fading };

    Regime regime = Regime::Asymptotic;
    SourceSpec src;
    ChannelSpec ch;
    MeasurementScheme scheme;
    ReconciliationSide side = ReconciliationSide::Reverse;
    double beta = 0.95;

    // Finite-size bookkeeping. With switched reception and disclose = false,
    // m = r_x*N rounds estimate x, the rest estimate p, and the key block
    // reuses the key-quadrature rounds (n_k = m; n_k = N when
    // use_all_for_key). With disclose = true, r_x and r_p set the published
    // estimation fractions and the remainder (or r_k, if set >= 0) carries
    // key. Split reception estimates both quadratures on m = r_x*N pulses.
    double N = 1e7;
    double r_x = 0.5;
    double r_p = 0.25;
    double r_k = -1.0;  ///< key fraction when disclosing; < 0 derives the remainder
    bool disclose = false;
    bool use_all_for_key = false;
    double eps_bar = 1e-10;
    double confidence = 6.5;

    FadingMoments fading;

    BlockAllocation allocation() const;
    double evaluate() const;  ///< key rate in bits per state
};

enum class FreeParam { Vx, Vp, V, THet, Rx, Rp, Rk };

struct ParamBounds {
    double lo = 0.0;
    double hi = 1.0;
};

/// Default search interval for a parameter (modulation variances capped at
/// 10 SNU, fractions kept strictly inside (0, 1)).
ParamBounds default_bounds(FreeParam p);

struct OptimizationProblem {
    ProtocolSetting base;
    std::vector<FreeParam> params;
    std::vector<ParamBounds> bounds;  ///< per free parameter; empty = defaults
    int grid_points = 8;              ///< coarse-grid points per axis
    double param_tol = 1e-4;          ///< simplex termination, relative to range
};

struct OptimizationResult {
    std::vector<double> params;
    double key = 0.0;
};

/// Coarse grid (log-spaced for variance parameters) followed by a
/// Nelder-Mead polish inside the bounds. Deterministic: fixed evaluation
/// order, lexicographic tie-breaks. Raises EvaluationFailureError when the
/// objective errors on more than 90% of grid points.
OptimizationResult maximize_key(const OptimizationProblem& problem);

enum class ToleranceAxis { ChannelNoise, UntrustedAS, FadingVariance, Distance };

struct ToleranceQuery {
    OptimizationProblem problem;
    ToleranceAxis axis = ToleranceAxis::ChannelNoise;
    double axis_origin = 0.0;
    double cap = -1.0;  ///< < 0 selects the default cap for the axis
    double tol = 1e-4;
};

struct ToleranceResult {
    double value = 0.0;
    bool cap_reached = false;
};

/// Largest axis value with positive (inner-optimized) key, found by
/// bisection to |interval| <= tol. Raises NoPositiveKeyError when the key is
/// non-positive already at the axis origin and BracketingFailureError when
/// the objective stops being evaluable inside the bracket.
ToleranceResult solve_tolerance(const ToleranceQuery& query);

} // namespace cvqkd

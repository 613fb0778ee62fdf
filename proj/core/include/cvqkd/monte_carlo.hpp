#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "cvqkd/finite_size.hpp"

namespace cvqkd {

/// Monte Carlo sampling setup for one estimation experiment.
struct SimConfig {
    SourceSpec src;
    double T = 1.0;
    double eps = 0.0;
    MeasurementScheme scheme;
    std::int64_t m = 0;       ///< x-quadrature estimation samples per repetition
    std::int64_t n = 0;       ///< p-quadrature estimation samples per repetition
    int repetitions = 1;
    std::uint64_t seed = 0;

    /// Rescale split-detector outcomes by 1/t_het (instead of 1/sqrt(t_het)
    /// with vacuum subtraction) in the noise estimators. This reproduces a
    /// known-biased estimator variant; the report flags the resulting bias.
    bool verbatim_het_scaling = false;

    void validate() const;
};

/// Channel estimates from one repetition.
struct BlockEstimates {
    double T_hat = 0.0;
    double V_eps_x = 0.0;  ///< targets T*eps
    double V_eps_p = 0.0;  ///< targets T*(eps + dV_untrusted)
    double V_eps_joint = 0.0;  ///< pooled symmetric estimator (homodyne only), else NaN
};

struct SimResult {
    std::vector<BlockEstimates> reps;
};

/// Samples the measured data chain per repetition and evaluates the channel
/// estimators on it. Deterministic for a fixed seed, independent of the
/// thread count (each repetition owns a counter-based PRNG substream).
SimResult simulate_block(const SimConfig& cfg, int threads = 1);

/// One row of the estimator-validation report.
struct VarianceReportRow {
    std::string quantity;
    double true_value = 0.0;
    double empirical_mean = 0.0;
    double empirical_var = 0.0;
    double formula_var = 0.0;
    double relative_error = 0.0;  ///< empirical_var/formula_var - 1
    double rse = 0.0;             ///< relative standard error of the empirical variance
    bool rse_defined = false;     ///< false when repetitions < 2
    bool within_5rse = false;
    double mean_bias_sigma = 0.0;  ///< (mean - true)/standard error of the mean
    bool bias_flagged = false;     ///< |mean_bias_sigma| > 5
};

/// Compares empirical estimator variances against the analytic formulas.
/// The pooled symmetric-noise row appears only for the coherent symmetric
/// homodyne case (V=1, Vx=Vp, no preparation noise).
std::vector<VarianceReportRow> empirical_variance_report(const SimResult& result,
                                                         const SimConfig& cfg);

} // namespace cvqkd

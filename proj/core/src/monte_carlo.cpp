#include "cvqkd/monte_carlo.hpp"

#include <cmath>
#include <limits>
#include <numbers>
#include <thread>

namespace cvqkd {

namespace {

// Counter-based generator: a keyed splitmix-style bijection applied to an
// incrementing counter. Streams for different (seed, repetition) pairs are
// decorrelated by construction and need no state hand-off between threads.
class CounterRng {
public:
    CounterRng(std::uint64_t seed, std::uint64_t stream) {
        key_ = mix(mix(seed + 0x9E3779B97F4A7C15ULL) ^ mix(stream + 0xD1B54A32D192ED03ULL));
    }

    double normal() {
        if (have_cached_) {
            have_cached_ = false;
            return cached_;
        }
        const double u1 = uniform_open();
        const double u2 = uniform_open();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double a = 2.0 * std::numbers::pi * u2;
        cached_ = r * std::sin(a);
        have_cached_ = true;
        return r * std::cos(a);
    }

private:
    static std::uint64_t mix(std::uint64_t z) {
        z ^= z >> 30;
        z *= 0xBF58476D1CE4E5B9ULL;
        z ^= z >> 27;
        z *= 0x94D049BB133111EBULL;
        z ^= z >> 31;
        return z;
    }

    std::uint64_t next() { return mix(key_ + (++ctr_) * 0x9E3779B97F4A7C15ULL); }

    // (0, 1]: never returns 0, so log() stays finite.
    double uniform_open() { return static_cast<double>((next() >> 11) + 1) * 0x1.0p-53; }

    std::uint64_t key_ = 0;
    std::uint64_t ctr_ = 0;
    bool have_cached_ = false;
    double cached_ = 0.0;
};

struct QuadAccum {
    double mb = 0.0;  // sum of M*B
    double mm = 0.0;  // sum of M^2
    double bb = 0.0;  // sum of B^2

    double residual_sq(double sqrt_t_hat) const {
        return bb - 2.0 * sqrt_t_hat * mb + sqrt_t_hat * sqrt_t_hat * mm;
    }
};

BlockEstimates run_repetition(const SimConfig& cfg, std::uint64_t rep) {
    CounterRng rng(cfg.seed, rep);

    const double v = cfg.src.V;
    const double vx = cfg.src.Vx;
    const double vp = cfg.src.Vp;
    const double dvt = cfg.src.dV_trusted;
    const double dvu = cfg.src.dV_untrusted;
    const double t_ch = cfg.T;
    const double sd_mx = std::sqrt(vx);
    const double sd_mp = std::sqrt(vp);
    const double amp = std::sqrt(t_ch);

    // Received-noise variances of the channel output, conditioned on the
    // sender's data. Preparation noise rides through the channel physically,
    // so the trusted term scales with T here.
    const double noise_x = 1.0 + t_ch * (v + cfg.eps - 1.0);
    const double noise_p = 1.0 + t_ch * (1.0 / v + dvt + cfg.eps + dvu - 1.0);

    const auto m = static_cast<double>(cfg.m);
    const auto n = static_cast<double>(cfg.n);
    const double rx = m / (m + n);
    const double rp = n / (m + n);
    const double pooled_mod = rx * vx + rp * vp;

    QuadAccum ax, ap;
    const bool split = cfg.scheme.kind == MeasurementScheme::Kind::Heterodyne;

    if (!split) {
        for (std::int64_t i = 0; i < cfg.m; ++i) {
            const double mx = sd_mx * rng.normal();
            const double bx = amp * mx + std::sqrt(noise_x) * rng.normal();
            ax.mb += mx * bx;
            ax.mm += mx * mx;
            ax.bb += bx * bx;
        }
        for (std::int64_t j = 0; j < cfg.n; ++j) {
            const double mp = sd_mp * rng.normal();
            const double bp = amp * mp + std::sqrt(noise_p) * rng.normal();
            ap.mb += mp * bp;
            ap.mm += mp * mp;
            ap.bb += bp * bp;
        }
    } else {
        const double th = cfg.scheme.t_het;
        const double arm_x_noise = th * noise_x + (1.0 - th);
        const double arm_p_noise = (1.0 - th) * noise_p + th;
        // Both quadratures come from the same pulses; the two arm outcomes
        // are uncorrelated because independent quadratures (and independent
        // detector vacua) feed them.
        const double sx = cfg.verbatim_het_scaling ? th : std::sqrt(th);
        const double sp = cfg.verbatim_het_scaling ? (1.0 - th) : std::sqrt(1.0 - th);
        for (std::int64_t i = 0; i < cfg.m; ++i) {
            const double mx = sd_mx * rng.normal();
            const double mp = sd_mp * rng.normal();
            const double bx = std::sqrt(th * t_ch) * mx + std::sqrt(arm_x_noise) * rng.normal();
            const double bp = std::sqrt((1.0 - th) * t_ch) * mp + std::sqrt(arm_p_noise) * rng.normal();
            // Arm rescaling referred back to the channel output.
            const double bxs = bx / sx;
            const double bps = bp / sp;
            ax.mb += mx * bxs;
            ax.mm += mx * mx;
            ax.bb += bxs * bxs;
            ap.mb += mp * bps;
            ap.mm += mp * mp;
            ap.bb += bps * bps;
        }
    }

    // For the correlator the verbatim variant still uses the unbiased
    // 1/sqrt scaling (the rescaled sums above would be double-scaled), so
    // recover the correlator scale factor where needed.
    double corr_x = ax.mb;
    double corr_p = ap.mb;
    if (split && cfg.verbatim_het_scaling) {
        const double th = cfg.scheme.t_het;
        corr_x *= th / std::sqrt(th);
        corr_p *= (1.0 - th) / std::sqrt(1.0 - th);
    }
    const double c_hat = (corr_x + corr_p) / (m + n);
    const double t_hat = (c_hat * c_hat) / (pooled_mod * pooled_mod);
    const double sqrt_t_hat = std::abs(c_hat) / pooled_mod;

    BlockEstimates est;
    est.T_hat = t_hat;

    double vac_x = 0.0, vac_p = 0.0;
    if (split && !cfg.verbatim_het_scaling) {
        const double th = cfg.scheme.t_het;
        vac_x = (1.0 - th) / th;
        vac_p = th / (1.0 - th);
    }
    est.V_eps_x = ax.residual_sq(sqrt_t_hat) / m + t_hat * (1.0 - v) - 1.0 - vac_x;
    est.V_eps_p = ap.residual_sq(sqrt_t_hat) / n + t_hat * (1.0 - 1.0 / v - dvt) - 1.0 - vac_p;

    if (!split) {
        est.V_eps_joint =
            (ax.residual_sq(sqrt_t_hat) + ap.residual_sq(sqrt_t_hat)) / (m + n) - 1.0;
    } else {
        est.V_eps_joint = std::numeric_limits<double>::quiet_NaN();
    }
    return est;
}

} // namespace

void SimConfig::validate() const {
    src.validate();
    scheme.validate();
    if (!(T > 0) || T > 1) throw DomainError("transmittance must lie in (0, 1]");
    if (!(eps >= 0)) throw DomainError("excess noise must be non-negative");
    if (repetitions < 1) throw DomainError("at least one repetition required");
    if (m < 1 || n < 1) throw DomainError("both quadratures need at least one sample");
    if (scheme.kind == MeasurementScheme::Kind::Heterodyne && m != n) {
        throw DomainError("split detection samples both quadratures per pulse: m must equal n");
    }
    if (src.Vx + src.Vp <= 0) throw DomainError("pooled modulation variance must be positive");
}

SimResult simulate_block(const SimConfig& cfg, int threads) {
    cfg.validate();
    if (threads < 1) threads = 1;

    SimResult result;
    result.reps.resize(static_cast<size_t>(cfg.repetitions));

    const int workers = std::min(threads, cfg.repetitions);
    if (workers == 1) {
        for (int r = 0; r < cfg.repetitions; ++r) {
            result.reps[static_cast<size_t>(r)] = run_repetition(cfg, static_cast<std::uint64_t>(r));
        }
        return result;
    }

    std::vector<std::thread> pool;
    pool.reserve(static_cast<size_t>(workers));
    for (int w = 0; w < workers; ++w) {
        pool.emplace_back([&, w] {
            for (int r = w; r < cfg.repetitions; r += workers) {
                result.reps[static_cast<size_t>(r)] =
                    run_repetition(cfg, static_cast<std::uint64_t>(r));
            }
        });
    }
    for (auto& th : pool) th.join();
    return result;
}

namespace {

struct Moments {
    double mean = 0.0;
    double var = 0.0;
    int count = 0;
};

Moments moments_of(const std::vector<BlockEstimates>& reps, double BlockEstimates::*field) {
    Moments mo;
    long double sum = 0.0L;
    int k = 0;
    for (const auto& r : reps) {
        const double v = r.*field;
        if (std::isnan(v)) continue;
        sum += v;
        ++k;
    }
    if (k == 0) return mo;
    const long double mean = sum / k;
    long double acc = 0.0L;
    for (const auto& r : reps) {
        const double v = r.*field;
        if (std::isnan(v)) continue;
        const long double d = v - mean;
        acc += d * d;
    }
    mo.mean = static_cast<double>(mean);
    mo.var = k > 1 ? static_cast<double>(acc / (k - 1)) : 0.0;
    mo.count = k;
    return mo;
}

VarianceReportRow make_row(const std::string& name, const Moments& mo, double formula,
                           double true_value) {
    VarianceReportRow row;
    row.quantity = name;
    row.true_value = true_value;
    row.empirical_mean = mo.mean;
    row.empirical_var = mo.var;
    row.formula_var = formula;
    row.rse_defined = mo.count > 1;
    row.rse = row.rse_defined ? std::sqrt(2.0 / (mo.count - 1))
                              : std::numeric_limits<double>::quiet_NaN();
    row.relative_error = formula > 0 ? mo.var / formula - 1.0
                                     : std::numeric_limits<double>::quiet_NaN();
    row.within_5rse = row.rse_defined && std::isfinite(row.relative_error) &&
                      std::abs(row.relative_error) <= 5.0 * row.rse;
    const double sem = mo.count > 0 ? std::sqrt(mo.var / mo.count) : 0.0;
    row.mean_bias_sigma = sem > 0 ? (mo.mean - true_value) / sem : 0.0;
    row.bias_flagged = std::abs(row.mean_bias_sigma) > 5.0;
    return row;
}

} // namespace

std::vector<VarianceReportRow> empirical_variance_report(const SimResult& result,
                                                         const SimConfig& cfg) {
    cfg.validate();
    const bool split = cfg.scheme.kind == MeasurementScheme::Kind::Heterodyne;
    const EstimatorStats stats =
        split ? estimator_variances_heterodyne(cfg.src, cfg.T, cfg.eps,
                                               static_cast<double>(cfg.m),
                                               static_cast<double>(cfg.n), cfg.scheme.t_het)
              : estimator_variances_homodyne(cfg.src, cfg.T, cfg.eps,
                                             static_cast<double>(cfg.m),
                                             static_cast<double>(cfg.n));

    std::vector<VarianceReportRow> rows;
    rows.push_back(make_row("T_hat", moments_of(result.reps, &BlockEstimates::T_hat),
                            stats.var_T, cfg.T));
    rows.push_back(make_row("V_eps_x", moments_of(result.reps, &BlockEstimates::V_eps_x),
                            stats.var_eps_x, cfg.T * cfg.eps));
    rows.push_back(make_row("V_eps_p", moments_of(result.reps, &BlockEstimates::V_eps_p),
                            stats.var_eps_p, cfg.T * (cfg.eps + cfg.src.dV_untrusted)));

    const bool symmetric_coherent = !split && std::abs(cfg.src.V - 1.0) < 1e-9 &&
                                    std::abs(cfg.src.Vx - cfg.src.Vp) < 1e-9 &&
                                    cfg.src.dV_trusted == 0.0 && cfg.src.dV_untrusted == 0.0;
    if (symmetric_coherent) {
        const double v_eps = cfg.T * cfg.eps;
        rows.push_back(make_row(
            "V_eps_joint", moments_of(result.reps, &BlockEstimates::V_eps_joint),
            coherent_symmetric_noise_variance(v_eps, static_cast<double>(cfg.m),
                                              static_cast<double>(cfg.n)),
            v_eps));
    }
    return rows;
}

} // namespace cvqkd

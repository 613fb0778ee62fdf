#include "cvqkd/optimize.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace cvqkd {

double transmittance_from_distance_km(double km, double db_per_km) {
    if (!(km >= 0)) throw DomainError("distance must be non-negative");
    if (!(db_per_km > 0)) throw DomainError("attenuation must be positive");
    return std::pow(10.0, -db_per_km * km / 10.0);
}

BlockAllocation ProtocolSetting::allocation() const {
    BlockAllocation a;
    a.N = N;
    a.disclose = disclose;
    const bool split = scheme.kind == MeasurementScheme::Kind::Heterodyne;
    if (split) {
        a.m = a.n = std::max(1.0, std::floor(r_x * N));
        a.n_k = disclose ? N - a.m : N;
        if (disclose && r_k >= 0) a.n_k = std::min(a.n_k, std::floor(r_k * N));
        return a;
    }
    a.m = std::max(1.0, std::floor(r_x * N));
    if (disclose) {
        a.n = std::max(1.0, std::floor(r_p * N));
        a.n_k = N - a.m - a.n;
        if (r_k >= 0) a.n_k = std::min(a.n_k, std::floor(r_k * N));
    } else {
        a.n = std::max(1.0, N - a.m);
        if (use_all_for_key) {
            a.n_k = N;
        } else {
            a.n_k = scheme.kind == MeasurementScheme::Kind::HomodyneP ? a.n : a.m;
        }
    }
    return a;
}

double ProtocolSetting::evaluate() const {
    switch (regime) {
        case Regime::Asymptotic:
            return key_rate_asymptotic(src, ch, scheme, side, beta).key_rate;
        case Regime::Finite:
            return key_rate_finite(src, ch, scheme, side, beta, allocation(), eps_bar,
                                   confidence)
                .rate.key_rate;
        case Regime::Fading:
            return key_rate_fading(src, fading, ch.epsilon, side, beta).key_rate;
    }
    throw DomainError("unknown evaluation regime");
}

namespace {

bool is_variance_param(FreeParam p) {
    return p == FreeParam::Vx || p == FreeParam::Vp || p == FreeParam::V;
}

void apply_param(ProtocolSetting& s, FreeParam p, double v) {
    switch (p) {
        case FreeParam::Vx: s.src.Vx = v; return;
        case FreeParam::Vp: s.src.Vp = v; return;
        case FreeParam::V: s.src.V = v; return;
        case FreeParam::THet: s.scheme.t_het = v; return;
        case FreeParam::Rx: s.r_x = v; return;
        case FreeParam::Rp: s.r_p = v; return;
        case FreeParam::Rk: s.r_k = v; return;
    }
    throw DomainError("unknown free parameter");
}

std::vector<double> axis_points(FreeParam p, const ParamBounds& b, int count) {
    if (!(b.lo < b.hi)) throw DomainError("parameter bounds must satisfy lo < hi");
    if (count < 2) throw DomainError("grid needs at least 2 points per axis");
    std::vector<double> pts(static_cast<size_t>(count));
    if (is_variance_param(p) && b.lo > 0) {
        const double llo = std::log(b.lo);
        const double lhi = std::log(b.hi);
        for (int i = 0; i < count; ++i) {
            pts[static_cast<size_t>(i)] = std::exp(llo + (lhi - llo) * i / (count - 1));
        }
    } else {
        for (int i = 0; i < count; ++i) {
            pts[static_cast<size_t>(i)] = b.lo + (b.hi - b.lo) * i / (count - 1);
        }
    }
    // keep the endpoints exactly on the bounds (exp/log round-trips drift by
    // an ulp, which would place grid points outside the admissible box)
    pts.front() = b.lo;
    pts.back() = b.hi;
    return pts;
}

double objective(const OptimizationProblem& problem, const std::vector<double>& x,
                 bool* failed) {
    ProtocolSetting s = problem.base;
    for (size_t i = 0; i < problem.params.size(); ++i) {
        apply_param(s, problem.params[i], x[i]);
    }
    try {
        const double k = s.evaluate();
        if (std::isnan(k)) {
            if (failed) *failed = true;
            return -std::numeric_limits<double>::infinity();
        }
        if (failed) *failed = false;
        return k;
    } catch (const Error&) {
        if (failed) *failed = true;
        return -std::numeric_limits<double>::infinity();
    }
}

} // namespace

ParamBounds default_bounds(FreeParam p) {
    switch (p) {
        case FreeParam::Vx:
        case FreeParam::Vp:
            return {1e-2, 10.0};
        case FreeParam::V:
            return {1e-2, 1.0};
        case FreeParam::THet:
            return {0.01, 0.99};
        case FreeParam::Rx:
        case FreeParam::Rp:
        case FreeParam::Rk:
            return {0.01, 0.98};
    }
    throw DomainError("unknown free parameter");
}

OptimizationResult maximize_key(const OptimizationProblem& problem) {
    const size_t k = problem.params.size();
    std::vector<ParamBounds> bounds = problem.bounds;
    if (bounds.empty()) {
        bounds.reserve(k);
        for (FreeParam p : problem.params) bounds.push_back(default_bounds(p));
    }
    if (bounds.size() != k) {
        throw DomainError("bounds list must match the free-parameter list");
    }

    if (k == 0) {
        OptimizationResult res;
        res.key = problem.base.evaluate();
        return res;
    }

    std::vector<std::vector<double>> axes(k);
    for (size_t i = 0; i < k; ++i) {
        axes[i] = axis_points(problem.params[i], bounds[i], problem.grid_points);
    }

    // Exhaustive coarse grid in odometer order; first strictly-better point
    // wins so ties resolve lexicographically.
    std::vector<size_t> idx(k, 0);
    std::vector<double> x(k), best_x(k);
    double best = -std::numeric_limits<double>::infinity();
    size_t total = 0, failures = 0;
    bool done = false;
    while (!done) {
        for (size_t i = 0; i < k; ++i) x[i] = axes[i][idx[i]];
        bool failed = false;
        const double val = objective(problem, x, &failed);
        ++total;
        if (failed) ++failures;
        if (val > best) {
            best = val;
            best_x = x;
        }
        size_t d = k;
        done = true;
        while (d > 0) {
            --d;
            if (++idx[d] < axes[d].size()) {
                done = false;
                break;
            }
            idx[d] = 0;
        }
    }
    if (failures * 10 > total * 9) {
        throw EvaluationFailureError("objective failed on more than 90% of grid points");
    }
    if (!std::isfinite(best)) {
        throw EvaluationFailureError("no evaluable grid point found");
    }

    // Nelder-Mead polish, projected into the bounds.
    const auto clamp_point = [&](std::vector<double>& p) {
        for (size_t i = 0; i < k; ++i) p[i] = std::clamp(p[i], bounds[i].lo, bounds[i].hi);
    };
    const auto f = [&](const std::vector<double>& p) { return -objective(problem, p, nullptr); };

    std::vector<std::vector<double>> simplex(k + 1, best_x);
    for (size_t i = 0; i < k; ++i) {
        const double range = bounds[i].hi - bounds[i].lo;
        simplex[i + 1][i] += 0.05 * range;
        clamp_point(simplex[i + 1]);
        // a vertex clamped (nearly) onto the base point leaves the simplex
        // degenerate along this axis; step inward instead
        if (std::abs(simplex[i + 1][i] - simplex[0][i]) < 1e-9 * range) {
            simplex[i + 1][i] -= 0.10 * range;
        }
        clamp_point(simplex[i + 1]);
    }
    std::vector<double> fv(k + 1);
    for (size_t i = 0; i <= k; ++i) fv[i] = f(simplex[i]);

    const int max_iter = 400;
    for (int iter = 0; iter < max_iter; ++iter) {
        // Order vertices (stable: preserves insertion order on ties).
        std::vector<size_t> order(k + 1);
        for (size_t i = 0; i <= k; ++i) order[i] = i;
        std::stable_sort(order.begin(), order.end(),
                         [&](size_t a, size_t b) { return fv[a] < fv[b]; });
        std::vector<std::vector<double>> sx(k + 1);
        std::vector<double> sf(k + 1);
        for (size_t i = 0; i <= k; ++i) {
            sx[i] = simplex[order[i]];
            sf[i] = fv[order[i]];
        }
        simplex = sx;
        fv = sf;

        double spread = 0.0;
        for (size_t i = 0; i < k; ++i) {
            double lo = simplex[0][i], hi = simplex[0][i];
            for (size_t vtx = 1; vtx <= k; ++vtx) {
                lo = std::min(lo, simplex[vtx][i]);
                hi = std::max(hi, simplex[vtx][i]);
            }
            spread = std::max(spread, (hi - lo) / (bounds[i].hi - bounds[i].lo));
        }
        if (spread <= problem.param_tol) break;

        std::vector<double> centroid(k, 0.0);
        for (size_t vtx = 0; vtx < k; ++vtx) {
            for (size_t i = 0; i < k; ++i) centroid[i] += simplex[vtx][i];
        }
        for (size_t i = 0; i < k; ++i) centroid[i] /= static_cast<double>(k);

        const auto blend = [&](double coeff) {
            std::vector<double> p(k);
            for (size_t i = 0; i < k; ++i) {
                p[i] = centroid[i] + coeff * (centroid[i] - simplex[k][i]);
            }
            clamp_point(p);
            return p;
        };

        std::vector<double> refl = blend(1.0);
        const double f_refl = f(refl);
        if (f_refl < fv[0]) {
            std::vector<double> exp_pt = blend(2.0);
            const double f_exp = f(exp_pt);
            if (f_exp < f_refl) {
                simplex[k] = exp_pt;
                fv[k] = f_exp;
            } else {
                simplex[k] = refl;
                fv[k] = f_refl;
            }
        } else if (f_refl < fv[k - 1]) {
            simplex[k] = refl;
            fv[k] = f_refl;
        } else {
            std::vector<double> contr = blend(f_refl < fv[k] ? 0.5 : -0.5);
            const double f_contr = f(contr);
            if (f_contr < std::min(f_refl, fv[k])) {
                simplex[k] = contr;
                fv[k] = f_contr;
            } else {
                for (size_t vtx = 1; vtx <= k; ++vtx) {
                    for (size_t i = 0; i < k; ++i) {
                        simplex[vtx][i] = simplex[0][i] + 0.5 * (simplex[vtx][i] - simplex[0][i]);
                    }
                    fv[vtx] = f(simplex[vtx]);
                }
            }
        }
    }

    OptimizationResult res;
    res.params = best_x;
    res.key = best;
    for (size_t vtx = 0; vtx <= k; ++vtx) {
        if (-fv[vtx] > res.key) {
            res.key = -fv[vtx];
            res.params = simplex[vtx];
        }
    }
    return res;
}

namespace {

double default_cap(const ToleranceQuery& q) {
    switch (q.axis) {
        case ToleranceAxis::ChannelNoise:
        case ToleranceAxis::UntrustedAS:
            return 10.0;
        case ToleranceAxis::FadingVariance:
            return 0.25;
        case ToleranceAxis::Distance:
            return 500.0;
    }
    throw DomainError("unknown tolerance axis");
}

void apply_axis(ProtocolSetting& s, ToleranceAxis axis, double v) {
    switch (axis) {
        case ToleranceAxis::ChannelNoise:
            s.ch.epsilon = v;
            return;
        case ToleranceAxis::UntrustedAS:
            s.src.dV_untrusted = v;
            return;
        case ToleranceAxis::FadingVariance:
            s.fading = FadingMoments::from_mean_and_variance(s.fading.mean_T, v);
            return;
        case ToleranceAxis::Distance: {
            const double t = transmittance_from_distance_km(v);
            if (s.regime == ProtocolSetting::Regime::Fading) {
                s.fading = FadingMoments::from_mean_and_variance(t, s.fading.var_sqrtT);
            } else {
                s.ch.T = t;
            }
            return;
        }
    }
    throw DomainError("unknown tolerance axis");
}

} // namespace

ToleranceResult solve_tolerance(const ToleranceQuery& query) {
    double cap = query.cap >= 0 ? query.cap : default_cap(query);
    if (query.axis == ToleranceAxis::FadingVariance) {
        // Var(sqrtT) must stay strictly below the mean transmittance.
        cap = std::min(cap, query.problem.base.fading.mean_T * (1.0 - 1e-9));
    }
    if (!(query.axis_origin < cap)) {
        throw DomainError("tolerance axis origin must lie below the cap");
    }
    if (!(query.tol > 0)) throw DomainError("tolerance must be positive");

    const auto key_at = [&](double v) {
        OptimizationProblem p = query.problem;
        apply_axis(p.base, query.axis, v);
        try {
            return maximize_key(p).key;
        } catch (const EvaluationFailureError&) {
            // Axis value pushed the whole configuration out of domain: no key.
            return 0.0;
        }
    };

    const double k0 = key_at(query.axis_origin);
    if (std::isnan(k0)) throw BracketingFailureError("objective not evaluable at axis origin");
    if (k0 <= 0) {
        throw NoPositiveKeyError("key rate non-positive at the tolerance axis origin");
    }
    const double kc = key_at(cap);
    if (std::isnan(kc)) throw BracketingFailureError("objective not evaluable at axis cap");
    if (kc > 0) {
        return {cap, true};
    }

    double lo = query.axis_origin, hi = cap;
    while (hi - lo > query.tol) {
        const double mid = (lo + hi) / 2;
        const double km = key_at(mid);
        if (std::isnan(km)) {
            throw BracketingFailureError("objective not evaluable inside the bracket");
        }
        if (km > 0) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    return {lo, false};
}

} // namespace cvqkd

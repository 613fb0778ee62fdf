#include "cvqkd/security.hpp"

#include <algorithm>
#include <cmath>

namespace cvqkd {

namespace {

using K = MeasurementScheme::Kind;
using AS = MeasurementScheme::ASData;

// Extended-precision version of g_function for internally computed arguments.
Real g_real(Real x) {
    if (x <= 0) return 0;
    return (x + 1) * std::log2(x + 1) - x * std::log2(x);
}

Real mutual_information_real(Real va, Real vb, Real c) {
    if (!(va > 0) || !(vb > 0)) {
        throw DomainError("mutual information needs positive variances");
    }
    const Real prod = va * vb;
    const Real c2 = c * c;
    if (c2 >= prod) {
        throw DomainError("covariance exceeds the Cauchy-Schwarz bound, mutual information diverges");
    }
    return Real(0.5L) * std::log2(prod / (prod - c2));
}

double chi_single(const CovarianceMatrix& cm, int mode, Quadrature q) {
    const double total = von_neumann_entropy(cm);
    const double cond = von_neumann_entropy(condition_on_homodyne(cm, {mode, q}));
    return total - cond;
}

} // namespace

MeasurementScheme MeasurementScheme::homodyne_x() {
    MeasurementScheme s;
    s.kind = Kind::HomodyneX;
    return s;
}

MeasurementScheme MeasurementScheme::homodyne_p() {
    MeasurementScheme s;
    s.kind = Kind::HomodyneP;
    return s;
}

MeasurementScheme MeasurementScheme::biased_homodyne(double r_switch) {
    MeasurementScheme s;
    s.kind = Kind::BiasedHomodyne;
    s.r_switch = r_switch;
    s.validate();
    return s;
}

MeasurementScheme MeasurementScheme::heterodyne(double t_het, ASData as_data) {
    MeasurementScheme s;
    s.kind = Kind::Heterodyne;
    s.t_het = t_het;
    s.as_data = as_data;
    s.validate();
    return s;
}

void MeasurementScheme::validate() const {
    if (kind == Kind::BiasedHomodyne && !(r_switch >= 0 && r_switch <= 1)) {
        throw DomainError("switching ratio must lie in [0, 1]");
    }
    if (kind == Kind::Heterodyne && !(t_het > 0 && t_het < 1)) {
        throw DomainError("detector beamsplitter transmittance must lie in (0, 1)");
    }
}

double mutual_information(double va, double vb, double cab) {
    return static_cast<double>(mutual_information_real(va, vb, cab));
}

double holevo_bound(const CovarianceMatrix& cm, const MeasurementScheme& scheme,
                    ReconciliationSide side) {
    scheme.validate();
    const bool rr = side == ReconciliationSide::Reverse;
    const int modes = cm.mode_count();

    if (modes == 2) {
        // Source-only layout (sender mode, transmitted mode), x-modulated.
        if (scheme.kind == K::Heterodyne || scheme.kind == K::BiasedHomodyne) {
            throw DomainError("two-mode layout supports single-quadrature homodyne only");
        }
        const Quadrature q = scheme.kind == K::HomodyneP ? Quadrature::P : Quadrature::X;
        return chi_single(cm, rr ? 1 : 0, q);
    }

    if (modes == 3) {
        // (A1, A2, B): the key quadrature is measured on B (reverse) or on the
        // sender modes (direct). The two sender modes enter the matrix fully
        // exchangeably, so conditioning mode 0 covers either quadrature.
        const int measured = rr ? 2 : 0;
        switch (scheme.kind) {
            case K::HomodyneX:
                return chi_single(cm, measured, Quadrature::X);
            case K::HomodyneP:
                return chi_single(cm, measured, Quadrature::P);
            case K::BiasedHomodyne:
                return chi_single(cm, measured, Quadrature::X) +
                       chi_single(cm, measured, Quadrature::P);
            case K::Heterodyne:
                throw DomainError("heterodyne bound needs the four-mode layout");
        }
    }

    if (modes == 4) {
        // (A1, A2, B, B'): B carries x, B' carries p.
        if (scheme.kind != K::Heterodyne) {
            throw DomainError("four-mode layout is produced by the split receiver only");
        }
        const QuadratureSelector key_x = rr ? QuadratureSelector{2, Quadrature::X}
                                            : QuadratureSelector{0, Quadrature::X};
        const QuadratureSelector key_p = rr ? QuadratureSelector{3, Quadrature::P}
                                            : QuadratureSelector{1, Quadrature::P};
        switch (scheme.as_data) {
            case AS::UseForKey:
                return von_neumann_entropy(cm) -
                       von_neumann_entropy(condition_on_heterodyne(cm, key_x, key_p));
            case AS::Discard:
                return von_neumann_entropy(cm) -
                       von_neumann_entropy(condition_on_homodyne(cm, key_x));
            case AS::Disclose: {
                // The p-arm outcome is public: both entropies are conditioned
                // on it before subtracting the key-quadrature conditioning.
                CovarianceMatrix published =
                    condition_on_homodyne(cm, {3, Quadrature::P});
                return von_neumann_entropy(published) -
                       von_neumann_entropy(condition_on_homodyne(published, key_x));
            }
        }
    }

    throw DomainError("unsupported covariance-matrix layout for a Holevo bound");
}

namespace detail {

KeyRateResult evaluate_key(const SourceSpec& src, const EffectiveChannel& ch,
                           const MeasurementScheme& scheme, ReconciliationSide side,
                           double beta) {
    src.validate();
    scheme.validate();
    if (!(beta > 0) || beta > 1) throw DomainError("beta must lie in (0, 1]");

    const Real v = src.V;
    const Real vx = src.Vx;
    const Real vp = src.Vp;
    const Real vb_x = ch.t_diag * (v + vx + ch.extra_x - 1) + 1;
    const Real vb_p = ch.t_diag * (1 / v + vp + static_cast<Real>(src.dV_trusted) +
                                   ch.extra_p - 1) + 1;

    // Trusted preparation noise is excluded from the correlations by
    // construction: the sender's data variance is the raw modulation.
    const auto branch_i = [&](Real va, Real vb, Real c) {
        return va > 0 ? static_cast<double>(mutual_information_real(va, vb, c)) : 0.0;
    };

    KeyRateResult res;
    res.beta = beta;
    res.side = side;

    if (scheme.kind == K::Heterodyne) {
        const Real t = scheme.t_het;
        const double ix = branch_i(vx, t * vb_x + (1 - t), std::sqrt(t) * ch.t_cross * vx);
        const double ip = branch_i(vp, (1 - t) * vb_p + t, std::sqrt(1 - t) * ch.t_cross * vp);
        const CovarianceMatrix cm(detail::four_mode_cm(src, ch.t_cross, ch.t_diag,
                                                       ch.extra_x, ch.extra_p, t));
        const double chi = holevo_bound(cm, scheme, side);
        res.holevo = chi;
        res.mutual_info = scheme.as_data == AS::UseForKey ? ix + ip : ix;
        res.key_rate = std::max(0.0, beta * res.mutual_info - chi);
        return res;
    }

    const CovarianceMatrix cm(detail::three_mode_cm(src, ch.t_cross, ch.t_diag,
                                                    ch.extra_x, ch.extra_p));
    const double ix = branch_i(vx, vb_x, ch.t_cross * vx);
    const double ip = branch_i(vp, vb_p, ch.t_cross * vp);

    switch (scheme.kind) {
        case K::HomodyneX: {
            const double chi = holevo_bound(cm, scheme, side);
            res.mutual_info = ix;
            res.holevo = chi;
            res.key_rate = std::max(0.0, beta * ix - chi);
            return res;
        }
        case K::HomodyneP: {
            const double chi = holevo_bound(cm, scheme, side);
            res.mutual_info = ip;
            res.holevo = chi;
            res.key_rate = std::max(0.0, beta * ip - chi);
            return res;
        }
        case K::BiasedHomodyne: {
            const int measured = side == ReconciliationSide::Reverse ? 2 : 0;
            const double chi_x = chi_single(cm, measured, Quadrature::X);
            const double chi_p = chi_single(cm, measured, Quadrature::P);
            res.mutual_info = ix + ip;
            res.holevo = chi_x + chi_p;
            res.key_rate = std::max(0.0, beta * ix - chi_x) + std::max(0.0, beta * ip - chi_p);
            return res;
        }
        case K::Heterodyne:
            break;
    }
    throw DomainError("unsupported measurement scheme");
}

} // namespace detail

KeyRateResult key_rate_asymptotic(const SourceSpec& src, const ChannelSpec& ch,
                                  const MeasurementScheme& scheme, ReconciliationSide side,
                                  double beta) {
    ch.validate();
    if (ch.kind != ChannelSpec::Kind::Fixed) {
        throw DomainError("key_rate_asymptotic expects a fixed channel; use key_rate_fading");
    }
    detail::EffectiveChannel eff;
    eff.t_cross = std::sqrt(static_cast<Real>(ch.T));
    eff.t_diag = ch.T;
    eff.extra_x = ch.epsilon;
    eff.extra_p = static_cast<Real>(ch.epsilon) + static_cast<Real>(src.dV_untrusted);
    return detail::evaluate_key(src, eff, scheme, side, beta);
}

double pure_loss_limits(const SourceSpec& src, double T, ReconciliationSide side) {
    src.validate();
    if (!(T > 0) || T > 1) throw DomainError("transmittance must lie in (0, 1]");
    const Real t = T;
    const Real v = src.V;
    const Real s = v + static_cast<Real>(src.Vx);
    if (side == ReconciliationSide::Reverse) {
        return static_cast<double>(
            Real(0.5L) * std::log2((s - t * (s - 1)) * (1 + t * (s - 1)) / s));
    }
    return static_cast<double>(
        Real(0.5L) * std::log2(1 + static_cast<Real>(src.Vx) * (1 - t) / (t + v * (1 - t))));
}

CovarianceMatrix allocation_cm(double V, double Vx, double eps_x, double eps_p) {
    if (!(V > 0)) throw DomainError("carrier variance must be positive");
    if (Vx < 0 || eps_x < 0 || eps_p < 0) {
        throw DomainError("modulation and noise variances must be non-negative");
    }
    const Real v = V, vx = Vx;
    const Real s = v + vx;
    const Real d = std::sqrt(s * vx);
    Mat g = Mat::Zero(4, 4);
    g(0, 0) = s;
    g(1, 1) = 1 / v;
    g(2, 2) = s + static_cast<Real>(eps_x);
    g(3, 3) = 1 / v + static_cast<Real>(eps_p);
    g(0, 2) = g(2, 0) = d;
    g(1, 3) = g(3, 1) = -d / (s * v);
    return CovarianceMatrix(g);
}

double allocation_holevo(double V, double Vx, NoiseAllocation allocation, double eps_max,
                         ReconciliationSide side) {
    if (!(V > 0) || Vx < 0) throw DomainError("invalid source variances");
    if (eps_max < 0) throw DomainError("eps_max must be non-negative");
    const Real v = V, vx = Vx, e = eps_max;
    const Real s = v + vx;

    if (allocation == NoiseAllocation::AllInSqueezed) {
        if (side == ReconciliationSide::Direct) return 0.0;
        const Real nu_total = std::sqrt((e + v) / v);
        const Real nu_cond = std::sqrt((e + v) * s / (v * (e + s)));
        return static_cast<double>(g_real((nu_total - 1) / 2) - g_real((nu_cond - 1) / 2));
    }

    const Real nu = std::sqrt(1 + e * s);
    if (side == ReconciliationSide::Reverse) {
        return static_cast<double>(g_real((nu - 1) / 2));
    }
    const Real nu_cond = std::sqrt(1 + e * v);
    return static_cast<double>(g_real((nu - 1) / 2) - g_real((nu_cond - 1) / 2));
}

namespace {

double allocation_key(const NoisySqueezedState& state, double Vx, double eps_x,
                      ReconciliationSide side) {
    if (!(Vx > 0)) throw DomainError("modulation variance must be positive");
    const NoiseSplit split = allocate_noise(state, eps_x);
    const CovarianceMatrix cm = allocation_cm(split.V, Vx, split.eps_x, split.eps_p);
    const int measured = side == ReconciliationSide::Reverse ? 1 : 0;
    const double chi = chi_single(cm, measured, Quadrature::X);
    const double info = static_cast<double>(
        Real(0.5L) * std::log2(1 + static_cast<Real>(Vx) / static_cast<Real>(state.var_x)));
    return info - chi;
}

} // namespace

double dr_key_with_allocation(const NoisySqueezedState& state, double Vx, double eps_x) {
    return allocation_key(state, Vx, eps_x, ReconciliationSide::Direct);
}

WorstCaseAllocation worst_case_allocation(const NoisySqueezedState& state, double Vx,
                                          ReconciliationSide side) {
    const double eps_max = std::max(0.0, state.var_x - 1.0 / state.var_p);
    const auto key_at = [&](double e) { return allocation_key(state, Vx, e, side); };

    if (eps_max <= 1e-15) {
        return {0.0, key_at(0.0)};
    }

    // Coarse scan to bracket the minimum (the objective is smooth but its
    // minimizer can sit at either boundary or in the interior), then a
    // golden-section refinement to 1e-6 on eps_x.
    constexpr int kScan = 33;
    int best = 0;
    double best_key = key_at(0.0);
    std::vector<double> keys(kScan);
    keys[0] = best_key;
    for (int i = 1; i < kScan; ++i) {
        const double e = eps_max * i / (kScan - 1);
        keys[static_cast<size_t>(i)] = key_at(e);
        if (keys[static_cast<size_t>(i)] < best_key) {
            best_key = keys[static_cast<size_t>(i)];
            best = i;
        }
    }

    double lo = eps_max * std::max(0, best - 1) / (kScan - 1);
    double hi = eps_max * std::min(kScan - 1, best + 1) / (kScan - 1);
    const double gr = (std::sqrt(5.0) - 1.0) / 2.0;
    double a = lo, b = hi;
    double x1 = b - gr * (b - a);
    double x2 = a + gr * (b - a);
    double f1 = key_at(x1);
    double f2 = key_at(x2);
    while (b - a > 1e-6) {
        if (f1 < f2) {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - gr * (b - a);
            f1 = key_at(x1);
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + gr * (b - a);
            f2 = key_at(x2);
        }
    }
    const double e_star = (a + b) / 2;
    const double k_star = key_at(e_star);
    if (k_star <= best_key) {
        return {e_star, k_star};
    }
    return {eps_max * best / (kScan - 1), best_key};
}

} // namespace cvqkd

#include "cvqkd/protocol.hpp"

#include <cmath>
#include <string>

namespace cvqkd {

namespace {

constexpr double kModulationFloor = 1e-12;

void require_finite(double v, const char* name) {
    if (!std::isfinite(v)) {
        throw DomainError(std::string(name) + " must be finite");
    }
}

struct EbReal {
    Real V1, V2, Vm;
};

// Entangled-source variances in extended precision. V1 is recovered from the
// product identity V1*V2 = V*(V+Vx)/(1+V*Vp_eff) instead of the subtractive
// root, which loses all significant digits once Vx >> V.
EbReal eb_real(const SourceSpec& src) {
    src.validate();
    if (src.Vx <= kModulationFloor) {
        throw SingularModulationError(
            "x modulation variance too small for an entangled-source equivalent");
    }
    const Real v = src.V;
    const Real vx = src.Vx;
    const Real vp = static_cast<Real>(src.Vp) + static_cast<Real>(src.dV_trusted);
    const Real s = v + vx;
    const Real denom = 1 + v * vp;
    const Real product = v * s / denom;
    const Real disc = std::sqrt(s * (vx + v * vp * s) / denom);
    const Real v2 = s + disc;
    const Real v1 = product / v2;
    const Real vm = v * v * vp * s / (vx * denom);
    return {v1, v2, vm};
}

} // namespace

void SourceSpec::validate() const {
    require_finite(V, "V");
    require_finite(Vx, "Vx");
    require_finite(Vp, "Vp");
    require_finite(dV_trusted, "dV_trusted");
    require_finite(dV_untrusted, "dV_untrusted");
    if (V <= 0) throw DomainError("carrier variance V must be positive");
    if (Vx < 0) throw DomainError("modulation variance Vx must be non-negative");
    if (Vp < 0) throw DomainError("modulation variance Vp must be non-negative");
    if (dV_trusted < 0) throw DomainError("dV_trusted must be non-negative");
    if (dV_untrusted < 0) throw DomainError("dV_untrusted must be non-negative");
}

ChannelSpec ChannelSpec::fixed(double T, double epsilon) {
    ChannelSpec ch;
    ch.kind = Kind::Fixed;
    ch.T = T;
    ch.epsilon = epsilon;
    ch.validate();
    return ch;
}

ChannelSpec ChannelSpec::fading(std::vector<FadingPoint> distribution, double epsilon) {
    ChannelSpec ch;
    ch.kind = Kind::Fading;
    ch.distribution = std::move(distribution);
    ch.epsilon = epsilon;
    ch.T = 0.0;
    for (const FadingPoint& pt : ch.distribution) ch.T += pt.weight * pt.T;
    ch.validate();
    return ch;
}

void ChannelSpec::validate() const {
    require_finite(epsilon, "epsilon");
    if (epsilon < 0) throw DomainError("excess noise must be non-negative");
    if (kind == Kind::Fixed) {
        require_finite(T, "T");
        if (T <= 0 || T > 1) throw DomainError("transmittance must lie in (0, 1]");
        return;
    }
    if (distribution.empty()) {
        throw DomainError("fading channel needs a non-empty transmittance distribution");
    }
    double total = 0.0;
    for (const FadingPoint& pt : distribution) {
        require_finite(pt.T, "fading T");
        require_finite(pt.weight, "fading weight");
        if (pt.T <= 0 || pt.T > 1) throw DomainError("fading transmittance must lie in (0, 1]");
        if (pt.weight <= 0) throw DomainError("fading weights must be positive");
        total += pt.weight;
    }
    if (std::abs(total - 1.0) > 1e-9) {
        throw DomainError("fading weights must sum to 1, got " + std::to_string(total));
    }
}

EBEquivalents eb_equivalents(const SourceSpec& src) {
    const EbReal eb = eb_real(src);
    return {static_cast<double>(eb.V1), static_cast<double>(eb.V2), static_cast<double>(eb.Vm)};
}

namespace detail {

Mat three_mode_cm(const SourceSpec& src, Real t_cross, Real t_diag, Real extra_x, Real extra_p) {
    const EbReal eb = eb_real(src);
    if (eb.Vm <= Real(kModulationFloor)) {
        throw SingularModulationError(
            "p modulation variance too small for the three-mode representation; "
            "use the two-mode allocation route for x-only protocols");
    }
    const Real v1 = eb.V1, v2 = eb.V2, vm = eb.Vm;
    const Real sum = v1 + v2;
    const Real prod = v1 * v2;
    const Real sqrt2 = std::sqrt(Real(2));

    const Real a_x = (sum + 2 * vm) / 4;
    const Real a_p = (vm * sum + 2 * prod) / (4 * prod * vm);
    const Real sa_x = (sum - 2 * vm) / 4;
    const Real sa_p = (vm * sum - 2 * prod) / (4 * prod * vm);
    const Real sab_x = (v2 - v1) / (2 * sqrt2);
    const Real sab_p = (v1 - v2) / (2 * sqrt2 * prod);
    const Real b_x = t_diag * (sum / 2 + extra_x - 1) + 1;
    const Real b_p = t_diag * (sum / (2 * prod) + extra_p - 1) + 1;

    Mat g = Mat::Zero(6, 6);
    g(0, 0) = a_x;  g(1, 1) = a_p;
    g(2, 2) = a_x;  g(3, 3) = a_p;
    g(4, 4) = b_x;  g(5, 5) = b_p;
    g(0, 2) = g(2, 0) = sa_x;
    g(1, 3) = g(3, 1) = sa_p;
    g(0, 4) = g(4, 0) = t_cross * sab_x;
    g(1, 5) = g(5, 1) = t_cross * sab_p;
    g(2, 4) = g(4, 2) = t_cross * sab_x;
    g(3, 5) = g(5, 3) = t_cross * sab_p;
    return g;
}

Mat four_mode_cm(const SourceSpec& src, Real t_cross, Real t_diag, Real extra_x, Real extra_p,
                 Real t_het) {
    if (!(t_het > 0 && t_het < 1)) {
        throw DomainError("receiver beamsplitter transmittance must lie in (0, 1)");
    }
    const Mat g3 = three_mode_cm(src, t_cross, t_diag, extra_x, extra_p);
    const Real t = t_het;
    const Real r = 1 - t_het;
    const Real st = std::sqrt(t);
    const Real sr = std::sqrt(r);

    Mat g = Mat::Zero(8, 8);
    g.block<4, 4>(0, 0) = g3.block<4, 4>(0, 0);

    const Mat gb = g3.block<2, 2>(4, 4);
    const Mat eye = Mat::Identity(2, 2);
    g.block<2, 2>(4, 4) = t * gb + r * eye;
    g.block<2, 2>(6, 6) = r * gb + t * eye;
    Mat bbp = std::sqrt(t * r) * (eye - gb);
    g.block<2, 2>(4, 6) = bbp;
    g.block<2, 2>(6, 4) = bbp.transpose();

    for (int a = 0; a < 2; ++a) {
        const Mat sab = g3.block<2, 2>(2 * a, 4);
        g.block<2, 2>(2 * a, 4) = st * sab;
        g.block<2, 2>(4, 2 * a) = (st * sab).transpose();
        g.block<2, 2>(2 * a, 6) = -sr * sab;
        g.block<2, 2>(6, 2 * a) = (-sr * sab).transpose();
    }
    return g;
}

} // namespace detail

CovarianceMatrix build_cm_homodyne(const SourceSpec& src, const ChannelSpec& ch) {
    ch.validate();
    if (ch.kind != ChannelSpec::Kind::Fixed) {
        throw DomainError("build_cm_homodyne expects a fixed channel; use build_cm_fading");
    }
    const Real t = ch.T;
    return CovarianceMatrix(detail::three_mode_cm(src, std::sqrt(t), t, ch.epsilon,
                                                  static_cast<Real>(ch.epsilon) + static_cast<Real>(src.dV_untrusted)));
}

CovarianceMatrix build_cm_heterodyne(const SourceSpec& src, const ChannelSpec& ch, double t_het) {
    ch.validate();
    if (ch.kind != ChannelSpec::Kind::Fixed) {
        throw DomainError("build_cm_heterodyne expects a fixed channel");
    }
    const Real t = ch.T;
    return CovarianceMatrix(detail::four_mode_cm(src, std::sqrt(t), t, ch.epsilon,
                                                 static_cast<Real>(ch.epsilon) + static_cast<Real>(src.dV_untrusted),
                                                 t_het));
}

CovarianceMatrix pure_loss_eve_cm(const SourceSpec& src, double T) {
    src.validate();
    if (T <= 0 || T > 1) throw DomainError("transmittance must lie in (0, 1]");
    const Real t = T;
    const Real v = src.V;
    Mat g = Mat::Zero(2, 2);
    g(0, 0) = (1 - t) * (static_cast<Real>(src.Vx) + v) + t;
    g(1, 1) = (1 - t) * (1 / v + static_cast<Real>(src.dV_trusted)) + t;
    return CovarianceMatrix(g);
}

NoisySqueezedState noisy_state_from_loss(double Vs, double eta) {
    require_finite(Vs, "Vs");
    require_finite(eta, "eta");
    if (Vs <= 0) throw DomainError("squeezed variance must be positive");
    if (eta < 0 || eta > 1) throw DomainError("loss transmittance must lie in [0, 1]");
    const Real vs = Vs;
    const Real e = eta;
    NoisySqueezedState st;
    st.var_x = static_cast<double>(e * vs + 1 - e);
    st.var_p = static_cast<double>(e / vs + 1 - e);
    st.purity = static_cast<double>(1 / std::sqrt(1 + (e - e * e) * (1 / vs + vs - 2)));
    return st;
}

NoiseSplit allocate_noise(const NoisySqueezedState& state, double eps_x) {
    require_finite(state.var_x, "var_x");
    require_finite(state.var_p, "var_p");
    require_finite(eps_x, "eps_x");
    if (state.var_x <= 0 || state.var_p <= 0) {
        throw DomainError("observed quadrature variances must be positive");
    }
    const double eps_max = state.var_x - 1.0 / state.var_p;
    if (eps_max < -1e-12) {
        throw AllocationOutOfRangeError("observed state violates the uncertainty bound");
    }
    if (eps_x < -1e-12 || eps_x > eps_max + 1e-12) {
        throw AllocationOutOfRangeError(
            "eps_x = " + std::to_string(eps_x) + " outside admissible range [0, " +
            std::to_string(std::max(0.0, eps_max)) + "]");
    }
    NoiseSplit split;
    split.eps_x = std::min(std::max(eps_x, 0.0), std::max(0.0, eps_max));
    split.V = state.var_x - split.eps_x;
    split.eps_p = std::max(0.0, state.var_p - 1.0 / split.V);
    return split;
}

} // namespace cvqkd

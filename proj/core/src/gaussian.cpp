#include "cvqkd/gaussian.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace cvqkd {

namespace {

constexpr double kSpectrumSnapWindow = 1e-9;
constexpr double kPairingTol = 1e-8;
constexpr Real kZeroVarianceFloor = 1e-12L;

Mat symplectic_form(int modes) {
    Mat omega = Mat::Zero(2 * modes, 2 * modes);
    for (int k = 0; k < modes; ++k) {
        omega(2 * k, 2 * k + 1) = 1;
        omega(2 * k + 1, 2 * k) = -1;
    }
    return omega;
}

void check_shape(const Mat& m) {
    if (m.rows() != m.cols() || m.rows() == 0 || m.rows() % 2 != 0) {
        throw DomainError("covariance matrix must be square with even dimension, got " +
                          std::to_string(m.rows()) + "x" + std::to_string(m.cols()));
    }
}

void check_symmetry(const Mat& m) {
    const Real scale = std::max<Real>(1, m.cwiseAbs().maxCoeff());
    const Real asym = (m - m.transpose()).cwiseAbs().maxCoeff();
    if (asym > Real(1e-12) * scale) {
        throw NonSymmetricError("covariance matrix asymmetry " +
                                std::to_string(static_cast<double>(asym / scale)) +
                                " exceeds relative tolerance 1e-12");
    }
}

// Rescales each mode by diag(d, 1/d) with d = (gamma_pp/gamma_xx)^(1/4).
// This is a symplectic congruence, so the spectrum is unchanged, but the
// dynamic range between squeezed and antisqueezed entries collapses and the
// Cholesky factorization loses far fewer digits.
Mat balance_modes(const Mat& g) {
    const int n = static_cast<int>(g.rows()) / 2;
    Vec scale(2 * n);
    for (int k = 0; k < n; ++k) {
        const Real vx = g(2 * k, 2 * k);
        const Real vp = g(2 * k + 1, 2 * k + 1);
        Real d = 1;
        if (vx > 0 && vp > 0) d = std::pow(vp / vx, Real(0.25L));
        scale(2 * k) = d;
        scale(2 * k + 1) = 1 / d;
    }
    return scale.asDiagonal() * g * scale.asDiagonal();
}

std::vector<Real> raw_symplectic_values(const Mat& g) {
    const int modes = static_cast<int>(g.rows()) / 2;
    const Mat gb = balance_modes(g);

    // Primary path: gamma = L L^T, then the singular values of L^T Omega L
    // are the symplectic eigenvalues, each appearing twice. This keeps the
    // whole computation inside well-conditioned orthogonal transforms.
    Eigen::LLT<Mat> llt(gb);
    if (llt.info() == Eigen::Success) {
        Mat l = llt.matrixL();
        Mat k = l.transpose() * symplectic_form(modes) * l;
        Eigen::JacobiSVD<Mat> svd(k);
        const Vec& sv = svd.singularValues();
        return {sv.data(), sv.data() + sv.size()};
    }

    // Fallback for matrices that are not numerically positive definite
    // (e.g. marginals with a zeroed block): moduli of the eigenvalues of
    // i*Omega*gamma, via the real eigensolver.
    Eigen::EigenSolver<Mat> es(symplectic_form(modes) * gb, false);
    if (es.info() != Eigen::Success) {
        throw NumericalFailureError("eigen decomposition for symplectic spectrum failed");
    }
    std::vector<Real> vals(2 * modes);
    for (int i = 0; i < 2 * modes; ++i) {
        const auto ev = es.eigenvalues()(i);
        vals[static_cast<size_t>(i)] = std::hypot(ev.real(), ev.imag());
    }
    std::sort(vals.begin(), vals.end(), std::greater<Real>());
    return vals;
}

} // namespace

CovarianceMatrix::CovarianceMatrix(Mat m) {
    check_shape(m);
    check_symmetry(m);
    m_ = ((m + m.transpose()) / 2).eval();
}

CovarianceMatrix::CovarianceMatrix(const Eigen::MatrixXd& m) : CovarianceMatrix(Mat(m.cast<Real>())) {}

CovarianceMatrix CovarianceMatrix::vacuum(int modes) {
    if (modes <= 0) throw DomainError("mode count must be positive");
    return CovarianceMatrix(Mat(Mat::Identity(2 * modes, 2 * modes)));
}

bool SymplecticSpectrum::physical(double tol) const {
    for (double v : values) {
        if (v < 1.0 - tol) return false;
    }
    return true;
}

double g_function(double x) {
    if (std::isnan(x)) throw DomainError("g_function argument is NaN");
    if (x < -1e-12) {
        throw DomainError("g_function argument " + std::to_string(x) + " below domain");
    }
    if (x <= 0) return 0.0;
    const Real xr = x;
    return static_cast<double>((xr + 1) * std::log2(xr + 1) - xr * std::log2(xr));
}

SymplecticSpectrum symplectic_eigenvalues(const CovarianceMatrix& cm) {
    std::vector<Real> vals = raw_symplectic_values(cm.raw());
    std::sort(vals.begin(), vals.end(), std::greater<Real>());

    const int modes = cm.mode_count();
    SymplecticSpectrum spec;
    spec.values.reserve(static_cast<size_t>(modes));
    for (int i = 0; i < modes; ++i) {
        const Real a = vals[static_cast<size_t>(2 * i)];
        const Real b = vals[static_cast<size_t>(2 * i + 1)];
        if (std::abs(a - b) > Real(kPairingTol) * std::max<Real>(1, a)) {
            throw NumericalFailureError(
                "symplectic eigenvalues did not come out in pairs: " +
                std::to_string(static_cast<double>(a)) + " vs " +
                std::to_string(static_cast<double>(b)));
        }
        double lambda = static_cast<double>((a + b) / 2);
        if (lambda >= 1.0 - kSpectrumSnapWindow && lambda < 1.0) lambda = 1.0;
        spec.values.push_back(lambda);
    }
    return spec;
}

double von_neumann_entropy(const CovarianceMatrix& cm) {
    const SymplecticSpectrum spec = symplectic_eigenvalues(cm);
    double s = 0.0;
    for (double lambda : spec.values) {
        if (lambda < 1.0 - kSpectrumSnapWindow) {
            throw UnphysicalError("symplectic eigenvalue " + std::to_string(lambda) +
                                  " below uncertainty bound");
        }
        s += g_function((lambda - 1.0) / 2.0);
    }
    return s;
}

namespace {

CovarianceMatrix condition_single(const CovarianceMatrix& cm, QuadratureSelector sel) {
    const int modes = cm.mode_count();
    if (sel.mode < 0 || sel.mode >= modes) {
        throw DomainError("measured mode index " + std::to_string(sel.mode) +
                          " out of range for " + std::to_string(modes) + " modes");
    }
    if (modes < 2) {
        throw DomainError("conditioning needs at least one unmeasured mode");
    }

    const Mat& g = cm.raw();
    const int dim = cm.dim();
    const int p = 2 * sel.mode + (sel.quad == Quadrature::P ? 1 : 0);

    std::vector<int> keep;
    keep.reserve(static_cast<size_t>(dim - 2));
    for (int i = 0; i < dim; ++i) {
        if (i != 2 * sel.mode && i != 2 * sel.mode + 1) keep.push_back(i);
    }

    Vec c(dim - 2);
    Mat rest(dim - 2, dim - 2);
    for (int i = 0; i < dim - 2; ++i) {
        c(i) = g(keep[static_cast<size_t>(i)], p);
        for (int j = 0; j < dim - 2; ++j) {
            rest(i, j) = g(keep[static_cast<size_t>(i)], keep[static_cast<size_t>(j)]);
        }
    }

    const Real v = g(p, p);
    if (v < 0) throw UnphysicalError("measured quadrature has negative variance");
    if (v > kZeroVarianceFloor) {
        rest -= (c * c.transpose()) / v;
    }
    // else: pseudoinverse of a zero variance is zero, correlations drop out.

    return CovarianceMatrix(Mat(((rest + rest.transpose()) / 2).eval()));
}

} // namespace

CovarianceMatrix condition_on_homodyne(const CovarianceMatrix& cm, QuadratureSelector sel) {
    return condition_single(cm, sel);
}

CovarianceMatrix condition_on_heterodyne(const CovarianceMatrix& cm,
                                         QuadratureSelector x_sel,
                                         QuadratureSelector p_sel) {
    if (x_sel.mode == p_sel.mode) {
        throw DomainError("the two conditioning measurements must act on distinct modes");
    }
    CovarianceMatrix after_x = condition_single(cm, x_sel);
    QuadratureSelector shifted = p_sel;
    if (p_sel.mode > x_sel.mode) shifted.mode -= 1;
    return condition_single(after_x, shifted);
}

} // namespace cvqkd

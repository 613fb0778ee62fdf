#pragma once

#include <Eigen/Dense>
#include <vector>

#include "cvqkd/errors.hpp"

namespace cvqkd {

// All covariance matrices use shot-noise units with vacuum variance 1 and the
// mode-interleaved quadrature ordering (x1, p1, x2, p2, ...). Internal storage
// and factorizations run in extended precision so that near-pure states built
// from double inputs stay inside the physicality tolerance.
using Real = long double;
using Mat = Eigen::Matrix<Real, Eigen::Dynamic, Eigen::Dynamic>;
using Vec = Eigen::Matrix<Real, Eigen::Dynamic, 1>;

enum class Quadrature { X, P };

/// Picks one quadrature of one mode, e.g. "the p quadrature of mode 2".
struct QuadratureSelector {
    int mode = 0;
    Quadrature quad = Quadrature::X;
};

/// Symmetric positive covariance matrix of an n-mode Gaussian state.
///
/// Construction validates squareness, even dimension and symmetry
/// (relative tolerance 1e-12) and stores the symmetrized matrix.
/// Physicality (uncertainty bound) is checked where it matters, by the
/// entropy and conditioning routines, not at construction time, so that
/// intermediate algebra on marginals is unrestricted.
class CovarianceMatrix {
public:
    explicit CovarianceMatrix(Mat m);
    explicit CovarianceMatrix(const Eigen::MatrixXd& m);

    static CovarianceMatrix vacuum(int modes);

    int mode_count() const { return static_cast<int>(m_.rows()) / 2; }
    int dim() const { return static_cast<int>(m_.rows()); }

    const Mat& raw() const { return m_; }
    Eigen::MatrixXd matrix() const { return m_.cast<double>(); }
    double entry(int r, int c) const { return static_cast<double>(m_(r, c)); }

private:
    Mat m_;
};

/// Symplectic eigenvalues of a covariance matrix, sorted in descending order.
/// Values in [1 - 1e-9, 1) are snapped to exactly 1; smaller values are kept
/// as-is (consumers decide whether that is an error).
struct SymplecticSpectrum {
    std::vector<double> values;

    bool physical(double tol = 1e-9) const;
};

/// Bosonic entropy function g(x) = (x+1)log2(x+1) - x log2(x) in bits,
/// with g(0) = 0. Arguments in [-1e-12, 0) are clamped to 0; anything
/// below that raises DomainError.
double g_function(double x);

SymplecticSpectrum symplectic_eigenvalues(const CovarianceMatrix& cm);

/// Von Neumann entropy in bits: sum of g((lambda_i - 1)/2) over the
/// symplectic spectrum. Raises UnphysicalError if any eigenvalue is
/// below 1 - 1e-9.
double von_neumann_entropy(const CovarianceMatrix& cm);

/// State of the remaining modes after an ideal homodyne measurement of one
/// quadrature of one mode. The measured mode is removed from the matrix;
/// indices above it shift down by one. Uses the pseudoinverse convention:
/// if the measured variance is ~0 the correlation update is skipped.
CovarianceMatrix condition_on_homodyne(const CovarianceMatrix& cm, QuadratureSelector sel);

/// State after homodyning the x quadrature of one mode and the p quadrature
/// of another (the detection arrangement where a tap beamsplitter routes the
/// two outputs to separate detectors). Both measured modes are removed.
/// The result is independent of measurement order to within 1e-10.
CovarianceMatrix condition_on_heterodyne(const CovarianceMatrix& cm,
                                         QuadratureSelector x_sel,
                                         QuadratureSelector p_sel);

} // namespace cvqkd

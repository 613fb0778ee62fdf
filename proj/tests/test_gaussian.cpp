#include "doctest.h"

#include <cvqkd/errors.hpp>
#include <cvqkd/gaussian.hpp>

#include <cmath>

using namespace cvqkd;

namespace {

Eigen::MatrixXd thermal(std::initializer_list<double> occ) {
    Eigen::MatrixXd m = Eigen::MatrixXd::Zero(2 * occ.size(), 2 * occ.size());
    int i = 0;
    for (double v : occ) {
        m(2 * i, 2 * i) = v;
        m(2 * i + 1, 2 * i + 1) = v;
        ++i;
    }
    return m;
}

// Entangling beamsplitter of transmittance t acting on modes 0 and 1.
Eigen::MatrixXd beamsplitter(double t) {
    const double c = std::sqrt(t), s = std::sqrt(1.0 - t);
    Eigen::MatrixXd S = Eigen::MatrixXd::Zero(4, 4);
    S(0, 0) = S(1, 1) = c;
    S(2, 2) = S(3, 3) = c;
    S(0, 2) = S(1, 3) = s;
    S(2, 0) = S(3, 1) = -s;
    return S;
}

// Fixed positive definite 6x6 fixture; not a physical state, only used to
// exercise the Schur-complement algebra.
Eigen::MatrixXd spd6() {
    Eigen::MatrixXd m(6, 6);
    m << 4.0, 0.3, -0.2, 0.5, 0.1, -0.4,
         0.3, 3.0, 0.6, -0.1, 0.2, 0.3,
        -0.2, 0.6, 5.0, 0.4, -0.3, 0.2,
         0.5, -0.1, 0.4, 2.5, 0.5, -0.1,
         0.1, 0.2, -0.3, 0.5, 3.5, 0.6,
        -0.4, 0.3, 0.2, -0.1, 0.6, 2.8;
    return m;
}

}  // namespace

TEST_CASE("g_function reference values") {
    CHECK(g_function(0.0) == 0.0);
    CHECK(std::abs(g_function(1.0) - 2.0) < 1e-14);
    CHECK(std::abs(g_function(0.5) - 1.3774437510817343) < 1e-14);
    // G(2) = 3 log2 3 - 2
    CHECK(std::abs(g_function(2.0) - 2.7548875021634686) < 1e-14);
    // tiny negative arguments from cancellation clamp to zero
    CHECK(g_function(-5e-13) == 0.0);
    CHECK_THROWS_AS(g_function(-1e-6), DomainError);
    CHECK_THROWS_AS(g_function(std::nan("")), DomainError);
    // strictly increasing
    CHECK(g_function(0.2) < g_function(0.3));
}

TEST_CASE("covariance matrix construction validates shape and symmetry") {
    auto make = [](const Eigen::MatrixXd& m) { return CovarianceMatrix(m); };
    CHECK_THROWS_AS(make(Eigen::MatrixXd::Identity(3, 3)), DomainError);
    CHECK_THROWS_AS(make(Eigen::MatrixXd::Zero(0, 0)), DomainError);

    Eigen::MatrixXd bad = thermal({2.0, 2.0});
    bad(0, 1) = 1e-6;  // asymmetric beyond tolerance
    CHECK_THROWS_AS(make(bad), NonSymmetricError);

    Eigen::MatrixXd ok = thermal({2.0});
    ok(0, 1) = 1e-15;
    CovarianceMatrix cm(ok);  // symmetrized silently
    CHECK(cm.mode_count() == 1);
    CHECK(cm.entry(0, 1) == cm.entry(1, 0));
}

TEST_CASE("symplectic spectrum of simple states") {
    auto vac = CovarianceMatrix::vacuum(1);
    auto s1 = symplectic_eigenvalues(vac);
    REQUIRE(s1.values.size() == 1);
    CHECK(std::abs(s1.values[0] - 1.0) < 1e-14);
    CHECK(s1.physical());
    CHECK(von_neumann_entropy(vac) < 1e-14);

    CovarianceMatrix th(thermal({3.0}));
    auto s2 = symplectic_eigenvalues(th);
    CHECK(std::abs(s2.values[0] - 3.0) < 1e-13);
    CHECK(std::abs(von_neumann_entropy(th) - 2.0) < 1e-13);

    // squeezed vacuum stays pure
    Eigen::MatrixXd sq(2, 2);
    sq << 0.1, 0.0, 0.0, 10.0;
    CHECK(std::abs(symplectic_eigenvalues(CovarianceMatrix(sq)).values[0] - 1.0) < 1e-12);

    CovarianceMatrix two(thermal({3.0, 5.0}));
    auto s3 = symplectic_eigenvalues(two);
    REQUIRE(s3.values.size() == 2);
    // descending order
    CHECK(std::abs(s3.values[0] - 5.0) < 1e-12);
    CHECK(std::abs(s3.values[1] - 3.0) < 1e-12);
    CHECK(std::abs(von_neumann_entropy(two) - 4.754887502163468) < 1e-12);
}

TEST_CASE("spectrum is invariant under symplectic transformations") {
    Eigen::MatrixXd g = thermal({3.0, 5.0});
    Eigen::MatrixXd S = beamsplitter(0.3);
    CovarianceMatrix mixed(Eigen::MatrixXd(S * g * S.transpose()));
    auto s = symplectic_eigenvalues(mixed);
    CHECK(std::abs(s.values[0] - 5.0) < 1e-11);
    CHECK(std::abs(s.values[1] - 3.0) < 1e-11);
    CHECK(std::abs(von_neumann_entropy(mixed) - 4.754887502163468) < 1e-11);

    // single-mode squeezing of a thermal state
    Eigen::MatrixXd gs(2, 2);
    gs << 2.0 * 2.5, 0.0, 0.0, 2.0 / 2.5;
    CHECK(std::abs(symplectic_eigenvalues(CovarianceMatrix(gs)).values[0] - 2.0) < 1e-13);
}

TEST_CASE("unphysical states are rejected by the entropy") {
    Eigen::MatrixXd sub = thermal({0.5});
    auto s = symplectic_eigenvalues(CovarianceMatrix(sub));
    CHECK(std::abs(s.values[0] - 0.5) < 1e-13);
    CHECK_FALSE(s.physical());
    CHECK_THROWS_AS(von_neumann_entropy(CovarianceMatrix(sub)), UnphysicalError);
}

TEST_CASE("eigenvalues just below one snap to one") {
    Eigen::MatrixXd g(2, 2);
    const double lam = 1.0 - 1e-10;
    g << lam, 0.0, 0.0, lam;
    auto s = symplectic_eigenvalues(CovarianceMatrix(g));
    CHECK(s.values[0] == 1.0);
    CHECK(von_neumann_entropy(CovarianceMatrix(g)) == 0.0);
}

TEST_CASE("homodyne conditioning implements the Schur complement") {
    // loss channel fixture: input variance a in x, 1/V + 0 in p, T = 0.5
    const double a = 10.5, T = 0.5, ap = 2.0;
    const double ex = (1 - T) * a + T, bx = T * a + 1 - T, cx = std::sqrt(T * (1 - T)) * (a - 1);
    const double ep = (1 - T) * ap + T, bp = T * ap + 1 - T, cp = std::sqrt(T * (1 - T)) * (ap - 1);
    Eigen::MatrixXd g(4, 4);
    g << ex, 0, cx, 0,
         0, ep, 0, cp,
         cx, 0, bx, 0,
         0, cp, 0, bp;
    auto cond = condition_on_homodyne(CovarianceMatrix(g), {1, Quadrature::X});
    REQUIRE(cond.mode_count() == 1);
    CHECK(std::abs(cond.entry(0, 0) - 1.826086956521739) < 1e-12);  // a / (1 + T(a-1))
    CHECK(std::abs(cond.entry(1, 1) - ep) < 1e-14);                 // p marginal untouched

    auto condp = condition_on_homodyne(CovarianceMatrix(g), {1, Quadrature::P});
    CHECK(std::abs(condp.entry(0, 0) - ex) < 1e-14);
    CHECK(std::abs(condp.entry(1, 1) - (ep - cp * cp / bp)) < 1e-13);
}

TEST_CASE("conditioning a product state leaves the remainder unchanged") {
    Eigen::MatrixXd g = thermal({3.0, 5.0});
    auto cond = condition_on_homodyne(CovarianceMatrix(g), {0, Quadrature::X});
    CHECK(cond.entry(0, 0) == 5.0);
    CHECK(cond.entry(1, 1) == 5.0);
    CHECK(cond.entry(0, 1) == 0.0);
}

TEST_CASE("zero-variance quadratures are conditioned via the pseudoinverse rule") {
    Eigen::MatrixXd g(4, 4);
    g << 3.0, 0.0, 0.5, 0.0,
         0.0, 3.0, 0.0, 0.0,
         0.5, 0.0, 1e-13, 0.0,
         0.0, 0.0, 0.0, 4.0;
    auto cond = condition_on_homodyne(CovarianceMatrix(g), {1, Quadrature::X});
    // measured variance below the floor: correlation term dropped entirely
    CHECK(cond.entry(0, 0) == 3.0);
    CHECK(cond.entry(1, 1) == 3.0);

    Eigen::MatrixXd neg = g;
    neg(2, 2) = -0.5;
    CHECK_THROWS_AS(condition_on_homodyne(CovarianceMatrix(neg), {1, Quadrature::X}),
                    UnphysicalError);
}

TEST_CASE("conditioning validates selectors") {
    CovarianceMatrix cm(spd6());
    CHECK_THROWS_AS(condition_on_homodyne(cm, {3, Quadrature::X}), DomainError);
    CHECK_THROWS_AS(condition_on_homodyne(cm, {-1, Quadrature::X}), DomainError);
    CHECK_THROWS_AS(condition_on_homodyne(CovarianceMatrix::vacuum(1), {0, Quadrature::X}),
                    DomainError);
    CHECK_THROWS_AS(condition_on_heterodyne(cm, {0, Quadrature::X}, {0, Quadrature::P}),
                    DomainError);
}

TEST_CASE("heterodyne conditioning is order independent") {
    CovarianceMatrix cm(spd6());
    auto a = condition_on_heterodyne(cm, {0, Quadrature::X}, {2, Quadrature::P});
    // by hand in the opposite order; measuring mode 2 first leaves mode 0 in place
    auto first = condition_on_homodyne(cm, {2, Quadrature::P});
    auto b = condition_on_homodyne(first, {0, Quadrature::X});
    REQUIRE(a.mode_count() == 1);
    REQUIRE(b.mode_count() == 1);
    for (int i = 0; i < 2; ++i)
        for (int j = 0; j < 2; ++j)
            CHECK(std::abs(a.entry(i, j) - b.entry(i, j)) < 1e-10);

    // selector order must not matter either
    auto c = condition_on_heterodyne(cm, {2, Quadrature::P}, {0, Quadrature::X});
    for (int i = 0; i < 2; ++i)
        for (int j = 0; j < 2; ++j)
            CHECK(std::abs(a.entry(i, j) - c.entry(i, j)) < 1e-10);
}

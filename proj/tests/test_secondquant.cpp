#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "test_support.hpp"

#include "fm/secondquant.hpp"

using namespace fm;
using fmtest::leibniz_det;
using fmtest::max_abs_diff;

namespace {

Complex poly_at(const MonomialPoly& poly, const MultiIndex& J, const MultiIndex& I) {
    auto it = poly.find(MonomialKey{J, I, 0});
    return it == poly.end() ? Complex(0.0, 0.0) : it->second;
}

} // namespace

TEST_CASE("dilate_contraction") {
    std::mt19937_64 rng = seeded_rng(44001);

    SUBCASE("zero contraction dilates to the identity defect") {
        ContractionDilation d = dilate_contraction(ComplexMatrix::Zero(3, 3));
        CHECK(max_abs_diff(d.B, ComplexMatrix::Identity(3, 3)) < 1e-12);
    }
    SUBCASE("unitary input has no defect") {
        ComplexMatrix V = haar_unitary(3, rng);
        ContractionDilation d = dilate_contraction(V);
        CHECK(d.B.cwiseAbs().maxCoeff() < 1e-6);
    }
    SUBCASE("dissipative semigroup point dilates to an isometry pair") {
        ComplexMatrix H = random_dissipative_heff(4, rng);
        ComplexMatrix A = contraction_semigroup(H, 0.7);
        ContractionDilation d = dilate_contraction(A);
        ComplexMatrix res = d.A * d.A.adjoint() + d.B * d.B.adjoint() -
                            ComplexMatrix::Identity(4, 4);
        CHECK(res.norm() < 1e-9);
    }
    SUBCASE("non-contraction rejected") {
        CHECK_THROWS_AS(dilate_contraction(ComplexMatrix(1.5 * ComplexMatrix::Identity(2, 2))),
                        validation_error);
    }
}

TEST_CASE("exterior_power") {
    std::mt19937_64 rng = seeded_rng(44002);

    SUBCASE("p = 0 is the 1x1 unit") {
        ExteriorPowerMatrix E = exterior_power(gaussian_matrix(3, 3, rng), 0);
        REQUIRE(E.data.rows() == 1);
        CHECK(std::abs(E.data(0, 0) - Complex(1.0, 0.0)) < 1e-15);
    }
    SUBCASE("p = m is the determinant") {
        ComplexMatrix A = gaussian_matrix(3, 3, rng);
        ExteriorPowerMatrix E = exterior_power(A, 3);
        REQUIRE(E.data.rows() == 1);
        CHECK(std::abs(E.data(0, 0) - leibniz_det(A)) < 1e-12);
    }
    SUBCASE("entries are the p x p minors in combination order") {
        ComplexMatrix A = gaussian_matrix(4, 4, rng);
        ExteriorPowerMatrix E = exterior_power(A, 2);
        REQUIRE(E.basis.size() == 6);
        for (std::size_t r = 0; r < E.basis.size(); ++r)
            for (std::size_t c = 0; c < E.basis.size(); ++c) {
                const Complex expect = leibniz_det(submatrix(A, E.basis[r], E.basis[c]));
                CHECK(std::abs(E.data(static_cast<Eigen::Index>(r),
                                      static_cast<Eigen::Index>(c)) -
                               expect) < 1e-12);
            }
    }
    SUBCASE("multiplicativity over matrix products") {
        // The compound-matrix identity: minors of XY are products of minors.
        for (int p = 1; p <= 3; ++p) {
            ComplexMatrix X = gaussian_matrix(4, 4, rng);
            ComplexMatrix Y = gaussian_matrix(4, 4, rng);
            ComplexMatrix lhs = exterior_power(ComplexMatrix(X * Y), p).data;
            ComplexMatrix rhs = exterior_power(X, p).data * exterior_power(Y, p).data;
            CHECK(max_abs_diff(lhs, rhs) < 1e-9);
        }
    }
    SUBCASE("bad order rejected") {
        CHECK_THROWS_AS(exterior_power(ComplexMatrix::Identity(2, 2), 3), validation_error);
        CHECK_THROWS_AS(exterior_power(ComplexMatrix::Identity(2, 2), -1), validation_error);
    }
}

TEST_CASE("contraction_semigroup") {
    std::mt19937_64 rng = seeded_rng(44003);

    SUBCASE("t = 0 is the identity") {
        ComplexMatrix H = random_dissipative_heff(3, rng);
        CHECK(max_abs_diff(contraction_semigroup(H, 0.0), ComplexMatrix::Identity(3, 3)) <
              1e-13);
    }
    SUBCASE("Hermitian generators give unitaries") {
        ComplexMatrix H = random_hermitian(3, rng);
        ComplexMatrix A = contraction_semigroup(H, 0.8);
        CHECK(max_abs_diff(ComplexMatrix(A * A.adjoint()), ComplexMatrix::Identity(3, 3)) <
              1e-10);
    }
    SUBCASE("dissipative generators contract") {
        ComplexMatrix H = random_dissipative_heff(4, rng);
        for (double t : {0.3, 1.0, 2.5}) {
            ComplexMatrix A = contraction_semigroup(H, t);
            Eigen::JacobiSVD<ComplexMatrix> svd(A);
            CHECK(svd.singularValues()(0) <= 1.0 + 1e-9);
        }
    }
    SUBCASE("amplifying generators are rejected") {
        // Flipping the sign of the dissipator makes i(H - H^dagger) positive,
        // so e^{iHt} grows and must be refused.
        ComplexMatrix H0 = random_hermitian(3, rng);
        ComplexMatrix G = gaussian_matrix(3, 3, rng);
        ComplexMatrix D = G * G.adjoint();
        ComplexMatrix bad = H0 - Complex(0.0, 1.0) * 0.5 * D;
        CHECK_THROWS_AS(contraction_semigroup(bad, 0.5), validation_error);
    }
    SUBCASE("negative time rejected") {
        CHECK_THROWS_AS(contraction_semigroup(ComplexMatrix::Identity(2, 2), -0.1),
                        validation_error);
    }
}

TEST_CASE("annihilation_action_gauge_invariant") {
    std::mt19937_64 rng = seeded_rng(44004);

    SUBCASE("identity transformation is inert") {
        MonomialPoly poly =
            annihilation_action_gauge_invariant(ComplexMatrix::Identity(3, 3), {1, 3});
        REQUIRE(poly.size() == 1);
        CHECK(std::abs(poly_at(poly, {}, {1, 3}) - Complex(1.0, 0.0)) < 1e-15);
    }
    SUBCASE("single mode moves by the matrix row") {
        ComplexMatrix A = random_contraction(3, rng);
        MonomialPoly poly = annihilation_action_gauge_invariant(A, {2});
        for (int l = 1; l <= 3; ++l)
            CHECK(std::abs(poly_at(poly, {}, {l}) - A(1, l - 1)) < 1e-14);
    }
    SUBCASE("pair monomial coefficients are the exterior power row") {
        ComplexMatrix A = random_contraction(3, rng);
        const MultiIndex I{1, 3};
        MonomialPoly poly = annihilation_action_gauge_invariant(A, I);
        ExteriorPowerMatrix E = exterior_power(A, 2);
        const auto row = combination_rank(I, 3);
        for (std::size_t c = 0; c < E.basis.size(); ++c)
            CHECK(std::abs(poly_at(poly, {}, E.basis[c]) -
                           E.data(static_cast<Eigen::Index>(row),
                                  static_cast<Eigen::Index>(c))) < 1e-13);
    }
}

TEST_CASE("annihilation_action_general") {
    std::mt19937_64 rng = seeded_rng(44005);
    const int m = 2;

    SUBCASE("reduces to the gauge-invariant action when Gamma is gauge-invariant") {
        ComplexMatrix A = random_contraction(m, rng);
        ContractionDilation d = dilate_contraction(A);
        CorrelationTensor gamma = gamma_uniform(m, 1);
        for (const MultiIndex& I : enumerate_multiindices(m, m)) {
            MonomialPoly general = annihilation_action_general(d.A, d.B, gamma, I);
            MonomialPoly gauge = annihilation_action_gauge_invariant(d.A, I);
            CHECK(poly_max_deviation(general, gauge) < 1e-12);
        }
    }
    SUBCASE("reduces when B = 0 regardless of the environment") {
        ComplexMatrix V = haar_unitary(m, rng);
        CorrelationTensor gamma = gamma_fock(m, MultiIndex{1});
        for (const MultiIndex& I : enumerate_multiindices(m, m)) {
            MonomialPoly general =
                annihilation_action_general(V, ComplexMatrix::Zero(m, m), gamma, I);
            MonomialPoly gauge = annihilation_action_gauge_invariant(V, I);
            CHECK(poly_max_deviation(general, gauge) < 1e-12);
        }
    }
    SUBCASE("pairing-correlated environment against the brute-force channel") {
        // |00> + |11> has nonzero <f_1 f_2>, which feeds the Omega != empty
        // terms of the action; validate against the exact dual map.
        const oracle::FockRep rep = oracle::build_rep(m);
        ComplexVector vac = ComplexVector::Zero(4);
        vac(0) = 1.0;
        ComplexVector pair = vac + rep.f[0].adjoint() * (rep.f[1].adjoint() * vac);
        pair /= std::sqrt(2.0);
        ComplexMatrix sigma = pair * pair.adjoint();
        CorrelationTensor gamma = gamma_from_density(sigma);
        REQUIRE(gamma.is_even);
        REQUIRE(!gamma.is_gauge_invariant);

        ComplexMatrix W = haar_unitary(2 * m, rng);
        ComplexMatrix A = W.topLeftCorner(m, m);
        ComplexMatrix B = W.topRightCorner(m, m);
        ComplexMatrix U = oracle::implement_unitary(W);
        for (const MultiIndex& I : enumerate_multiindices(m, m)) {
            MonomialPoly model = annihilation_action_general(A, B, gamma, I);
            ComplexMatrix X = oracle::monomial_matrix(rep, {}, I);
            auto expect = oracle::expand_with_parity(
                rep, oracle::dual_apply(U, sigma, X), static_cast<int>(I.size() % 2));
            poly_prune(expect, 1e-11);
            CHECK(poly_max_deviation(model, expect) < 1e-8);
        }
    }
    SUBCASE("odd environments are refused") {
        ComplexVector psi(2);
        psi << Complex(1.0, 0.0), Complex(1.0, 0.0);
        psi /= std::sqrt(2.0);
        CorrelationTensor odd = gamma_from_density(ComplexMatrix(psi * psi.adjoint()));
        REQUIRE(!odd.is_even);
        CHECK_THROWS_AS(annihilation_action_general(ComplexMatrix::Identity(1, 1),
                                                    ComplexMatrix::Zero(1, 1), odd, {1}),
                        validation_error);
    }
}

TEST_CASE("check_semigroup_failure") {
    std::mt19937_64 rng = seeded_rng(44006);
    const int m = 2;
    ComplexMatrix H = random_dissipative_heff(m, rng);
    const double t1 = 0.4, t2 = 0.7;

    SUBCASE("gauge-invariant environments compose on annihilation monomials") {
        CorrelationTensor gamma = gamma_uniform(m, 1);
        for (const MonomialKey& probe :
             {MonomialKey{{}, {1}, 0}, MonomialKey{{}, {1, 2}, 0}}) {
            auto report = check_semigroup_failure(H, gamma, t1, t2, probe);
            CHECK(report.max_deviation <= 1e-9);
        }
    }
    SUBCASE("vacuum environments compose on every monomial") {
        // With only the Xi = Omega = empty term alive, both sides reduce to
        // products of minors of e^{iHt}, and minors are multiplicative; the
        // composition law holds exactly even on mixed monomials.
        CorrelationTensor gamma = gamma_vacuum(m);
        auto report = check_semigroup_failure(H, gamma, t1, t2, MonomialKey{{1}, {1}, 0});
        CHECK(report.max_deviation <= 1e-9);
    }
    SUBCASE("occupied environments break the composition law on mixed monomials") {
        CorrelationTensor gamma = gamma_fock(m, MultiIndex{1});
        auto report = check_semigroup_failure(H, gamma, t1, t2, MonomialKey{{1}, {1}, 0});
        CHECK(report.max_deviation > 1e-6);
        // ... while annihilation monomials still compose.
        auto pure = check_semigroup_failure(H, gamma, t1, t2, MonomialKey{{}, {1}, 0});
        CHECK(pure.max_deviation <= 1e-9);
    }
    SUBCASE("the reported sides are the actual dual actions") {
        CorrelationTensor gamma = gamma_fock(m, MultiIndex{1});
        const MonomialKey probe{{1}, {1}, 0};
        auto report = check_semigroup_failure(H, gamma, t1, t2, probe);
        ContractionDilation dsum = dilate_contraction(contraction_semigroup(H, t1 + t2));
        ChannelSpec spec_sum(dsum.A, dsum.B, gamma);
        MonomialPoly rhs = dual_action_even(spec_sum, probe.J, probe.I);
        CHECK(poly_max_deviation(report.rhs, rhs) < 1e-12);
        CHECK(report.max_deviation ==
              doctest::Approx(poly_max_deviation(report.lhs, report.rhs)));
    }
}

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "test_support.hpp"

#include "fm/postselect.hpp"

using namespace fm;
using fmtest::max_abs_diff;

namespace {

Complex eff_at(const EffectExpansion& eff, const MultiIndex& M, const MultiIndex& N) {
    auto it = eff.coeffs.find({M, N});
    return it == eff.coeffs.end() ? Complex(0.0, 0.0) : it->second;
}

// Brute-force polynomial of the post-selected dual action.
MonomialPoly oracle_postselected_poly(const ComplexMatrix& W, const ComplexMatrix& sigma,
                                      const ComplexMatrix& E, const MultiIndex& J,
                                      const MultiIndex& I) {
    const int m = static_cast<int>(W.rows()) / 2;
    const oracle::FockRep rep = oracle::build_rep(m);
    const ComplexMatrix U = oracle::implement_unitary(W);
    const ComplexMatrix X = oracle::monomial_matrix(rep, J, I);
    const ComplexMatrix out = oracle::postselected_dual(U, sigma, E, X);
    const int tau = static_cast<int>((J.size() + I.size()) % 2);
    auto poly = oracle::expand_with_parity(rep, out, tau);
    poly_prune(poly, 1e-11);
    return poly;
}

// Even-parity projector (1 + P)/2 on the m = 2 environment.
ComplexMatrix even_parity_projector() {
    const oracle::FockRep rep = oracle::build_rep(2);
    return 0.5 * (ComplexMatrix::Identity(4, 4) + rep.parity);
}

} // namespace

TEST_CASE("expand_effect") {
    const oracle::FockRep rep = oracle::build_rep(2);

    SUBCASE("identity effect has the single unit coefficient") {
        EffectExpansion eff = expand_effect(ComplexMatrix::Identity(4, 4));
        CHECK(eff.m == 2);
        CHECK(eff.trusted);
        REQUIRE(eff.coeffs.size() == 1);
        CHECK(std::abs(eff_at(eff, {}, {}) - Complex(1.0, 0.0)) < 1e-12);
    }
    SUBCASE("number operator") {
        ComplexMatrix E = oracle::monomial_matrix(rep, {1}, {1});
        EffectExpansion eff = expand_effect(E);
        REQUIRE(eff.coeffs.size() == 1);
        CHECK(std::abs(eff_at(eff, {1}, {1}) - Complex(1.0, 0.0)) < 1e-12);
    }
    SUBCASE("even-parity projector coefficients") {
        EffectExpansion eff = expand_effect(even_parity_projector());
        CHECK(std::abs(eff_at(eff, {}, {}) - Complex(1.0, 0.0)) < 1e-12);
        CHECK(std::abs(eff_at(eff, {1}, {1}) - Complex(-1.0, 0.0)) < 1e-12);
        CHECK(std::abs(eff_at(eff, {2}, {2}) - Complex(-1.0, 0.0)) < 1e-12);
        CHECK(std::abs(eff_at(eff, {1, 2}, {1, 2}) - Complex(2.0, 0.0)) < 1e-12);
    }
    SUBCASE("odd effects rejected") {
        // f_1 + f_1^dagger is Hermitian with spectrum in [-1, 1] but odd.
        ComplexMatrix E = 0.5 * (rep.f[0] + ComplexMatrix(rep.f[0].adjoint())) +
                          0.5 * ComplexMatrix::Identity(4, 4);
        CHECK_THROWS_AS(expand_effect(E), validation_error);
    }
    SUBCASE("spectrum outside [0,1] rejected") {
        CHECK_THROWS_AS(expand_effect(ComplexMatrix(2.0 * ComplexMatrix::Identity(4, 4))),
                        validation_error);
        CHECK_THROWS_AS(expand_effect(ComplexMatrix(-ComplexMatrix::Identity(4, 4))),
                        validation_error);
    }
    SUBCASE("non-Hermitian rejected") {
        ComplexMatrix E = ComplexMatrix::Identity(4, 4);
        E(0, 1) = Complex(0.4, 0.0);
        CHECK_THROWS_AS(expand_effect(E), validation_error);
    }
}

TEST_CASE("effect_from_coefficients") {
    SUBCASE("valid table passes with the trust flag it was given") {
        std::map<std::pair<MultiIndex, MultiIndex>, Complex> coeffs;
        coeffs[{{}, {}}] = Complex(1.0, 0.0);
        coeffs[{{1}, {1}}] = Complex(-1.0, 0.0);
        EffectExpansion eff = effect_from_coefficients(2, coeffs, false);
        CHECK(!eff.trusted);
        CHECK(std::abs(eff_at(eff, {1}, {1}) - Complex(-1.0, 0.0)) < 1e-15);
    }
    SUBCASE("Hermitian symmetry enforced") {
        std::map<std::pair<MultiIndex, MultiIndex>, Complex> coeffs;
        coeffs[{{1}, {2}}] = Complex(0.5, 0.0);  // missing conjugate partner
        CHECK_THROWS_AS(effect_from_coefficients(2, coeffs, false), validation_error);
        coeffs[{{2}, {1}}] = Complex(0.5, 0.1);  // wrong conjugate
        CHECK_THROWS_AS(effect_from_coefficients(2, coeffs, false), validation_error);
        coeffs[{{2}, {1}}] = Complex(0.5, 0.0);
        CHECK_NOTHROW(effect_from_coefficients(2, coeffs, false));
    }
    SUBCASE("odd support rejected") {
        std::map<std::pair<MultiIndex, MultiIndex>, Complex> coeffs;
        coeffs[{{1}, {}}] = Complex(0.5, 0.0);
        coeffs[{{}, {1}}] = Complex(0.5, 0.0);
        CHECK_THROWS_AS(effect_from_coefficients(1, coeffs, false), validation_error);
    }
    SUBCASE("identity_effect matches expand_effect of the identity") {
        EffectExpansion a = identity_effect(2);
        EffectExpansion b = expand_effect(ComplexMatrix::Identity(4, 4));
        REQUIRE(a.coeffs.size() == 1);
        CHECK(std::abs(eff_at(a, {}, {}) - eff_at(b, {}, {})) < 1e-12);
    }
}

TEST_CASE("dual_action_postselected") {
    std::mt19937_64 rng = seeded_rng(22001);
    const int m = 2;
    const oracle::FockRep rep = oracle::build_rep(m);

    SUBCASE("identity effect reduces to the unconditioned general action") {
        ComplexMatrix W = haar_unitary(2 * m, rng);
        ComplexMatrix sigma_mat = random_density(4, rng);
        CorrelationTensor gamma = gamma_from_density(sigma_mat);
        ChannelSpec spec(W.topLeftCorner(m, m), W.topRightCorner(m, m), gamma, W);
        EffectExpansion id = identity_effect(m);
        for (const auto& key : monomial_basis(m, 2 * m)) {
            MonomialPoly a = dual_action_postselected(W, gamma, id, key.J, key.I);
            MonomialPoly b = dual_action_general(spec, key.J, key.I);
            CHECK(poly_max_deviation(a, b) < 1e-12);
        }
    }
    SUBCASE("identity W with the identity effect acts as the identity") {
        ComplexMatrix W = ComplexMatrix::Identity(2 * m, 2 * m);
        CorrelationTensor gamma = gamma_fock(m, MultiIndex{2});
        EffectExpansion id = identity_effect(m);
        for (const auto& key : monomial_basis(m, 2 * m)) {
            MonomialPoly poly = dual_action_postselected(W, gamma, id, key.J, key.I);
            MonomialPoly expect;
            poly_add(expect, key, Complex(1.0, 0.0));
            CHECK(poly_max_deviation(poly, expect) < 1e-13);
        }
    }
    SUBCASE("parity-projector conditioning against the brute-force map") {
        ComplexMatrix W = haar_unitary(2 * m, rng);
        ComplexVector v = ComplexVector::Zero(4);
        v(0) = 1.0;
        ComplexVector occ = rep.f[1].adjoint() * v;  // mode 2 occupied
        ComplexMatrix sigma = occ * occ.adjoint();
        CorrelationTensor gamma = gamma_fock(m, MultiIndex{2});
        ComplexMatrix E = even_parity_projector();
        EffectExpansion eff = expand_effect(E);
        for (const auto& key : monomial_basis(m, 2 * m)) {
            MonomialPoly model = dual_action_postselected_even(W, gamma, eff, key.J, key.I);
            MonomialPoly expect = oracle_postselected_poly(W, sigma, E, key.J, key.I);
            CHECK(poly_max_deviation(model, expect) < 1e-8);
        }
    }
    SUBCASE("general variant with a non-even environment and random even effect") {
        ComplexMatrix W = haar_unitary(2 * m, rng);
        ComplexMatrix sigma = random_density(4, rng);
        CorrelationTensor gamma = gamma_from_density(sigma);
        REQUIRE(!gamma.is_even);
        ComplexMatrix E = fmtest::random_even_effect(m, rng);
        EffectExpansion eff = expand_effect(E);
        for (const auto& key : monomial_basis(m, 2 * m)) {
            MonomialPoly model = dual_action_postselected(W, gamma, eff, key.J, key.I);
            MonomialPoly expect = oracle_postselected_poly(W, sigma, E, key.J, key.I);
            CHECK(poly_max_deviation(model, expect) < 1e-8);
        }
    }
    SUBCASE("the even variant refuses odd environments") {
        ComplexMatrix W = haar_unitary(2 * m, rng);
        ComplexMatrix sigma = random_density(4, rng);
        CorrelationTensor gamma = gamma_from_density(sigma);
        REQUIRE(!gamma.is_even);
        CHECK_THROWS_AS(
            dual_action_postselected_even(W, gamma, identity_effect(m), {1}, {1}),
            validation_error);
    }
    SUBCASE("W is required with its bottom blocks") {
        CorrelationTensor gamma = gamma_vacuum(m);
        CHECK_THROWS_AS(dual_action_postselected(ComplexMatrix::Identity(3, 3), gamma,
                                                 identity_effect(m), {1}, {1}),
                        validation_error);
        CHECK_THROWS_AS(dual_action_postselected(
                            ComplexMatrix(2.0 * ComplexMatrix::Identity(4, 4)), gamma,
                            identity_effect(m), {1}, {1}),
                        validation_error);
    }
}

TEST_CASE("instrument_sum and POVM completeness") {
    std::mt19937_64 rng = seeded_rng(22002);
    const int m = 2;

    SUBCASE("complementary pair sums to the identity") {
        ComplexMatrix E = fmtest::random_even_effect(m, rng);
        EffectExpansion e1 = expand_effect(E);
        EffectExpansion e2 =
            expand_effect(ComplexMatrix(ComplexMatrix::Identity(4, 4) - E));
        EffectExpansion sum = instrument_sum({e1, e2});
        EffectExpansion id = identity_effect(m);
        CHECK(std::abs(eff_at(sum, {}, {}) - Complex(1.0, 0.0)) < 1e-10);
        for (const auto& [idx, c] : sum.coeffs)
            if (!(idx.first.empty() && idx.second.empty())) CHECK(std::abs(c) < 1e-10);
        (void)id;
    }
    SUBCASE("empty instrument is the zero effect") {
        EffectExpansion zero = instrument_sum({});
        CHECK(zero.coeffs.empty());
    }
    SUBCASE("sum is linear against expand_effect") {
        ComplexMatrix E1 = 0.5 * fmtest::random_even_effect(m, rng);
        ComplexMatrix E2 = 0.5 * fmtest::random_even_effect(m, rng);
        EffectExpansion sum = instrument_sum({expand_effect(E1), expand_effect(E2)});
        EffectExpansion direct = expand_effect(ComplexMatrix(E1 + E2));
        for (const auto& [idx, c] : direct.coeffs)
            CHECK(std::abs(c - eff_at(sum, idx.first, idx.second)) < 1e-10);
    }
    SUBCASE("mode count mismatch rejected") {
        CHECK_THROWS_AS(instrument_sum({identity_effect(1), identity_effect(2)}),
                        validation_error);
    }
    SUBCASE("conditioning on a complete instrument recovers the channel") {
        ComplexMatrix W = haar_unitary(2 * m, rng);
        CorrelationTensor gamma = gamma_uniform(m, 1);
        ChannelSpec spec(W.topLeftCorner(m, m), W.topRightCorner(m, m), gamma, W);
        ComplexMatrix E = fmtest::random_even_effect(m, rng);
        EffectExpansion e1 = expand_effect(E);
        EffectExpansion e2 =
            expand_effect(ComplexMatrix(ComplexMatrix::Identity(4, 4) - E));
        for (const auto& key : monomial_basis(m, 2 * m)) {
            MonomialPoly a = dual_action_postselected_even(W, gamma, e1, key.J, key.I);
            MonomialPoly b = dual_action_postselected_even(W, gamma, e2, key.J, key.I);
            MonomialPoly total;
            for (const auto& [k, c] : a) poly_add(total, k, c);
            for (const auto& [k, c] : b) poly_add(total, k, c);
            poly_prune(total);
            MonomialPoly expect = dual_action_even(spec, key.J, key.I);
            CHECK(poly_max_deviation(total, expect) < 1e-10);
        }
    }
}

TEST_CASE("trace domination of the conditioned map") {
    // Tr(rho Phi_E*(1)) <= Tr(rho Phi*(1)) for any state and effect; checked
    // through the brute-force maps at m = 2.
    std::mt19937_64 rng = seeded_rng(22003);
    const int m = 2;
    const oracle::FockRep rep = oracle::build_rep(m);
    ComplexMatrix W = haar_unitary(2 * m, rng);
    ComplexMatrix U = oracle::implement_unitary(W);
    ComplexMatrix sigma = fmtest::random_even_density(m, rng);
    ComplexMatrix E = fmtest::random_even_effect(m, rng);
    ComplexMatrix rho = random_density(4, rng);

    ComplexMatrix lhs = oracle::postselected_dual(U, sigma, E, ComplexMatrix::Identity(4, 4));
    ComplexMatrix rhs = oracle::dual_apply(U, sigma, ComplexMatrix::Identity(4, 4));
    const double a = (rho * lhs).trace().real();
    const double b = (rho * rhs).trace().real();
    CHECK(a <= b + 1e-10);
    CHECK(a >= -1e-10);
}

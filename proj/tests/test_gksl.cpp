#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "test_support.hpp"

#include "fm/gksl.hpp"
#include "fm/secondquant.hpp"

using namespace fm;
using fmtest::max_abs_diff;
using fmtest::spec_from_W;

namespace {

// H2 = sum_{jk} H[j,k] f_j^dagger f_k in the brute-force representation.
ComplexMatrix quadratic_hamiltonian(const oracle::FockRep& rep, const ComplexMatrix& H) {
    const auto dim = static_cast<Eigen::Index>(1) << rep.m;
    ComplexMatrix H2 = ComplexMatrix::Zero(dim, dim);
    for (int j = 0; j < rep.m; ++j)
        for (int k = 0; k < rep.m; ++k)
            H2 += H(j, k) * ComplexMatrix(rep.f[static_cast<std::size_t>(j)].adjoint() *
                                          rep.f[static_cast<std::size_t>(k)]);
    return H2;
}

} // namespace

TEST_CASE("generator_action") {
    std::mt19937_64 rng = seeded_rng(33001);
    const int m = 2;

    SUBCASE("identity channel generates nothing") {
        ChannelSpec spec(ComplexMatrix::Identity(m, m), ComplexMatrix::Zero(m, m),
                         gamma_vacuum(m));
        for (const auto& key : monomial_basis(m, 2 * m)) {
            MonomialPoly poly = generator_action(spec, key.J, key.I);
            CHECK(poly_max_deviation(poly, MonomialPoly{}) < 1e-14);
        }
    }
    SUBCASE("the unit monomial is conserved") {
        ChannelSpec spec = spec_from_W(haar_unitary(2 * m, rng), gamma_uniform(m, 1));
        MonomialPoly poly = generator_action(spec, {}, {});
        CHECK(poly_max_deviation(poly, MonomialPoly{}) < 1e-14);
    }
    SUBCASE("matches the brute-force generator on a mixed monomial") {
        const oracle::FockRep rep = oracle::build_rep(m);
        ComplexMatrix W = haar_unitary(2 * m, rng);
        ComplexMatrix C = fmtest::random_valid_C(m, rng);
        ChannelSpec spec = spec_from_W(W, gamma_gaussian(C));
        ComplexMatrix sigma = oracle::gaussian_density(C, rep);
        ComplexMatrix U = oracle::implement_unitary(W);

        const MultiIndex J{1}, I{2};
        ComplexMatrix X = oracle::monomial_matrix(rep, J, I);
        ComplexMatrix Lx = oracle::dual_apply(U, sigma, X) - X;  // gamma0 = 1
        auto expect = oracle::expand_with_parity(rep, Lx, 0);
        poly_prune(expect, 1e-11);
        MonomialPoly model = generator_action(spec, J, I);
        CHECK(poly_max_deviation(model, expect) < 1e-8);
    }
}

TEST_CASE("hamiltonian_action") {
    std::mt19937_64 rng = seeded_rng(33002);

    SUBCASE("single annihilation moment picks up +iH") {
        const int m = 3;
        ComplexMatrix H = random_hermitian(m, rng);
        MonomialPoly poly = hamiltonian_action(H, {}, {2});
        for (int l = 1; l <= m; ++l) {
            auto it = poly.find(MonomialKey{{}, {l}, 0});
            const Complex got = (it == poly.end()) ? Complex(0.0, 0.0) : it->second;
            CHECK(std::abs(got - Complex(0.0, 1.0) * H(1, l - 1)) < 1e-13);
        }
    }
    SUBCASE("matches the brute-force commutator on every key") {
        const int m = 2;
        const oracle::FockRep rep = oracle::build_rep(m);
        ComplexMatrix H = random_hermitian(m, rng);
        ComplexMatrix H2 = quadratic_hamiltonian(rep, H);
        for (const auto& key : monomial_basis(m, 2 * m)) {
            ComplexMatrix X = oracle::monomial_matrix(rep, key.J, key.I);
            ComplexMatrix comm = Complex(0.0, -1.0) * (H2 * X - X * H2);
            auto expect = oracle::expand_in_monomials(rep, comm);
            poly_prune(expect, 1e-11);
            MonomialPoly model = hamiltonian_action(H, key.J, key.I);
            CHECK(poly_max_deviation(model, expect) < 1e-10);
        }
    }
    SUBCASE("repeated-label replacements cancel or collide correctly") {
        // H = f_1^dagger f_2 + f_2^dagger f_1 moves the pair monomial around;
        // replacing 2 -> 1 inside {1,2} collides with the existing label and
        // must vanish.
        const int m = 2;
        ComplexMatrix H = ComplexMatrix::Zero(m, m);
        H(0, 1) = 1.0;
        H(1, 0) = 1.0;
        MonomialPoly poly = hamiltonian_action(H, {}, {1, 2});
        CHECK(poly.empty());
    }
}

TEST_CASE("moment_ode_system") {
    std::mt19937_64 rng = seeded_rng(33003);
    const int m = 2;

    SUBCASE("identity channel with no Hamiltonian is static") {
        ChannelSpec spec(ComplexMatrix::Identity(m, m), ComplexMatrix::Zero(m, m),
                         gamma_vacuum(m));
        MomentODESystem sys = moment_ode_system(spec, 2);
        CHECK(sys.generator.cwiseAbs().maxCoeff() < 1e-14);
        CHECK(!sys.has_hamiltonian);
        CHECK(sys.hamiltonian_part.cwiseAbs().maxCoeff() == 0.0);
    }
    SUBCASE("vacuum environment first-order block is A - 1") {
        ComplexMatrix W = haar_unitary(2 * m, rng);
        ChannelSpec spec = spec_from_W(W, gamma_vacuum(m));
        MomentODESystem sys = moment_ode_system(spec, 1);
        MomentBasisIndex index(m, 1);
        for (int i = 1; i <= m; ++i)
            for (int l = 1; l <= m; ++l) {
                const auto r = static_cast<Eigen::Index>(index({}, {i}));
                const auto c = static_cast<Eigen::Index>(index({}, {l}));
                const Complex expect = spec.A(i - 1, l - 1) - ((i == l) ? 1.0 : 0.0);
                CHECK(std::abs(sys.generator(r, c) - expect) < 1e-13);
            }
    }
    SUBCASE("the unit row is identically zero (trace conservation)") {
        ChannelSpec spec = spec_from_W(haar_unitary(2 * m, rng), gamma_uniform(m, 1));
        MomentODESystem sys = moment_ode_system(spec, 2);
        MomentBasisIndex index(m, 2);
        const auto r = static_cast<Eigen::Index>(index({}, {}));
        CHECK(sys.generator.row(r).cwiseAbs().maxCoeff() < 1e-14);
    }
    SUBCASE("non-Hermitian Hamiltonian rejected") {
        ChannelSpec spec(ComplexMatrix::Identity(m, m), ComplexMatrix::Zero(m, m),
                         gamma_vacuum(m));
        ComplexMatrix H = gaussian_matrix(m, m, rng);
        H(0, 1) += Complex(0.0, 1.0);
        CHECK_THROWS_AS(moment_ode_system(spec, 2, H), validation_error);
    }
}

TEST_CASE("evolve_moments") {
    std::mt19937_64 rng = seeded_rng(33004);
    const int m = 2;
    const oracle::FockRep rep = oracle::build_rep(m);

    ComplexMatrix W = haar_unitary(2 * m, rng);
    ComplexMatrix C = fmtest::random_valid_C(m, rng);
    ChannelSpec spec = spec_from_W(W, gamma_gaussian(C));
    ComplexMatrix H = random_hermitian(m, rng);
    MomentODESystem sys = moment_ode_system(spec, 2 * m, H);

    ComplexMatrix sigma = oracle::gaussian_density(C, rep);
    ComplexMatrix U = oracle::implement_unitary(W);
    ComplexMatrix rho0 = random_density(4, rng);
    ComplexVector mu0 = fmtest::moments_of_density(rep, rho0, sys.basis);

    SUBCASE("t = 0 is the identity") {
        ComplexVector mu = evolve_moments(sys, mu0, 0.0);
        CHECK((mu - mu0).cwiseAbs().maxCoeff() < 1e-13);
    }
    SUBCASE("semigroup law in t") {
        ComplexVector one = evolve_moments(sys, evolve_moments(sys, mu0, 0.3), 0.5);
        ComplexVector two = evolve_moments(sys, mu0, 0.8);
        CHECK((one - two).cwiseAbs().maxCoeff() < 1e-9);
    }
    SUBCASE("trajectory matches the brute-force master equation") {
        for (double t : {0.1, 0.5, 1.0}) {
            ComplexVector mu = evolve_moments(sys, mu0, t);
            ComplexMatrix rho_t = oracle::master_equation_evolve(rep, U, sigma, rho0, t, H);
            ComplexVector expect = fmtest::moments_of_density(rep, rho_t, sys.basis);
            CHECK((mu - expect).cwiseAbs().maxCoeff() < 1e-6);
        }
    }
    SUBCASE("negative time and bad lengths rejected") {
        CHECK_THROWS_AS(evolve_moments(sys, mu0, -0.1), validation_error);
        CHECK_THROWS_AS(evolve_moments(sys, ComplexVector::Zero(3), 0.1), validation_error);
    }
}

TEST_CASE("sum_systems") {
    std::mt19937_64 rng = seeded_rng(33005);
    const int m = 2, k = 2;
    const oracle::FockRep rep = oracle::build_rep(m);

    ComplexMatrix W1 = haar_unitary(2 * m, rng);
    ComplexMatrix W2 = haar_unitary(2 * m, rng);
    ChannelSpec spec1 = spec_from_W(W1, gamma_vacuum(m));
    ChannelSpec spec2 = spec_from_W(W2, gamma_fock(m, MultiIndex{1}));
    MomentODESystem sys1 = moment_ode_system(spec1, k);
    MomentODESystem sys2 = moment_ode_system(spec2, k);
    MomentODESystem sum = sum_systems(sys1, sys2);

    SUBCASE("generators add entrywise") {
        CHECK(max_abs_diff(sum.generator, ComplexMatrix(sys1.generator + sys2.generator)) <
              1e-15);
    }
    SUBCASE("evolution matches the brute-force two-channel master equation") {
        // Assemble the superoperator of L1 + L2 column by column from the
        // exact channel applications and exponentiate it directly.
        ComplexMatrix U1 = oracle::implement_unitary(W1);
        ComplexMatrix U2 = oracle::implement_unitary(W2);
        ComplexMatrix vac = ComplexMatrix::Zero(4, 4);
        vac(0, 0) = 1.0;
        ComplexVector v = ComplexVector::Zero(4);
        v(0) = 1.0;
        ComplexVector occ = rep.f[0].adjoint() * v;
        ComplexMatrix sig2 = occ * occ.adjoint();

        const auto dim = 16;
        ComplexMatrix S = ComplexMatrix::Zero(dim, dim);
        for (int col = 0; col < dim; ++col) {
            ComplexMatrix unit = ComplexMatrix::Zero(4, 4);
            unit(col % 4, col / 4) = 1.0;  // column-major vectorization
            ComplexMatrix img = oracle::channel_apply(U1, vac, unit) - unit +
                                oracle::channel_apply(U2, sig2, unit) - unit;
            S.col(col) = Eigen::Map<ComplexVector>(img.data(), dim);
        }

        ComplexMatrix rho0 = random_density(4, rng);
        const double t = 0.6;
        ComplexMatrix rho_vec = expm(ComplexMatrix(t * S)) *
                                Eigen::Map<const ComplexVector>(rho0.data(), dim);
        ComplexMatrix rho_t = Eigen::Map<ComplexMatrix>(rho_vec.data(), 4, 4);

        ComplexVector mu0 = fmtest::moments_of_density(rep, rho0, sum.basis);
        ComplexVector mu = evolve_moments(sum, mu0, t);
        ComplexVector expect = fmtest::moments_of_density(rep, rho_t, sum.basis);
        CHECK((mu - expect).cwiseAbs().maxCoeff() < 1e-8);
    }
    SUBCASE("mismatched shapes rejected") {
        MomentODESystem other = moment_ode_system(spec1, 1);
        CHECK_THROWS_AS(sum_systems(sys1, other), validation_error);
    }
}

TEST_CASE("tensor_power_evolution") {
    std::mt19937_64 rng = seeded_rng(33006);
    const int m = 2;
    ComplexMatrix A = random_contraction(m, rng);
    const Complex gamma0(1.0, 0.0);

    SUBCASE("p = q = 0 decays by the normalization") {
        ComplexMatrix T = tensor_power_evolution(A, 0, 0, gamma0, 0.7);
        REQUIRE(T.rows() == 1);
        CHECK(std::abs(T(0, 0) - Complex(1.0, 0.0)) < 1e-12);  // gamma0 (1 - 1) = 0
    }
    SUBCASE("pure annihilation block is expm(gamma0 t (A - 1))") {
        const double t = 0.9;
        ComplexMatrix T = tensor_power_evolution(A, 0, 1, gamma0, t);
        ComplexMatrix expect =
            expm(ComplexMatrix(gamma0 * t * (A - ComplexMatrix::Identity(m, m))));
        CHECK(max_abs_diff(T, expect) < 1e-12);
    }
    SUBCASE("ordered tuples agree with the moment system on a vacuum channel") {
        ContractionDilation d = dilate_contraction(A);
        ChannelSpec spec(d.A, d.B, gamma_vacuum(m));
        MomentODESystem sys = moment_ode_system(spec, 2);
        const double t = 0.8;
        ComplexMatrix T = tensor_power_evolution(A, 1, 1, gamma0, t);

        // Propagate each ordered second-moment unit vector and compare.
        MomentBasisIndex index(m, 2);
        for (int j = 1; j <= m; ++j)
            for (int i = 1; i <= m; ++i) {
                ComplexVector mu0 = ComplexVector::Zero(static_cast<Eigen::Index>(sys.basis.size()));
                mu0(static_cast<Eigen::Index>(index({j}, {i}))) = 1.0;
                ComplexVector mu = evolve_moments(sys, mu0, t);
                for (int jj = 1; jj <= m; ++jj)
                    for (int ii = 1; ii <= m; ++ii) {
                        const auto r = (jj - 1) * m + (ii - 1);
                        const auto c = (j - 1) * m + (i - 1);
                        CHECK(std::abs(T(r, c) -
                                       mu(static_cast<Eigen::Index>(index({jj}, {ii})))) <
                              1e-10);
                    }
            }
    }
}

#include "fm/fock_oracle.hpp"

#include <Eigen/Eigenvalues>

#include "fm/channel.hpp"
#include "fm/errors.hpp"

namespace fm::oracle {

namespace {

ComplexMatrix kron_chain(const std::vector<const ComplexMatrix*>& factors) {
    ComplexMatrix out = ComplexMatrix::Identity(1, 1);
    for (const ComplexMatrix* f : factors) out = kron(out, *f);
    return out;
}

void require_modes(int m, int cap, const char* what) {
    if (m < 1) throw validation_error(std::string(what) + ": mode count must be at least 1");
    if (m > cap)
        throw resource_error(std::string(what) + ": exact Fock-space path is guarded to " +
                             std::to_string(cap) + " modes");
}

} // namespace

FockRep build_rep(int m) {
    require_modes(m, kMaxModes, "build_rep");
    const ComplexMatrix I2 = ComplexMatrix::Identity(2, 2);
    ComplexMatrix Z(2, 2), S(2, 2);
    Z << 1, 0, 0, -1;
    S << 0, 1, 0, 0;  // annihilator: |1> -> |0>, kills |0>

    FockRep rep;
    rep.m = m;
    rep.f.reserve(m);
    for (int j = 1; j <= m; ++j) {
        std::vector<const ComplexMatrix*> factors;
        for (int s = 1; s < j; ++s) factors.push_back(&Z);
        factors.push_back(&S);
        for (int s = j + 1; s <= m; ++s) factors.push_back(&I2);
        rep.f.push_back(kron_chain(factors));
    }
    std::vector<const ComplexMatrix*> zs(m, &Z);
    rep.parity = kron_chain(zs);
    const auto dim = rep.parity.rows();
    rep.number = ComplexMatrix::Zero(dim, dim);
    for (const ComplexMatrix& f : rep.f) rep.number += f.adjoint() * f;
    return rep;
}

ComplexMatrix monomial_matrix(const FockRep& rep, const MultiIndex& J,
                              const MultiIndex& I, int parity_exp) {
    if (!is_valid_multiindex(J, rep.m) || !is_valid_multiindex(I, rep.m))
        throw validation_error("monomial_matrix: invalid multi-index");
    const auto dim = rep.parity.rows();
    ComplexMatrix prodJ = ComplexMatrix::Identity(dim, dim);
    for (int j : J) prodJ *= rep.f[j - 1];
    ComplexMatrix prodI = ComplexMatrix::Identity(dim, dim);
    for (int i : I) prodI *= rep.f[i - 1];
    ComplexMatrix out = prodJ.adjoint() * prodI;
    if (parity_exp % 2 != 0) out *= rep.parity;
    return out;
}

CombinedModes combined_modes(const FockRep& rep_m) {
    require_modes(rep_m.m, kMaxCombinedModes, "combined_modes");
    const auto dim = rep_m.parity.rows();
    const ComplexMatrix Id = ComplexMatrix::Identity(dim, dim);
    CombinedModes cm;
    for (const ComplexMatrix& f : rep_m.f) cm.a.push_back(kron(f, Id));
    for (const ComplexMatrix& f : rep_m.f) cm.b.push_back(kron(rep_m.parity, f));
    return cm;
}

namespace {

// Shared body of implement_unitary / mode_rotation_unitary: U = expm(-iG)
// with G = sum_{jk} H[j,k] c_j^dagger c_k and H = unitary_log(W); then the
// mode relations U^dagger c U = W c are re-verified.
ComplexMatrix implement_on_modes(const std::vector<ComplexMatrix>& c,
                                 const ComplexMatrix& W) {
    const int n = static_cast<int>(c.size());
    const ComplexMatrix H = unitary_log(W);
    const auto dim = c[0].rows();
    ComplexMatrix G = ComplexMatrix::Zero(dim, dim);
    for (int j = 0; j < n; ++j)
        for (int k = 0; k < n; ++k) {
            if (H(j, k) == Complex(0.0, 0.0)) continue;
            G += H(j, k) * (c[j].adjoint() * c[k]);
        }
    ComplexMatrix U = expm(Complex(0.0, -1.0) * G);
    for (int l = 0; l < n; ++l) {
        ComplexMatrix target = ComplexMatrix::Zero(dim, dim);
        for (int k = 0; k < n; ++k) target += W(l, k) * c[k];
        if ((U.adjoint() * c[l] * U - target).norm() > 1e-8)
            throw verification_error(
                "implement_unitary: mode relations failed the built-in check");
    }
    return U;
}

} // namespace

ComplexMatrix implement_unitary(const ComplexMatrix& W) {
    if (W.rows() != W.cols() || W.rows() % 2 != 0)
        throw validation_error("implement_unitary: W must be square of even dimension");
    const int m = static_cast<int>(W.rows()) / 2;
    require_modes(m, kMaxCombinedModes, "implement_unitary");
    const FockRep rep = build_rep(m);
    const CombinedModes cm = combined_modes(rep);
    std::vector<ComplexMatrix> c;
    c.insert(c.end(), cm.a.begin(), cm.a.end());
    c.insert(c.end(), cm.b.begin(), cm.b.end());
    return implement_on_modes(c, W);
}

ComplexMatrix mode_rotation_unitary(const FockRep& rep, const ComplexMatrix& V) {
    if (V.rows() != rep.m || V.cols() != rep.m)
        throw validation_error("mode_rotation_unitary: V must be m x m");
    return implement_on_modes(rep.f, V);
}

ComplexMatrix channel_apply(const ComplexMatrix& U, const ComplexMatrix& sigma,
                            const ComplexMatrix& rho) {
    const auto d1 = rho.rows();
    const auto d2 = sigma.rows();
    if (rho.cols() != d1 || sigma.cols() != d2 || U.rows() != U.cols() ||
        U.rows() != d1 * d2)
        throw validation_error("channel_apply: inconsistent shapes");
    return partial_trace_second(U * kron(rho, sigma) * U.adjoint(),
                                static_cast<int>(d1), static_cast<int>(d2));
}

ComplexMatrix dual_apply(const ComplexMatrix& U, const ComplexMatrix& sigma,
                         const ComplexMatrix& X) {
    const auto d1 = X.rows();
    const auto d2 = sigma.rows();
    if (X.cols() != d1 || sigma.cols() != d2 || U.rows() != U.cols() || U.rows() != d1 * d2)
        throw validation_error("dual_apply: inconsistent shapes");
    const ComplexMatrix I1 = ComplexMatrix::Identity(d1, d1);
    const ComplexMatrix I2 = ComplexMatrix::Identity(d2, d2);
    return partial_trace_second(kron(I1, sigma) * U.adjoint() * kron(X, I2) * U,
                                static_cast<int>(d1), static_cast<int>(d2));
}

ComplexMatrix postselected_dual(const ComplexMatrix& U, const ComplexMatrix& sigma,
                                const ComplexMatrix& E, const ComplexMatrix& X) {
    const auto d1 = X.rows();
    const auto d2 = sigma.rows();
    if (X.cols() != d1 || sigma.cols() != d2 || E.rows() != d2 || E.cols() != d2 ||
        U.rows() != U.cols() || U.rows() != d1 * d2)
        throw validation_error("postselected_dual: inconsistent shapes");
    const ComplexMatrix I1 = ComplexMatrix::Identity(d1, d1);
    return partial_trace_second(kron(I1, sigma) * U.adjoint() * kron(X, E) * U,
                                static_cast<int>(d1), static_cast<int>(d2));
}

ComplexMatrix gaussian_density(const ComplexMatrix& C, const FockRep& rep, double tol) {
    if (C.rows() != rep.m || C.cols() != rep.m)
        throw validation_error("gaussian_density: C must be m x m");
    require_finite(C, "gaussian_density");
    if (hermiticity_defect(C) > tol)
        throw validation_error("gaussian_density: C is not Hermitian within tolerance");
    Eigen::SelfAdjointEigenSolver<ComplexMatrix> es((C + C.adjoint()) * 0.5);
    const Eigen::VectorXd nu = es.eigenvalues();
    if (nu.minCoeff() < -tol || nu.maxCoeff() > 1.0 + tol)
        throw validation_error("gaussian_density: eigenvalues of C must lie in [0,1]");

    // Product of single-mode occupations in the eigenbasis, rotated back by
    // the mode transformation that diagonalizes C.
    ComplexMatrix prod = ComplexMatrix::Identity(1, 1);
    for (int k = 0; k < rep.m; ++k) {
        const double v = std::clamp(nu(k), 0.0, 1.0);
        ComplexMatrix site(2, 2);
        site << 1.0 - v, 0, 0, v;
        prod = kron(prod, site);
    }
    const ComplexMatrix U = mode_rotation_unitary(rep, es.eigenvectors());
    ComplexMatrix sigma = U * prod * U.adjoint();

    for (int a = 0; a < rep.m; ++a)
        for (int b = 0; b < rep.m; ++b) {
            const Complex got = (sigma * rep.f[b].adjoint() * rep.f[a]).trace();
            if (std::abs(got - C(a, b)) > 1e-9)
                throw verification_error(
                    "gaussian_density: second moments failed the built-in check");
        }
    return sigma;
}

std::map<MonomialKey, Complex, CanonicalKeyOrder> expand_in_monomials(
    const FockRep& rep, const ComplexMatrix& X) {
    require_modes(rep.m, kMaxExpansionModes, "expand_in_monomials");
    const auto dim = rep.parity.rows();
    if (X.rows() != dim || X.cols() != dim)
        throw validation_error("expand_in_monomials: X must be 2^m x 2^m");

    const std::vector<MonomialKey> basis = monomial_basis(rep.m, 2 * rep.m);
    const auto D = static_cast<Eigen::Index>(basis.size());
    std::vector<ComplexMatrix> mats;
    mats.reserve(basis.size());
    for (const MonomialKey& key : basis) mats.push_back(monomial_matrix(rep, key.J, key.I));

    ComplexMatrix gram(D, D);
    ComplexVector rhs(D);
    for (Eigen::Index i = 0; i < D; ++i) {
        for (Eigen::Index j = 0; j < D; ++j)
            gram(i, j) = (mats[i].adjoint() * mats[j]).trace();
        rhs(i) = (mats[i].adjoint() * X).trace();
    }
    const ComplexVector coeff = gram.partialPivLu().solve(rhs);

    ComplexMatrix recon = ComplexMatrix::Zero(dim, dim);
    for (Eigen::Index i = 0; i < D; ++i) recon += coeff(i) * mats[i];
    if ((recon - X).norm() > 1e-9)
        throw verification_error("expand_in_monomials: reconstruction residual too large");

    std::map<MonomialKey, Complex, CanonicalKeyOrder> out;
    for (Eigen::Index i = 0; i < D; ++i)
        if (std::abs(coeff(i)) >= kCoeffPrune) out[basis[i]] = coeff(i);
    return out;
}

std::map<MonomialKey, Complex, CanonicalKeyOrder> expand_with_parity(
    const FockRep& rep, const ComplexMatrix& X, int tau) {
    if (tau != 0 && tau != 1)
        throw validation_error("expand_with_parity: tau must be 0 or 1");
    const ComplexMatrix conj_part = rep.parity * X * rep.parity;
    const ComplexMatrix even_grade = 0.5 * (X + conj_part);
    const ComplexMatrix odd_grade = 0.5 * (X - conj_part);

    // A term f_K^dag f_L P^s with s = parity_exp satisfies |K|+|L| = tau - s
    // (mod 2), and its grade under P-conjugation is (-1)^{|K|+|L|}.
    const ComplexMatrix& plain = (tau == 0) ? even_grade : odd_grade;
    const ComplexMatrix carrier = ((tau == 0) ? odd_grade : even_grade) * rep.parity;

    std::map<MonomialKey, Complex, CanonicalKeyOrder> out = expand_in_monomials(rep, plain);
    for (const auto& [key, value] : expand_in_monomials(rep, carrier)) {
        MonomialKey shifted = key;
        shifted.parity_exp = 1;
        out[shifted] = value;
    }
    return out;
}

ComplexMatrix master_equation_evolve(const FockRep& rep, const ComplexMatrix& U,
                                     const ComplexMatrix& sigma,
                                     const ComplexMatrix& rho0, double t,
                                     const std::optional<ComplexMatrix>& H) {
    require_modes(rep.m, kMaxCombinedModes, "master_equation_evolve");
    if (t < 0.0)
        throw validation_error("master_equation_evolve: time must be nonnegative");
    const auto d = rep.parity.rows();
    if (rho0.rows() != d || rho0.cols() != d)
        throw validation_error("master_equation_evolve: rho0 must be 2^m x 2^m");
    ComplexMatrix H2;
    if (H) {
        if (H->rows() != rep.m || H->cols() != rep.m)
            throw validation_error("master_equation_evolve: H must be m x m");
        if (hermiticity_defect(*H) > kDefaultTol)
            throw validation_error("master_equation_evolve: H must be Hermitian");
        H2 = ComplexMatrix::Zero(d, d);
        for (int j = 0; j < rep.m; ++j)
            for (int k = 0; k < rep.m; ++k)
                H2 += (*H)(j, k) * (rep.f[j].adjoint() * rep.f[k]);
    }
    const Complex gamma0 = sigma.trace();

    // Superoperator matrix over column-vectorized density matrices.
    const auto D = d * d;
    ComplexMatrix super(D, D);
    ComplexMatrix unit = ComplexMatrix::Zero(d, d);
    for (Eigen::Index col = 0; col < d; ++col) {
        for (Eigen::Index row = 0; row < d; ++row) {
            unit(row, col) = 1.0;
            ComplexMatrix img = channel_apply(U, sigma, unit) - gamma0 * unit;
            if (H) img += Complex(0.0, 1.0) * (H2 * unit - unit * H2);
            super.col(col * d + row) = Eigen::Map<const ComplexVector>(img.data(), D);
            unit(row, col) = 0.0;
        }
    }
    const ComplexMatrix prop = expm(t * super);
    const ComplexVector rt = prop * Eigen::Map<const ComplexVector>(rho0.data(), D);
    return Eigen::Map<const ComplexMatrix>(rt.data(), d, d);
}

} // namespace fm::oracle

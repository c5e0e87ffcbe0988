#include "fm/secondquant.hpp"

#include <numeric>

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>

#include "fm/errors.hpp"

namespace fm {

namespace {

template <typename F>
void for_each_combination(int m, int c, F&& fn) {
    if (c < 0 || c > m) return;
    MultiIndex comb(c);
    std::iota(comb.begin(), comb.end(), 1);
    do {
        fn(comb);
    } while (next_combination(comb, m));
}

} // namespace

ContractionDilation dilate_contraction(const ComplexMatrix& A, double tol) {
    if (A.rows() != A.cols())
        throw validation_error("dilate_contraction: A must be square");
    require_finite(A, "dilate_contraction");
    const int m = static_cast<int>(A.rows());
    Eigen::JacobiSVD<ComplexMatrix> svd(A);
    if (svd.singularValues()(0) > 1.0 + tol)
        throw validation_error(
            "dilate_contraction: A is not a contraction (largest singular value exceeds 1)");
    const ComplexMatrix gap = ComplexMatrix::Identity(m, m) - A * A.adjoint();
    // sqrt tolerance scaled up: sigma_max <= 1 + tol makes eigenvalues of the
    // gap as low as -(2*tol + tol^2).
    return ContractionDilation{A, hermitian_sqrt(gap, 3.0 * tol)};
}

ExteriorPowerMatrix exterior_power(const ComplexMatrix& A, int p) {
    if (A.rows() != A.cols())
        throw validation_error("exterior_power: A must be square");
    const int m = static_cast<int>(A.rows());
    if (p < 0 || p > m)
        throw validation_error("exterior_power: order must lie in [0, m]");
    ExteriorPowerMatrix out;
    out.m = m;
    out.p = p;
    for_each_combination(m, p, [&](const MultiIndex& S) { out.basis.push_back(S); });
    const auto D = static_cast<Eigen::Index>(out.basis.size());
    out.data.resize(D, D);
    const MultiIndex no_cols;
    for (Eigen::Index i = 0; i < D; ++i)
        for (Eigen::Index j = 0; j < D; ++j)
            out.data(i, j) = minor_det(A, A, out.basis[i], out.basis[j], no_cols);
    return out;
}

ComplexMatrix contraction_semigroup(const ComplexMatrix& H_eff, double t, double tol) {
    if (H_eff.rows() != H_eff.cols())
        throw validation_error("contraction_semigroup: H_eff must be square");
    require_finite(H_eff, "contraction_semigroup");
    if (t < 0.0) throw validation_error("contraction_semigroup: time must be nonnegative");
    // Dissipativity i(H_eff - H_eff^dagger) <= 0, read off the eigenvalues of
    // the Hermitian part of i H_eff.
    const ComplexMatrix iH = Complex(0.0, 1.0) * H_eff;
    Eigen::SelfAdjointEigenSolver<ComplexMatrix> es((iH + iH.adjoint()) * 0.5);
    if (es.eigenvalues().maxCoeff() > tol)
        throw validation_error(
            "contraction_semigroup: i(H_eff - H_eff^+) has a positive eigenvalue; "
            "the semigroup would not be contractive");
    return expm(Complex(0.0, t) * H_eff);
}

MonomialPoly annihilation_action_gauge_invariant(const ComplexMatrix& A,
                                                 const MultiIndex& I) {
    if (A.rows() != A.cols())
        throw validation_error("annihilation action: A must be square");
    const int m = static_cast<int>(A.rows());
    if (!is_valid_multiindex(I, m))
        throw validation_error("annihilation action: invalid multi-index");
    MonomialPoly out;
    const MultiIndex no_cols;
    for_each_combination(m, static_cast<int>(I.size()), [&](const MultiIndex& L) {
        const Complex d = minor_det(A, A, I, L, no_cols);
        if (d != Complex(0.0, 0.0)) poly_add(out, MonomialKey{{}, L, 0}, d);
    });
    poly_prune(out);
    return out;
}

MonomialPoly annihilation_action_general(const ComplexMatrix& A, const ComplexMatrix& B,
                                         const CorrelationTensor& gamma,
                                         const MultiIndex& I) {
    if (A.rows() != A.cols() || B.rows() != B.cols() || A.rows() != B.rows())
        throw validation_error("annihilation action: A and B must be square of equal size");
    const int m = static_cast<int>(A.rows());
    if (!is_valid_multiindex(I, m))
        throw validation_error("annihilation action: invalid multi-index");
    if (!gamma.is_even)
        throw validation_error("annihilation action: environment tensor must be even");
    MonomialPoly out;
    const int p = static_cast<int>(I.size());
    for (int c = 0; c <= p; c += 2) {  // |Omega| even
        for_each_combination(m, c, [&](const MultiIndex& Omega) {
            const Complex g = gamma({}, Omega);
            if (g == Complex(0.0, 0.0)) return;
            for_each_combination(m, p - c, [&](const MultiIndex& L) {
                const Complex d = minor_det(A, B, I, L, Omega);
                if (d != Complex(0.0, 0.0)) poly_add(out, MonomialKey{{}, L, 0}, g * d);
            });
        });
    }
    poly_prune(out);
    return out;
}

SemigroupFailureReport check_semigroup_failure(const ComplexMatrix& H_eff,
                                               const CorrelationTensor& gamma,
                                               double t1, double t2,
                                               const MonomialKey& probe) {
    auto make_spec = [&](double t) {
        ContractionDilation d = dilate_contraction(contraction_semigroup(H_eff, t));
        return ChannelSpec(d.A, d.B, gamma);
    };
    const ChannelSpec spec1 = make_spec(t1);
    const ChannelSpec spec2 = make_spec(t2);
    const ChannelSpec spec12 = make_spec(t1 + t2);

    SemigroupFailureReport rep;
    // Phi*_{t1+t2} on the probe, versus Phi*_{t1} applied to Phi*_{t2}(probe).
    rep.rhs = dual_action_even(spec12, probe.J, probe.I);
    rep.lhs = dual_action_even_poly(spec1, dual_action_even(spec2, probe.J, probe.I));
    rep.max_deviation = poly_max_deviation(rep.lhs, rep.rhs);
    return rep;
}

} // namespace fm

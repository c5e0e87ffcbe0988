#pragma once

#include "fm/channel.hpp"
#include "fm/environment.hpp"
#include "fm/linalg.hpp"
#include "fm/multiindex.hpp"

namespace fm {

// Contraction A together with its defect block B = (1 - A A^dagger)^{1/2};
// the pair satisfies the channel isometry condition.
struct ContractionDilation {
    ComplexMatrix A;
    ComplexMatrix B;
};

ContractionDilation dilate_contraction(const ComplexMatrix& A, double tol = kDefaultTol);

// Matrix of p x p minors det(A_{IxL}) over the canonical cardinality-p index
// sets; governs p-fold annihilation products.
struct ExteriorPowerMatrix {
    int m = 0;
    int p = 0;
    std::vector<MultiIndex> basis;
    ComplexMatrix data;
};

ExteriorPowerMatrix exterior_power(const ComplexMatrix& A, int p);

// A(t) = e^{i H_eff t} for dissipative H_eff (i(H_eff - H_eff^dagger) <= 0,
// checked through the eigenvalues of the Hermitian part of i H_eff).
ComplexMatrix contraction_semigroup(const ComplexMatrix& H_eff, double t,
                                    double tol = kDefaultTol);

// Annihilation-monomial action for gauge-invariant normalized environments:
// f_I -> sum_{|L|=|I|} det(A_{IxL}) f_L.
MonomialPoly annihilation_action_gauge_invariant(const ComplexMatrix& A,
                                                 const MultiIndex& I);

// General even-environment annihilation action:
// f_I -> sum over |L|+|Omega| = |I|, |Omega| even of
//        Gamma_{empty;Omega} det(A_{IxL}|B_{IxOmega}) f_L.
MonomialPoly annihilation_action_general(const ComplexMatrix& A, const ComplexMatrix& B,
                                         const CorrelationTensor& gamma,
                                         const MultiIndex& I);

struct SemigroupFailureReport {
    MonomialPoly lhs;  // Phi*_{t1} applied after Phi*_{t2}
    MonomialPoly rhs;  // Phi*_{t1+t2}
    double max_deviation = 0.0;
};

// Compares the composed dual maps against the single-step map at t1+t2, each
// channel built from dilate_contraction(e^{i H_eff t}) with the given
// environment. The composition law holds on annihilation monomials for
// gauge-invariant environments and fails in general; this reports the
// coefficientwise gap.
SemigroupFailureReport check_semigroup_failure(const ComplexMatrix& H_eff,
                                               const CorrelationTensor& gamma,
                                               double t1, double t2,
                                               const MonomialKey& probe);

} // namespace fm

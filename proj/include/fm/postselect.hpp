#pragma once

#include <map>
#include <utility>
#include <vector>

#include "fm/channel.hpp"
#include "fm/environment.hpp"
#include "fm/linalg.hpp"
#include "fm/multiindex.hpp"

namespace fm {

// Effect E on the environment expanded in the monomial basis,
// E = sum e_{M;N} f_M^dagger f_N with conj(e_{M;N}) = e_{N;M} and even
// support |M|+|N| = 0 mod 2.
struct EffectExpansion {
    int m = 0;
    std::map<std::pair<MultiIndex, MultiIndex>, Complex> coeffs;
    // Coefficient-table inputs cannot be PSD-checked without reconstructing
    // the matrix; they carry this flag instead (matrix inputs are verified).
    bool trusted = false;
};

// Expand an explicit effect matrix (Hermitian, spectrum in [-tol, 1+tol],
// even) through the brute-force Gram system. Guarded to small m.
EffectExpansion expand_effect(const ComplexMatrix& E, double tol = kDefaultTol);

// Build an expansion directly from coefficients (scalable path); Hermitian
// symmetry and even support are still enforced.
EffectExpansion effect_from_coefficients(
    int m, const std::map<std::pair<MultiIndex, MultiIndex>, Complex>& coeffs,
    bool trusted);

EffectExpansion identity_effect(int m);

// Heisenberg action of the post-selected map Phi_E on f_J^dagger f_I:
// sum over (M,N) in the effect support and K, L, Xi, Omega with
// |J|+|M| = |K|+|Xi|, |I|+|N| = |L|+|Omega| of
//   (-1)^{(|I|+|J|)|M| + |Xi|(|K|+|L|)} e_{M;N}
//     conj(Delta^W_{J,M;K,Xi}) Gamma_{Xi;Omega} Delta^W_{I,N;L,Omega}
// on the key (K, L, (|Xi|+|Omega|) mod 2), where Delta^W is block_det_W.
MonomialPoly dual_action_postselected(const ComplexMatrix& W,
                                      const CorrelationTensor& gamma,
                                      const EffectExpansion& eff,
                                      const MultiIndex& J, const MultiIndex& I);

// Even-environment restriction (|Xi|+|Omega| even, parity_exp always 0).
MonomialPoly dual_action_postselected_even(const ComplexMatrix& W,
                                           const CorrelationTensor& gamma,
                                           const EffectExpansion& eff,
                                           const MultiIndex& J, const MultiIndex& I);

// Coefficientwise sum of effects (instrument coarse-graining over outcomes);
// a complete POVM sums to the identity expansion.
EffectExpansion instrument_sum(const std::vector<EffectExpansion>& parts);

} // namespace fm

#pragma once

#include <map>
#include <optional>
#include <vector>

#include "fm/linalg.hpp"
#include "fm/multiindex.hpp"

namespace fm::oracle {

// Brute-force Jordan-Wigner realization on the full 2^m space. This module is
// the ground truth the hierarchy is tested against; it is deliberately the
// slow exact path and everything here is guarded to small m.

// Mode-count guards. Single-space constructions stop at 14 (16384-dim dense);
// anything touching the combined system (x) environment space stops at 3
// (the 4^m superoperator there is the very cost the hierarchy avoids).
inline constexpr int kMaxModes = 14;
inline constexpr int kMaxCombinedModes = 3;
inline constexpr int kMaxExpansionModes = 6;  // 4^m-dimensional Gram solve

struct FockRep {
    int m = 0;
    std::vector<ComplexMatrix> f;  // annihilation matrices, 1-based mode j at f[j-1]
    ComplexMatrix parity;          // P = (-1)^{N_f}
    ComplexMatrix number;          // N_f
};

// f_j = Z^{(x)(j-1)} (x) S (x) 1^{(x)(m-j)} with Z = diag(1,-1), S the 2x2
// matrix with a single 1 at row 1, column 2; |0> = (1,0)^T; mode 1 sits on
// the leftmost (slowest) tensor factor. See docs/conventions.md.
FockRep build_rep(int m);

// (f_{j1} ... f_{jq})^dagger (f_{i1} ... f_{ip}) P^parity_exp, with products
// taken in increasing label order before conjugation.
ComplexMatrix monomial_matrix(const FockRep& rep, const MultiIndex& J,
                              const MultiIndex& I, int parity_exp = 0);

// The two mutually anticommuting families on the combined space:
// a_i = f_i (x) 1, b_i = P (x) f_i.
struct CombinedModes {
    std::vector<ComplexMatrix> a;
    std::vector<ComplexMatrix> b;
};

CombinedModes combined_modes(const FockRep& rep_m);

// 2^{2m}-dimensional unitary with U^dagger c U = W c over the combined modes
// c = (a; b): H = unitary_log(W), G = sum H[j,k] c_j^dagger c_k, U = expm(-iG).
// The mode relations are re-verified to 1e-8 before returning.
ComplexMatrix implement_unitary(const ComplexMatrix& W);

// System-space unitary with U^dagger f U = V f for an m x m unitary V
// (same construction on the single-space representation).
ComplexMatrix mode_rotation_unitary(const FockRep& rep, const ComplexMatrix& V);

// Phi(rho) = Tr_2[ U (rho (x) sigma) U^dagger ].
ComplexMatrix channel_apply(const ComplexMatrix& U, const ComplexMatrix& sigma,
                            const ComplexMatrix& rho);

// Phi*(X) = Tr_2[ (1 (x) sigma) U^dagger (X (x) 1) U ].
ComplexMatrix dual_apply(const ComplexMatrix& U, const ComplexMatrix& sigma,
                         const ComplexMatrix& X);

// Phi_E*(X) = Tr_2[ (1 (x) sigma) U^dagger (X (x) E) U ].
ComplexMatrix postselected_dual(const ComplexMatrix& U, const ComplexMatrix& sigma,
                                const ComplexMatrix& E, const ComplexMatrix& X);

// Gauge-invariant Gaussian density with second moments C: diagonalize
// C = V nu V^dagger, take the product state (x)_k diag(1-nu_k, nu_k), rotate
// by the mode rotation of V. trace(sigma f_beta^dagger f_alpha) = C[alpha,beta].
ComplexMatrix gaussian_density(const ComplexMatrix& C, const FockRep& rep,
                               double tol = kDefaultTol);

// Coefficients of X in the 4^m monomial basis {f_M^dagger f_N} via the
// Hilbert-Schmidt Gram system. Parity-carrying operators are expanded after
// explicit multiplication by P.
std::map<MonomialKey, Complex, CanonicalKeyOrder> expand_in_monomials(
    const FockRep& rep, const ComplexMatrix& X);

// Expansion of X = sum c_{K,L,s} f_K^dagger f_L P^s for operators produced by
// the dual maps acting on a probe of total order parity tau: the s=0 sector
// lives in the P-conjugation grade tau and the s=1 sector in grade 1-tau, so
// the two are split by (X +- PXP)/2 and the parity-carrying half is expanded
// after explicit multiplication by P.
std::map<MonomialKey, Complex, CanonicalKeyOrder> expand_with_parity(
    const FockRep& rep, const ComplexMatrix& X, int tau);

// rho_t under d/dt rho = Phi(rho) - Gamma_{empty;empty} rho (+ i[H2, rho]
// when a one-particle Hamiltonian H is attached; H2 = sum H[j,k] f_j^dagger f_k,
// sign convention matching gksl::hamiltonian_action), integrated by
// exponentiating the 4^m x 4^m superoperator.
ComplexMatrix master_equation_evolve(const FockRep& rep, const ComplexMatrix& U,
                                     const ComplexMatrix& sigma,
                                     const ComplexMatrix& rho0, double t,
                                     const std::optional<ComplexMatrix>& H = std::nullopt);

} // namespace fm::oracle

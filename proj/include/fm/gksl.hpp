#pragma once

#include <optional>

#include "fm/channel.hpp"

namespace fm {

// Closed linear ODE system d/dt <f_J^dagger f_I> = generator * moments on the
// invariant span of total order <= k. generator = T - Gamma_{empty;empty} I
// where T is the moment transfer matrix; hamiltonian_part carries the
// commutator action of a quadratic Hamiltonian when one is attached.
struct MomentODESystem {
    int m = 0;
    int k = 0;
    std::vector<MonomialKey> basis;
    ComplexMatrix generator;
    ComplexMatrix hamiltonian_part;  // zero matrix when no Hamiltonian given
    bool has_hamiltonian = false;
};

// Heisenberg generator action on one monomial:
// L*(f_J^dagger f_I) = Phi*(f_J^dagger f_I) - Gamma_{empty;empty} f_J^dagger f_I.
MonomialPoly generator_action(const ChannelSpec& spec, const MultiIndex& J,
                              const MultiIndex& I);

// Action of the quadratic Hamiltonian sum_{jk} H[j,k] f_j^dagger f_k on one
// monomial through the canonical anticommutation relations: one index of J or
// I is replaced at a time (see docs/hamiltonian_action.md for the sign
// bookkeeping). Convention: single annihilation moments evolve as
// d/dt <f> = i H <f>.
MonomialPoly hamiltonian_action(const ComplexMatrix& H, const MultiIndex& J,
                                const MultiIndex& I);

// Build the closed system; H (if given) must be Hermitian.
MomentODESystem moment_ode_system(const ChannelSpec& spec, int k,
                                  const std::optional<ComplexMatrix>& H = std::nullopt);

// expm(t (generator + hamiltonian_part)) mu0.
ComplexVector evolve_moments(const MomentODESystem& sys, const ComplexVector& mu0,
                             double t);

// Sum of two generators over the same basis (same m, k required).
MomentODESystem sum_systems(const MomentODESystem& x, const MomentODESystem& y);

// Closed-form propagator for vacuum-type environments on full (unordered)
// tensor components: expm(gamma0 t (conj(A)^{(x)p} (x) A^{(x)q} - 1)), an
// m^{p+q}-dimensional matrix acting on column-vectorized moment tensors with
// the creation tuple on the slow index. On ordered index tuples it agrees
// with evolve_moments of the corresponding basis keys.
ComplexMatrix tensor_power_evolution(const ComplexMatrix& A, int p, int q,
                                     Complex gamma0, double t);

} // namespace fm

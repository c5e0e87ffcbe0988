#include "fm/gksl.hpp"

#include <algorithm>

#include "fm/errors.hpp"

namespace fm {

MonomialPoly generator_action(const ChannelSpec& spec, const MultiIndex& J,
                              const MultiIndex& I) {
    MonomialPoly out = dual_action_even(spec, J, I);
    poly_add(out, MonomialKey{J, I, 0}, -spec.gamma({}, {}));
    poly_prune(out);
    return out;
}

namespace {

// Replace entry `slot` (0-based) of the sorted index list with `label`,
// re-sorting and tracking the fermionic reordering sign. Returns false when
// the label collides with another entry (the monomial vanishes).
bool replace_index(const MultiIndex& idx, int slot, int label, MultiIndex& out, int& sgn) {
    for (int s = 0; s < static_cast<int>(idx.size()); ++s)
        if (s != slot && idx[s] == label) return false;
    out = idx;
    out[slot] = label;
    int target = 0;
    for (int s = 0; s < static_cast<int>(idx.size()); ++s)
        if (s != slot && idx[s] < label) ++target;
    // Each adjacent transposition past a distinct fermionic factor flips the sign.
    sgn = sign_pow(target - slot);
    std::sort(out.begin(), out.end());
    return true;
}

} // namespace

MonomialPoly hamiltonian_action(const ComplexMatrix& H, const MultiIndex& J,
                                const MultiIndex& I) {
    if (H.rows() != H.cols())
        throw validation_error("hamiltonian_action: H must be square");
    const int m = static_cast<int>(H.rows());
    if (!is_valid_multiindex(J, m) || !is_valid_multiindex(I, m))
        throw validation_error("hamiltonian_action: invalid multi-index");
    MonomialPoly out;
    MultiIndex repl;
    int sgn = 0;
    // Creation side: -i sum_{s,j} H[j, J_s] f_{J with slot s -> j}^dagger f_I.
    for (int s = 0; s < static_cast<int>(J.size()); ++s) {
        for (int j = 1; j <= m; ++j) {
            const Complex h = H(j - 1, J[s] - 1);
            if (h == Complex(0.0, 0.0)) continue;
            if (!replace_index(J, s, j, repl, sgn)) continue;
            poly_add(out, MonomialKey{repl, I, 0},
                     Complex(0.0, -1.0) * h * static_cast<double>(sgn));
        }
    }
    // Annihilation side: +i sum_{t,k} H[I_t, k] f_J^dagger f_{I with slot t -> k}.
    for (int t = 0; t < static_cast<int>(I.size()); ++t) {
        for (int k = 1; k <= m; ++k) {
            const Complex h = H(I[t] - 1, k - 1);
            if (h == Complex(0.0, 0.0)) continue;
            if (!replace_index(I, t, k, repl, sgn)) continue;
            poly_add(out, MonomialKey{J, repl, 0},
                     Complex(0.0, 1.0) * h * static_cast<double>(sgn));
        }
    }
    poly_prune(out);
    return out;
}

MomentODESystem moment_ode_system(const ChannelSpec& spec, int k,
                                  const std::optional<ComplexMatrix>& H) {
    if (H) {
        if (H->rows() != spec.m || H->cols() != spec.m)
            throw validation_error("moment_ode_system: H must be m x m");
        require_finite(*H, "moment_ode_system H");
        if (hermiticity_defect(*H) > kDefaultTol)
            throw validation_error("moment_ode_system: H must be Hermitian");
    }
    MomentTransferMatrix T = transfer_matrix(spec, k);
    MomentODESystem sys;
    sys.m = spec.m;
    sys.k = k;
    sys.basis = std::move(T.basis);
    const auto D = static_cast<Eigen::Index>(sys.basis.size());
    sys.generator = std::move(T.data);
    sys.generator.diagonal().array() -= spec.gamma({}, {});
    sys.hamiltonian_part = ComplexMatrix::Zero(D, D);
    if (H) {
        sys.has_hamiltonian = true;
        const MomentBasisIndex index(spec.m, k);
        for (Eigen::Index r = 0; r < D; ++r) {
            const MonomialKey& key = sys.basis[r];
            // Index replacement preserves |J| and |I|, so every output key
            // stays inside the basis block of the same order.
            for (const auto& [out_key, coeff] : hamiltonian_action(*H, key.J, key.I))
                sys.hamiltonian_part(r, static_cast<Eigen::Index>(index(out_key.J, out_key.I))) =
                    coeff;
        }
    }
    return sys;
}

ComplexVector evolve_moments(const MomentODESystem& sys, const ComplexVector& mu0,
                             double t) {
    if (mu0.size() != static_cast<Eigen::Index>(sys.basis.size()))
        throw validation_error("evolve_moments: moment vector length differs from basis size");
    if (t < 0.0) throw validation_error("evolve_moments: time must be nonnegative");
    if (t == 0.0) return mu0;
    const ComplexMatrix gen = sys.generator + sys.hamiltonian_part;
    return expm(t * gen) * mu0;
}

MomentODESystem sum_systems(const MomentODESystem& x, const MomentODESystem& y) {
    if (x.m != y.m || x.k != y.k)
        throw validation_error("sum_systems: systems live on different bases");
    MomentODESystem sys;
    sys.m = x.m;
    sys.k = x.k;
    sys.basis = x.basis;
    sys.generator = x.generator + y.generator;
    sys.hamiltonian_part = x.hamiltonian_part + y.hamiltonian_part;
    sys.has_hamiltonian = x.has_hamiltonian || y.has_hamiltonian;
    return sys;
}

ComplexMatrix tensor_power_evolution(const ComplexMatrix& A, int p, int q,
                                     Complex gamma0, double t) {
    if (A.rows() != A.cols())
        throw validation_error("tensor_power_evolution: A must be square");
    if (p < 0 || q < 0)
        throw validation_error("tensor_power_evolution: powers must be nonnegative");
    const ComplexMatrix Ac = A.conjugate();
    ComplexMatrix big = ComplexMatrix::Identity(1, 1);
    for (int r = 0; r < p; ++r) big = kron(big, Ac);
    for (int r = 0; r < q; ++r) big = kron(big, A);
    big -= ComplexMatrix::Identity(big.rows(), big.cols());
    return expm((gamma0 * t) * big);
}

} // namespace fm

#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "fm/environment.hpp"
#include "fm/linalg.hpp"
#include "fm/multiindex.hpp"

namespace fm {

// Completely positive map induced by the mode transformation with blocks
// (A|B) (an isometry row pair) and the environment state described by gamma.
// W carries the full 2m x 2m unitary when a caller needs the C, D blocks
// (post-selection does; the plain channel action does not).
struct ChannelSpec {
    int m = 0;
    ComplexMatrix A, B;
    std::optional<ComplexMatrix> W;
    CorrelationTensor gamma;

    ChannelSpec(ComplexMatrix A_, ComplexMatrix B_, CorrelationTensor gamma_,
                std::optional<ComplexMatrix> W_ = std::nullopt,
                double tol = kDefaultTol);
};

// Sparse polynomial in normally ordered monomials; coefficients below the
// pruning threshold are dropped on accumulation.
using MonomialPoly = std::map<MonomialKey, Complex, CanonicalKeyOrder>;

inline constexpr double kCoeffPrune = 1e-14;

void poly_add(MonomialPoly& poly, const MonomialKey& key, Complex coeff);
void poly_prune(MonomialPoly& poly, double threshold = kCoeffPrune);

// max |coeff difference| over the union of keys of two polynomials.
double poly_max_deviation(const MonomialPoly& x, const MonomialPoly& y);

// Heisenberg action of the channel on f_J^dagger f_I for an arbitrary
// environment state: sum over K, L, Xi, Omega with |K|+|Xi| = |J| and
// |L|+|Omega| = |I| of
//   (-1)^{|Xi|(|K|+|L|)} conj(det(A_{JxK}|B_{JxXi})) Gamma_{Xi;Omega}
//       det(A_{IxL}|B_{IxOmega})
// on the key (K, L, (|Xi|+|Omega|) mod 2).
MonomialPoly dual_action_general(const ChannelSpec& spec, const MultiIndex& J,
                                 const MultiIndex& I);

// Even-environment restriction (|Xi|+|Omega| even): all output keys carry
// parity_exp = 0 and the total order never increases. Requires
// gamma.is_even; this is the path the moment hierarchy is built on.
MonomialPoly dual_action_even(const ChannelSpec& spec, const MultiIndex& J,
                              const MultiIndex& I);

// Reduced per-family sums (vacuum / gaussian / fock / uniform). These are
// convenience paths validated against dual_action_even, never independently
// trusted.
enum class SpecialCase { vacuum, gaussian, fock, uniform };
MonomialPoly dual_action_special(const ChannelSpec& spec, const MultiIndex& J,
                                 const MultiIndex& I, SpecialCase which);

// Apply the even action termwise to a polynomial (used for composition checks).
MonomialPoly dual_action_even_poly(const ChannelSpec& spec, const MonomialPoly& poly);

// Canonical moment basis: all keys with parity_exp = 0 and |J|+|I| <= k in
// canonical order. D(m,k) = sum_{p+q<=k} binom(m,p) binom(m,q).
std::vector<MonomialKey> monomial_basis(int m, int k);
std::uint64_t moment_dimension(int m, int k);

// O(k)-ish rank lookup into the canonical basis (precomputed block offsets).
class MomentBasisIndex {
  public:
    MomentBasisIndex(int m, int k);
    std::uint64_t operator()(const MultiIndex& J, const MultiIndex& I) const;
    int modes() const { return m_; }
    int order_cap() const { return k_; }

  private:
    int m_ = 0, k_ = 0;
    // offsets_[o][p]: start of the block with |J| = p, |I| = o - p.
    std::vector<std::vector<std::uint64_t>> offsets_;
};

// Matrix of the even dual action restricted to the invariant span of
// monomials of total order <= k. Row = input key (J,I), column = output key
// (K,L); block-lower-triangular in total order.
struct MomentTransferMatrix {
    int m = 0;
    int k = 0;
    std::vector<MonomialKey> basis;
    ComplexMatrix data;
};

MomentTransferMatrix transfer_matrix(const ChannelSpec& spec, int k);

// Output moments <f_J^dagger f_I> = sum_{K,L} T[(J,I),(K,L)] <f_K^dagger f_L>.
ComplexVector apply_transfer(const MomentTransferMatrix& T, const ComplexVector& moments);

// Long-format CSV dump: one "row_key,col_key,re,im" line per entry above the
// pruning threshold, canonical order, 17 significant digits.
std::string transfer_matrix_csv(const MomentTransferMatrix& T);

} // namespace fm

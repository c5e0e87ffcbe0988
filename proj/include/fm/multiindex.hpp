#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "fm/linalg.hpp"

namespace fm {

// Strictly increasing 1-based mode labels, possibly empty. Stored as a plain
// vector; validated where user input enters (make_multiindex, config load)
// and trusted on internal paths.
using MultiIndex = std::vector<int>;

bool is_valid_multiindex(const MultiIndex& idx, int m);

// Validating constructor for externally supplied label lists.
MultiIndex make_multiindex(std::vector<int> entries, int m);

// All subsets of {1..m} with cardinality <= max_card, sorted by
// (cardinality, lexicographic); the empty index comes first.
std::vector<MultiIndex> enumerate_multiindices(int m, int max_card);

// Lexicographic rank of a cardinality-|S| subset of {1..m} among subsets of
// the same cardinality. Guarded to m <= 64 (exact 64-bit binomials).
std::uint64_t combination_rank(const MultiIndex& S, int m);

// Exact binomial coefficient in 64-bit integer arithmetic; 0 when k < 0 or
// k > n. Overflow-guarded for the mode counts this project targets.
std::uint64_t binom_u64(int n, int k);

// In-place lexicographic successor of a cardinality-p combination over
// {1..m}; returns false when comb was the last one.
bool next_combination(MultiIndex& comb, int m);

// One normally ordered monomial f_J^dagger f_I P^parity_exp.
struct MonomialKey {
    MultiIndex J;        // creation labels
    MultiIndex I;        // annihilation labels
    int parity_exp = 0;  // exponent of the parity operator, stored mod 2

    bool operator==(const MonomialKey& o) const {
        return parity_exp == o.parity_exp && J == o.J && I == o.I;
    }
};

// Canonical key order: by |J|+|I|, then |J|, then lexicographic J, then
// lexicographic I, then parity_exp. Every basis enumeration and CSV layout in
// the project uses exactly this order.
bool canonical_less(const MonomialKey& x, const MonomialKey& y);

struct CanonicalKeyOrder {
    bool operator()(const MonomialKey& x, const MonomialKey& y) const {
        return canonical_less(x, y);
    }
};

// Canonical key string "J|I" with comma-separated labels, e.g. "1,3|2";
// a parity factor is rendered as a trailing "^P" (diagnostics only).
std::string key_to_string(const MonomialKey& key);

// Submatrix X[rows, cols] with 1-based multi-index labels; empty index lists
// give 0-dimensional results.
ComplexMatrix submatrix(const ComplexMatrix& X, const MultiIndex& rows,
                        const MultiIndex& cols);

// det(Asub | Bsub) of the horizontal concatenation; the 0x0 determinant is 1.
Complex concat_det(const ComplexMatrix& Asub, const ComplexMatrix& Bsub);

// det of the square block minor ((A_{IxL} B_{IxOmega}); (C_{NxL} D_{NxOmega}))
// of W = (A B; C D), defined when |I|+|N| = |L|+|Omega|.
Complex block_det_W(const ComplexMatrix& W, const MultiIndex& I,
                    const MultiIndex& N, const MultiIndex& L,
                    const MultiIndex& Omega);

// (-1)^exponent.
inline int sign_pow(long long exponent) { return (exponent % 2 == 0) ? 1 : -1; }

// det(A[rows, colsA] | B[rows, colsB]) without materializing Eigen temporaries
// for orders <= 4; the shared hot kernel of the dual-action sums.
Complex minor_det(const ComplexMatrix& A, const ComplexMatrix& B,
                  const MultiIndex& rows, const MultiIndex& colsA,
                  const MultiIndex& colsB);

} // namespace fm

#include "fm/multiindex.hpp"

#include <algorithm>
#include <array>
#include <sstream>

#include "fm/errors.hpp"

namespace fm {

bool is_valid_multiindex(const MultiIndex& idx, int m) {
    for (size_t i = 0; i < idx.size(); ++i) {
        if (idx[i] < 1 || idx[i] > m) return false;
        if (i > 0 && idx[i] <= idx[i - 1]) return false;
    }
    return true;
}

MultiIndex make_multiindex(std::vector<int> entries, int m) {
    if (!is_valid_multiindex(entries, m)) {
        std::ostringstream msg;
        msg << "multi-index must be strictly increasing with labels in [1," << m << "], got {";
        for (size_t i = 0; i < entries.size(); ++i) msg << (i ? "," : "") << entries[i];
        msg << "}";
        throw validation_error(msg.str());
    }
    return entries;
}

std::vector<MultiIndex> enumerate_multiindices(int m, int max_card) {
    if (m < 1) throw validation_error("mode count must be positive");
    if (max_card < 0 || max_card > m)
        throw validation_error("max_card out of range [0, m]");
    std::vector<MultiIndex> out;
    out.push_back({});
    for (int c = 1; c <= max_card; ++c) {
        MultiIndex comb(c);
        for (int i = 0; i < c; ++i) comb[i] = i + 1;
        do {
            out.push_back(comb);
        } while (next_combination(comb, m));
    }
    return out;
}

bool next_combination(MultiIndex& comb, int m) {
    const int p = static_cast<int>(comb.size());
    if (p == 0) return false;
    // Find the rightmost entry that can still move up.
    int i = p - 1;
    while (i >= 0 && comb[i] == m - (p - 1 - i)) --i;
    if (i < 0) return false;
    ++comb[i];
    for (int j = i + 1; j < p; ++j) comb[j] = comb[j - 1] + 1;
    return true;
}

std::uint64_t binom_u64(int n, int k) {
    if (k < 0 || k > n || n < 0) return 0;
    if (k > n - k) k = n - k;
    std::uint64_t b = 1;
    for (int i = 1; i <= k; ++i) {
        // Multiply before dividing: b * (n-k+i) is always divisible by i here.
        b = b * static_cast<std::uint64_t>(n - k + i) / static_cast<std::uint64_t>(i);
    }
    return b;
}

std::uint64_t combination_rank(const MultiIndex& S, int m) {
    if (m > 64) throw validation_error("combination ranking supports m <= 64");
    const int p = static_cast<int>(S.size());
    std::uint64_t rank = 0;
    int prev = 0;
    for (int t = 0; t < p; ++t) {
        for (int v = prev + 1; v < S[t]; ++v)
            rank += binom_u64(m - v, p - 1 - t);
        prev = S[t];
    }
    return rank;
}

bool canonical_less(const MonomialKey& x, const MonomialKey& y) {
    const size_t ox = x.J.size() + x.I.size();
    const size_t oy = y.J.size() + y.I.size();
    if (ox != oy) return ox < oy;
    if (x.J.size() != y.J.size()) return x.J.size() < y.J.size();
    if (x.J != y.J) return x.J < y.J;
    if (x.I != y.I) return x.I < y.I;
    return x.parity_exp < y.parity_exp;
}

std::string key_to_string(const MonomialKey& key) {
    std::ostringstream s;
    for (size_t i = 0; i < key.J.size(); ++i) s << (i ? "," : "") << key.J[i];
    s << '|';
    for (size_t i = 0; i < key.I.size(); ++i) s << (i ? "," : "") << key.I[i];
    if (key.parity_exp % 2 != 0) s << "^P";
    return s.str();
}

ComplexMatrix submatrix(const ComplexMatrix& X, const MultiIndex& rows,
                        const MultiIndex& cols) {
    for (int r : rows)
        if (r < 1 || r > X.rows()) throw validation_error("submatrix: row label out of range");
    for (int c : cols)
        if (c < 1 || c > X.cols()) throw validation_error("submatrix: column label out of range");
    ComplexMatrix out(rows.size(), cols.size());
    for (size_t i = 0; i < rows.size(); ++i)
        for (size_t j = 0; j < cols.size(); ++j)
            out(i, j) = X(rows[i] - 1, cols[j] - 1);
    return out;
}

Complex concat_det(const ComplexMatrix& Asub, const ComplexMatrix& Bsub) {
    const auto p = std::max(Asub.rows(), Bsub.rows());
    if ((Asub.cols() > 0 && Asub.rows() != p) || (Bsub.cols() > 0 && Bsub.rows() != p))
        throw validation_error("concat_det: row counts differ");
    if (Asub.cols() + Bsub.cols() != p)
        throw validation_error("concat_det: concatenation is not square");
    if (p == 0) return Complex(1.0, 0.0);
    ComplexMatrix M(p, p);
    M.leftCols(Asub.cols()) = Asub;
    M.rightCols(Bsub.cols()) = Bsub;
    return det(M);
}

Complex block_det_W(const ComplexMatrix& W, const MultiIndex& I,
                    const MultiIndex& N, const MultiIndex& L,
                    const MultiIndex& Omega) {
    if (W.rows() != W.cols() || W.rows() % 2 != 0)
        throw validation_error("block_det_W: W must be square with even dimension");
    const int m = static_cast<int>(W.rows()) / 2;
    const size_t nrows = I.size() + N.size();
    const size_t ncols = L.size() + Omega.size();
    if (nrows != ncols)
        throw validation_error("block_det_W: |I|+|N| must equal |L|+|Omega|");
    if (nrows == 0) return Complex(1.0, 0.0);
    ComplexMatrix M(nrows, ncols);
    auto fill_row = [&](size_t r, int wrow) {
        for (size_t c = 0; c < L.size(); ++c) M(r, c) = W(wrow, L[c] - 1);
        for (size_t c = 0; c < Omega.size(); ++c) M(r, L.size() + c) = W(wrow, m + Omega[c] - 1);
    };
    for (size_t r = 0; r < I.size(); ++r) {
        if (I[r] < 1 || I[r] > m) throw validation_error("block_det_W: I label out of range");
        fill_row(r, I[r] - 1);
    }
    for (size_t r = 0; r < N.size(); ++r) {
        if (N[r] < 1 || N[r] > m) throw validation_error("block_det_W: N label out of range");
        fill_row(I.size() + r, m + N[r] - 1);
    }
    for (int c : L)
        if (c < 1 || c > m) throw validation_error("block_det_W: L label out of range");
    for (int c : Omega)
        if (c < 1 || c > m) throw validation_error("block_det_W: Omega label out of range");
    return det(M);
}

namespace {

// Closed-form determinants on a row-major stack buffer.
Complex small_det(const std::array<Complex, 16>& a, int n) {
    switch (n) {
        case 1:
            return a[0];
        case 2:
            return a[0] * a[3] - a[1] * a[2];
        case 3:
            return a[0] * (a[4] * a[8] - a[5] * a[7]) - a[1] * (a[3] * a[8] - a[5] * a[6]) +
                   a[2] * (a[3] * a[7] - a[4] * a[6]);
        default: {
            // 4x4 by cofactor expansion along the first row.
            Complex d(0.0, 0.0);
            for (int j = 0; j < 4; ++j) {
                std::array<Complex, 16> mnr{};
                int t = 0;
                for (int r = 1; r < 4; ++r)
                    for (int c = 0; c < 4; ++c)
                        if (c != j) mnr[t++] = a[4 * r + c];
                const Complex cof = small_det(mnr, 3);
                d += ((j % 2 == 0) ? 1.0 : -1.0) * a[j] * cof;
            }
            return d;
        }
    }
}

} // namespace

Complex minor_det(const ComplexMatrix& A, const ComplexMatrix& B,
                  const MultiIndex& rows, const MultiIndex& colsA,
                  const MultiIndex& colsB) {
    const int n = static_cast<int>(rows.size());
    if (static_cast<int>(colsA.size() + colsB.size()) != n)
        throw validation_error("minor_det: block is not square");
    if (n == 0) return Complex(1.0, 0.0);
    if (n <= 4) {
        std::array<Complex, 16> buf{};
        const int ca = static_cast<int>(colsA.size());
        for (int r = 0; r < n; ++r) {
            const int wr = rows[r] - 1;
            for (int c = 0; c < ca; ++c) buf[n * r + c] = A(wr, colsA[c] - 1);
            for (size_t c = 0; c < colsB.size(); ++c)
                buf[n * r + ca + c] = B(wr, colsB[c] - 1);
        }
        return small_det(buf, n);
    }
    return concat_det(submatrix(A, rows, colsA), submatrix(B, rows, colsB));
}

} // namespace fm

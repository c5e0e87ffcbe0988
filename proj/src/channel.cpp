#include "fm/channel.hpp"

#include <numeric>
#include <sstream>

#include "fm/errors.hpp"
#include "fm/scenario.hpp"  // format_sig17 / csv_quote for the CSV dump

namespace fm {

namespace {

// Calls fn(S) for every cardinality-c subset of {1..m} in lexicographic order.
template <typename F>
void for_each_combination(int m, int c, F&& fn) {
    if (c < 0 || c > m) return;
    MultiIndex comb(c);
    std::iota(comb.begin(), comb.end(), 1);
    do {
        fn(comb);
    } while (next_combination(comb, m));
}

void require_probe(const MultiIndex& idx, int m, const char* side) {
    if (!is_valid_multiindex(idx, m))
        throw validation_error(std::string("dual action: invalid ") + side + " multi-index");
}

} // namespace

ChannelSpec::ChannelSpec(ComplexMatrix A_, ComplexMatrix B_, CorrelationTensor gamma_,
                         std::optional<ComplexMatrix> W_, double tol)
    : m(static_cast<int>(A_.rows())), A(std::move(A_)), B(std::move(B_)),
      W(std::move(W_)), gamma(std::move(gamma_)) {
    if (m < 1) throw validation_error("ChannelSpec: mode count must be at least 1");
    if (A.rows() != A.cols() || B.rows() != B.cols() || B.rows() != m)
        throw validation_error("ChannelSpec: A and B must be square m x m");
    require_finite(A, "ChannelSpec A");
    require_finite(B, "ChannelSpec B");
    if (gamma.m != m)
        throw validation_error("ChannelSpec: environment tensor mode count differs from m");
    const ComplexMatrix Im = ComplexMatrix::Identity(m, m);
    const double defect = (A * A.adjoint() + B * B.adjoint() - Im).norm();
    if (defect > tol) {
        std::ostringstream msg;
        msg << "ChannelSpec: rows of (A|B) are not an isometry, ||AA^+ + BB^+ - 1|| = "
            << defect << " exceeds " << tol;
        throw validation_error(msg.str());
    }
    if (W) {
        if (W->rows() != 2 * m || W->cols() != 2 * m)
            throw validation_error("ChannelSpec: W must be 2m x 2m");
        require_finite(*W, "ChannelSpec W");
        if (W->topLeftCorner(m, m) != A || W->topRightCorner(m, m) != B)
            throw validation_error("ChannelSpec: top blocks of W must equal A and B");
        const ComplexMatrix I2m = ComplexMatrix::Identity(2 * m, 2 * m);
        if ((*W * W->adjoint() - I2m).norm() > tol)
            throw validation_error("ChannelSpec: W is not unitary within tolerance");
    }
}

void poly_add(MonomialPoly& poly, const MonomialKey& key, Complex coeff) {
    auto [it, inserted] = poly.try_emplace(key, coeff);
    if (!inserted) it->second += coeff;
}

void poly_prune(MonomialPoly& poly, double threshold) {
    for (auto it = poly.begin(); it != poly.end();) {
        if (std::abs(it->second) < threshold)
            it = poly.erase(it);
        else
            ++it;
    }
}

double poly_max_deviation(const MonomialPoly& x, const MonomialPoly& y) {
    double dev = 0.0;
    for (const auto& [key, c] : x) {
        auto it = y.find(key);
        const Complex other = (it == y.end()) ? Complex(0.0, 0.0) : it->second;
        dev = std::max(dev, std::abs(c - other));
    }
    for (const auto& [key, c] : y) {
        if (x.find(key) == x.end()) dev = std::max(dev, std::abs(c));
    }
    return dev;
}

namespace {

// Shared enumeration core of the dual-action sums. The environment index
// pair (Xi, Omega) is walked under the tensor's support constraints so the
// cost stays a sum of binomials; for each admissible pair the system indices
// K, L run over the cardinalities forced by |K|+|Xi|=|J|, |L|+|Omega|=|I|.
MonomialPoly dual_core(const ChannelSpec& spec, const MultiIndex& J,
                       const MultiIndex& I, bool even_only) {
    const int m = spec.m;
    const int q = static_cast<int>(J.size());
    const int p = static_cast<int>(I.size());
    const GammaSupport sup = spec.gamma.support();
    MonomialPoly out;

    for (int cj = 0; cj <= q; ++cj) {
        for (int ci = 0; ci <= p; ++ci) {
            const bool odd = ((cj + ci) % 2) != 0;
            if (odd && (even_only || spec.gamma.is_even)) continue;
            if (sup == GammaSupport::vacuum_only && (cj != 0 || ci != 0)) continue;
            const bool same_card = cj == ci;
            if (!same_card &&
                (sup == GammaSupport::diagonal || sup == GammaSupport::equal_cardinality ||
                 spec.gamma.is_gauge_invariant))
                continue;

            for_each_combination(m, cj, [&](const MultiIndex& Xi) {
                // J-side minors depend only on Xi; hoist them out of the
                // Omega walk.
                std::vector<std::pair<MultiIndex, Complex>> lefts;
                for_each_combination(m, q - cj, [&](const MultiIndex& K) {
                    const Complex d = minor_det(spec.A, spec.B, J, K, Xi);
                    if (d != Complex(0.0, 0.0)) lefts.emplace_back(K, std::conj(d));
                });
                if (lefts.empty()) return;

                auto handle_omega = [&](const MultiIndex& Omega) {
                    const Complex g = spec.gamma(Xi, Omega);
                    if (g == Complex(0.0, 0.0)) return;
                    const int parity = (cj + ci) % 2;
                    for_each_combination(m, p - ci, [&](const MultiIndex& L) {
                        const Complex right = minor_det(spec.A, spec.B, I, L, Omega);
                        if (right == Complex(0.0, 0.0)) return;
                        for (const auto& [K, leftc] : lefts) {
                            const int sgn =
                                sign_pow(static_cast<long long>(cj) *
                                         static_cast<long long>(K.size() + L.size()));
                            poly_add(out, MonomialKey{K, L, parity},
                                     static_cast<double>(sgn) * leftc * g * right);
                        }
                    });
                };

                if (sup == GammaSupport::vacuum_only || sup == GammaSupport::diagonal) {
                    handle_omega(Xi);  // Omega = Xi is the only admissible partner
                } else {
                    for_each_combination(m, ci, handle_omega);
                }
            });
        }
    }
    poly_prune(out);
    return out;
}

} // namespace

MonomialPoly dual_action_general(const ChannelSpec& spec, const MultiIndex& J,
                                 const MultiIndex& I) {
    require_probe(J, spec.m, "creation");
    require_probe(I, spec.m, "annihilation");
    return dual_core(spec, J, I, false);
}

MonomialPoly dual_action_even(const ChannelSpec& spec, const MultiIndex& J,
                              const MultiIndex& I) {
    if (!spec.gamma.is_even)
        throw validation_error(
            "dual_action_even: environment tensor is not even; the closed "
            "formula requires an even environment state");
    require_probe(J, spec.m, "creation");
    require_probe(I, spec.m, "annihilation");
    return dual_core(spec, J, I, true);
}

MonomialPoly dual_action_special(const ChannelSpec& spec, const MultiIndex& J,
                                 const MultiIndex& I, SpecialCase which) {
    require_probe(J, spec.m, "creation");
    require_probe(I, spec.m, "annihilation");
    const auto expect = [&](GammaKind kind, const char* name) {
        if (spec.gamma.kind != kind)
            throw validation_error(std::string("dual_action_special: environment is not of ") +
                                   name + " kind");
    };
    const int m = spec.m;
    const int q = static_cast<int>(J.size());
    const int p = static_cast<int>(I.size());
    MonomialPoly out;

    // All four reduced sums share the inner (K, L) accumulation.
    auto accumulate = [&](const MultiIndex& Xi, const MultiIndex& Omega, Complex g) {
        if (g == Complex(0.0, 0.0)) return;
        const int cj = static_cast<int>(Xi.size());
        for_each_combination(m, q - cj, [&](const MultiIndex& K) {
            const Complex left = minor_det(spec.A, spec.B, J, K, Xi);
            if (left == Complex(0.0, 0.0)) return;
            const Complex leftc = std::conj(left);
            for_each_combination(m, p - static_cast<int>(Omega.size()),
                                 [&](const MultiIndex& L) {
                const Complex right = minor_det(spec.A, spec.B, I, L, Omega);
                if (right == Complex(0.0, 0.0)) return;
                const int sgn = sign_pow(static_cast<long long>(cj) *
                                         static_cast<long long>(K.size() + L.size()));
                poly_add(out, MonomialKey{K, L, 0},
                         static_cast<double>(sgn) * leftc * g * right);
            });
        });
    };

    switch (which) {
        case SpecialCase::vacuum: {
            expect(GammaKind::vacuum, "vacuum");
            accumulate({}, {}, spec.gamma.normalization);
            break;
        }
        case SpecialCase::gaussian: {
            expect(GammaKind::gaussian, "gaussian");
            for (int c = 0; c <= std::min(q, p); ++c) {
                for_each_combination(m, c, [&](const MultiIndex& Xi) {
                    for_each_combination(m, c, [&](const MultiIndex& Omega) {
                        accumulate(Xi, Omega, det(submatrix(spec.gamma.C, Omega, Xi)));
                    });
                });
            }
            break;
        }
        case SpecialCase::fock: {
            expect(GammaKind::fock, "fock");
            // Xi = Omega runs over subsets of the occupied set only.
            const MultiIndex& M = spec.gamma.occupied;
            const int mm = static_cast<int>(M.size());
            for (int c = 0; c <= std::min({q, p, mm}); ++c) {
                for_each_combination(mm, c, [&](const MultiIndex& pick) {
                    MultiIndex Xi(pick.size());
                    for (size_t i = 0; i < pick.size(); ++i) Xi[i] = M[pick[i] - 1];
                    accumulate(Xi, Xi, Complex(1.0, 0.0));
                });
            }
            break;
        }
        case SpecialCase::uniform: {
            expect(GammaKind::uniform, "uniform");
            const int N = spec.gamma.particle_count;
            for (int c = 0; c <= std::min({q, p, N}); ++c) {
                const double g = static_cast<double>(binom_u64(m - c, N - c)) /
                                 static_cast<double>(binom_u64(m, N));
                for_each_combination(m, c,
                                     [&](const MultiIndex& Xi) { accumulate(Xi, Xi, g); });
            }
            break;
        }
    }
    poly_prune(out);
    return out;
}

MonomialPoly dual_action_even_poly(const ChannelSpec& spec, const MonomialPoly& poly) {
    MonomialPoly out;
    for (const auto& [key, coeff] : poly) {
        if (key.parity_exp % 2 != 0)
            throw validation_error(
                "dual_action_even_poly: input carries a parity factor, outside the even span");
        for (const auto& [k2, c2] : dual_action_even(spec, key.J, key.I))
            poly_add(out, k2, coeff * c2);
    }
    poly_prune(out);
    return out;
}

std::vector<MonomialKey> monomial_basis(int m, int k) {
    if (m < 1) throw validation_error("monomial_basis: mode count must be at least 1");
    if (k < 0 || k > 2 * m)
        throw validation_error("monomial_basis: order cap must lie in [0, 2m]");
    std::vector<MonomialKey> basis;
    basis.reserve(moment_dimension(m, k));
    for (int o = 0; o <= k; ++o) {
        for (int pj = std::max(0, o - m); pj <= std::min(o, m); ++pj) {
            for_each_combination(m, pj, [&](const MultiIndex& J) {
                for_each_combination(m, o - pj, [&](const MultiIndex& I) {
                    basis.push_back(MonomialKey{J, I, 0});
                });
            });
        }
    }
    return basis;
}

std::uint64_t moment_dimension(int m, int k) {
    std::uint64_t D = 0;
    for (int pj = 0; pj <= std::min(k, m); ++pj)
        for (int pi = 0; pi + pj <= k && pi <= m; ++pi)
            D += binom_u64(m, pj) * binom_u64(m, pi);
    return D;
}

MomentBasisIndex::MomentBasisIndex(int m, int k) : m_(m), k_(k) {
    if (m < 1) throw validation_error("MomentBasisIndex: mode count must be at least 1");
    if (k < 0 || k > 2 * m)
        throw validation_error("MomentBasisIndex: order cap must lie in [0, 2m]");
    offsets_.resize(k + 1);
    std::uint64_t run = 0;
    for (int o = 0; o <= k; ++o) {
        offsets_[o].assign(o + 1, 0);
        for (int pj = 0; pj <= o; ++pj) {
            offsets_[o][pj] = run;
            if (pj <= m && o - pj <= m) run += binom_u64(m, pj) * binom_u64(m, o - pj);
        }
    }
}

std::uint64_t MomentBasisIndex::operator()(const MultiIndex& J, const MultiIndex& I) const {
    const int o = static_cast<int>(J.size() + I.size());
    if (o > k_)
        throw validation_error("MomentBasisIndex: key order exceeds the basis cap");
    const std::uint64_t nI = binom_u64(m_, static_cast<int>(I.size()));
    return offsets_[o][J.size()] + combination_rank(J, m_) * nI + combination_rank(I, m_);
}

MomentTransferMatrix transfer_matrix(const ChannelSpec& spec, int k) {
    if (!spec.gamma.is_even)
        throw validation_error("transfer_matrix: environment tensor must be even");
    MomentTransferMatrix T;
    T.m = spec.m;
    T.k = k;
    T.basis = monomial_basis(spec.m, k);
    const MomentBasisIndex index(spec.m, k);
    const auto D = static_cast<Eigen::Index>(T.basis.size());
    T.data = ComplexMatrix::Zero(D, D);
    for (Eigen::Index r = 0; r < D; ++r) {
        const MonomialKey& key = T.basis[r];
        for (const auto& [out_key, coeff] : dual_action_even(spec, key.J, key.I))
            T.data(r, static_cast<Eigen::Index>(index(out_key.J, out_key.I))) = coeff;
    }
    return T;
}

ComplexVector apply_transfer(const MomentTransferMatrix& T, const ComplexVector& moments) {
    if (moments.size() != static_cast<Eigen::Index>(T.basis.size()))
        throw validation_error("apply_transfer: moment vector length differs from basis size");
    return T.data * moments;
}

std::string transfer_matrix_csv(const MomentTransferMatrix& T) {
    std::ostringstream out;
    out << "row_key,col_key,re,im\n";
    for (Eigen::Index r = 0; r < T.data.rows(); ++r) {
        const std::string row_key = csv_quote(key_to_string(T.basis[r]));
        for (Eigen::Index c = 0; c < T.data.cols(); ++c) {
            const Complex v = T.data(r, c);
            if (std::abs(v) < kCoeffPrune) continue;
            out << row_key << ',' << csv_quote(key_to_string(T.basis[c])) << ','
                << format_sig17(v.real()) << ',' << format_sig17(v.imag()) << '\n';
        }
    }
    return out.str();
}

} // namespace fm

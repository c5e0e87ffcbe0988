#include "fm/postselect.hpp"

#include <numeric>

#include <Eigen/Eigenvalues>

#include "fm/errors.hpp"
#include "fm/fock_oracle.hpp"

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

void enforce_effect_invariants(EffectExpansion& eff, double sym_tol) {
    // Hermitian symmetry pinned exactly; even support enforced by erasure.
    std::map<std::pair<MultiIndex, MultiIndex>, Complex> fixed;
    for (const auto& [idx, v] : eff.coeffs) {
        if ((idx.first.size() + idx.second.size()) % 2 != 0) {
            if (std::abs(v) > sym_tol)
                throw validation_error(
                    "effect expansion: odd-order coefficient violates even support");
            continue;
        }
        auto mirror = eff.coeffs.find({idx.second, idx.first});
        const Complex mv =
            (mirror == eff.coeffs.end()) ? Complex(0.0, 0.0) : mirror->second;
        if (std::abs(std::conj(v) - mv) > sym_tol)
            throw validation_error(
                "effect expansion: coefficients violate Hermitian symmetry");
        fixed[idx] = (v + std::conj(mv)) * 0.5;
    }
    eff.coeffs = std::move(fixed);
}

} // namespace

EffectExpansion expand_effect(const ComplexMatrix& E, double tol) {
    if (E.rows() != E.cols())
        throw validation_error("expand_effect: E must be square");
    int m = 0;
    while ((1L << m) < E.rows()) ++m;
    if ((1L << m) != E.rows() || m < 1)
        throw validation_error("expand_effect: dimension must be a power of two");
    if (m > oracle::kMaxExpansionModes)
        throw resource_error("expand_effect: matrix-input expansion is guarded to " +
                             std::to_string(oracle::kMaxExpansionModes) + " modes");
    require_finite(E, "expand_effect");
    if (hermiticity_defect(E) > tol)
        throw validation_error("expand_effect: E is not Hermitian within tolerance");
    Eigen::SelfAdjointEigenSolver<ComplexMatrix> es((E + E.adjoint()) * 0.5);
    if (es.eigenvalues().minCoeff() < -tol || es.eigenvalues().maxCoeff() > 1.0 + tol)
        throw validation_error("expand_effect: E must satisfy 0 <= E <= 1");
    const oracle::FockRep rep = oracle::build_rep(m);
    if ((rep.parity * E - E * rep.parity).norm() > tol)
        throw validation_error("expand_effect: E must be even (commute with parity)");

    EffectExpansion eff;
    eff.m = m;
    eff.trusted = true;
    for (const auto& [key, c] : oracle::expand_in_monomials(rep, E)) {
        if (std::abs(c) < 1e-12) continue;
        eff.coeffs[{key.J, key.I}] = c;
    }
    // Residuals of the Gram solve sit far below this enforcement tolerance.
    enforce_effect_invariants(eff, 1e-9);
    return eff;
}

EffectExpansion effect_from_coefficients(
    int m, const std::map<std::pair<MultiIndex, MultiIndex>, Complex>& coeffs,
    bool trusted) {
    if (m < 1) throw validation_error("effect_from_coefficients: mode count must be at least 1");
    EffectExpansion eff;
    eff.m = m;
    eff.trusted = trusted;
    for (const auto& [idx, v] : coeffs) {
        if (!is_valid_multiindex(idx.first, m) || !is_valid_multiindex(idx.second, m))
            throw validation_error("effect_from_coefficients: invalid multi-index");
        if (std::abs(v) == 0.0) continue;
        if ((idx.first.size() + idx.second.size()) % 2 != 0)
            throw validation_error(
                "effect_from_coefficients: odd-order coefficient violates even support");
        eff.coeffs[idx] = v;
    }
    enforce_effect_invariants(eff, 1e-10);
    return eff;
}

EffectExpansion identity_effect(int m) {
    if (m < 1) throw validation_error("identity_effect: mode count must be at least 1");
    EffectExpansion eff;
    eff.m = m;
    eff.trusted = true;
    eff.coeffs[{{}, {}}] = Complex(1.0, 0.0);
    return eff;
}

namespace {

MonomialPoly postselected_core(const ComplexMatrix& W, const CorrelationTensor& gamma,
                               const EffectExpansion& eff, const MultiIndex& J,
                               const MultiIndex& I, bool even_only) {
    if (W.rows() != W.cols() || W.rows() % 2 != 0)
        throw validation_error("postselected action: W must be square of even dimension");
    const int m = static_cast<int>(W.rows()) / 2;
    const ComplexMatrix I2m = ComplexMatrix::Identity(2 * m, 2 * m);
    if ((W * W.adjoint() - I2m).norm() > kDefaultTol)
        throw validation_error("postselected action: W is not unitary within tolerance");
    if (gamma.m != m || eff.m != m)
        throw validation_error(
            "postselected action: W, environment tensor and effect disagree on m");
    if (!is_valid_multiindex(J, m) || !is_valid_multiindex(I, m))
        throw validation_error("postselected action: invalid multi-index");

    const GammaSupport sup = gamma.support();
    const int order = static_cast<int>(J.size() + I.size());
    MonomialPoly out;

    for (const auto& [MN, e] : eff.coeffs) {
        const MultiIndex& M = MN.first;
        const MultiIndex& N = MN.second;
        const int qq = static_cast<int>(J.size() + M.size());
        const int pp = static_cast<int>(I.size() + N.size());
        const Complex pref =
            static_cast<double>(sign_pow(static_cast<long long>(order) *
                                         static_cast<long long>(M.size()))) *
            e;

        for (int cj = std::max(0, qq - m); cj <= std::min(qq, m); ++cj) {
            for (int ci = std::max(0, pp - m); ci <= std::min(pp, m); ++ci) {
                const bool odd = ((cj + ci) % 2) != 0;
                if (odd && (even_only || gamma.is_even)) continue;
                if (sup == GammaSupport::vacuum_only && (cj != 0 || ci != 0)) continue;
                if (cj != ci &&
                    (sup == GammaSupport::diagonal ||
                     sup == GammaSupport::equal_cardinality || gamma.is_gauge_invariant))
                    continue;

                for_each_combination(m, cj, [&](const MultiIndex& Xi) {
                    std::vector<std::pair<MultiIndex, Complex>> lefts;
                    for_each_combination(m, qq - cj, [&](const MultiIndex& K) {
                        const Complex d = block_det_W(W, J, M, K, Xi);
                        if (d != Complex(0.0, 0.0)) lefts.emplace_back(K, std::conj(d));
                    });
                    if (lefts.empty()) return;

                    auto handle_omega = [&](const MultiIndex& Omega) {
                        const Complex g = gamma(Xi, Omega);
                        if (g == Complex(0.0, 0.0)) return;
                        const int parity = (cj + ci) % 2;
                        for_each_combination(m, pp - ci, [&](const MultiIndex& L) {
                            const Complex right = block_det_W(W, I, N, L, Omega);
                            if (right == Complex(0.0, 0.0)) return;
                            for (const auto& [K, leftc] : lefts) {
                                const int sgn = sign_pow(
                                    static_cast<long long>(cj) *
                                    static_cast<long long>(K.size() + L.size()));
                                poly_add(out, MonomialKey{K, L, parity},
                                         static_cast<double>(sgn) * pref * leftc * g * right);
                            }
                        });
                    };

                    if (sup == GammaSupport::vacuum_only || sup == GammaSupport::diagonal) {
                        handle_omega(Xi);
                    } else {
                        for_each_combination(m, ci, handle_omega);
                    }
                });
            }
        }
    }
    poly_prune(out);
    return out;
}

} // namespace

MonomialPoly dual_action_postselected(const ComplexMatrix& W,
                                      const CorrelationTensor& gamma,
                                      const EffectExpansion& eff,
                                      const MultiIndex& J, const MultiIndex& I) {
    return postselected_core(W, gamma, eff, J, I, false);
}

MonomialPoly dual_action_postselected_even(const ComplexMatrix& W,
                                           const CorrelationTensor& gamma,
                                           const EffectExpansion& eff,
                                           const MultiIndex& J, const MultiIndex& I) {
    if (!gamma.is_even)
        throw validation_error(
            "dual_action_postselected_even: environment tensor is not even");
    return postselected_core(W, gamma, eff, J, I, true);
}

EffectExpansion instrument_sum(const std::vector<EffectExpansion>& parts) {
    EffectExpansion sum;
    if (parts.empty()) return sum;  // zero expansion
    sum.m = parts.front().m;
    sum.trusted = true;
    for (const EffectExpansion& part : parts) {
        if (part.m != sum.m)
            throw validation_error("instrument_sum: effects disagree on mode count");
        sum.trusted = sum.trusted && part.trusted;
        for (const auto& [idx, v] : part.coeffs) {
            auto [it, inserted] = sum.coeffs.try_emplace(idx, v);
            if (!inserted) it->second += v;
        }
    }
    for (auto it = sum.coeffs.begin(); it != sum.coeffs.end();) {
        if (std::abs(it->second) < 1e-15)
            it = sum.coeffs.erase(it);
        else
            ++it;
    }
    enforce_effect_invariants(sum, 1e-10);
    return sum;
}

} // namespace fm

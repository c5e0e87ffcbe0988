#include "fm/environment.hpp"

#include <cmath>

#include <Eigen/Eigenvalues>

#include "fm/errors.hpp"
#include "fm/fock_oracle.hpp"

namespace fm {

namespace {

// Entries below this are dropped when tabulating explicit tensors; keeps the
// support classification from being fooled by trace round-off.
constexpr double kTablePrune = 1e-13;

void require_mode_count(int m) {
    if (m < 1) throw validation_error("mode count must be at least 1");
}

} // namespace

Complex CorrelationTensor::operator()(const MultiIndex& Xi, const MultiIndex& Omega) const {
    switch (kind) {
        case GammaKind::vacuum:
            return (Xi.empty() && Omega.empty()) ? normalization : Complex(0.0, 0.0);
        case GammaKind::gaussian: {
            if (Xi.size() != Omega.size()) return Complex(0.0, 0.0);
            return det(submatrix(C, Omega, Xi));  // rows Omega, columns Xi
        }
        case GammaKind::fock: {
            if (Xi != Omega) return Complex(0.0, 0.0);
            for (int x : Xi)
                if (!std::binary_search(occupied.begin(), occupied.end(), x))
                    return Complex(0.0, 0.0);
            return Complex(1.0, 0.0);
        }
        case GammaKind::uniform: {
            if (Xi != Omega) return Complex(0.0, 0.0);
            const int r = static_cast<int>(Xi.size());
            if (particle_count - r < 0) return Complex(0.0, 0.0);
            const double num = static_cast<double>(binom_u64(m - r, particle_count - r));
            const double den = static_cast<double>(binom_u64(m, particle_count));
            return Complex(num / den, 0.0);
        }
        case GammaKind::explicit_table: {
            auto it = table.find({Xi, Omega});
            return it == table.end() ? Complex(0.0, 0.0) : it->second;
        }
    }
    return Complex(0.0, 0.0);
}

GammaSupport CorrelationTensor::support() const {
    switch (kind) {
        case GammaKind::vacuum: return GammaSupport::vacuum_only;
        case GammaKind::gaussian: return GammaSupport::equal_cardinality;
        case GammaKind::fock:
        case GammaKind::uniform: return GammaSupport::diagonal;
        case GammaKind::explicit_table: break;
    }
    // Explicit tables are classified from their actual nonzero entries.
    bool vacuum_only = true, diagonal = true, equal_card = true;
    for (const auto& [idx, v] : table) {
        if (std::abs(v) <= kTablePrune) continue;
        if (!(idx.first.empty() && idx.second.empty())) vacuum_only = false;
        if (idx.first != idx.second) diagonal = false;
        if (idx.first.size() != idx.second.size()) equal_card = false;
    }
    if (vacuum_only) return GammaSupport::vacuum_only;
    if (diagonal) return GammaSupport::diagonal;
    if (equal_card) return GammaSupport::equal_cardinality;
    return GammaSupport::general;
}

CorrelationTensor gamma_vacuum(int m) {
    require_mode_count(m);
    CorrelationTensor g;
    g.m = m;
    g.kind = GammaKind::vacuum;
    return g;
}

CorrelationTensor gamma_gaussian(const ComplexMatrix& C, double tol) {
    if (C.rows() != C.cols()) throw validation_error("gamma_gaussian: C must be square");
    require_mode_count(static_cast<int>(C.rows()));
    require_finite(C, "gamma_gaussian");
    if (hermiticity_defect(C) > tol)
        throw validation_error("gamma_gaussian: C is not Hermitian within tolerance");
    Eigen::SelfAdjointEigenSolver<ComplexMatrix> es((C + C.adjoint()) * 0.5);
    const double lo = es.eigenvalues().minCoeff();
    const double hi = es.eigenvalues().maxCoeff();
    if (lo < -tol || hi > 1.0 + tol)
        throw validation_error("gamma_gaussian: eigenvalues of C must lie in [0,1]");
    CorrelationTensor g;
    g.m = static_cast<int>(C.rows());
    g.kind = GammaKind::gaussian;
    g.C = C;
    return g;
}

CorrelationTensor gamma_fock(int m, const MultiIndex& M) {
    require_mode_count(m);
    MultiIndex occ = make_multiindex(M, m);
    CorrelationTensor g;
    g.m = m;
    g.kind = GammaKind::fock;
    g.occupied = occ;
    return g;
}

CorrelationTensor gamma_uniform(int m, int N) {
    require_mode_count(m);
    if (N < 0 || N > m)
        throw validation_error("gamma_uniform: particle number must satisfy 0 <= N <= m");
    CorrelationTensor g;
    g.m = m;
    g.kind = GammaKind::uniform;
    g.particle_count = N;
    return g;
}

CorrelationTensor gamma_from_density(const ComplexMatrix& sigma, double tol) {
    if (sigma.rows() != sigma.cols())
        throw validation_error("gamma_from_density: sigma must be square");
    int m = 0;
    while ((1L << m) < sigma.rows()) ++m;
    if ((1L << m) != sigma.rows())
        throw validation_error("gamma_from_density: dimension must be a power of two");
    require_mode_count(m);
    if (m > oracle::kMaxExpansionModes)
        throw resource_error("gamma_from_density: tabulation limited to " +
                             std::to_string(oracle::kMaxExpansionModes) + " modes");
    require_finite(sigma, "gamma_from_density");
    if (hermiticity_defect(sigma) > tol)
        throw validation_error("gamma_from_density: sigma is not Hermitian within tolerance");
    Eigen::SelfAdjointEigenSolver<ComplexMatrix> es((sigma + sigma.adjoint()) * 0.5);
    if (es.eigenvalues().minCoeff() < -tol)
        throw validation_error("gamma_from_density: sigma is not positive semidefinite");

    const oracle::FockRep rep = oracle::build_rep(m);
    CorrelationTensor g;
    g.m = m;
    g.kind = GammaKind::explicit_table;
    g.normalization = sigma.trace();
    g.is_even = (rep.parity * sigma - sigma * rep.parity).norm() <= 1e-10;
    g.is_gauge_invariant = (rep.number * sigma - sigma * rep.number).norm() <= 1e-10;

    const std::vector<MultiIndex> subsets = enumerate_multiindices(m, m);
    for (const MultiIndex& Xi : subsets) {
        for (const MultiIndex& Omega : subsets) {
            // Flags measured true are enforced exactly on the table so that
            // support-driven enumeration never silently drops an entry.
            if (g.is_even && (Xi.size() + Omega.size()) % 2 != 0) continue;
            if (g.is_gauge_invariant && Xi.size() != Omega.size()) continue;
            const Complex v = (sigma * oracle::monomial_matrix(rep, Xi, Omega)).trace();
            if (std::abs(v) > kTablePrune) g.table[{Xi, Omega}] = v;
        }
    }
    return g;
}

} // namespace fm

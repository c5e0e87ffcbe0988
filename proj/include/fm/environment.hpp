#pragma once

#include <map>
#include <utility>

#include "fm/linalg.hpp"
#include "fm/multiindex.hpp"

namespace fm {

enum class GammaKind { vacuum, gaussian, fock, uniform, explicit_table };

// How the correlation tensor's support is constrained; the dual-action sums
// consult this to skip index pairs that are identically zero, which is what
// keeps large-m assembly at binomial cost.
enum class GammaSupport {
    vacuum_only,        // nonzero only at Xi = Omega = empty
    diagonal,           // nonzero only at Xi = Omega
    equal_cardinality,  // nonzero only at |Xi| = |Omega|
    general,            // no structural restriction beyond the flags
};

// Environment correlation tensor Gamma_{Xi;Omega} = Tr(sigma f_Xi^dagger f_Omega),
// exposed as a lazy evaluator for the analytic families and as an explicit
// table when built from a density matrix.
class CorrelationTensor {
  public:
    int m = 0;
    GammaKind kind = GammaKind::vacuum;
    bool is_even = true;
    bool is_gauge_invariant = true;
    Complex normalization{1.0, 0.0};  // Gamma_{empty;empty}

    // Kind payloads (only the one matching `kind` is meaningful).
    ComplexMatrix C;                       // gaussian second moments
    MultiIndex occupied;                   // fock occupation set M
    int particle_count = 0;                // uniform N
    std::map<std::pair<MultiIndex, MultiIndex>, Complex> table;  // explicit

    Complex operator()(const MultiIndex& Xi, const MultiIndex& Omega) const;

    GammaSupport support() const;
};

// Vacuum state: Gamma_{Xi;Omega} = 1 iff Xi = Omega = empty.
CorrelationTensor gamma_vacuum(int m);

// Gauge-invariant Gaussian state with second moments C (Hermitian, spectrum
// in [0,1]): Gamma_{Xi;Omega} = delta_{|Xi|,|Omega|} det(C_{Omega x Xi}).
CorrelationTensor gamma_gaussian(const ComplexMatrix& C, double tol = kDefaultTol);

// Fock state with occupied modes M: Gamma_{Xi;Omega} = delta_{Xi,Omega} 1_{Xi subset M}.
CorrelationTensor gamma_fock(int m, const MultiIndex& M);

// Uniform mixture of all N-particle Fock states:
// Gamma_{Xi;Omega} = delta_{Xi,Omega} binom(m-|Xi|, N-|Xi|) / binom(m, N).
CorrelationTensor gamma_uniform(int m, int N);

// Tabulates Gamma from an explicit environment density matrix via the
// brute-force Fock representation; evenness and gauge invariance are measured
// (commutation with P and N_f, tolerance 1e-10), not assumed. normalization
// is trace(sigma). Guarded by the brute-force mode limit.
CorrelationTensor gamma_from_density(const ComplexMatrix& sigma, double tol = kDefaultTol);

} // namespace fm

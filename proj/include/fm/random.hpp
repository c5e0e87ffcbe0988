#pragma once

#include <cstdint>
#include <random>

#include "fm/linalg.hpp"

namespace fm {

// Seeded sampling used by the CLI verify/benchmark paths and the test suite.
// mt19937_64 output is pinned by the standard; the Gaussian mapping is done
// here explicitly (Box-Muller on 53-bit uniforms) instead of through
// std::normal_distribution, whose stream is implementation-defined. Golden
// CSV fixtures depend on this stream being stable.

inline std::mt19937_64 seeded_rng(std::uint64_t seed) { return std::mt19937_64(seed); }

// Uniform double in (0, 1], 53-bit resolution.
double uniform_unit(std::mt19937_64& rng);

// Standard normal deviate.
double gaussian(std::mt19937_64& rng);

// Matrix of iid standard complex Gaussians (re and im each N(0,1)).
ComplexMatrix gaussian_matrix(int rows, int cols, std::mt19937_64& rng);

// Haar-like n x n unitary: QR of a complex Gaussian matrix with the diagonal
// of R phase-fixed.
ComplexMatrix haar_unitary(int n, std::mt19937_64& rng);

// Random contraction: Gaussian matrix rescaled to largest singular value
// `radius` (default strictly inside the unit ball).
ComplexMatrix random_contraction(int n, std::mt19937_64& rng, double radius = 0.9);

// Random density matrix (Gaussian Wishart, unit trace).
ComplexMatrix random_density(int dim, std::mt19937_64& rng);

// Random Hermitian matrix with entries O(1).
ComplexMatrix random_hermitian(int n, std::mt19937_64& rng);

// Random dissipative effective Hamiltonian H0 + i*gamma*D with D PSD, so that
// i(H - H^dagger) = -2*gamma*D <= 0 and e^{iHt} is a contraction semigroup.
ComplexMatrix random_dissipative_heff(int n, std::mt19937_64& rng, double gamma = 0.5);

} // namespace fm

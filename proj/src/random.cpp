#include "fm/random.hpp"

#include <cmath>

#include <Eigen/SVD>

namespace fm {

double uniform_unit(std::mt19937_64& rng) {
    // 53-bit mantissa in (0, 1]: never returns 0, so it is safe under log().
    return (static_cast<double>(rng() >> 11) + 1.0) * 0x1p-53;
}

double gaussian(std::mt19937_64& rng) {
    const double u1 = uniform_unit(rng);
    const double u2 = uniform_unit(rng);
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
}

ComplexMatrix gaussian_matrix(int rows, int cols, std::mt19937_64& rng) {
    ComplexMatrix G(rows, cols);
    // Row-major fill order so the stream consumption is easy to reason about.
    for (int i = 0; i < rows; ++i)
        for (int j = 0; j < cols; ++j) {
            const double re = gaussian(rng);
            const double im = gaussian(rng);
            G(i, j) = Complex(re, im);
        }
    return G;
}

ComplexMatrix haar_unitary(int n, std::mt19937_64& rng) {
    ComplexMatrix G = gaussian_matrix(n, n, rng);
    Eigen::HouseholderQR<ComplexMatrix> qr(G);
    ComplexMatrix Q = qr.householderQ() * ComplexMatrix::Identity(n, n);
    ComplexMatrix R = qr.matrixQR().triangularView<Eigen::Upper>();
    for (int j = 0; j < n; ++j) {
        const Complex r = R(j, j);
        const double a = std::abs(r);
        Q.col(j) *= (a > 0.0) ? r / a : Complex(1.0, 0.0);
    }
    return Q;
}

ComplexMatrix random_contraction(int n, std::mt19937_64& rng, double radius) {
    ComplexMatrix G = gaussian_matrix(n, n, rng);
    Eigen::JacobiSVD<ComplexMatrix> svd(G);
    return G * (radius / svd.singularValues()(0));
}

ComplexMatrix random_density(int dim, std::mt19937_64& rng) {
    ComplexMatrix G = gaussian_matrix(dim, dim, rng);
    ComplexMatrix rho = G * G.adjoint();
    return rho / rho.trace();
}

ComplexMatrix random_hermitian(int n, std::mt19937_64& rng) {
    ComplexMatrix G = gaussian_matrix(n, n, rng);
    return (G + G.adjoint()) * 0.5;
}

ComplexMatrix random_dissipative_heff(int n, std::mt19937_64& rng, double gamma) {
    ComplexMatrix H0 = random_hermitian(n, rng);
    ComplexMatrix G = gaussian_matrix(n, n, rng);
    ComplexMatrix D = G * G.adjoint() / static_cast<double>(n);
    return H0 + Complex(0.0, gamma) * D;
}

} // namespace fm

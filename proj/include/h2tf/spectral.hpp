#pragma once

// Fourier-domain helpers for the t-SVD view of a tensor. Complex values are
// carried as explicit (real, imaginary) pairs so the rest of the library stays
// purely real. Everything here runs in double precision.

#include <cstddef>
#include <vector>

#include "h2tf/tensor.hpp"

namespace h2tf {

struct ComplexMatrix {
  Matrix re;
  Matrix im;
};

struct ComplexTensor3 {
  Tensor3 re;
  Tensor3 im;
};

// F(k, n) = exp(-2*pi*i*k*n / b).
ComplexMatrix dft_matrix(std::size_t b);

// conj(F)^T / b, the exact inverse of dft_matrix(b).
ComplexMatrix inverse_dft_matrix(std::size_t b);

ComplexMatrix complex_matmul(const ComplexMatrix& a, const ComplexMatrix& b);

// Z x3 H for complex Z and H.
ComplexTensor3 mode3_product(const ComplexTensor3& z, const ComplexMatrix& hm);

// DFT along the third mode (tube-wise FFT) of a real tensor.
ComplexTensor3 fft_mode3(const Tensor3& x);

// Inverse DFT along the third mode of a real tensor (imaginary part kept).
ComplexTensor3 ifft_mode3(const Tensor3& x);

// Singular values of the complex matrix re + i*im in descending order,
// min(rows, cols) of them. One-sided Jacobi on the real embedding
// [[re, -im], [im, re]], whose spectrum is that of the complex matrix with
// every value doubled up.
std::vector<double> complex_singular_values(const Matrix& re, const Matrix& im);

// Number of singular-tube positions j for which max over Fourier slices of
// sigma_j exceeds tol * (largest singular value of any slice). Zero tensors
// have tubal rank 0.
std::size_t tubal_rank(const Tensor3& x, double tol);

}  // namespace h2tf

#include "h2tf/spectral.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace h2tf {

ComplexMatrix dft_matrix(std::size_t b) {
  if (b == 0) throw ArgumentError("dft_matrix: size must be >= 1");
  ComplexMatrix f{Matrix(b, b), Matrix(b, b)};
  for (std::size_t k = 0; k < b; ++k)
    for (std::size_t n = 0; n < b; ++n) {
      // Reduce k*n mod b before the trig call so large b keeps full accuracy.
      const double angle = -2.0 * std::numbers::pi * static_cast<double>((k * n) % b) / static_cast<double>(b);
      f.re(k, n) = std::cos(angle);
      f.im(k, n) = std::sin(angle);
    }
  return f;
}

ComplexMatrix inverse_dft_matrix(std::size_t b) {
  ComplexMatrix f = dft_matrix(b);
  const double scale = 1.0 / static_cast<double>(b);
  ComplexMatrix inv{Matrix(b, b), Matrix(b, b)};
  for (std::size_t r = 0; r < b; ++r)
    for (std::size_t c = 0; c < b; ++c) {
      inv.re(r, c) = f.re(c, r) * scale;
      inv.im(r, c) = -f.im(c, r) * scale;
    }
  return inv;
}

ComplexMatrix complex_matmul(const ComplexMatrix& a, const ComplexMatrix& b) {
  Matrix rr = matmul(a.re, b.re);
  Matrix ii = matmul(a.im, b.im);
  Matrix ri = matmul(a.re, b.im);
  Matrix ir = matmul(a.im, b.re);
  ComplexMatrix c{Matrix(a.re.rows(), b.re.cols()), Matrix(a.re.rows(), b.re.cols())};
  for (std::size_t n = 0; n < c.re.size(); ++n) {
    c.re.data()[n] = rr.data()[n] - ii.data()[n];
    c.im.data()[n] = ri.data()[n] + ir.data()[n];
  }
  return c;
}

ComplexTensor3 mode3_product(const ComplexTensor3& z, const ComplexMatrix& hm) {
  require_same_shape(z.re, z.im, "complex mode-3 product");
  ComplexTensor3 out{mode3_product(z.re, hm.re), mode3_product(z.re, hm.im)};
  out.re -= mode3_product(z.im, hm.im);
  out.im += mode3_product(z.im, hm.re);
  return out;
}

ComplexTensor3 fft_mode3(const Tensor3& x) {
  const ComplexMatrix f = dft_matrix(x.bands());
  return {mode3_product(x, f.re), mode3_product(x, f.im)};
}

ComplexTensor3 ifft_mode3(const Tensor3& x) {
  const ComplexMatrix f = inverse_dft_matrix(x.bands());
  return {mode3_product(x, f.re), mode3_product(x, f.im)};
}

namespace {

// Column-major working copy for Hestenes' one-sided Jacobi. Returns the
// column norms after orthogonalisation, i.e. the singular values (unsorted).
std::vector<double> one_sided_jacobi(std::vector<double> a, std::size_t m, std::size_t n) {
  auto col = [&](std::size_t c) { return a.data() + c * m; };
  constexpr int kMaxSweeps = 80;
  constexpr double kEps = 1e-15;
  for (int sweep = 0; sweep < kMaxSweeps; ++sweep) {
    bool rotated = false;
    for (std::size_t p = 0; p + 1 < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) {
        double alpha = 0.0, beta = 0.0, gamma = 0.0;
        const double* cp = col(p);
        const double* cq = col(q);
        for (std::size_t i = 0; i < m; ++i) {
          alpha += cp[i] * cp[i];
          beta += cq[i] * cq[i];
          gamma += cp[i] * cq[i];
        }
        if (gamma == 0.0 || std::abs(gamma) <= kEps * std::sqrt(alpha * beta)) continue;
        rotated = true;
        const double zeta = (beta - alpha) / (2.0 * gamma);
        const double t = std::copysign(1.0, zeta) / (std::abs(zeta) + std::sqrt(1.0 + zeta * zeta));
        const double c = 1.0 / std::sqrt(1.0 + t * t);
        const double s = c * t;
        double* wp = col(p);
        double* wq = col(q);
        for (std::size_t i = 0; i < m; ++i) {
          const double xp = wp[i];
          const double xq = wq[i];
          wp[i] = c * xp - s * xq;
          wq[i] = s * xp + c * xq;
        }
      }
    }
    if (!rotated) break;
  }
  std::vector<double> sv(n);
  for (std::size_t c = 0; c < n; ++c) {
    double acc = 0.0;
    const double* cc = col(c);
    for (std::size_t i = 0; i < m; ++i) acc += cc[i] * cc[i];
    sv[c] = std::sqrt(acc);
  }
  return sv;
}

}  // namespace

std::vector<double> complex_singular_values(const Matrix& re, const Matrix& im) {
  if (re.rows() != im.rows() || re.cols() != im.cols()) {
    throw ShapeError("complex_singular_values: real and imaginary parts differ in shape");
  }
  // Work on the orientation with at least as many rows as columns.
  const bool transpose = re.rows() < re.cols();
  const std::size_t rows = transpose ? re.cols() : re.rows();
  const std::size_t cols = transpose ? re.rows() : re.cols();
  auto get = [&](const Matrix& mtx, std::size_t r, std::size_t c) { return transpose ? mtx(c, r) : mtx(r, c); };
  // Conjugate transpose only flips the sign of the imaginary part, which
  // leaves the singular values unchanged; the plain transpose is enough.
  const std::size_t m = 2 * rows;
  const std::size_t n = 2 * cols;
  std::vector<double> emb(m * n);
  for (std::size_t c = 0; c < cols; ++c)
    for (std::size_t r = 0; r < rows; ++r) {
      const double a = get(re, r, c);
      const double b = get(im, r, c);
      emb[c * m + r] = a;                    // [re ; im] in left block column
      emb[c * m + rows + r] = b;
      emb[(cols + c) * m + r] = -b;          // [-im ; re] in right block column
      emb[(cols + c) * m + rows + r] = a;
    }
  std::vector<double> sv = one_sided_jacobi(std::move(emb), m, n);
  std::ranges::sort(sv, std::greater<>());
  std::vector<double> out(cols);
  for (std::size_t k = 0; k < cols; ++k) out[k] = sv[2 * k];
  return out;
}

std::size_t tubal_rank(const Tensor3& x, double tol) {
  if (!(tol > 0.0)) throw ArgumentError(fmt::format("tubal_rank: tol must be > 0, got {}", tol));
  if (!all_finite(x)) throw NumericError("tubal_rank: tensor has non-finite entries");
  const ComplexTensor3 fx = fft_mode3(x);
  const std::size_t positions = std::min(x.rows(), x.cols());
  std::vector<double> tube_max(positions, 0.0);
  for (std::size_t k = 0; k < x.bands(); ++k) {
    const auto sv = complex_singular_values(frontal_slice(fx.re, k), frontal_slice(fx.im, k));
    for (std::size_t j = 0; j < positions; ++j) tube_max[j] = std::max(tube_max[j], sv[j]);
  }
  const double largest = *std::ranges::max_element(tube_max);
  if (largest == 0.0) return 0;
  return static_cast<std::size_t>(std::ranges::count_if(tube_max, [&](double s) { return s > tol * largest; }));
}

}  // namespace h2tf

#pragma once

// Independent reference implementations used only by the tests. They work on
// nested std::vector matrices and explicit index loops, and share no code with
// the library beyond element access on Tensor3.

#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>
#include <random>
#include <vector>

#include <Eigen/Dense>

#include "h2tf/model.hpp"
#include "h2tf/tensor.hpp"

namespace oracle {

using h2tf::Tensor3;
using Mat = std::vector<std::vector<double>>;

inline Mat zeros(std::size_t r, std::size_t c) { return Mat(r, std::vector<double>(c, 0.0)); }

inline Mat slice(const Tensor3& x, std::size_t k) {
  Mat m = zeros(x.rows(), x.cols());
  for (std::size_t i = 0; i < x.rows(); ++i)
    for (std::size_t j = 0; j < x.cols(); ++j) m[i][j] = x(i, j, k);
  return m;
}

inline Mat matrix(const h2tf::Matrix& a) {
  Mat m = zeros(a.rows(), a.cols());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < a.cols(); ++j) m[i][j] = a(i, j);
  return m;
}

inline Mat mm(const Mat& a, const Mat& b) {
  Mat c = zeros(a.size(), b[0].size());
  for (std::size_t i = 0; i < a.size(); ++i)
    for (std::size_t j = 0; j < b[0].size(); ++j) {
      double s = 0.0;
      for (std::size_t t = 0; t < b.size(); ++t) s += a[i][t] * b[t][j];
      c[i][j] = s;
    }
  return c;
}

inline double sigma(double x, const h2tf::Activation& a) {
  if (a.kind == h2tf::ActivationKind::Identity) return x;
  return x < 0.0 ? a.slope * x : x;
}

inline Mat sigma(Mat m, const h2tf::Activation& a) {
  for (auto& row : m)
    for (auto& v : row) v = sigma(v, a);
  return m;
}

inline Tensor3 stack(const std::vector<Mat>& slices) {
  Tensor3 out(slices[0].size(), slices[0][0].size(), slices.size());
  for (std::size_t k = 0; k < slices.size(); ++k)
    for (std::size_t i = 0; i < out.rows(); ++i)
      for (std::size_t j = 0; j < out.cols(); ++j) out(i, j, k) = slices[k][i][j];
  return out;
}

inline Tensor3 facewise(const Tensor3& a, const Tensor3& b) {
  std::vector<Mat> out;
  for (std::size_t k = 0; k < a.bands(); ++k) out.push_back(mm(slice(a, k), slice(b, k)));
  return stack(out);
}

// X(i,j,k') = sum_k H(k',k) Z(i,j,k).
inline Tensor3 mode3(const Tensor3& z, const h2tf::Matrix& hm) {
  Tensor3 out(z.rows(), z.cols(), hm.rows());
  for (std::size_t i = 0; i < z.rows(); ++i)
    for (std::size_t j = 0; j < z.cols(); ++j)
      for (std::size_t kp = 0; kp < hm.rows(); ++kp) {
        double s = 0.0;
        for (std::size_t k = 0; k < z.bands(); ++k) s += hm(kp, k) * z(i, j, k);
        out(i, j, kp) = s;
      }
  return out;
}

// Circular forward difference along dimension `dim` (0 = i, 1 = j, 2 = k).
inline Tensor3 diff(const Tensor3& x, int dim) {
  Tensor3 out(x.shape());
  const auto [h, w, b] = x.shape();
  for (std::size_t i = 0; i < h; ++i)
    for (std::size_t j = 0; j < w; ++j)
      for (std::size_t k = 0; k < b; ++k) {
        const double next = dim == 0 ? x((i + 1) % h, j, k) : dim == 1 ? x(i, (j + 1) % w, k) : x(i, j, (k + 1) % b);
        out(i, j, k) = next - x(i, j, k);
      }
  return out;
}

// Nested per-slice evaluation of W_l s(... s(W_3 s(W_2 W_1))).
inline Mat hmf_slice(const h2tf::H2TFParams& p, std::size_t k) {
  Mat m = mm(slice(p.factors[1], k), slice(p.factors[0], k));
  for (std::size_t d = 2; d < p.factors.size(); ++d) m = mm(slice(p.factors[d], k), sigma(m, p.activation));
  return m;
}

inline Tensor3 hmf(const h2tf::H2TFParams& p) {
  std::vector<Mat> out;
  for (std::size_t k = 0; k < p.shape.b; ++k) out.push_back(hmf_slice(p, k));
  return stack(out);
}

// Tube by tube: t <- H_p t, followed by s except after the last transform.
inline Tensor3 hnt(const Tensor3& z, const h2tf::H2TFParams& p) {
  if (p.transforms.empty()) return z;
  Tensor3 out(z.rows(), z.cols(), p.transforms.back().rows());
  for (std::size_t i = 0; i < z.rows(); ++i)
    for (std::size_t j = 0; j < z.cols(); ++j) {
      std::vector<double> t(z.bands());
      for (std::size_t k = 0; k < z.bands(); ++k) t[k] = z(i, j, k);
      for (std::size_t q = 0; q < p.transforms.size(); ++q) {
        const auto& hm = p.transforms[q];
        std::vector<double> u(hm.rows(), 0.0);
        for (std::size_t r = 0; r < hm.rows(); ++r)
          for (std::size_t c = 0; c < hm.cols(); ++c) u[r] += hm(r, c) * t[c];
        if (q + 1 < p.transforms.size())
          for (auto& v : u) v = sigma(v, p.activation);
        t = std::move(u);
      }
      for (std::size_t k = 0; k < t.size(); ++k) out(i, j, k) = t[k];
    }
  return out;
}

inline Tensor3 h2tf_forward(const h2tf::H2TFParams& p) { return hnt(hmf(p), p); }

// Inverse DFT along mode 3 by direct summation: x(n) = (1/b) sum_k X(k) e^{2 pi i k n / b}.
struct ComplexCube {
  std::vector<std::complex<double>> v;
  std::size_t h, w, b;
  std::complex<double>& at(std::size_t i, std::size_t j, std::size_t k) { return v[(k * h + i) * w + j]; }
};

inline ComplexCube idft3(const Tensor3& x) {
  const auto [h, w, b] = x.shape();
  ComplexCube out{std::vector<std::complex<double>>(h * w * b), h, w, b};
  for (std::size_t i = 0; i < h; ++i)
    for (std::size_t j = 0; j < w; ++j)
      for (std::size_t n = 0; n < b; ++n) {
        std::complex<double> s = 0.0;
        for (std::size_t k = 0; k < b; ++k) {
          const double ang = 2.0 * std::numbers::pi * static_cast<double>(k * n) / static_cast<double>(b);
          s += x(i, j, k) * std::complex<double>(std::cos(ang), std::sin(ang));
        }
        out.at(i, j, n) = s / static_cast<double>(b);
      }
  return out;
}

// Tubal rank via Eigen's complex SVD of each Fourier-domain slice.
inline std::size_t tubal_rank(const Tensor3& x, double tol) {
  const auto [h, w, b] = x.shape();
  std::vector<Eigen::VectorXd> sv;
  double top = 0.0;
  for (std::size_t k = 0; k < b; ++k) {
    Eigen::MatrixXcd m(h, w);
    for (std::size_t i = 0; i < h; ++i)
      for (std::size_t j = 0; j < w; ++j) {
        std::complex<double> s = 0.0;
        for (std::size_t n = 0; n < b; ++n) {
          const double ang = -2.0 * std::numbers::pi * static_cast<double>(k * n) / static_cast<double>(b);
          s += x(i, j, n) * std::complex<double>(std::cos(ang), std::sin(ang));
        }
        m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = s;
      }
    Eigen::JacobiSVD<Eigen::MatrixXcd> svd(m);
    sv.push_back(svd.singularValues());
    if (sv.back().size() > 0) top = std::max(top, sv.back()(0));
  }
  if (top == 0.0) return 0;
  std::size_t rank = 0;
  for (Eigen::Index j = 0; j < sv[0].size(); ++j) {
    double best = 0.0;
    for (const auto& s : sv) best = std::max(best, s(j));
    if (best > tol * top) rank = static_cast<std::size_t>(j) + 1;
  }
  return rank;
}

// argmin_s (r - s)^2 + a |s| over the grid {r + n * step}, n in [-span/step, span/step].
inline double prox_grid(double r, double a, double step, double span) {
  const auto n = static_cast<long>(std::llround(span / step));
  double best_s = r;
  double best = a * std::abs(r);
  for (long i = -n; i <= n; ++i) {
    const double s = r + static_cast<double>(i) * step;
    const double f = (r - s) * (r - s) + a * std::abs(s);
    if (f < best) {
      best = f;
      best_s = s;
    }
  }
  // The grid need not contain 0, where the minimiser often sits.
  if (r * r < best) best_s = 0.0;
  return best_s;
}

inline double prox_objective(double r, double a, double s) { return (r - s) * (r - s) + a * std::abs(s); }

// Mean over bands of 10 log10(1 / mse), each band capped at `cap`.
inline double psnr(const Tensor3& x, const Tensor3& ref, double cap) {
  double total = 0.0;
  for (std::size_t k = 0; k < x.bands(); ++k) {
    double se = 0.0;
    for (std::size_t i = 0; i < x.rows(); ++i)
      for (std::size_t j = 0; j < x.cols(); ++j) se += std::pow(x(i, j, k) - ref(i, j, k), 2);
    const double mse = se / static_cast<double>(x.rows() * x.cols());
    total += mse == 0.0 ? cap : std::min(cap, -10.0 * std::log10(mse));
  }
  return total / static_cast<double>(x.bands());
}

// Literal sliding-window SSIM: every fully contained n x n window with the
// normalised 2-D Gaussian weights evaluated in place.
inline double ssim(const Tensor3& x, const Tensor3& y, std::size_t n, double sigma_w) {
  const double c1 = std::pow(0.01, 2), c2 = std::pow(0.03, 2);
  Mat g = zeros(n, n);
  double gs = 0.0;
  const double c = (static_cast<double>(n) - 1.0) / 2.0;
  for (std::size_t a = 0; a < n; ++a)
    for (std::size_t bb = 0; bb < n; ++bb) {
      const double da = static_cast<double>(a) - c, db = static_cast<double>(bb) - c;
      g[a][bb] = std::exp(-(da * da + db * db) / (2.0 * sigma_w * sigma_w));
      gs += g[a][bb];
    }
  double total = 0.0;
  for (std::size_t k = 0; k < x.bands(); ++k) {
    double acc = 0.0;
    std::size_t count = 0;
    for (std::size_t i0 = 0; i0 + n <= x.rows(); ++i0)
      for (std::size_t j0 = 0; j0 + n <= x.cols(); ++j0) {
        double mx = 0, my = 0;
        for (std::size_t a = 0; a < n; ++a)
          for (std::size_t bb = 0; bb < n; ++bb) {
            const double wgt = g[a][bb] / gs;
            mx += wgt * x(i0 + a, j0 + bb, k);
            my += wgt * y(i0 + a, j0 + bb, k);
          }
        double vx = 0, vy = 0, cxy = 0;
        for (std::size_t a = 0; a < n; ++a)
          for (std::size_t bb = 0; bb < n; ++bb) {
            const double wgt = g[a][bb] / gs;
            const double dx = x(i0 + a, j0 + bb, k) - mx, dy = y(i0 + a, j0 + bb, k) - my;
            vx += wgt * dx * dx;
            vy += wgt * dy * dy;
            cxy += wgt * dx * dy;
          }
        acc += ((2 * mx * my + c1) * (2 * cxy + c2)) / ((mx * mx + my * my + c1) * (vx + vy + c2));
        ++count;
      }
    total += acc / static_cast<double>(count);
  }
  return total / static_cast<double>(x.bands());
}

inline Tensor3 random_tensor(std::size_t h, std::size_t w, std::size_t b, std::mt19937_64& rng, double lo = -1.0,
                             double hi = 1.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  Tensor3 t(h, w, b);
  for (auto& v : t.data()) v = u(rng);
  return t;
}

inline h2tf::Matrix random_matrix(std::size_t r, std::size_t c, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  h2tf::Matrix m(r, c);
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j) m(i, j) = u(rng);
  return m;
}

inline double max_abs_diff(const Tensor3& a, const Tensor3& b) {
  double d = 0.0;
  for (std::size_t n = 0; n < a.size(); ++n) d = std::max(d, std::abs(a.data()[n] - b.data()[n]));
  return d;
}

inline double frob_diff(const Tensor3& a, const Tensor3& b) {
  double s = 0.0;
  for (std::size_t n = 0; n < a.size(); ++n) s += std::pow(a.data()[n] - b.data()[n], 2);
  return std::sqrt(s);
}

inline double dot(const Tensor3& a, const Tensor3& b) {
  double s = 0.0;
  for (std::size_t n = 0; n < a.size(); ++n) s += a.data()[n] * b.data()[n];
  return s;
}

}  // namespace oracle

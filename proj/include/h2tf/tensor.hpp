#pragma once

// Dense order-3 tensors and the small amount of linear algebra the H2TF
// model needs: face-wise products, mode-3 products, circular forward
// differences with their adjoints, and the soft-threshold prox.
//
// Element order is part of the public contract (the .ht3 file format relies
// on it): frontal slices are stored one after another, and each slice is
// row-major. Entry (i, j, k) of an h x w x b tensor lives at k*h*w + i*w + j.

#include <algorithm>
#include <array>
#include <cmath>
#include <concepts>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include <fmt/format.h>

#include "h2tf/errors.hpp"

namespace h2tf {

struct Shape3 {
  std::size_t h = 1;
  std::size_t w = 1;
  std::size_t b = 1;

  [[nodiscard]] std::size_t size() const { return h * w * b; }
  [[nodiscard]] std::size_t slice_size() const { return h * w; }
  friend bool operator==(const Shape3&, const Shape3&) = default;
};

inline std::string to_string(const Shape3& s) { return fmt::format("{}x{}x{}", s.h, s.w, s.b); }

template <std::floating_point T>
class BasicMatrix {
 public:
  using value_type = T;

  BasicMatrix() : BasicMatrix(1, 1) {}
  BasicMatrix(std::size_t rows, std::size_t cols, T fill = T{0}) : rows_{rows}, cols_{cols} {
    if (rows == 0 || cols == 0) {
      throw ShapeError(fmt::format("matrix dims must be positive, got {}x{}", rows, cols));
    }
    data_.assign(rows * cols, fill);
  }
  BasicMatrix(std::size_t rows, std::size_t cols, std::vector<T> data) : BasicMatrix(rows, cols) {
    if (data.size() != rows * cols) {
      throw ShapeError(fmt::format("matrix {}x{} needs {} values, got {}", rows, cols, rows * cols, data.size()));
    }
    data_ = std::move(data);
  }

  static BasicMatrix identity(std::size_t n) {
    BasicMatrix m(n, n);
    for (std::size_t i = 0; i < n; ++i) m(i, i) = T{1};
    return m;
  }

  [[nodiscard]] std::size_t rows() const { return rows_; }
  [[nodiscard]] std::size_t cols() const { return cols_; }
  [[nodiscard]] std::size_t size() const { return data_.size(); }

  T& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  const T& operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

  [[nodiscard]] std::span<T> data() { return data_; }
  [[nodiscard]] std::span<const T> data() const { return data_; }

  [[nodiscard]] BasicMatrix transposed() const {
    BasicMatrix t(cols_, rows_);
    for (std::size_t r = 0; r < rows_; ++r)
      for (std::size_t c = 0; c < cols_; ++c) t(c, r) = (*this)(r, c);
    return t;
  }

  friend bool operator==(const BasicMatrix&, const BasicMatrix&) = default;

 private:
  std::size_t rows_;
  std::size_t cols_;
  std::vector<T> data_;
};

template <std::floating_point T>
BasicMatrix<T> matmul(const BasicMatrix<T>& a, const BasicMatrix<T>& b) {
  if (a.cols() != b.rows()) {
    throw ShapeError(fmt::format("matmul: {}x{} times {}x{}", a.rows(), a.cols(), b.rows(), b.cols()));
  }
  BasicMatrix<T> c(a.rows(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t p = 0; p < a.cols(); ++p) {
      const T aip = a(i, p);
      for (std::size_t j = 0; j < b.cols(); ++j) c(i, j) += aip * b(p, j);
    }
  return c;
}

template <std::floating_point T>
class BasicTensor3 {
 public:
  using value_type = T;

  BasicTensor3() : BasicTensor3(Shape3{}) {}
  explicit BasicTensor3(Shape3 shape, T fill = T{0}) : shape_{shape} {
    if (shape.h == 0 || shape.w == 0 || shape.b == 0) {
      throw ShapeError("tensor dims must be positive, got " + to_string(shape));
    }
    data_.assign(shape.size(), fill);
  }
  BasicTensor3(std::size_t h, std::size_t w, std::size_t b, T fill = T{0})
      : BasicTensor3(Shape3{h, w, b}, fill) {}
  BasicTensor3(Shape3 shape, std::vector<T> data) : BasicTensor3(shape) {
    if (data.size() != shape.size()) {
      throw ShapeError(fmt::format("tensor {} needs {} values, got {}", to_string(shape), shape.size(), data.size()));
    }
    data_ = std::move(data);
  }

  [[nodiscard]] const Shape3& shape() const { return shape_; }
  [[nodiscard]] std::size_t rows() const { return shape_.h; }
  [[nodiscard]] std::size_t cols() const { return shape_.w; }
  [[nodiscard]] std::size_t bands() const { return shape_.b; }
  [[nodiscard]] std::size_t size() const { return data_.size(); }

  T& operator()(std::size_t i, std::size_t j, std::size_t k) { return data_[index(i, j, k)]; }
  const T& operator()(std::size_t i, std::size_t j, std::size_t k) const { return data_[index(i, j, k)]; }

  [[nodiscard]] std::size_t index(std::size_t i, std::size_t j, std::size_t k) const {
    return (k * shape_.h + i) * shape_.w + j;
  }

  [[nodiscard]] std::span<T> data() { return data_; }
  [[nodiscard]] std::span<const T> data() const { return data_; }

  [[nodiscard]] std::span<T> slice_span(std::size_t k) {
    return std::span<T>(data_).subspan(k * shape_.slice_size(), shape_.slice_size());
  }
  [[nodiscard]] std::span<const T> slice_span(std::size_t k) const {
    return std::span<const T>(data_).subspan(k * shape_.slice_size(), shape_.slice_size());
  }

  BasicTensor3& operator+=(const BasicTensor3& o) {
    check_same(o, "+=");
    for (std::size_t n = 0; n < data_.size(); ++n) data_[n] += o.data_[n];
    return *this;
  }
  BasicTensor3& operator-=(const BasicTensor3& o) {
    check_same(o, "-=");
    for (std::size_t n = 0; n < data_.size(); ++n) data_[n] -= o.data_[n];
    return *this;
  }
  BasicTensor3& operator*=(T s) {
    for (auto& v : data_) v *= s;
    return *this;
  }

  friend BasicTensor3 operator+(BasicTensor3 a, const BasicTensor3& b) { return a += b; }
  friend BasicTensor3 operator-(BasicTensor3 a, const BasicTensor3& b) { return a -= b; }
  friend BasicTensor3 operator*(T s, BasicTensor3 a) { return a *= s; }
  friend BasicTensor3 operator*(BasicTensor3 a, T s) { return a *= s; }

  friend bool operator==(const BasicTensor3&, const BasicTensor3&) = default;

 private:
  void check_same(const BasicTensor3& o, const char* what) const {
    if (o.shape_ != shape_) {
      throw ShapeError(fmt::format("{}: {} vs {}", what, to_string(shape_), to_string(o.shape_)));
    }
  }

  Shape3 shape_;
  std::vector<T> data_;
};

using Tensor3 = BasicTensor3<double>;
using Tensor3f = BasicTensor3<float>;
using Matrix = BasicMatrix<double>;
using Matrixf = BasicMatrix<float>;

template <std::floating_point T>
void require_same_shape(const BasicTensor3<T>& a, const BasicTensor3<T>& b, const char* what) {
  if (a.shape() != b.shape()) {
    throw ShapeError(fmt::format("{}: shape {} vs {}", what, to_string(a.shape()), to_string(b.shape())));
  }
}

// ---- slicing ---------------------------------------------------------------

// Copy of the k-th frontal slice as an h x w matrix.
template <std::floating_point T>
BasicMatrix<T> frontal_slice(const BasicTensor3<T>& x, std::size_t k) {
  if (k >= x.bands()) {
    throw RangeError(fmt::format("frontal slice {} out of range for {} bands", k, x.bands()));
  }
  auto s = x.slice_span(k);
  return BasicMatrix<T>(x.rows(), x.cols(), std::vector<T>(s.begin(), s.end()));
}

template <std::floating_point T>
void set_frontal_slice(BasicTensor3<T>& x, std::size_t k, const BasicMatrix<T>& m) {
  if (k >= x.bands()) {
    throw RangeError(fmt::format("frontal slice {} out of range for {} bands", k, x.bands()));
  }
  if (m.rows() != x.rows() || m.cols() != x.cols()) {
    throw ShapeError(fmt::format("slice {}x{} does not fit tensor {}", m.rows(), m.cols(), to_string(x.shape())));
  }
  std::ranges::copy(m.data(), x.slice_span(k).begin());
}

// ---- reductions ------------------------------------------------------------

template <std::floating_point T>
T inner_product(const BasicTensor3<T>& a, const BasicTensor3<T>& b) {
  require_same_shape(a, b, "inner_product");
  T acc{0};
  auto da = a.data();
  auto db = b.data();
  for (std::size_t n = 0; n < da.size(); ++n) acc += da[n] * db[n];
  return acc;
}

template <std::floating_point T>
T squared_norm(const BasicTensor3<T>& a) {
  T acc{0};
  for (T v : a.data()) acc += v * v;
  return acc;
}

template <std::floating_point T>
T frobenius_norm(const BasicTensor3<T>& a) {
  return std::sqrt(squared_norm(a));
}

template <std::floating_point T>
T l1_norm(const BasicTensor3<T>& a) {
  T acc{0};
  for (T v : a.data()) acc += std::abs(v);
  return acc;
}

template <std::floating_point T>
T max_abs_diff(const BasicTensor3<T>& a, const BasicTensor3<T>& b) {
  require_same_shape(a, b, "max_abs_diff");
  T m{0};
  auto da = a.data();
  auto db = b.data();
  for (std::size_t n = 0; n < da.size(); ++n) m = std::max(m, std::abs(da[n] - db[n]));
  return m;
}

template <std::floating_point T>
bool all_finite(const BasicTensor3<T>& a) {
  return std::ranges::all_of(a.data(), [](T v) { return std::isfinite(v); });
}

// ---- products --------------------------------------------------------------

namespace detail {

// C(k) = op(A(k)) * op(B(k)) for every frontal slice k, where op is either
// identity or transpose. The per-slice kernels only ever write output slice k.
template <bool TransA, bool TransB, std::floating_point T>
BasicTensor3<T> facewise(const BasicTensor3<T>& a, const BasicTensor3<T>& b) {
  if (a.bands() != b.bands()) {
    throw ShapeError(fmt::format("facewise product: band mismatch {} vs {}", to_string(a.shape()), to_string(b.shape())));
  }
  const std::size_t p = TransA ? a.cols() : a.rows();
  const std::size_t q = TransA ? a.rows() : a.cols();
  const std::size_t qb = TransB ? b.cols() : b.rows();
  const std::size_t r = TransB ? b.rows() : b.cols();
  if (q != qb) {
    throw ShapeError(fmt::format("facewise product: inner dims differ ({} vs {}) for {} and {}", q, qb,
                                 to_string(a.shape()), to_string(b.shape())));
  }
  BasicTensor3<T> c(p, r, a.bands());
  const std::size_t aw = a.cols();
  const std::size_t bw = b.cols();
  for (std::size_t k = 0; k < a.bands(); ++k) {
    auto as = a.slice_span(k);
    auto bs = b.slice_span(k);
    auto cs = c.slice_span(k);
    for (std::size_t i = 0; i < p; ++i) {
      for (std::size_t s = 0; s < q; ++s) {
        const T av = TransA ? as[s * aw + i] : as[i * aw + s];
        if constexpr (!TransB) {
          const T* brow = &bs[s * bw];
          T* crow = &cs[i * r];
          for (std::size_t j = 0; j < r; ++j) crow[j] += av * brow[j];
        } else {
          T* crow = &cs[i * r];
          for (std::size_t j = 0; j < r; ++j) crow[j] += av * bs[j * bw + s];
        }
      }
    }
  }
  return c;
}

}  // namespace detail

// Slice-by-slice matrix product: result(k) = A(k) * B(k).
template <std::floating_point T>
BasicTensor3<T> facewise_product(const BasicTensor3<T>& a, const BasicTensor3<T>& b) {
  return detail::facewise<false, false>(a, b);
}

// result(k) = A(k) * B(k)^T. Used for the left-factor gradient of a face-wise product.
template <std::floating_point T>
BasicTensor3<T> facewise_product_nt(const BasicTensor3<T>& a, const BasicTensor3<T>& b) {
  return detail::facewise<false, true>(a, b);
}

// result(k) = A(k)^T * B(k). Used for the right-factor gradient of a face-wise product.
template <std::floating_point T>
BasicTensor3<T> facewise_product_tn(const BasicTensor3<T>& a, const BasicTensor3<T>& b) {
  return detail::facewise<true, false>(a, b);
}

// Per-slice identity tensor n x n x b.
template <std::floating_point T = double>
BasicTensor3<T> facewise_identity(std::size_t n, std::size_t bands) {
  BasicTensor3<T> t(n, n, bands);
  for (std::size_t k = 0; k < bands; ++k)
    for (std::size_t i = 0; i < n; ++i) t(i, i, k) = T{1};
  return t;
}

// result(i, j, k') = sum_k H(k', k) * Z(i, j, k). Mixes bands; H is b' x b.
template <std::floating_point T>
BasicTensor3<T> mode3_product(const BasicTensor3<T>& z, const BasicMatrix<T>& hm) {
  if (hm.cols() != z.bands()) {
    throw ShapeError(fmt::format("mode-3 product: matrix {}x{} vs tensor {}", hm.rows(), hm.cols(), to_string(z.shape())));
  }
  const std::size_t n = z.shape().slice_size();
  BasicTensor3<T> out(z.rows(), z.cols(), hm.rows());
  for (std::size_t kp = 0; kp < hm.rows(); ++kp) {
    auto os = out.slice_span(kp);
    for (std::size_t k = 0; k < z.bands(); ++k) {
      const T coef = hm(kp, k);
      if (coef == T{0}) continue;
      auto zs = z.slice_span(k);
      for (std::size_t e = 0; e < n; ++e) os[e] += coef * zs[e];
    }
  }
  return out;
}

// Input-side adjoint of Z -> Z x3 H, i.e. G x3 H^T.
template <std::floating_point T>
BasicTensor3<T> mode3_product_adjoint(const BasicTensor3<T>& g, const BasicMatrix<T>& hm) {
  return mode3_product(g, hm.transposed());
}

// Matrix-side gradient of <G, Z x3 H> with respect to H:
// result(k', k) = sum_{i,j} G(i, j, k') * Z(i, j, k).
template <std::floating_point T>
BasicMatrix<T> mode3_matrix_gradient(const BasicTensor3<T>& g, const BasicTensor3<T>& z) {
  if (g.rows() != z.rows() || g.cols() != z.cols()) {
    throw ShapeError(fmt::format("mode-3 gradient: {} vs {}", to_string(g.shape()), to_string(z.shape())));
  }
  BasicMatrix<T> out(g.bands(), z.bands());
  const std::size_t n = z.shape().slice_size();
  for (std::size_t kp = 0; kp < g.bands(); ++kp) {
    auto gs = g.slice_span(kp);
    for (std::size_t k = 0; k < z.bands(); ++k) {
      auto zs = z.slice_span(k);
      T acc{0};
      for (std::size_t e = 0; e < n; ++e) acc += gs[e] * zs[e];
      out(kp, k) = acc;
    }
  }
  return out;
}

// ---- circular forward differences -----------------------------------------
//
// (diff_x X)(i,j,k) = X(i+1,j,k) - X(i,j,k) with i+1 wrapping to 0; diff_y and
// diff_z act on the second and third index the same way. Periodic boundaries
// make each operator square with an exact adjoint
// (diff^T G)(i) = G(i-1) - G(i).

enum class Axis { X, Y, Z };

template <std::floating_point T>
BasicTensor3<T> forward_difference(const BasicTensor3<T>& x, Axis axis) {
  const auto [h, w, b] = x.shape();
  BasicTensor3<T> out(x.shape());
  for (std::size_t k = 0; k < b; ++k)
    for (std::size_t i = 0; i < h; ++i)
      for (std::size_t j = 0; j < w; ++j) {
        const std::size_t ni = axis == Axis::X ? (i + 1) % h : i;
        const std::size_t nj = axis == Axis::Y ? (j + 1) % w : j;
        const std::size_t nk = axis == Axis::Z ? (k + 1) % b : k;
        out(i, j, k) = x(ni, nj, nk) - x(i, j, k);
      }
  return out;
}

template <std::floating_point T>
BasicTensor3<T> forward_difference_adjoint(const BasicTensor3<T>& g, Axis axis) {
  const auto [h, w, b] = g.shape();
  BasicTensor3<T> out(g.shape());
  for (std::size_t k = 0; k < b; ++k)
    for (std::size_t i = 0; i < h; ++i)
      for (std::size_t j = 0; j < w; ++j) {
        const std::size_t pi = axis == Axis::X ? (i + h - 1) % h : i;
        const std::size_t pj = axis == Axis::Y ? (j + w - 1) % w : j;
        const std::size_t pk = axis == Axis::Z ? (k + b - 1) % b : k;
        out(i, j, k) = g(pi, pj, pk) - g(i, j, k);
      }
  return out;
}

template <std::floating_point T>
BasicTensor3<T> diff_x(const BasicTensor3<T>& x) { return forward_difference(x, Axis::X); }
template <std::floating_point T>
BasicTensor3<T> diff_y(const BasicTensor3<T>& x) { return forward_difference(x, Axis::Y); }
template <std::floating_point T>
BasicTensor3<T> diff_z(const BasicTensor3<T>& x) { return forward_difference(x, Axis::Z); }
template <std::floating_point T>
BasicTensor3<T> diff_x_adjoint(const BasicTensor3<T>& g) { return forward_difference_adjoint(g, Axis::X); }
template <std::floating_point T>
BasicTensor3<T> diff_y_adjoint(const BasicTensor3<T>& g) { return forward_difference_adjoint(g, Axis::Y); }
template <std::floating_point T>
BasicTensor3<T> diff_z_adjoint(const BasicTensor3<T>& g) { return forward_difference_adjoint(g, Axis::Z); }

// The four difference operators of the hybrid spatial-spectral TV penalty:
// dx X, dy X, dx(dz X), dy(dz X).
enum class TvTerm { Dx, Dy, DxDz, DyDz };
inline constexpr std::array<TvTerm, 4> kTvTerms{TvTerm::Dx, TvTerm::Dy, TvTerm::DxDz, TvTerm::DyDz};

template <std::floating_point T>
BasicTensor3<T> tv_operator(const BasicTensor3<T>& x, TvTerm term) {
  switch (term) {
    case TvTerm::Dx: return diff_x(x);
    case TvTerm::Dy: return diff_y(x);
    case TvTerm::DxDz: return diff_x(diff_z(x));
    case TvTerm::DyDz: return diff_y(diff_z(x));
  }
  throw ArgumentError("unknown TV term");
}

template <std::floating_point T>
BasicTensor3<T> tv_operator_adjoint(const BasicTensor3<T>& g, TvTerm term) {
  switch (term) {
    case TvTerm::Dx: return diff_x_adjoint(g);
    case TvTerm::Dy: return diff_y_adjoint(g);
    case TvTerm::DxDz: return diff_z_adjoint(diff_x_adjoint(g));
    case TvTerm::DyDz: return diff_z_adjoint(diff_y_adjoint(g));
  }
  throw ArgumentError("unknown TV term");
}

// ---- proximal maps ---------------------------------------------------------

// Elementwise sign(x) * max(|x| - v, 0).
template <std::floating_point T>
T soft_threshold(T x, T v) {
  const T mag = std::abs(x) - v;
  if (mag <= T{0}) return T{0};
  return x < T{0} ? -mag : mag;
}

template <std::floating_point T>
BasicTensor3<T> soft_threshold(const BasicTensor3<T>& x, T v) {
  if (!(v >= T{0})) throw ArgumentError(fmt::format("soft_threshold: threshold must be >= 0, got {}", v));
  BasicTensor3<T> out(x.shape());
  auto in = x.data();
  auto o = out.data();
  for (std::size_t n = 0; n < in.size(); ++n) o[n] = soft_threshold(in[n], v);
  return out;
}

}  // namespace h2tf

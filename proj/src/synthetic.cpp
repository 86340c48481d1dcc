#include "h2tf/synthetic.hpp"

#include <algorithm>
#include <random>

namespace h2tf {

Tensor3 t_product(const Tensor3& a, const Tensor3& b) {
  if (a.bands() != b.bands() || a.cols() != b.rows()) {
    throw ShapeError(fmt::format("t_product: {} and {}", to_string(a.shape()), to_string(b.shape())));
  }
  const std::size_t nb = a.bands();
  Tensor3 out(a.rows(), b.cols(), nb);
  for (std::size_t k = 0; k < nb; ++k) {
    for (std::size_t j = 0; j < nb; ++j) {
      const std::size_t kb = (k + nb - j) % nb;
      for (std::size_t r = 0; r < a.rows(); ++r)
        for (std::size_t s = 0; s < a.cols(); ++s) {
          const double av = a(r, s, j);
          for (std::size_t c = 0; c < b.cols(); ++c) out(r, c, k) += av * b(s, c, kb);
        }
    }
  }
  return out;
}

Tensor3 random_low_tubal_rank(const Shape3& shape, std::size_t rank, std::uint64_t seed) {
  if (rank == 0) throw ArgumentError("random_low_tubal_rank: rank must be >= 1");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  Tensor3 a(shape.h, rank, shape.b);
  Tensor3 b(rank, shape.w, shape.b);
  for (auto& v : a.data()) v = unit(rng);
  for (auto& v : b.data()) v = unit(rng);
  Tensor3 x = t_product(a, b);
  const double peak = *std::ranges::max_element(x.data());
  if (peak > 0.0) x *= 1.0 / peak;
  return x;
}

}  // namespace h2tf

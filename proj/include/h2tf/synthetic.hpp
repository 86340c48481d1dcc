#pragma once

#include <cstdint>

#include "h2tf/tensor.hpp"

namespace h2tf {

// t-product A * B: X(:,:,k) = sum_j A(:,:,j) B(:,:,(k - j) mod b). The
// result has tubal rank at most A.cols().
Tensor3 t_product(const Tensor3& a, const Tensor3& b);

// Random h x w x b cube with tubal rank <= rank, built as the t-product of
// factors with i.i.d. U[0, 1) entries and divided by its maximum. Entries are
// nonnegative, so the rescale is a pure scaling: the result lies in [0, 1],
// attains 1, and keeps the tubal-rank bound.
Tensor3 random_low_tubal_rank(const Shape3& shape, std::size_t rank, std::uint64_t seed);

}  // namespace h2tf

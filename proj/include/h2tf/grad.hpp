#pragma once

// Reverse-mode gradients of the H2TF forward map and of the X-subproblem
// objective, plus a central finite-difference oracle for small models.

#include <array>
#include <cstdint>
#include <functional>
#include <vector>

#include "h2tf/model.hpp"
#include "h2tf/tensor.hpp"

namespace h2tf {

// Same layout as H2TFParams: one tensor per factor, one matrix per transform.
struct ParamGrads {
  std::vector<Tensor3> factors;
  std::vector<Matrix> transforms;

  static ParamGrads zeros_like(const H2TFParams& params);

  [[nodiscard]] bool congruent_with(const H2TFParams& params) const;
  [[nodiscard]] bool all_finite() const;
  [[nodiscard]] double max_abs() const;
};

// Forward intermediates of one evaluation. Pre-activation values are kept
// because the leaky-rectifier derivative depends on their sign.
class Tape {
 public:
  // (l - 2) + (m - 1) for l >= 3, m >= 1; zero-activation stacks add nothing.
  [[nodiscard]] std::size_t activation_records() const { return hmf_pre_.size() + hnt_pre_.size(); }
  [[nodiscard]] const Shape3& shape() const { return shape_; }
  [[nodiscard]] std::uint64_t fingerprint() const { return fingerprint_; }

 private:
  friend struct TapeAccess;
  std::vector<Tensor3> hmf_pre_;  // W_2.W_1, W_3.s(..), ..., W_{l-1}.s(..)
  Tensor3 z_;                     // factorisation output, input of H_1
  std::vector<Tensor3> hnt_pre_;  // Z x3 H_1, ..., s(..) x3 H_{m-1}
  Shape3 shape_;
  std::uint64_t fingerprint_ = 0;
};

struct TapedForward {
  Tensor3 x;
  Tape tape;
};

// Hash of every parameter value and shape; a tape is only valid for the
// parameters it was recorded from.
std::uint64_t params_fingerprint(const H2TFParams& params);

TapedForward forward_with_tape(const H2TFParams& params);

// Gradient of <gx, X(theta)> with respect to every parameter. The tape may be
// replayed any number of times; a tape recorded from different parameter
// values raises StateError.
ParamGrads backward(const Tape& tape, const H2TFParams& params, const Tensor3& gx);

struct SubproblemTargets {
  const Tensor3& y;
  const Tensor3& s;
  // D_i = V_i - Lambda_i / mu, ordered as kTvTerms.
  const std::array<Tensor3, 4>& d;
  double mu;
};

struct ObjectiveGradient {
  double loss;
  Tensor3 gx;
};

// ||Y - X - S||^2 + mu/2 * sum_i ||op_i(X) - D_i||^2 and its gradient in X.
ObjectiveGradient objective_x_gradient(const Tensor3& x, const SubproblemTargets& targets);

struct ObjectiveResult {
  double loss;
  ParamGrads grads;
  Tensor3 x;  // forward value at the evaluated parameters
};

ObjectiveResult objective_and_grad(const H2TFParams& params, const SubproblemTargets& targets);

using ScalarLoss = std::function<double(const H2TFParams&)>;

// Central differences, one parameter entry at a time. Meant for tiny models.
ParamGrads finite_diff_grads(const H2TFParams& params, const ScalarLoss& loss, double step);

}  // namespace h2tf

#pragma once

// The H2TF representation
//
//   X = phi( W_l . s(W_{l-1} . ... W_3 . s(W_2 . W_1)) )
//   phi(Z) = s(... s(Z x3 H_1) x3 ... x3 H_{m-1}) x3 H_m
//
// where "." is the face-wise product, x3 the mode-3 product and s a scalar
// nonlinearity applied elementwise.
//
// Activation placement (fixed by unit tests): in the factorization every
// face-wise product except the outermost one (by W_l) is wrapped in s, so
// l = 2 gives the plain product W_2 . W_1 and l >= 3 has l - 2 activations.
// In the transform every mode-3 product except the last is followed by s,
// giving m - 1 activations; m = 0 means no transform at all.

#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "h2tf/tensor.hpp"

namespace h2tf {

enum class ActivationKind { LeakyRelu, Identity };

struct Activation {
  ActivationKind kind = ActivationKind::LeakyRelu;
  double slope = 0.1;

  [[nodiscard]] double operator()(double x) const {
    if (kind == ActivationKind::Identity || x >= 0.0) return x;
    return slope * x;
  }
  // Derivative at 0 is taken as 1.
  [[nodiscard]] double derivative(double x) const {
    if (kind == ActivationKind::Identity || x >= 0.0) return 1.0;
    return slope;
  }

  friend bool operator==(const Activation&, const Activation&) = default;
};

std::string to_string(ActivationKind kind);
ActivationKind parse_activation_kind(std::string_view name);

Tensor3 apply_activation(const Tensor3& x, const Activation& act);

struct ModelConfig {
  std::size_t layers = 5;      // l, number of factor tensors
  std::size_t transforms = 2;  // m, number of b x b transform matrices
  // r_0 .. r_l; r_0 must equal the image width and r_l its height.
  std::vector<std::size_t> ranks;
  Activation activation;
  // Factor W_d entries are drawn from N(0, init_scale^2 / r_{d-1}).
  double init_scale = 1.0;
  // Transforms start at identity plus N(0, transform_noise^2) entries.
  double transform_noise = 0.01;
  std::uint64_t seed = 0;

  // Checks internal consistency and agreement with the data shape.
  void validate(const Shape3& shape) const;
};

// Inner ranks r_1..r_{l-1} following the doubling pattern base, 2*base, ...
std::vector<std::size_t> doubling_ranks(std::size_t layers, std::size_t base);

// l = 5, m = 2, ranks (w, 1, 2, 4, 8, h).
ModelConfig default_model_config(const Shape3& shape);

// Same as default_model_config but with caller-chosen depths; inner ranks
// follow doubling_ranks(layers, base).
ModelConfig make_model_config(const Shape3& shape, std::size_t layers, std::size_t transforms,
                              std::size_t base_rank = 1);

struct H2TFParams {
  std::vector<Tensor3> factors;            // W_1..W_l, W_d is r_d x r_{d-1} x b
  std::vector<Matrix> transforms;          // H_1..H_m, each b x b
  std::vector<bool> transform_trainable;   // one flag per transform
  Activation activation;
  Shape3 shape;

  [[nodiscard]] std::size_t layers() const { return factors.size(); }
  [[nodiscard]] std::size_t transform_count() const { return transforms.size(); }
  [[nodiscard]] std::size_t parameter_count() const;

  // Throws ShapeError when the factor chain or transforms do not fit `shape`.
  void validate() const;

  friend bool operator==(const H2TFParams&, const H2TFParams&) = default;
};

H2TFParams init_params(const ModelConfig& cfg, const Shape3& shape);

Tensor3 hmf_forward(const H2TFParams& params);
Tensor3 hnt_apply(const Tensor3& z, const H2TFParams& params);
Tensor3 forward(const H2TFParams& params);

enum class DegenerateKind {
  Hlrtf,     // l = 2: one face-wise product followed by the learnable transform
  PlainHmf,  // m = 0: nonlinear factorisation of each frontal slice, no transform
  TubalMf,   // l = 2, m = 1, H_1 fixed to the (real) inverse DFT
};

std::string to_string(DegenerateKind kind);

// Builds parameters realising one of the classical special cases. For TubalMf
// the factors are drawn symmetric in frequency (slice k equals slice (b-k) mod b),
// which makes the complex inverse DFT of W_2 . W_1 real; the real part of the
// inverse DFT matrix is then an exact stand-in and the tubal rank of the
// output is bounded by min(r_0, r_1, r_2). The transform is marked
// non-trainable.
H2TFParams make_degenerate(DegenerateKind kind, const ModelConfig& cfg, const Shape3& shape);

}  // namespace h2tf

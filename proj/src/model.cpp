#include "h2tf/model.hpp"

#include <cmath>
#include <random>

#include "h2tf/spectral.hpp"

namespace h2tf {

std::string to_string(ActivationKind kind) {
  switch (kind) {
    case ActivationKind::LeakyRelu: return "leaky_relu";
    case ActivationKind::Identity: return "identity";
  }
  return "unknown";
}

ActivationKind parse_activation_kind(std::string_view name) {
  if (name == "leaky_relu") return ActivationKind::LeakyRelu;
  if (name == "identity") return ActivationKind::Identity;
  throw ConfigError(fmt::format("unknown activation '{}'", name));
}

std::string to_string(DegenerateKind kind) {
  switch (kind) {
    case DegenerateKind::Hlrtf: return "hlrtf";
    case DegenerateKind::PlainHmf: return "plain_hmf";
    case DegenerateKind::TubalMf: return "tubal_mf";
  }
  return "unknown";
}

Tensor3 apply_activation(const Tensor3& x, const Activation& act) {
  Tensor3 out(x.shape());
  auto in = x.data();
  auto o = out.data();
  for (std::size_t n = 0; n < in.size(); ++n) o[n] = act(in[n]);
  return out;
}

void ModelConfig::validate(const Shape3& shape) const {
  if (layers < 2) throw ConfigError(fmt::format("need at least 2 factor layers, got {}", layers));
  if (ranks.size() != layers + 1) {
    throw ConfigError(fmt::format("expected {} ranks (r_0..r_l), got {}", layers + 1, ranks.size()));
  }
  for (std::size_t d = 0; d < ranks.size(); ++d) {
    if (ranks[d] == 0) throw ConfigError(fmt::format("rank r_{} must be positive", d));
  }
  if (ranks.front() != shape.w) {
    throw ConfigError(fmt::format("r_0 = {} must equal the width {}", ranks.front(), shape.w));
  }
  if (ranks.back() != shape.h) {
    throw ConfigError(fmt::format("r_l = {} must equal the height {}", ranks.back(), shape.h));
  }
  if (activation.kind == ActivationKind::LeakyRelu && !std::isfinite(activation.slope)) {
    throw ConfigError("activation slope must be finite");
  }
  if (!(init_scale > 0.0) || !(transform_noise >= 0.0)) {
    throw ConfigError("init_scale must be > 0 and transform_noise >= 0");
  }
}

std::vector<std::size_t> doubling_ranks(std::size_t layers, std::size_t base) {
  std::vector<std::size_t> inner;
  std::size_t r = base;
  for (std::size_t d = 1; d < layers; ++d, r *= 2) inner.push_back(r);
  return inner;
}

ModelConfig make_model_config(const Shape3& shape, std::size_t layers, std::size_t transforms,
                              std::size_t base_rank) {
  ModelConfig cfg;
  cfg.layers = layers;
  cfg.transforms = transforms;
  cfg.ranks.push_back(shape.w);
  for (auto r : doubling_ranks(layers, base_rank)) cfg.ranks.push_back(r);
  cfg.ranks.push_back(shape.h);
  return cfg;
}

ModelConfig default_model_config(const Shape3& shape) { return make_model_config(shape, 5, 2); }

std::size_t H2TFParams::parameter_count() const {
  std::size_t n = 0;
  for (const auto& f : factors) n += f.size();
  for (const auto& t : transforms) n += t.size();
  return n;
}

void H2TFParams::validate() const {
  if (factors.size() < 2) throw ShapeError(fmt::format("need at least 2 factors, got {}", factors.size()));
  if (transform_trainable.size() != transforms.size()) {
    throw ShapeError("transform_trainable must have one flag per transform");
  }
  for (std::size_t d = 0; d < factors.size(); ++d) {
    if (factors[d].bands() != shape.b) {
      throw ShapeError(fmt::format("factor W_{} has {} bands, expected {}", d + 1, factors[d].bands(), shape.b));
    }
    if (d > 0 && factors[d].cols() != factors[d - 1].rows()) {
      throw ShapeError(fmt::format("factor chain broken: W_{} is {}, W_{} is {}", d + 1,
                                   h2tf::to_string(factors[d].shape()), d, h2tf::to_string(factors[d - 1].shape())));
    }
  }
  if (factors.front().cols() != shape.w) {
    throw ShapeError(fmt::format("W_1 has {} columns, expected width {}", factors.front().cols(), shape.w));
  }
  if (factors.back().rows() != shape.h) {
    throw ShapeError(fmt::format("W_l has {} rows, expected height {}", factors.back().rows(), shape.h));
  }
  for (std::size_t p = 0; p < transforms.size(); ++p) {
    if (transforms[p].rows() != shape.b || transforms[p].cols() != shape.b) {
      throw ShapeError(fmt::format("transform H_{} is {}x{}, expected {}x{}", p + 1, transforms[p].rows(),
                                   transforms[p].cols(), shape.b, shape.b));
    }
  }
}

namespace {

H2TFParams allocate(const ModelConfig& cfg, const Shape3& shape) {
  cfg.validate(shape);
  H2TFParams p;
  p.shape = shape;
  p.activation = cfg.activation;
  for (std::size_t d = 1; d <= cfg.layers; ++d) p.factors.emplace_back(cfg.ranks[d], cfg.ranks[d - 1], shape.b);
  for (std::size_t t = 0; t < cfg.transforms; ++t) p.transforms.push_back(Matrix::identity(shape.b));
  p.transform_trainable.assign(cfg.transforms, true);
  return p;
}

void perturb_transforms(H2TFParams& p, const ModelConfig& cfg, std::mt19937_64& rng) {
  std::normal_distribution<double> noise(0.0, cfg.transform_noise);
  for (auto& hm : p.transforms)
    for (auto& v : hm.data()) v += cfg.transform_noise > 0.0 ? noise(rng) : 0.0;
}

}  // namespace

H2TFParams init_params(const ModelConfig& cfg, const Shape3& shape) {
  H2TFParams p = allocate(cfg, shape);
  std::mt19937_64 rng(cfg.seed);
  for (std::size_t d = 0; d < p.factors.size(); ++d) {
    std::normal_distribution<double> gauss(0.0, cfg.init_scale / std::sqrt(static_cast<double>(cfg.ranks[d])));
    for (auto& v : p.factors[d].data()) v = gauss(rng);
  }
  perturb_transforms(p, cfg, rng);
  return p;
}

Tensor3 hmf_forward(const H2TFParams& params) {
  params.validate();
  const auto& w = params.factors;
  Tensor3 acc = facewise_product(w[1], w[0]);
  for (std::size_t d = 2; d < w.size(); ++d) {
    acc = facewise_product(w[d], apply_activation(acc, params.activation));
  }
  return acc;
}

Tensor3 hnt_apply(const Tensor3& z, const H2TFParams& params) {
  if (z.shape() != params.shape) {
    throw ShapeError(fmt::format("hnt_apply: input {} vs model {}", to_string(z.shape()), to_string(params.shape)));
  }
  for (std::size_t p = 0; p < params.transforms.size(); ++p) {
    const auto& hm = params.transforms[p];
    if (hm.rows() != params.shape.b || hm.cols() != params.shape.b) {
      throw ShapeError(fmt::format("transform H_{} is {}x{}, expected {}x{}", p + 1, hm.rows(), hm.cols(),
                                   params.shape.b, params.shape.b));
    }
  }
  if (params.transforms.empty()) return z;
  Tensor3 acc = mode3_product(z, params.transforms[0]);
  for (std::size_t p = 1; p < params.transforms.size(); ++p) {
    acc = mode3_product(apply_activation(acc, params.activation), params.transforms[p]);
  }
  return acc;
}

Tensor3 forward(const H2TFParams& params) { return hnt_apply(hmf_forward(params), params); }

H2TFParams make_degenerate(DegenerateKind kind, const ModelConfig& cfg, const Shape3& shape) {
  switch (kind) {
    case DegenerateKind::Hlrtf:
      if (cfg.layers != 2) throw ConfigError(fmt::format("hlrtf needs l = 2, got l = {}", cfg.layers));
      return init_params(cfg, shape);
    case DegenerateKind::PlainHmf:
      if (cfg.transforms != 0) throw ConfigError(fmt::format("plain_hmf needs m = 0, got m = {}", cfg.transforms));
      return init_params(cfg, shape);
    case DegenerateKind::TubalMf: break;
  }
  if (cfg.layers != 2 || cfg.transforms != 1) {
    throw ConfigError(fmt::format("tubal_mf needs l = 2 and m = 1, got l = {} and m = {}", cfg.layers, cfg.transforms));
  }
  H2TFParams p = allocate(cfg, shape);
  std::mt19937_64 rng(cfg.seed);
  const std::size_t b = shape.b;
  for (std::size_t d = 0; d < p.factors.size(); ++d) {
    std::normal_distribution<double> gauss(0.0, cfg.init_scale / std::sqrt(static_cast<double>(cfg.ranks[d])));
    auto& f = p.factors[d];
    for (std::size_t k = 0; k <= b / 2; ++k) {
      const std::size_t mirror = (b - k) % b;
      for (auto& v : f.slice_span(k)) v = gauss(rng);
      if (mirror != k) std::ranges::copy(f.slice_span(k), f.slice_span(mirror).begin());
    }
  }
  p.transforms[0] = inverse_dft_matrix(b).re;
  p.transform_trainable[0] = false;
  return p;
}

}  // namespace h2tf

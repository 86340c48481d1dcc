#include "h2tf/grad.hpp"

#include <bit>
#include <cmath>

namespace h2tf {

struct TapeAccess {
  static std::vector<Tensor3>& hmf_pre(Tape& t) { return t.hmf_pre_; }
  static std::vector<Tensor3>& hnt_pre(Tape& t) { return t.hnt_pre_; }
  static Tensor3& z(Tape& t) { return t.z_; }
  static Shape3& shape(Tape& t) { return t.shape_; }
  static std::uint64_t& fingerprint(Tape& t) { return t.fingerprint_; }
  static const std::vector<Tensor3>& hmf_pre(const Tape& t) { return t.hmf_pre_; }
  static const std::vector<Tensor3>& hnt_pre(const Tape& t) { return t.hnt_pre_; }
  static const Tensor3& z(const Tape& t) { return t.z_; }
};

ParamGrads ParamGrads::zeros_like(const H2TFParams& params) {
  ParamGrads g;
  for (const auto& f : params.factors) g.factors.emplace_back(f.shape());
  for (const auto& t : params.transforms) g.transforms.emplace_back(t.rows(), t.cols());
  return g;
}

bool ParamGrads::congruent_with(const H2TFParams& params) const {
  if (factors.size() != params.factors.size() || transforms.size() != params.transforms.size()) return false;
  for (std::size_t d = 0; d < factors.size(); ++d)
    if (factors[d].shape() != params.factors[d].shape()) return false;
  for (std::size_t p = 0; p < transforms.size(); ++p)
    if (transforms[p].rows() != params.transforms[p].rows() || transforms[p].cols() != params.transforms[p].cols())
      return false;
  return true;
}

bool ParamGrads::all_finite() const {
  for (const auto& f : factors)
    if (!h2tf::all_finite(f)) return false;
  for (const auto& t : transforms)
    for (double v : t.data())
      if (!std::isfinite(v)) return false;
  return true;
}

double ParamGrads::max_abs() const {
  double m = 0.0;
  for (const auto& f : factors)
    for (double v : f.data()) m = std::max(m, std::abs(v));
  for (const auto& t : transforms)
    for (double v : t.data()) m = std::max(m, std::abs(v));
  return m;
}

namespace {

constexpr std::uint64_t kFnvOffset = 1469598103934665603ULL;
constexpr std::uint64_t kFnvPrime = 1099511628211ULL;

void mix(std::uint64_t& h, std::uint64_t v) {
  for (int byte = 0; byte < 8; ++byte) {
    h ^= (v >> (8 * byte)) & 0xffU;
    h *= kFnvPrime;
  }
}

Tensor3 activation_mask_product(const Tensor3& g, const Tensor3& pre, const Activation& act) {
  Tensor3 out(g.shape());
  auto gd = g.data();
  auto pd = pre.data();
  auto od = out.data();
  for (std::size_t n = 0; n < gd.size(); ++n) od[n] = gd[n] * act.derivative(pd[n]);
  return out;
}

}  // namespace

std::uint64_t params_fingerprint(const H2TFParams& params) {
  std::uint64_t h = kFnvOffset;
  for (const auto& f : params.factors) {
    mix(h, f.rows());
    mix(h, f.cols());
    mix(h, f.bands());
    for (double v : f.data()) mix(h, std::bit_cast<std::uint64_t>(v));
  }
  for (const auto& t : params.transforms) {
    mix(h, t.rows());
    for (double v : t.data()) mix(h, std::bit_cast<std::uint64_t>(v));
  }
  mix(h, static_cast<std::uint64_t>(params.activation.kind));
  mix(h, std::bit_cast<std::uint64_t>(params.activation.slope));
  return h;
}

TapedForward forward_with_tape(const H2TFParams& params) {
  params.validate();
  Tape tape;
  auto& hmf_pre = TapeAccess::hmf_pre(tape);
  auto& hnt_pre = TapeAccess::hnt_pre(tape);
  const auto& w = params.factors;
  const auto& act = params.activation;

  // Same operation order as hmf_forward / hnt_apply so results match bitwise.
  Tensor3 acc = facewise_product(w[1], w[0]);
  for (std::size_t d = 2; d < w.size(); ++d) {
    Tensor3 next = facewise_product(w[d], apply_activation(acc, act));
    hmf_pre.push_back(std::move(acc));
    acc = std::move(next);
  }
  TapeAccess::z(tape) = acc;

  if (!params.transforms.empty()) {
    acc = mode3_product(acc, params.transforms[0]);
    for (std::size_t p = 1; p < params.transforms.size(); ++p) {
      Tensor3 next = mode3_product(apply_activation(acc, act), params.transforms[p]);
      hnt_pre.push_back(std::move(acc));
      acc = std::move(next);
    }
  }
  TapeAccess::shape(tape) = params.shape;
  TapeAccess::fingerprint(tape) = params_fingerprint(params);
  return {std::move(acc), std::move(tape)};
}

ParamGrads backward(const Tape& tape, const H2TFParams& params, const Tensor3& gx) {
  if (tape.shape() != params.shape || tape.fingerprint() != params_fingerprint(params)) {
    throw StateError("backward: tape was recorded for different parameters");
  }
  if (gx.shape() != params.shape) {
    throw ShapeError(fmt::format("backward: output gradient {} vs model {}", to_string(gx.shape()),
                                 to_string(params.shape)));
  }
  const auto& act = params.activation;
  const auto& hmf_pre = TapeAccess::hmf_pre(tape);
  const auto& hnt_pre = TapeAccess::hnt_pre(tape);
  ParamGrads grads;
  grads.factors.resize(params.factors.size());
  grads.transforms.resize(params.transforms.size());

  // Transform stack, last product first. Input of H_p is Z for p = 1 and
  // s(pre_{p-1}) otherwise.
  Tensor3 g = gx;
  for (std::size_t p = params.transforms.size(); p-- > 0;) {
    const Tensor3 input = p == 0 ? TapeAccess::z(tape) : apply_activation(hnt_pre[p - 1], act);
    grads.transforms[p] = mode3_matrix_gradient(g, input);
    g = mode3_product_adjoint(g, params.transforms[p]);
    if (p > 0) g = activation_mask_product(g, hnt_pre[p - 1], act);
  }

  // Factor stack: product d (0-based, d >= 1) multiplies W_d by W_0 when
  // d == 1 and by s(hmf_pre[d - 2]) otherwise.
  const auto& w = params.factors;
  for (std::size_t d = w.size() - 1; d >= 1; --d) {
    const Tensor3 input = d == 1 ? w[0] : apply_activation(hmf_pre[d - 2], act);
    grads.factors[d] = facewise_product_nt(g, input);
    g = facewise_product_tn(w[d], g);
    if (d == 1) {
      grads.factors[0] = std::move(g);
      break;
    }
    g = activation_mask_product(g, hmf_pre[d - 2], act);
  }
  return grads;
}

ObjectiveGradient objective_x_gradient(const Tensor3& x, const SubproblemTargets& t) {
  require_same_shape(x, t.y, "objective: X vs Y");
  require_same_shape(x, t.s, "objective: X vs S");
  for (const auto& d : t.d) require_same_shape(x, d, "objective: X vs D");

  Tensor3 fit = t.y - x - t.s;
  double loss = squared_norm(fit);
  Tensor3 gx = -2.0 * std::move(fit);
  for (std::size_t i = 0; i < kTvTerms.size(); ++i) {
    Tensor3 r = tv_operator(x, kTvTerms[i]) - t.d[i];
    loss += 0.5 * t.mu * squared_norm(r);
    if (t.mu != 0.0) gx += t.mu * tv_operator_adjoint(r, kTvTerms[i]);
  }
  return {loss, std::move(gx)};
}

ObjectiveResult objective_and_grad(const H2TFParams& params, const SubproblemTargets& targets) {
  TapedForward fw = forward_with_tape(params);
  ObjectiveGradient og = objective_x_gradient(fw.x, targets);
  ParamGrads grads = backward(fw.tape, params, og.gx);
  return {og.loss, std::move(grads), std::move(fw.x)};
}

ParamGrads finite_diff_grads(const H2TFParams& params, const ScalarLoss& loss, double step) {
  if (!(step > 0.0)) throw ArgumentError(fmt::format("finite_diff_grads: step must be > 0, got {}", step));
  ParamGrads g = ParamGrads::zeros_like(params);
  H2TFParams probe = params;
  auto central = [&](double& slot) {
    const double saved = slot;
    slot = saved + step;
    const double up = loss(probe);
    slot = saved - step;
    const double down = loss(probe);
    slot = saved;
    return (up - down) / (2.0 * step);
  };
  for (std::size_t d = 0; d < probe.factors.size(); ++d) {
    auto values = probe.factors[d].data();
    auto out = g.factors[d].data();
    for (std::size_t n = 0; n < values.size(); ++n) out[n] = central(values[n]);
  }
  for (std::size_t p = 0; p < probe.transforms.size(); ++p) {
    auto values = probe.transforms[p].data();
    auto out = g.transforms[p].data();
    for (std::size_t n = 0; n < values.size(); ++n) out[n] = central(values[n]);
  }
  return g;
}

}  // namespace h2tf

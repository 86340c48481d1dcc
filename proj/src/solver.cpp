#include "h2tf/solver.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>

#include "h2tf/metrics.hpp"

namespace h2tf {

void SolverConfig::validate() const {
  if (!(alpha1 >= 0.0) || !(alpha2 >= 0.0) || !(alpha3 >= 0.0)) {
    throw ConfigError(fmt::format("trade-off weights must be >= 0 (alpha1={}, alpha2={}, alpha3={})", alpha1, alpha2,
                                  alpha3));
  }
  if (!(mu > 0.0) || !std::isfinite(mu)) throw ConfigError(fmt::format("mu must be > 0, got {}", mu));
  if (!(adam.learning_rate > 0.0)) throw ConfigError("Adam learning rate must be > 0");
  if (!(adam.beta1 >= 0.0 && adam.beta1 < 1.0) || !(adam.beta2 >= 0.0 && adam.beta2 < 1.0)) {
    throw ConfigError("Adam betas must lie in [0, 1)");
  }
  if (!(adam.epsilon > 0.0)) throw ConfigError("Adam epsilon must be > 0");
  if (max_iters == 0) throw ConfigError("max_iters must be positive");
  if (inner_adam_steps == 0) throw ConfigError("inner_adam_steps must be >= 1");
  if (!(tol >= 0.0)) throw ConfigError("tol must be >= 0");
}

std::string_view to_string(SolverPhase phase) {
  switch (phase) {
    case SolverPhase::UpdateV: return "V";
    case SolverPhase::UpdateS: return "S";
    case SolverPhase::UpdateX: return "X";
    case SolverPhase::UpdateMultipliers: return "Lambda";
  }
  return "?";
}

AdamState AdamState::zeros_like(const H2TFParams& params) {
  return {0, ParamGrads::zeros_like(params), ParamGrads::zeros_like(params)};
}

namespace {

void adam_update(std::span<double> param, std::span<double> m, std::span<double> v, std::span<const double> g,
                 const AdamConfig& cfg, double correction1, double correction2) {
  for (std::size_t n = 0; n < param.size(); ++n) {
    m[n] = cfg.beta1 * m[n] + (1.0 - cfg.beta1) * g[n];
    v[n] = cfg.beta2 * v[n] + (1.0 - cfg.beta2) * g[n] * g[n];
    const double mhat = m[n] / correction1;
    const double vhat = v[n] / correction2;
    param[n] -= cfg.learning_rate * mhat / (std::sqrt(vhat) + cfg.epsilon);
  }
}

}  // namespace

void adam_step(H2TFParams& params, AdamState& state, const ParamGrads& grads, const AdamConfig& cfg,
               std::size_t iteration) {
  if (!grads.congruent_with(params) || !state.m.congruent_with(params) || !state.v.congruent_with(params)) {
    throw ShapeError("adam_step: gradients or moments do not match the parameters");
  }
  if (!grads.all_finite()) {
    throw NumericError(fmt::format("non-finite gradient at iteration {}", iteration));
  }
  ++state.step;
  const double c1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.step));
  const double c2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.step));
  for (std::size_t d = 0; d < params.factors.size(); ++d) {
    adam_update(params.factors[d].data(), state.m.factors[d].data(), state.v.factors[d].data(),
                grads.factors[d].data(), cfg, c1, c2);
  }
  for (std::size_t p = 0; p < params.transforms.size(); ++p) {
    if (!params.transform_trainable[p]) continue;
    adam_update(params.transforms[p].data(), state.m.transforms[p].data(), state.v.transforms[p].data(),
                grads.transforms[p].data(), cfg, c1, c2);
  }
}

Tensor3 update_v(const Tensor3& x, const Tensor3& lambda, double mu, double weight, TvTerm term) {
  require_same_shape(x, lambda, "update_v");
  Tensor3 arg = tv_operator(x, term);
  auto a = arg.data();
  auto l = lambda.data();
  for (std::size_t n = 0; n < a.size(); ++n) a[n] += l[n] / mu;
  return soft_threshold(arg, weight / mu);
}

Tensor3 update_s(const Tensor3& y, const Tensor3& x, double alpha1) {
  if (!(alpha1 >= 0.0)) throw ArgumentError(fmt::format("update_s: alpha1 must be >= 0, got {}", alpha1));
  return soft_threshold(y - x, alpha1 / 2.0);
}

void update_multipliers(std::array<Tensor3, 4>& lambda, const Tensor3& x, const std::array<Tensor3, 4>& v,
                        double mu) {
  for (std::size_t i = 0; i < kTvTerms.size(); ++i) {
    Tensor3 r = tv_operator(x, kTvTerms[i]) - v[i];
    require_same_shape(lambda[i], r, "update_multipliers");
    auto ld = lambda[i].data();
    auto rd = r.data();
    for (std::size_t n = 0; n < ld.size(); ++n) ld[n] += mu * rd[n];
  }
}

std::array<Tensor3, 4> shifted_targets(const std::array<Tensor3, 4>& v, const std::array<Tensor3, 4>& lambda,
                                       double mu) {
  std::array<Tensor3, 4> d;
  for (std::size_t i = 0; i < d.size(); ++i) {
    require_same_shape(v[i], lambda[i], "shifted_targets");
    d[i] = v[i];
    auto dd = d[i].data();
    auto ld = lambda[i].data();
    for (std::size_t n = 0; n < dd.size(); ++n) dd[n] -= ld[n] / mu;
  }
  return d;
}

namespace {

ScaleInfo scale_for(const Tensor3& y, bool enabled) {
  if (!enabled) return {};
  const auto [lo, hi] = std::ranges::minmax(y.data());
  const double range = hi - lo;
  return {lo, range > 0.0 ? range : 1.0};
}

Tensor3 to_unit(const Tensor3& y, const ScaleInfo& s) {
  Tensor3 out(y.shape());
  auto in = y.data();
  auto o = out.data();
  for (std::size_t n = 0; n < in.size(); ++n) o[n] = (in[n] - s.offset) / s.range;
  return out;
}

Tensor3 from_unit(const Tensor3& x, const ScaleInfo& s, bool with_offset) {
  Tensor3 out(x.shape());
  auto in = x.data();
  auto o = out.data();
  const double off = with_offset ? s.offset : 0.0;
  for (std::size_t n = 0; n < in.size(); ++n) o[n] = in[n] * s.range + off;
  return out;
}

}  // namespace

DenoiseResult run(const Tensor3& y_in, const ModelConfig& model_cfg, const SolverConfig& cfg, const RunHooks& hooks) {
  cfg.validate();
  model_cfg.validate(y_in.shape());
  if (!all_finite(y_in)) throw NumericError("input tensor has non-finite entries");
  if (hooks.reference != nullptr) require_same_shape(y_in, *hooks.reference, "reference");

  using Clock = std::chrono::steady_clock;
  const auto start = Clock::now();
  auto phase = [&](SolverPhase p, std::size_t it) {
    if (hooks.on_phase) hooks.on_phase(p, it);
  };

  const ScaleInfo scale = scale_for(y_in, cfg.scale_input);
  const Tensor3 y = to_unit(y_in, scale);
  const Shape3 shape = y.shape();

  SolverState st;
  st.params = init_params(model_cfg, shape);
  st.adam = AdamState::zeros_like(st.params);
  st.x = forward(st.params);
  st.s = Tensor3(shape);
  for (auto& v : st.v) v = Tensor3(shape);
  for (auto& l : st.lambda) l = Tensor3(shape);

  const std::array<double, 4> weights{cfg.alpha2, cfg.alpha2, cfg.alpha3, cfg.alpha3};
  std::optional<double> first_loss;
  std::size_t calm_iters = 0;
  bool converged = false;

  for (st.t = 1; st.t <= cfg.max_iters; ++st.t) {
    const std::size_t it = st.t;

    phase(SolverPhase::UpdateV, it);
    for (std::size_t i = 0; i < kTvTerms.size(); ++i) {
      st.v[i] = update_v(st.x, st.lambda[i], cfg.mu, weights[i], kTvTerms[i]);
    }

    phase(SolverPhase::UpdateS, it);
    st.s = update_s(y, st.x, cfg.alpha1);

    phase(SolverPhase::UpdateX, it);
    const auto d = shifted_targets(st.v, st.lambda, cfg.mu);
    const SubproblemTargets targets{y, st.s, d, cfg.mu};
    double loss = 0.0;
    for (std::size_t inner = 0; inner < cfg.inner_adam_steps; ++inner) {
      ObjectiveResult obj = objective_and_grad(st.params, targets);
      if (inner == 0) loss = obj.loss;
      if (!std::isfinite(obj.loss)) {
        throw DivergenceError(fmt::format("objective became non-finite at iteration {}", it), st.diagnostics);
      }
      adam_step(st.params, st.adam, obj.grads, cfg.adam, it);
    }
    if (!first_loss) first_loss = loss;
    if (*first_loss > 0.0 && loss > SolverConfig::kDivergenceFactor * *first_loss) {
      throw DivergenceError(
          fmt::format("objective grew from {} to {} by iteration {}", *first_loss, loss, it), st.diagnostics);
    }

    Tensor3 x_new = forward(st.params);
    if (!all_finite(x_new)) {
      throw DivergenceError(fmt::format("estimate became non-finite at iteration {}", it), st.diagnostics);
    }

    phase(SolverPhase::UpdateMultipliers, it);
    update_multipliers(st.lambda, x_new, st.v, cfg.mu);

    IterationRecord rec;
    rec.iter = it;
    rec.loss = loss;
    rec.fidelity = squared_norm(y - x_new - st.s);
    rec.sparse_l1 = l1_norm(st.s);
    for (std::size_t i = 0; i < kTvTerms.size(); ++i) {
      rec.residual[i] = frobenius_norm(tv_operator(x_new, kTvTerms[i]) - st.v[i]);
    }
    const double prev_norm = frobenius_norm(st.x);
    rec.relative_change = frobenius_norm(x_new - st.x) / std::max(prev_norm, std::numeric_limits<double>::min());
    if (hooks.reference != nullptr) rec.psnr = psnr(from_unit(x_new, scale, true), *hooks.reference);
    st.x = std::move(x_new);
    rec.seconds = std::chrono::duration<double>(Clock::now() - start).count();
    st.diagnostics.push_back(rec);
    if (hooks.on_iteration) hooks.on_iteration(rec);

    calm_iters = rec.relative_change < cfg.tol ? calm_iters + 1 : 0;
    if (calm_iters >= SolverConfig::kStopWindow) {
      converged = true;
      break;
    }
  }

  DenoiseResult result;
  result.x = from_unit(st.x, scale, true);
  result.s = from_unit(st.s, scale, false);
  result.diagnostics = std::move(st.diagnostics);
  result.solver = cfg;
  result.model = model_cfg;
  result.scale = scale;
  result.params = std::move(st.params);
  result.converged = converged;
  return result;
}

}  // namespace h2tf

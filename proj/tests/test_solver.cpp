#include <doctest.h>

#include <cmath>
#include <limits>
#include <random>
#include <string>

#include "h2tf/metrics.hpp"
#include "h2tf/solver.hpp"
#include "h2tf/synthetic.hpp"
#include "oracles.hpp"

using namespace h2tf;

TEST_CASE("solver config validation") {
  SolverConfig c;
  CHECK_NOTHROW(c.validate());
  c.mu = 0.0;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = {};
  c.alpha2 = -1;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = {};
  c.adam.beta1 = 1.0;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = {};
  c.max_iters = 0;
  CHECK_THROWS_AS(c.validate(), ConfigError);
}

TEST_CASE("update_v") {
  std::mt19937_64 rng(1);
  const Shape3 shape{4, 5, 3};
  SUBCASE("constant estimate, zero multiplier") {
    for (auto term : kTvTerms) CHECK(squared_norm(update_v(Tensor3(shape, 0.4), Tensor3(shape), 0.1, 0.01, term)) == 0.0);
  }
  SUBCASE("zero weight") {
    const Tensor3 x = oracle::random_tensor(4, 5, 3, rng);
    const Tensor3 lam = oracle::random_tensor(4, 5, 3, rng);
    for (auto term : kTvTerms) {
      const Tensor3 expect = tv_operator(x, term) + lam * (1.0 / 0.3);
      CHECK(update_v(x, lam, 0.3, 0.0, term) == expect);
    }
  }
  SUBCASE("random against the scalar formula") {
    const Tensor3 x = oracle::random_tensor(4, 5, 3, rng);
    const Tensor3 lam = oracle::random_tensor(4, 5, 3, rng);
    const double mu = 0.5, wgt = 0.2;
    const Tensor3 v = update_v(x, lam, mu, wgt, TvTerm::DyDz);
    const Tensor3 op = oracle::diff(oracle::diff(x, 2), 1);
    for (std::size_t n = 0; n < v.size(); ++n) {
      const double a = op.data()[n] + lam.data()[n] / mu;
      const double expect = std::copysign(std::max(std::abs(a) - wgt / mu, 0.0), a);
      CHECK(std::abs(v.data()[n] - expect) < 1e-15);
    }
  }
  SUBCASE("shape mismatch") {
    CHECK_THROWS_AS(update_v(Tensor3(shape), Tensor3(4, 5, 2), 0.1, 0.1, TvTerm::Dx), ShapeError);
  }
}

TEST_CASE("update_s") {
  std::mt19937_64 rng(2);
  const Tensor3 x = oracle::random_tensor(3, 3, 2, rng);
  CHECK(squared_norm(update_s(x, x, 0.1)) == 0.0);
  const Tensor3 y = oracle::random_tensor(3, 3, 2, rng);
  CHECK(update_s(y, x, 0.0) == y - x);
  const double a1 = 0.3;
  const Tensor3 s = update_s(y, x, a1);
  for (std::size_t n = 0; n < s.size(); ++n) {
    const double r = y.data()[n] - x.data()[n];
    const double g = oracle::prox_grid(r, a1, 1e-4, 3.0);
    CHECK(oracle::prox_objective(r, a1, s.data()[n]) <= oracle::prox_objective(r, a1, g) + 1e-9);
  }
}

TEST_CASE("update_multipliers") {
  std::mt19937_64 rng(3);
  const Tensor3 x = oracle::random_tensor(3, 4, 2, rng);
  std::array<Tensor3, 4> lam, v;
  for (auto& l : lam) l = oracle::random_tensor(3, 4, 2, rng);
  SUBCASE("satisfied constraints") {
    for (std::size_t i = 0; i < 4; ++i) v[i] = tv_operator(x, kTvTerms[i]);
    auto copy = lam;
    update_multipliers(copy, x, v, 0.4);
    for (std::size_t i = 0; i < 4; ++i) CHECK(oracle::max_abs_diff(copy[i], lam[i]) < 1e-15);
  }
  SUBCASE("random against the formula, and mu = 0") {
    for (auto& t : v) t = oracle::random_tensor(3, 4, 2, rng);
    auto copy = lam;
    update_multipliers(copy, x, v, 0.4);
    for (std::size_t i = 0; i < 4; ++i) {
      const Tensor3 op = tv_operator(x, kTvTerms[i]);
      for (std::size_t n = 0; n < x.size(); ++n) {
        CHECK(std::abs(copy[i].data()[n] - (lam[i].data()[n] + 0.4 * (op.data()[n] - v[i].data()[n]))) < 1e-15);
      }
    }
    auto same = lam;
    update_multipliers(same, x, v, 0.0);
    for (std::size_t i = 0; i < 4; ++i) CHECK(same[i] == lam[i]);
  }
  SUBCASE("shifted targets") {
    for (auto& t : v) t = oracle::random_tensor(3, 4, 2, rng);
    const auto d = shifted_targets(v, lam, 0.5);
    for (std::size_t i = 0; i < 4; ++i) CHECK(oracle::max_abs_diff(d[i], v[i] - lam[i] * 2.0) < 1e-15);
  }
}

namespace {

H2TFParams scalar_model(double w) {
  const Shape3 shape{1, 1, 1};
  H2TFParams p = init_params(make_model_config(shape, 2, 1, 1), shape);
  p.factors[0](0, 0, 0) = w;
  return p;
}

}  // namespace

TEST_CASE("adam_step") {
  AdamConfig cfg;
  SUBCASE("zero gradient") {
    H2TFParams p = scalar_model(0.5);
    const H2TFParams before = p;
    AdamState st = AdamState::zeros_like(p);
    st.m.factors[0](0, 0, 0) = 0.2;
    st.v.factors[0](0, 0, 0) = 0.1;
    AdamState fresh = AdamState::zeros_like(p);
    adam_step(p, fresh, ParamGrads::zeros_like(p), cfg);
    CHECK(p == before);
    // Stored momentum keeps moving the parameter.
    adam_step(p, st, ParamGrads::zeros_like(p), cfg);
    const double mhat = 0.2 * cfg.beta1 / (1.0 - std::pow(cfg.beta1, 1.0));
    const double vhat = 0.1 * cfg.beta2 / (1.0 - std::pow(cfg.beta2, 1.0));
    CHECK(p.factors[0](0, 0, 0) == doctest::Approx(0.5 - cfg.learning_rate * mhat / (std::sqrt(vhat) + cfg.epsilon)));
    CHECK(st.m.factors[0](0, 0, 0) == doctest::Approx(0.2 * cfg.beta1));
    CHECK(st.v.factors[0](0, 0, 0) == doctest::Approx(0.1 * cfg.beta2));
  }
  SUBCASE("first step is lr * g / (|g| + eps)") {
    std::mt19937_64 rng(4);
    const Shape3 shape{3, 4, 2};
    H2TFParams p = init_params(make_model_config(shape, 3, 1, 1), shape);
    const H2TFParams before = p;
    ParamGrads g = ParamGrads::zeros_like(p);
    for (auto& f : g.factors) f = oracle::random_tensor(f.rows(), f.cols(), f.bands(), rng);
    AdamState st = AdamState::zeros_like(p);
    adam_step(p, st, g, cfg);
    for (std::size_t d = 0; d < p.factors.size(); ++d)
      for (std::size_t n = 0; n < p.factors[d].size(); ++n) {
        const double gv = g.factors[d].data()[n];
        const double step = before.factors[d].data()[n] - p.factors[d].data()[n];
        CHECK(std::abs(step - cfg.learning_rate * gv / (std::abs(gv) + cfg.epsilon)) < 1e-15);
      }
  }
  SUBCASE("scalar quadratic") {
    // f(w) = (w - 0.3)^2 from w = 0.5.
    AdamConfig fast = cfg;
    fast.learning_rate = 0.01;
    H2TFParams p = scalar_model(0.5);
    AdamState st = AdamState::zeros_like(p);
    for (int t = 0; t < 100; ++t) {
      ParamGrads g = ParamGrads::zeros_like(p);
      g.factors[0](0, 0, 0) = 2.0 * (p.factors[0](0, 0, 0) - 0.3);
      adam_step(p, st, g, fast);
    }
    CHECK(std::abs(p.factors[0](0, 0, 0) - 0.3) < 1e-3);
  }
  SUBCASE("non-finite gradient names the iteration") {
    H2TFParams p = scalar_model(0.5);
    AdamState st = AdamState::zeros_like(p);
    ParamGrads g = ParamGrads::zeros_like(p);
    g.factors[1](0, 0, 0) = std::numeric_limits<double>::infinity();
    try {
      adam_step(p, st, g, cfg, 17);
      FAIL("expected NumericError");
    } catch (const NumericError& e) {
      CHECK(std::string(e.what()).find("17") != std::string::npos);
    }
  }
  SUBCASE("fixed transforms are left alone") {
    H2TFParams p = scalar_model(0.5);
    p.transform_trainable[0] = false;
    const Matrix h = p.transforms[0];
    AdamState st = AdamState::zeros_like(p);
    ParamGrads g = ParamGrads::zeros_like(p);
    g.transforms[0](0, 0) = 1.0;
    adam_step(p, st, g, cfg);
    CHECK(p.transforms[0] == h);
  }
}

TEST_CASE("run: sub-update order") {
  const Shape3 shape{6, 5, 3};
  std::mt19937_64 rng(5);
  const Tensor3 y = oracle::random_tensor(6, 5, 3, rng, 0, 1);
  SolverConfig cfg;
  cfg.max_iters = 3;
  std::string trace;
  std::size_t records = 0;
  RunHooks hooks;
  hooks.on_phase = [&](SolverPhase p, std::size_t it) { trace += std::string(to_string(p)) + std::to_string(it) + " "; };
  hooks.on_iteration = [&](const IterationRecord&) { ++records; };
  const auto r = run(y, default_model_config(shape), cfg, hooks);
  CHECK(trace == "V1 S1 X1 Lambda1 V2 S2 X2 Lambda2 V3 S3 X3 Lambda3 ");
  CHECK(records == 3);
  CHECK(r.diagnostics.size() == 3);

  cfg.max_iters = 1;
  trace.clear();
  run(y, default_model_config(shape), cfg, hooks);
  CHECK(trace == "V1 S1 X1 Lambda1 ");
}

TEST_CASE("run: huge sparse weight keeps S at zero") {
  const Shape3 shape{8, 8, 4};
  const Tensor3 truth = random_low_tubal_rank(shape, 2, 1);
  std::mt19937_64 rng(6);
  const Tensor3 y = truth + oracle::random_tensor(8, 8, 4, rng, -0.2, 0.2);
  SolverConfig cfg;
  cfg.alpha1 = 1e6;
  cfg.max_iters = 10;
  const auto r = run(y, default_model_config(shape), cfg);
  CHECK(r.diagnostics.size() == 10);
  CHECK(squared_norm(r.s) == 0.0);
  for (const auto& rec : r.diagnostics) CHECK(rec.sparse_l1 == 0.0);
}

TEST_CASE("run: null input") {
  const Shape3 shape{8, 8, 4};
  SolverConfig cfg;
  cfg.alpha1 = 1e6;
  cfg.max_iters = 2000;
  cfg.tol = 1e-3;
  const auto r = run(Tensor3(shape), default_model_config(shape), cfg);
  CHECK(squared_norm(r.s) == 0.0);
  CHECK(frobenius_norm(r.x) / std::sqrt(static_cast<double>(shape.size())) < 1e-2);
}

TEST_CASE("run: stopping rule") {
  const Shape3 shape{8, 8, 4};
  SolverConfig cfg;
  cfg.tol = 1e-3;
  const auto r = run(random_low_tubal_rank(shape, 2, 3), default_model_config(shape), cfg);
  CHECK(r.converged);
  CHECK(r.diagnostics.size() < cfg.max_iters);
  // The last kStopWindow changes all sit below tol.
  for (std::size_t i = r.diagnostics.size() - SolverConfig::kStopWindow; i < r.diagnostics.size(); ++i)
    CHECK(r.diagnostics[i].relative_change < cfg.tol);
}

TEST_CASE("run: self-representation") {
  // Noiseless data produced by a model of the same architecture.
  const Shape3 shape{12, 12, 4};
  ModelConfig gen = default_model_config(shape);
  gen.seed = 42;
  Tensor3 y = forward(init_params(gen, shape));
  const auto [lo, hi] = std::ranges::minmax(y.data());
  for (auto& v : y.data()) v = (v - lo) / (hi - lo);
  SolverConfig cfg;
  cfg.alpha1 = 1e6;
  cfg.alpha2 = 0.0;
  cfg.alpha3 = 0.0;
  cfg.max_iters = 2000;
  cfg.tol = 0.0;
  const auto r = run(y, default_model_config(shape), cfg);
  MESSAGE("self-fit psnr " << psnr(r.x, y));
  // Adam at the default step plateaus around 37 dB here.
  CHECK(psnr(r.x, y) >= 35.0);
}

TEST_CASE("run: determinism and scaling") {
  const Shape3 shape{8, 8, 4};
  const Tensor3 truth = random_low_tubal_rank(shape, 2, 3);
  std::mt19937_64 rng(7);
  const Tensor3 y = 5.0 * truth + oracle::random_tensor(8, 8, 4, rng, 0.5, 1.5);
  SolverConfig cfg;
  cfg.max_iters = 50;
  const auto a = run(y, default_model_config(shape), cfg);
  const auto b = run(y, default_model_config(shape), cfg);
  CHECK(a.x == b.x);
  CHECK(a.s == b.s);
  CHECK(a.params == b.params);
  const auto [lo, hi] = std::ranges::minmax(y.data());
  CHECK(a.scale.offset == lo);
  CHECK(a.scale.range == hi - lo);
}

TEST_CASE("run: divergence is reported with diagnostics") {
  const Shape3 shape{8, 8, 4};
  std::mt19937_64 rng(8);
  const Tensor3 y = oracle::random_tensor(8, 8, 4, rng, 0, 1);
  SolverConfig cfg;
  cfg.adam.learning_rate = 1e9;
  cfg.max_iters = 50;
  try {
    run(y, default_model_config(shape), cfg);
    FAIL("expected divergence");
  } catch (const DivergenceError& e) {
    CHECK_FALSE(e.diagnostics().empty());
  }
  Tensor3 bad = y;
  bad(0, 0, 0) = std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS_AS(run(bad, default_model_config(shape), SolverConfig{}), NumericError);
}

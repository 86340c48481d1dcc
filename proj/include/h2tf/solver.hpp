#pragma once

// ADMM for
//
//   min ||Y - X - S||_F^2 + a1 ||S||_1 + a2 (||dx X||_1 + ||dy X||_1)
//       + a3 (||dx dz X||_1 + ||dy dz X||_1),   X = H2TF(theta)
//
// with one split variable V_i per TV term. Every outer iteration runs, in
// order: V update (soft threshold), S update (soft threshold), Adam step(s) on
// the H2TF parameters, multiplier update.

#include <array>
#include <cstddef>
#include <functional>
#include <optional>
#include <string_view>
#include <vector>

#include "h2tf/grad.hpp"
#include "h2tf/model.hpp"
#include "h2tf/tensor.hpp"

namespace h2tf {

struct AdamConfig {
  double learning_rate = 5e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

struct SolverConfig {
  double alpha1 = 0.1;  // sparse-noise weight
  double alpha2 = 0.01;  // spatial TV weight
  double alpha3 = 0.01;  // spatial-spectral TV weight
  double mu = 0.03;      // ADMM penalty, held fixed
  AdamConfig adam;
  std::size_t max_iters = 1500;
  // Stop once the relative change of X stays below tol for kStopWindow
  // consecutive iterations.
  double tol = 1e-6;
  std::size_t inner_adam_steps = 1;
  // Min-max scale the input to [0, 1] before solving and undo it afterwards.
  bool scale_input = true;

  static constexpr std::size_t kStopWindow = 10;
  // Abort when the objective grows past this multiple of its first value.
  static constexpr double kDivergenceFactor = 1e3;

  void validate() const;
};

// Adam moments persist across outer ADMM iterations, and so does the step
// counter used for bias correction.
struct AdamState {
  std::size_t step = 0;
  ParamGrads m;
  ParamGrads v;

  static AdamState zeros_like(const H2TFParams& params);
};

// One Adam update of every trainable parameter. Throws NumericError naming
// `iteration` when the gradient has non-finite entries.
void adam_step(H2TFParams& params, AdamState& state, const ParamGrads& grads, const AdamConfig& cfg,
               std::size_t iteration = 0);

// V = Soft_{weight/mu}(op(X) + Lambda/mu).
Tensor3 update_v(const Tensor3& x, const Tensor3& lambda, double mu, double weight, TvTerm term);

// S = Soft_{alpha1/2}(Y - X).
Tensor3 update_s(const Tensor3& y, const Tensor3& x, double alpha1);

// Lambda_i += mu * (op_i(X) - V_i) for the four TV terms.
void update_multipliers(std::array<Tensor3, 4>& lambda, const Tensor3& x, const std::array<Tensor3, 4>& v, double mu);

// D_i = V_i - Lambda_i / mu.
std::array<Tensor3, 4> shifted_targets(const std::array<Tensor3, 4>& v, const std::array<Tensor3, 4>& lambda,
                                       double mu);

struct IterationRecord {
  std::size_t iter = 0;            // 1-based
  double loss = 0.0;               // X-subproblem objective before the Adam step
  double fidelity = 0.0;           // ||Y - X - S||_F^2
  double sparse_l1 = 0.0;          // ||S||_1
  std::array<double, 4> residual{};  // ||op_i(X) - V_i||_F
  double relative_change = 0.0;    // ||X_t - X_{t-1}|| / ||X_{t-1}||
  std::optional<double> psnr;      // against the reference, when one is given
  double seconds = 0.0;            // wall time since the run started
};

struct ScaleInfo {
  double offset = 0.0;
  double range = 1.0;
};

struct SolverState {
  std::size_t t = 0;
  H2TFParams params;
  Tensor3 x;
  Tensor3 s;
  std::array<Tensor3, 4> v;
  std::array<Tensor3, 4> lambda;
  AdamState adam;
  std::vector<IterationRecord> diagnostics;
};

struct DenoiseResult {
  Tensor3 x;  // clean estimate, original scale
  Tensor3 s;  // sparse component, original scale
  std::vector<IterationRecord> diagnostics;
  SolverConfig solver;
  ModelConfig model;
  ScaleInfo scale;
  H2TFParams params;  // final parameters (scaled domain)
  bool converged = false;
};

// Thrown when the objective becomes non-finite or blows up. Carries the
// diagnostics gathered so far.
class DivergenceError : public NumericError {
 public:
  DivergenceError(const std::string& what, std::vector<IterationRecord> diagnostics)
      : NumericError(what), diagnostics_(std::move(diagnostics)) {}
  [[nodiscard]] const std::vector<IterationRecord>& diagnostics() const { return diagnostics_; }

 private:
  std::vector<IterationRecord> diagnostics_;
};

enum class SolverPhase { UpdateV, UpdateS, UpdateX, UpdateMultipliers };
std::string_view to_string(SolverPhase phase);

struct RunHooks {
  // Reference image in the original scale; enables the psnr column.
  const Tensor3* reference = nullptr;
  // Called at the start of each sub-update with the 1-based iteration.
  std::function<void(SolverPhase, std::size_t)> on_phase;
  // Called after each completed iteration.
  std::function<void(const IterationRecord&)> on_iteration;
};

DenoiseResult run(const Tensor3& y, const ModelConfig& model_cfg, const SolverConfig& solver_cfg,
                  const RunHooks& hooks = {});

}  // namespace h2tf

#include "app.hpp"

#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <fmt/format.h>

#include "h2tf/commands.hpp"

namespace h2tf::cli {

namespace {

// With --from-manifest only output locations (and bench --jobs) may be changed.
void check_manifest_conflicts(const CLI::App& sub, const std::set<std::string>& allowed) {
  for (const CLI::Option* opt : sub.get_options()) {
    const std::string name = opt->get_name(false, true);
    if (opt->count() == 0 || name == "--help" || name == "--from-manifest") continue;
    if (!allowed.contains(name)) throw UsageError(fmt::format("{} cannot be combined with --from-manifest", name));
  }
}

void require_given(const CLI::App& sub, const std::vector<std::string>& names) {
  for (const auto& n : names) {
    if (sub.get_option(n)->count() == 0) throw UsageError(fmt::format("{} is required", n));
  }
}

IntRange to_range(const std::vector<int>& v) { return {v.at(0), v.at(1)}; }

struct SolverFlags {
  SolverConfig cfg;
  void attach(CLI::App* sub) {
    sub->add_option("--alpha1", cfg.alpha1, "sparse-noise weight")->capture_default_str();
    sub->add_option("--alpha2", cfg.alpha2, "spatial TV weight")->capture_default_str();
    sub->add_option("--alpha3", cfg.alpha3, "spatial-spectral TV weight")->capture_default_str();
    sub->add_option("--mu", cfg.mu, "ADMM penalty")->capture_default_str();
    sub->add_option("--lr", cfg.adam.learning_rate, "Adam learning rate")->capture_default_str();
    sub->add_option("--beta1", cfg.adam.beta1)->capture_default_str();
    sub->add_option("--beta2", cfg.adam.beta2)->capture_default_str();
    sub->add_option("--eps", cfg.adam.epsilon)->capture_default_str();
    sub->add_option("--max-iters", cfg.max_iters)->capture_default_str();
    sub->add_option("--tol", cfg.tol, "relative-change stopping tolerance")->capture_default_str();
    sub->add_option("--inner-adam-steps", cfg.inner_adam_steps)->capture_default_str();
    sub->add_option("--scale-input", cfg.scale_input, "min-max scale the input to [0,1]")->capture_default_str();
  }
};

}  // namespace

int run_app(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Hyperspectral cube denoising with hierarchical tensor factorizations", "h2tf"};
  app.require_subcommand(1);
  app.set_version_flag("--version", kToolVersion);

  // simulate
  SimulateOptions sim;
  std::string sim_manifest_in;
  int sim_case = 1;
  std::uint64_t sim_seed = 0;
  double gaussian_std = 0, impulse_rate = 0, deadline_frac = 0, stripe_frac = 0, stripe_amp = 0;
  std::vector<int> deadline_count, deadline_width, stripe_count;
  auto* s = app.add_subcommand("simulate", "corrupt a clean cube with one of the noise cases");
  std::vector<std::size_t> synthetic_size;
  s->add_option("--in", sim.input, "clean cube (.ht3); written when --synthetic is given");
  s->add_option("--synthetic", synthetic_size, "generate a clean h w b cube of low tubal rank")->expected(3);
  s->add_option("--synthetic-rank", sim.synthetic_rank, "tubal rank of the generated cube")->capture_default_str();
  s->add_option("--synthetic-seed", sim.synthetic_seed)->capture_default_str();
  s->add_option("--out", sim.output, "noisy cube (.ht3)");
  s->add_option("--manifest", sim.manifest, "manifest path (default <out>.manifest)");
  s->add_option("--case", sim_case, "noise case 1..5")->capture_default_str();
  s->add_option("--seed", sim_seed)->capture_default_str();
  s->add_option("--gaussian-std", gaussian_std);
  s->add_option("--impulse-rate", impulse_rate);
  s->add_option("--deadline-band-fraction", deadline_frac);
  s->add_option("--deadline-count", deadline_count, "min max")->expected(2);
  s->add_option("--deadline-width", deadline_width, "min max")->expected(2);
  s->add_option("--stripe-band-fraction", stripe_frac);
  s->add_option("--stripe-count", stripe_count, "min max")->expected(2);
  s->add_option("--stripe-amplitude", stripe_amp);
  s->add_option("--from-manifest", sim_manifest_in, "re-run a previous simulate");

  // denoise
  DenoiseOptions den;
  std::string den_manifest_in;
  std::string ranks_text;
  std::string activation = "leaky_relu";
  SolverFlags den_solver;
  auto* d = app.add_subcommand("denoise", "fit the model to a noisy cube");
  d->add_option("--in", den.input, "noisy cube (.ht3)");
  d->add_option("--out", den.output, "clean estimate (.ht3)");
  d->add_option("--sparse-out", den.sparse_output, "sparse component (default <out>.sparse.ht3)");
  d->add_option("--diagnostics", den.diagnostics, "per-iteration CSV (default <out>.diag.csv)");
  d->add_option("--manifest", den.manifest, "manifest path (default <out>.manifest)");
  d->add_option("--truth", den.reference, "ground truth; adds a psnr column to the diagnostics");
  d->add_option("--save-params", den.save_params, "directory for the fitted parameters");
  d->add_option("--export-band", den.export_bands, "write band k of the estimate as PGM (repeatable)");
  d->add_option("--layers", den.model.layers, "factor tensors l")->capture_default_str();
  d->add_option("--transforms", den.model.transforms, "transform matrices m")->capture_default_str();
  auto* ranks_opt = d->add_option("--ranks", ranks_text, "r_0,...,r_l with r_0 = width, r_l = height");
  d->add_option("--rank-base", den.rank_base, "inner ranks base, 2*base, 4*base, ...")
      ->capture_default_str()
      ->excludes(ranks_opt);
  d->add_option("--activation", activation, "leaky_relu or identity")->capture_default_str();
  d->add_option("--slope", den.model.activation.slope, "leaky ReLU negative slope")->capture_default_str();
  d->add_option("--init-scale", den.model.init_scale)->capture_default_str();
  d->add_option("--transform-noise", den.model.transform_noise)->capture_default_str();
  d->add_option("--seed", den.model.seed, "parameter initialisation seed")->capture_default_str();
  den_solver.attach(d);
  d->add_option("--from-manifest", den_manifest_in, "re-run a previous denoise");

  // metrics
  MetricsOptions met;
  auto* m = app.add_subcommand("metrics", "PSNR and SSIM of an estimate against a reference");
  m->add_option("x", met.estimate, "estimate (.ht3)")->required();
  m->add_option("ref", met.reference, "reference (.ht3)")->required();
  m->add_flag("--per-band", met.per_band, "also print one line per band");

  // bench
  BenchOptions bench;
  std::string bench_manifest_in;
  std::vector<std::size_t> bench_size;
  SolverFlags bench_solver;
  auto* b = app.add_subcommand("bench", "sweep model depths and factor sizes on a synthetic cube");
  b->add_option("--suite", bench.suite, "hmf-layers, hnt-layers, factor-sizes or smoke")->capture_default_str();
  b->add_option("--out-dir", bench.out_dir, "output directory");
  b->add_option("--size", bench_size, "h w b of the synthetic cube (default 32 32 8)")->expected(3);
  b->add_option("--truth-rank", bench.truth_rank, "tubal rank of the synthetic truth")->capture_default_str();
  b->add_option("--case", bench.case_id, "noise case")->capture_default_str();
  b->add_option("--seed", bench.seed, "seed for truth, noise and model")->capture_default_str();
  b->add_option("--jobs", bench.jobs, "grid points run concurrently")->capture_default_str();
  bench_solver.attach(b);
  b->add_option("--from-manifest", bench_manifest_in, "re-run a previous bench");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e, out, err);
    return rc == 0 ? kExitOk : kExitUsage;
  }

  return run_guarded(
      [&]() -> int {
        if (s->parsed()) {
          if (!sim_manifest_in.empty()) {
            check_manifest_conflicts(*s, {"--out", "--manifest"});
            SimulateOptions re = simulate_from_manifest(KeyValue::load(sim_manifest_in));
            if (!sim.output.empty()) re.output = sim.output;
            re.manifest = sim.manifest;
            return cmd_simulate(re, out);
          }
          require_given(*s, {"--in", "--out"});
          if (!synthetic_size.empty()) {
            sim.synthetic = true;
            sim.synthetic_shape = {synthetic_size[0], synthetic_size[1], synthetic_size[2]};
          } else if (s->count("--synthetic-rank") || s->count("--synthetic-seed")) {
            throw UsageError("--synthetic-rank and --synthetic-seed need --synthetic");
          }
          sim.noise = NoiseSpec::for_case(sim_case, sim_seed);
          if (s->count("--gaussian-std")) sim.noise.gaussian_std = gaussian_std;
          if (s->count("--impulse-rate")) sim.noise.impulse_rate = impulse_rate;
          if (s->count("--deadline-band-fraction")) sim.noise.deadline_band_fraction = deadline_frac;
          if (s->count("--deadline-count")) sim.noise.deadline_count = to_range(deadline_count);
          if (s->count("--deadline-width")) sim.noise.deadline_width = to_range(deadline_width);
          if (s->count("--stripe-band-fraction")) sim.noise.stripe_band_fraction = stripe_frac;
          if (s->count("--stripe-count")) sim.noise.stripe_count = to_range(stripe_count);
          if (s->count("--stripe-amplitude")) sim.noise.stripe_amplitude = stripe_amp;
          return cmd_simulate(sim, out);
        }
        if (d->parsed()) {
          if (!den_manifest_in.empty()) {
            check_manifest_conflicts(*d, {"--out", "--sparse-out", "--diagnostics", "--manifest", "--save-params",
                                          "--export-band"});
            DenoiseOptions re = denoise_from_manifest(KeyValue::load(den_manifest_in));
            if (!den.output.empty()) {
              // New output location: derived paths follow it unless given.
              re.output = den.output;
              re.sparse_output = den.sparse_output;
              re.diagnostics = den.diagnostics;
            } else {
              if (!den.sparse_output.empty()) re.sparse_output = den.sparse_output;
              if (!den.diagnostics.empty()) re.diagnostics = den.diagnostics;
            }
            re.manifest = den.manifest;
            re.save_params = den.save_params;
            re.export_bands = den.export_bands;
            return cmd_denoise(re, out);
          }
          require_given(*d, {"--in", "--out"});
          den.model.activation.kind = parse_activation_kind(activation);
          if (!ranks_text.empty()) {
            std::stringstream ss(ranks_text);
            std::string item;
            while (std::getline(ss, item, ',')) {
              try {
                den.model.ranks.push_back(std::stoul(item));
              } catch (const std::exception&) {
                throw UsageError(fmt::format("--ranks: bad entry '{}'", item));
              }
            }
          }
          den.solver = den_solver.cfg;
          return cmd_denoise(den, out);
        }
        if (m->parsed()) return cmd_metrics(met, out);
        if (b->parsed()) {
          if (!bench_manifest_in.empty()) {
            check_manifest_conflicts(*b, {"--out-dir", "--jobs"});
            BenchOptions re = bench_from_manifest(KeyValue::load(bench_manifest_in));
            if (!bench.out_dir.empty()) re.out_dir = bench.out_dir;
            if (b->count("--jobs")) re.jobs = bench.jobs;
            return cmd_bench(re, out);
          }
          require_given(*b, {"--out-dir"});
          if (!bench_size.empty()) bench.shape = {bench_size[0], bench_size[1], bench_size[2]};
          bench.solver = bench_solver.cfg;
          return cmd_bench(bench, out);
        }
        throw UsageError("no command given");
      },
      err);
}

}  // namespace h2tf::cli

#include "h2tf/commands.hpp"

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <future>
#include <sstream>

#include <fmt/format.h>
#include <fmt/ranges.h>

#include "h2tf/io.hpp"
#include "h2tf/metrics.hpp"
#include "h2tf/synthetic.hpp"

namespace h2tf::cli {

namespace fs = std::filesystem;

int run_guarded(const std::function<int()>& body, std::ostream& err) {
  try {
    return body();
  } catch (const UsageError& e) {
    err << "usage error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const ArgumentError& e) {
    err << "argument error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const ShapeError& e) {
    err << "shape error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const RangeError& e) {
    err << "range error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const IoError& e) {
    err << "io error: " << e.what() << '\n';
    return kExitIo;
  } catch (const FormatError& e) {
    err << "format error: " << e.what() << '\n';
    return kExitIo;
  } catch (const LengthError& e) {
    err << "length error: " << e.what() << '\n';
    return kExitIo;
  } catch (const NumericError& e) {
    err << "numeric error: " << e.what() << '\n';
    return kExitNumeric;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  }
}

namespace {

std::string stem_of(const std::string& path) {
  if (path.size() > 4 && path.ends_with(".ht3")) return path.substr(0, path.size() - 4);
  return path;
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream f(path);
  if (!f) throw IoError(fmt::format("cannot open '{}' for writing", path));
  f << text;
  if (!f) throw IoError(fmt::format("failed writing '{}'", path));
}

void require_file(const std::string& what, const std::string& path) {
  if (path.empty()) throw UsageError(fmt::format("{} path is required", what));
  if (!fs::exists(path)) throw IoError(fmt::format("{} '{}' does not exist", what, path));
}

// Shortest round-trip text, always with a decimal point for finite values.
std::string num(double v) {
  std::string s = fmt::format("{}", v);
  if (std::isfinite(v) && s.find_first_of(".e") == std::string::npos) s += ".0";
  return s;
}

Shape3 parse_shape(const std::string& text) {
  std::stringstream ss(text);
  std::string item;
  std::vector<std::size_t> dims;
  try {
    while (std::getline(ss, item, ',')) dims.push_back(std::stoul(item));
  } catch (const std::exception&) {
    throw FormatError(fmt::format("shape: bad entry '{}'", item));
  }
  if (dims.size() != 3) throw FormatError(fmt::format("shape: expected h,w,b, got '{}'", text));
  return {dims[0], dims[1], dims[2]};
}

ModelConfig resolve_model(const DenoiseOptions& opts, const Shape3& shape) {
  ModelConfig cfg = opts.model;
  if (cfg.ranks.empty()) {
    const ModelConfig base = make_model_config(shape, cfg.layers, cfg.transforms, opts.rank_base);
    cfg.ranks = base.ranks;
  }
  cfg.validate(shape);
  return cfg;
}

void add_metrics(KeyValue& kv, const Tensor3& x, const Tensor3& ref) {
  kv.set("metrics.psnr", psnr(x, ref));
  kv.set("metrics.ssim", ssim(x, ref));
}

}  // namespace

std::uint64_t tensor_digest(const Tensor3& x) {
  std::uint64_t h = 1469598103934665603ULL;
  for (double v : x.data()) {
    const auto bits = std::bit_cast<std::uint64_t>(v);
    for (int i = 0; i < 8; ++i) {
      h ^= (bits >> (8 * i)) & 0xFFu;
      h *= 1099511628211ULL;
    }
  }
  return h;
}

std::string diagnostics_csv(const std::vector<IterationRecord>& records) {
  std::string out = "iter,loss,fidelity,sparse_l1,res_dx,res_dy,res_dxdz,res_dydz,psnr,seconds\n";
  for (const auto& r : records) {
    out += fmt::format("{},{},{},{},{},{},{},{},{},{}\n", r.iter, r.loss, r.fidelity, r.sparse_l1, r.residual[0],
                       r.residual[1], r.residual[2], r.residual[3], r.psnr ? fmt::format("{}", *r.psnr) : "",
                       r.seconds);
  }
  return out;
}

KeyValue to_keyvalue(const SolverConfig& cfg) {
  KeyValue kv;
  kv.set("alpha1", cfg.alpha1);
  kv.set("alpha2", cfg.alpha2);
  kv.set("alpha3", cfg.alpha3);
  kv.set("mu", cfg.mu);
  kv.set("lr", cfg.adam.learning_rate);
  kv.set("beta1", cfg.adam.beta1);
  kv.set("beta2", cfg.adam.beta2);
  kv.set("eps", cfg.adam.epsilon);
  kv.set("max_iters", cfg.max_iters);
  kv.set("tol", cfg.tol);
  kv.set("inner_adam_steps", cfg.inner_adam_steps);
  kv.set("scale_input", cfg.scale_input ? 1 : 0);
  return kv;
}

SolverConfig solver_config_from(const KeyValue& kv) {
  SolverConfig cfg;
  cfg.alpha1 = kv.get_double("alpha1", cfg.alpha1);
  cfg.alpha2 = kv.get_double("alpha2", cfg.alpha2);
  cfg.alpha3 = kv.get_double("alpha3", cfg.alpha3);
  cfg.mu = kv.get_double("mu", cfg.mu);
  cfg.adam.learning_rate = kv.get_double("lr", cfg.adam.learning_rate);
  cfg.adam.beta1 = kv.get_double("beta1", cfg.adam.beta1);
  cfg.adam.beta2 = kv.get_double("beta2", cfg.adam.beta2);
  cfg.adam.epsilon = kv.get_double("eps", cfg.adam.epsilon);
  cfg.max_iters = kv.get_u64("max_iters", cfg.max_iters);
  cfg.tol = kv.get_double("tol", cfg.tol);
  cfg.inner_adam_steps = kv.get_u64("inner_adam_steps", cfg.inner_adam_steps);
  cfg.scale_input = kv.get_int("scale_input", 1) != 0;
  return cfg;
}

// ---------------------------------------------------------------- simulate

KeyValue simulate_manifest(const SimulateOptions& opts) {
  KeyValue kv;
  kv.set("tool", "h2tf");
  kv.set("tool_version", kToolVersion);
  kv.set("command", "simulate");
  kv.set("input", opts.input);
  kv.set("output", opts.output);
  if (opts.synthetic) {
    const auto& sh = opts.synthetic_shape;
    kv.set("synthetic.shape", fmt::format("{},{},{}", sh.h, sh.w, sh.b));
    kv.set("synthetic.rank", opts.synthetic_rank);
    kv.set("synthetic.seed", opts.synthetic_seed);
  }
  kv.merge(KeyValue::parse(opts.noise.to_text()), "noise");
  return kv;
}

SimulateOptions simulate_from_manifest(const KeyValue& kv) {
  if (kv.get_string("command", "") != "simulate") throw UsageError("manifest was not written by simulate");
  SimulateOptions opts;
  opts.input = kv.get("input");
  opts.output = kv.get("output");
  if (auto shape = kv.find("synthetic.shape")) {
    opts.synthetic = true;
    opts.synthetic_shape = parse_shape(*shape);
    opts.synthetic_rank = kv.get_u64("synthetic.rank", opts.synthetic_rank);
    opts.synthetic_seed = kv.get_u64("synthetic.seed", opts.synthetic_seed);
  }
  opts.noise = NoiseSpec::from_text(kv.section("noise").to_text());
  return opts;
}

int cmd_simulate(const SimulateOptions& opts, std::ostream& out) {
  if (opts.synthetic) {
    if (opts.input.empty()) throw UsageError("input path is required (the synthetic cube is written there)");
  } else {
    require_file("input", opts.input);
  }
  if (opts.output.empty()) throw UsageError("output path is required");
  opts.noise.validate();
  Tensor3 clean;
  if (opts.synthetic) {
    clean = random_low_tubal_rank(opts.synthetic_shape, opts.synthetic_rank, opts.synthetic_seed);
    write_tensor(opts.input, clean);
  } else {
    clean = read_tensor(opts.input);
  }
  CorruptionReport report;
  const Tensor3 noisy = make_case(clean, opts.noise, &report);
  write_tensor(opts.output, noisy);

  KeyValue kv = simulate_manifest(opts);
  kv.set("output_digest", fmt::format("{:016x}", tensor_digest(noisy)));
  kv.set("report.impulses", report.impulses);
  kv.set("report.deadline_bands", fmt::format("{}", fmt::join(report.deadline_bands, ",")));
  kv.set("report.stripe_bands", fmt::format("{}", fmt::join(report.stripe_bands, ",")));
  add_metrics(kv, noisy, clean);
  const std::string manifest = opts.manifest.empty() ? opts.output + ".manifest" : opts.manifest;
  kv.save(manifest);
  out << fmt::format("wrote {} ({}), case {}, seed {}\n", opts.output, to_string(noisy.shape()), opts.noise.case_id,
                     opts.noise.seed);
  out << fmt::format("psnr={} ssim={}\n", num(psnr(noisy, clean)),
                     num(ssim(noisy, clean)));
  return kExitOk;
}

// ----------------------------------------------------------------- denoise

KeyValue denoise_manifest(const DenoiseOptions& opts) {
  KeyValue kv;
  kv.set("tool", "h2tf");
  kv.set("tool_version", kToolVersion);
  kv.set("command", "denoise");
  kv.set("input", opts.input);
  kv.set("output", opts.output);
  kv.set("sparse_output", opts.sparse_output);
  kv.set("diagnostics", opts.diagnostics);
  kv.set("reference", opts.reference);
  kv.set("rank_base", opts.rank_base);
  kv.merge(to_keyvalue(opts.model), "model");
  kv.merge(to_keyvalue(opts.solver), "solver");
  return kv;
}

DenoiseOptions denoise_from_manifest(const KeyValue& kv) {
  if (kv.get_string("command", "") != "denoise") throw UsageError("manifest was not written by denoise");
  DenoiseOptions opts;
  opts.input = kv.get("input");
  opts.output = kv.get("output");
  opts.sparse_output = kv.get_string("sparse_output", "");
  opts.diagnostics = kv.get_string("diagnostics", "");
  opts.reference = kv.get_string("reference", "");
  opts.rank_base = kv.get_u64("rank_base", opts.rank_base);
  opts.model = model_config_from(kv.section("model"));
  opts.solver = solver_config_from(kv.section("solver"));
  return opts;
}

int cmd_denoise(const DenoiseOptions& in_opts, std::ostream& out) {
  DenoiseOptions opts = in_opts;
  require_file("input", opts.input);
  if (opts.output.empty()) throw UsageError("output path is required");
  if (!opts.reference.empty()) require_file("reference", opts.reference);
  if (opts.sparse_output.empty()) opts.sparse_output = stem_of(opts.output) + ".sparse.ht3";
  if (opts.diagnostics.empty()) opts.diagnostics = stem_of(opts.output) + ".diag.csv";
  const std::string manifest = opts.manifest.empty() ? opts.output + ".manifest" : opts.manifest;

  const Tensor3 y = read_tensor(opts.input);
  for (auto k : opts.export_bands) {
    if (k >= y.bands()) throw UsageError(fmt::format("--export-band {} out of range for {} bands", k, y.bands()));
  }
  opts.model = resolve_model(opts, y.shape());
  opts.solver.validate();
  Tensor3 ref;
  RunHooks hooks;
  if (!opts.reference.empty()) {
    ref = read_tensor(opts.reference);
    require_same_shape(y, ref, "reference");
    hooks.reference = &ref;
  }

  DenoiseResult result;
  try {
    result = run(y, opts.model, opts.solver, hooks);
  } catch (const DivergenceError& e) {
    write_text(opts.diagnostics, diagnostics_csv(e.diagnostics()));
    out << fmt::format("diverged; diagnostics so far in {}\n", opts.diagnostics);
    throw;
  }

  write_tensor(opts.output, result.x);
  write_tensor(opts.sparse_output, result.s);
  write_text(opts.diagnostics, diagnostics_csv(result.diagnostics));
  for (auto k : opts.export_bands) export_band(result.x, k, fmt::format("{}.band{}.pgm", stem_of(opts.output), k));
  if (!opts.save_params.empty()) save_params(opts.save_params, result.params, opts.model);

  KeyValue kv = denoise_manifest(opts);
  kv.set("result.iterations", result.diagnostics.size());
  kv.set("result.converged", result.converged ? 1 : 0);
  kv.set("result.scale_offset", result.scale.offset);
  kv.set("result.scale_range", result.scale.range);
  kv.set("result.output_digest", fmt::format("{:016x}", tensor_digest(result.x)));
  kv.set("result.sparse_digest", fmt::format("{:016x}", tensor_digest(result.s)));
  if (hooks.reference != nullptr) {
    kv.set("metrics.input_psnr", psnr(y, ref));
    add_metrics(kv, result.x, ref);
  }
  kv.save(manifest);

  out << fmt::format("iterations={} converged={}\n", result.diagnostics.size(), result.converged ? 1 : 0);
  if (hooks.reference != nullptr) {
    out << fmt::format("psnr={} ssim={}\n", num(psnr(result.x, ref)),
                       num(ssim(result.x, ref)));
  }
  return kExitOk;
}

// ----------------------------------------------------------------- metrics

int cmd_metrics(const MetricsOptions& opts, std::ostream& out) {
  require_file("estimate", opts.estimate);
  require_file("reference", opts.reference);
  const Tensor3 x = read_tensor(opts.estimate);
  const Tensor3 ref = read_tensor(opts.reference);
  require_same_shape(x, ref, "metrics");
  out << fmt::format("psnr={} ssim={}\n", num(psnr(x, ref)), num(ssim(x, ref)));
  if (opts.per_band) {
    for (std::size_t k = 0; k < x.bands(); ++k) {
      Tensor3 xk(x.rows(), x.cols(), 1);
      Tensor3 rk(x.rows(), x.cols(), 1);
      set_frontal_slice(xk, 0, frontal_slice(x, k));
      set_frontal_slice(rk, 0, frontal_slice(ref, k));
      out << fmt::format("band={} psnr={} ssim={}\n", k, num(psnr(xk, rk)), num(ssim(xk, rk)));
    }
  }
  return kExitOk;
}

// ------------------------------------------------------------------- bench

std::vector<std::string> bench_suites() { return {"hmf-layers", "hnt-layers", "factor-sizes", "smoke"}; }

std::vector<BenchPoint> bench_grid(const std::string& suite) {
  std::vector<BenchPoint> grid;
  if (suite == "hmf-layers") {
    for (std::size_t l = 2; l <= 7; ++l) grid.push_back({fmt::format("l={}", l), l, 2, 1});
  } else if (suite == "hnt-layers") {
    for (std::size_t m = 0; m <= 4; ++m) grid.push_back({fmt::format("m={}", m), 5, m, 1});
  } else if (suite == "factor-sizes") {
    for (std::size_t k = 1; k <= 20; ++k) {
      grid.push_back({fmt::format("({},{},{},{})", k, 2 * k, 4 * k, 8 * k), 5, 2, k});
    }
  } else if (suite == "smoke") {
    grid.push_back({"l=2,m=0", 2, 0, 1});
    grid.push_back({"l=3,m=1", 3, 1, 1});
  } else {
    throw UsageError(fmt::format("unknown bench suite '{}' (expected one of {})", suite,
                                 fmt::join(bench_suites(), ", ")));
  }
  return grid;
}

namespace {

struct BenchRow {
  BenchPoint point;
  ModelConfig model;
  double psnr = 0.0;
  double ssim = 0.0;
  std::size_t iterations = 0;
  double seconds = 0.0;
  std::uint64_t digest = 0;
  std::string error;
};

BenchRow bench_one(const BenchPoint& point, const Tensor3& noisy, const Tensor3& truth, const BenchOptions& opts) {
  BenchRow row;
  row.point = point;
  row.model = make_model_config(noisy.shape(), point.layers, point.transforms, point.rank_base);
  row.model.seed = opts.seed;
  const auto t0 = std::chrono::steady_clock::now();
  try {
    const DenoiseResult r = run(noisy, row.model, opts.solver);
    row.psnr = psnr(r.x, truth);
    row.ssim = ssim(r.x, truth);
    row.iterations = r.diagnostics.size();
    row.digest = tensor_digest(r.x);
  } catch (const NumericError& e) {
    row.error = e.what();
  }
  row.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return row;
}

}  // namespace

KeyValue bench_manifest(const BenchOptions& opts) {
  KeyValue kv;
  kv.set("tool", "h2tf");
  kv.set("tool_version", kToolVersion);
  kv.set("command", "bench");
  kv.set("suite", opts.suite);
  kv.set("out_dir", opts.out_dir);
  kv.set("shape", fmt::format("{},{},{}", opts.shape.h, opts.shape.w, opts.shape.b));
  kv.set("truth_rank", opts.truth_rank);
  kv.set("case", opts.case_id);
  kv.set("seed", opts.seed);
  kv.set("jobs", opts.jobs);
  kv.merge(to_keyvalue(opts.solver), "solver");
  return kv;
}

BenchOptions bench_from_manifest(const KeyValue& kv) {
  if (kv.get_string("command", "") != "bench") throw UsageError("manifest was not written by bench");
  BenchOptions opts;
  opts.suite = kv.get("suite");
  opts.out_dir = kv.get("out_dir");
  opts.shape = parse_shape(kv.get("shape"));
  opts.truth_rank = kv.get_u64("truth_rank", opts.truth_rank);
  opts.case_id = kv.get_int("case", opts.case_id);
  opts.seed = kv.get_u64("seed", opts.seed);
  opts.jobs = kv.get_u64("jobs", opts.jobs);
  opts.solver = solver_config_from(kv.section("solver"));
  return opts;
}

int cmd_bench(const BenchOptions& opts, std::ostream& out) {
  if (opts.out_dir.empty()) throw UsageError("output directory is required");
  if (opts.jobs == 0) throw UsageError("--jobs must be >= 1");
  const auto grid = bench_grid(opts.suite);
  opts.solver.validate();
  const NoiseSpec noise = NoiseSpec::for_case(opts.case_id, opts.seed);
  fs::create_directories(opts.out_dir);
  const fs::path dir(opts.out_dir);

  const Tensor3 truth = random_low_tubal_rank(opts.shape, opts.truth_rank, opts.seed);
  const Tensor3 noisy = make_case(truth, noise);
  write_tensor((dir / "truth.ht3").string(), truth);
  write_tensor((dir / "noisy.ht3").string(), noisy);
  const double noisy_psnr = psnr(noisy, truth);

  // Grid points share only read-only inputs; each run owns its RNG (seeded from
  // its model config) and its outputs, so results do not depend on --jobs.
  std::vector<BenchRow> rows(grid.size());
  for (std::size_t start = 0; start < grid.size(); start += opts.jobs) {
    const std::size_t stop = std::min(grid.size(), start + opts.jobs);
    std::vector<std::future<BenchRow>> batch;
    for (std::size_t i = start; i < stop; ++i) {
      batch.push_back(std::async(opts.jobs == 1 ? std::launch::deferred : std::launch::async, bench_one,
                                 std::cref(grid[i]), std::cref(noisy), std::cref(truth), std::cref(opts)));
    }
    for (std::size_t i = start; i < stop; ++i) {
      rows[i] = batch[i - start].get();
      const auto& r = rows[i];
      if (r.error.empty()) {
        out << fmt::format("{} {}: psnr={:.3f} ssim={:.4f} ({:.1f}s)\n", opts.suite, r.point.label, r.psnr, r.ssim,
                           r.seconds);
      } else {
        out << fmt::format("{} {}: failed: {}\n", opts.suite, r.point.label, r.error);
      }
    }
  }

  std::string csv = "suite,config,layers,transforms,ranks,psnr_noisy,psnr,ssim,iterations,seconds,status\n";
  for (const auto& r : rows) {
    csv += fmt::format("{},\"{}\",{},{},\"{}\",{},{},{},{},{},{}\n", opts.suite, r.point.label, r.point.layers,
                       r.point.transforms, fmt::join(r.model.ranks, ","), noisy_psnr, r.psnr, r.ssim, r.iterations,
                       r.seconds, r.error.empty() ? "ok" : "diverged");
  }
  write_text((dir / "bench.csv").string(), csv);

  KeyValue kv = bench_manifest(opts);
  kv.merge(KeyValue::parse(noise.to_text()), "noise");
  kv.set("truth_digest", fmt::format("{:016x}", tensor_digest(truth)));
  kv.set("noisy_digest", fmt::format("{:016x}", tensor_digest(noisy)));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    kv.set(fmt::format("point{}.config", i), rows[i].point.label);
    kv.set(fmt::format("point{}.psnr", i), rows[i].psnr);
    kv.set(fmt::format("point{}.ssim", i), rows[i].ssim);
    kv.set(fmt::format("point{}.output_digest", i), fmt::format("{:016x}", rows[i].digest));
  }
  kv.save((dir / "bench.manifest").string());
  out << fmt::format("wrote {}\n", (dir / "bench.csv").string());
  return kExitOk;
}

}  // namespace h2tf::cli

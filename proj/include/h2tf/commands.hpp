#pragma once

// The four command-line operations. Each returns a process exit code and
// reports through `out`; errors are mapped by run_guarded:
//
//   0  success
//   2  usage (bad or conflicting flags, invalid configuration)
//   3  I/O or file format
//   4  numeric failure (divergence, non-finite values)
//
// Every command that writes files also writes a manifest (plain key=value)
// from which the same command can be re-run with --from-manifest.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <ostream>
#include <string>
#include <vector>

#include "h2tf/errors.hpp"
#include "h2tf/keyvalue.hpp"
#include "h2tf/model.hpp"
#include "h2tf/noise.hpp"
#include "h2tf/solver.hpp"

namespace h2tf::cli {

inline constexpr const char* kToolVersion = "0.1.0";

enum ExitCode : int { kExitOk = 0, kExitUsage = 2, kExitIo = 3, kExitNumeric = 4 };

class UsageError : public Error {
 public:
  using Error::Error;
};

// Runs `body` and converts exceptions into exit codes, printing the message to `err`.
int run_guarded(const std::function<int()>& body, std::ostream& err);

struct SimulateOptions {
  std::string input;
  std::string output;
  std::string manifest;  // defaults to <output>.manifest
  NoiseSpec noise;
  // Instead of reading `input`, generate a random low-tubal-rank cube of this
  // shape and write it to `input`.
  bool synthetic = false;
  Shape3 synthetic_shape{32, 32, 8};
  std::size_t synthetic_rank = 2;
  std::uint64_t synthetic_seed = 0;
};

struct DenoiseOptions {
  std::string input;
  std::string output;
  std::string sparse_output;  // defaults to <output minus .ht3>.sparse.ht3
  std::string diagnostics;    // defaults to <output minus .ht3>.diag.csv
  std::string manifest;       // defaults to <output>.manifest
  std::string reference;      // optional ground truth for the psnr column
  std::string save_params;    // optional checkpoint directory
  std::vector<std::size_t> export_bands;
  // Empty ranks mean the default doubling pattern for (layers, rank_base).
  ModelConfig model;
  std::size_t rank_base = 1;
  SolverConfig solver;
};

struct MetricsOptions {
  std::string estimate;
  std::string reference;
  bool per_band = false;
};

struct BenchOptions {
  std::string suite = "smoke";
  std::string out_dir;
  Shape3 shape{32, 32, 8};
  std::size_t truth_rank = 2;
  int case_id = 5;
  std::uint64_t seed = 0;
  std::size_t jobs = 1;
  SolverConfig solver;
};

// A single grid point of a bench suite.
struct BenchPoint {
  std::string label;
  std::size_t layers = 5;
  std::size_t transforms = 2;
  std::size_t rank_base = 1;
};

std::vector<std::string> bench_suites();
// Throws UsageError for an unknown suite.
std::vector<BenchPoint> bench_grid(const std::string& suite);

int cmd_simulate(const SimulateOptions& opts, std::ostream& out);
int cmd_denoise(const DenoiseOptions& opts, std::ostream& out);
int cmd_metrics(const MetricsOptions& opts, std::ostream& out);
int cmd_bench(const BenchOptions& opts, std::ostream& out);

// Manifest round trip. The *_from_manifest functions restore every option
// that influences the numeric result; output paths come back too and may be
// overridden afterwards.
KeyValue simulate_manifest(const SimulateOptions& opts);
SimulateOptions simulate_from_manifest(const KeyValue& kv);
KeyValue denoise_manifest(const DenoiseOptions& opts);
DenoiseOptions denoise_from_manifest(const KeyValue& kv);

KeyValue bench_manifest(const BenchOptions& opts);
BenchOptions bench_from_manifest(const KeyValue& kv);

KeyValue to_keyvalue(const SolverConfig& cfg);
SolverConfig solver_config_from(const KeyValue& kv);

// Columns: iter,loss,fidelity,sparse_l1,res_dx,res_dy,res_dxdz,res_dydz,psnr,seconds
// (psnr is empty when no reference was given).
std::string diagnostics_csv(const std::vector<IterationRecord>& records);

// FNV-1a over the raw bytes of a tensor; recorded in manifests.
std::uint64_t tensor_digest(const Tensor3& x);

}  // namespace h2tf::cli

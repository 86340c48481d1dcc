#pragma once

// Mixed-noise simulation on [0, 1]-scaled cubes.
//
//   Case 1  Gaussian noise, std 0.2, every band
//   Case 2  Case 1 + salt-and-pepper impulses at rate 0.1
//   Case 3  Case 2 + deadlines in 50% of bands (6..10 per band, width 1..3)
//   Case 4  Case 2 + stripes in 40% of bands (6..15 per band)
//   Case 5  Case 2 + the deadlines of Case 3 + the stripes of Case 4
//
// Generators run in the order Gaussian -> impulse -> deadlines -> stripes.
// Choices the case list leaves open:
//   * deadlines and stripes run along columns (full image height);
//   * a deadline sets its columns to exactly 0;
//   * a stripe adds one offset drawn from U[-0.5, 0.5] to a whole column;
//   * affected bands are drawn uniformly without replacement, floor(fraction * b) of them;
//   * impulses replace a value with 0 or 1 with equal probability and leave
//     the remaining values untouched (no clamping).

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "h2tf/tensor.hpp"

namespace h2tf {

using Rng = std::mt19937_64;

// splitmix64 of (seed, stream); gives each generator its own stream.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream);

struct IntRange {
  int lo = 0;
  int hi = 0;
  friend bool operator==(const IntRange&, const IntRange&) = default;
};

struct NoiseSpec {
  int case_id = 1;
  double gaussian_std = 0.2;
  double impulse_rate = 0.1;
  double deadline_band_fraction = 0.5;
  IntRange deadline_count{6, 10};
  IntRange deadline_width{1, 3};
  double stripe_band_fraction = 0.4;
  IntRange stripe_count{6, 15};
  double stripe_amplitude = 0.5;
  std::uint64_t seed = 0;

  // Published parameters for the given case (1..5).
  static NoiseSpec for_case(int case_id, std::uint64_t seed = 0);

  void validate() const;

  // key=value lines, one per field.
  [[nodiscard]] std::string to_text() const;
  static NoiseSpec from_text(const std::string& text);

  friend bool operator==(const NoiseSpec&, const NoiseSpec&) = default;
};

struct Deadline {
  std::size_t start = 0;
  std::size_t width = 0;  // after clipping at the right border
};

struct Stripe {
  std::size_t column = 0;
  double offset = 0.0;
};

// What a generator actually did; filled only for the generators that ran.
struct CorruptionReport {
  std::size_t impulses = 0;
  std::vector<std::size_t> deadline_bands;
  std::vector<std::vector<Deadline>> deadlines;  // parallel to deadline_bands
  std::vector<std::size_t> stripe_bands;
  std::vector<std::vector<Stripe>> stripes;      // parallel to stripe_bands
};

// Zero the columns of each deadline in one band (clipped at the right border).
void apply_deadlines(Tensor3& x, std::size_t band, const std::vector<Deadline>& deadlines);
// Add each stripe's offset to its whole column in one band.
void apply_stripes(Tensor3& x, std::size_t band, const std::vector<Stripe>& stripes);

Tensor3 add_gaussian(const Tensor3& x, double stddev, Rng& rng);

// Warns (once per call) when the input leaves [0, 1]; impulse values stay 0 or 1 regardless.
Tensor3 add_impulse(const Tensor3& x, double rate, Rng& rng, CorruptionReport* report = nullptr);

Tensor3 add_deadlines(const Tensor3& x, double band_fraction, IntRange count, IntRange width, Rng& rng,
                      CorruptionReport* report = nullptr);

Tensor3 add_stripes(const Tensor3& x, double band_fraction, IntRange count, double amplitude, Rng& rng,
                    CorruptionReport* report = nullptr);

// Composes the generators for spec.case_id. Generator g in
// {0: Gaussian, 1: impulse, 2: deadlines, 3: stripes} draws from
// Rng(derive_seed(spec.seed, g)).
Tensor3 make_case(const Tensor3& clean, const NoiseSpec& spec, CorruptionReport* report = nullptr);

}  // namespace h2tf

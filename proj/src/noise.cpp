#include "h2tf/noise.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <spdlog/spdlog.h>

#include "h2tf/keyvalue.hpp"

namespace h2tf {

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

NoiseSpec NoiseSpec::for_case(int case_id, std::uint64_t seed) {
  NoiseSpec s;
  s.case_id = case_id;
  s.seed = seed;
  s.validate();
  return s;
}

namespace {

void check_fraction(double v, const char* name) {
  if (!(v >= 0.0 && v <= 1.0)) throw ArgumentError(fmt::format("{} must lie in [0, 1], got {}", name, v));
}

void check_range(const IntRange& r, const char* name) {
  if (r.lo < 0 || r.lo > r.hi) throw ArgumentError(fmt::format("{} must satisfy 0 <= lo <= hi, got {}..{}", name, r.lo, r.hi));
}

std::string range_text(const IntRange& r) { return fmt::format("{}..{}", r.lo, r.hi); }

IntRange parse_range(const std::string& s) {
  const auto dots = s.find("..");
  if (dots == std::string::npos) throw ArgumentError(fmt::format("expected lo..hi, got '{}'", s));
  return {std::stoi(s.substr(0, dots)), std::stoi(s.substr(dots + 2))};
}

std::vector<std::size_t> choose_bands(std::size_t bands, double fraction, Rng& rng) {
  const auto count = static_cast<std::size_t>(std::floor(fraction * static_cast<double>(bands)));
  std::vector<std::size_t> all(bands);
  std::iota(all.begin(), all.end(), 0);
  std::vector<std::size_t> picked;
  std::sample(all.begin(), all.end(), std::back_inserter(picked), count, rng);
  return picked;
}

int draw_int(IntRange r, Rng& rng) { return std::uniform_int_distribution<int>(r.lo, r.hi)(rng); }

// Places intervals of the given widths in [0, w) without overlap, uniformly
// over all such placements. When they cannot fit, they are laid out left to
// right and clipped at the border.
std::vector<Deadline> place_deadlines(const std::vector<std::size_t>& widths, std::size_t w, Rng& rng) {
  const std::size_t total = std::accumulate(widths.begin(), widths.end(), std::size_t{0});
  std::vector<Deadline> out;
  if (total > w) {
    std::size_t pos = 0;
    for (auto width : widths) {
      const std::size_t start = std::min(pos, w - 1);
      out.push_back({start, std::min(width, w - start)});
      pos += width;
    }
    return out;
  }
  // Stars and bars: choose n gap-slots among free + n positions.
  const std::size_t n = widths.size();
  const std::size_t free = w - total;
  std::vector<std::size_t> slots(free + n);
  std::iota(slots.begin(), slots.end(), 0);
  std::vector<std::size_t> picked;
  std::sample(slots.begin(), slots.end(), std::back_inserter(picked), n, rng);
  std::size_t consumed = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t start = picked[i] - i + consumed;
    out.push_back({start, widths[i]});
    consumed += widths[i];
  }
  return out;
}

}  // namespace

void NoiseSpec::validate() const {
  if (case_id < 1 || case_id > 5) throw ArgumentError(fmt::format("unknown noise case {}", case_id));
  if (!(gaussian_std >= 0.0)) throw ArgumentError("gaussian_std must be >= 0");
  check_fraction(impulse_rate, "impulse_rate");
  check_fraction(deadline_band_fraction, "deadline_band_fraction");
  check_fraction(stripe_band_fraction, "stripe_band_fraction");
  check_range(deadline_count, "deadline_count");
  check_range(deadline_width, "deadline_width");
  check_range(stripe_count, "stripe_count");
  if (deadline_width.lo < 1) throw ArgumentError("deadline widths must be >= 1");
  if (!(stripe_amplitude >= 0.0)) throw ArgumentError("stripe_amplitude must be >= 0");
}

std::string NoiseSpec::to_text() const {
  KeyValue kv;
  kv.set("case", case_id);
  kv.set("gaussian_std", gaussian_std);
  kv.set("impulse_rate", impulse_rate);
  kv.set("deadline_band_fraction", deadline_band_fraction);
  kv.set("deadline_count", range_text(deadline_count));
  kv.set("deadline_width", range_text(deadline_width));
  kv.set("stripe_band_fraction", stripe_band_fraction);
  kv.set("stripe_count", range_text(stripe_count));
  kv.set("stripe_amplitude", stripe_amplitude);
  kv.set("seed", seed);
  return kv.to_text();
}

NoiseSpec NoiseSpec::from_text(const std::string& text) {
  const KeyValue kv = KeyValue::parse(text);
  NoiseSpec s = for_case(kv.get_int("case", 1));
  s.gaussian_std = kv.get_double("gaussian_std", s.gaussian_std);
  s.impulse_rate = kv.get_double("impulse_rate", s.impulse_rate);
  s.deadline_band_fraction = kv.get_double("deadline_band_fraction", s.deadline_band_fraction);
  if (auto v = kv.find("deadline_count")) s.deadline_count = parse_range(*v);
  if (auto v = kv.find("deadline_width")) s.deadline_width = parse_range(*v);
  s.stripe_band_fraction = kv.get_double("stripe_band_fraction", s.stripe_band_fraction);
  if (auto v = kv.find("stripe_count")) s.stripe_count = parse_range(*v);
  s.stripe_amplitude = kv.get_double("stripe_amplitude", s.stripe_amplitude);
  s.seed = kv.get_u64("seed", s.seed);
  s.validate();
  return s;
}

Tensor3 add_gaussian(const Tensor3& x, double stddev, Rng& rng) {
  if (!(stddev >= 0.0)) throw ArgumentError(fmt::format("gaussian std must be >= 0, got {}", stddev));
  Tensor3 out = x;
  if (stddev == 0.0) return out;
  std::normal_distribution<double> gauss(0.0, stddev);
  for (auto& v : out.data()) v += gauss(rng);
  return out;
}

namespace {

Tensor3 impulse_impl(const Tensor3& x, double rate, Rng& rng, CorruptionReport* report) {
  check_fraction(rate, "impulse rate");
  Tensor3 out = x;
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::size_t hits = 0;
  for (auto& v : out.data()) {
    // Both draws happen for every element so the stream layout does not depend on the data.
    const double select = unit(rng);
    const double salt = unit(rng);
    if (select < rate) {
      v = salt < 0.5 ? 0.0 : 1.0;
      ++hits;
    }
  }
  if (report != nullptr) report->impulses = hits;
  return out;
}

}  // namespace

Tensor3 add_impulse(const Tensor3& x, double rate, Rng& rng, CorruptionReport* report) {
  const auto [lo, hi] = std::ranges::minmax(x.data());
  if (lo < 0.0 || hi > 1.0) {
    spdlog::warn("add_impulse: input spans [{}, {}], outside [0, 1]; impulses still use 0 and 1", lo, hi);
  }
  return impulse_impl(x, rate, rng, report);
}

void apply_deadlines(Tensor3& x, std::size_t band, const std::vector<Deadline>& deadlines) {
  if (band >= x.bands()) throw RangeError(fmt::format("band {} out of range for {} bands", band, x.bands()));
  for (const auto& dl : deadlines) {
    const std::size_t stop = std::min(x.cols(), dl.start + dl.width);
    for (std::size_t j = dl.start; j < stop; ++j)
      for (std::size_t i = 0; i < x.rows(); ++i) x(i, j, band) = 0.0;
  }
}

void apply_stripes(Tensor3& x, std::size_t band, const std::vector<Stripe>& stripes) {
  if (band >= x.bands()) throw RangeError(fmt::format("band {} out of range for {} bands", band, x.bands()));
  for (const auto& st : stripes) {
    if (st.column >= x.cols()) throw RangeError(fmt::format("stripe column {} out of range", st.column));
    for (std::size_t i = 0; i < x.rows(); ++i) x(i, st.column, band) += st.offset;
  }
}

Tensor3 add_deadlines(const Tensor3& x, double band_fraction, IntRange count, IntRange width, Rng& rng,
                      CorruptionReport* report) {
  check_fraction(band_fraction, "deadline band fraction");
  check_range(count, "deadline count");
  check_range(width, "deadline width");
  Tensor3 out = x;
  const auto bands = choose_bands(x.bands(), band_fraction, rng);
  for (auto k : bands) {
    const int n = draw_int(count, rng);
    std::vector<std::size_t> widths;
    for (int i = 0; i < n; ++i) widths.push_back(static_cast<std::size_t>(draw_int(width, rng)));
    auto placed = place_deadlines(widths, x.cols(), rng);
    apply_deadlines(out, k, placed);
    if (report != nullptr) {
      report->deadline_bands.push_back(k);
      report->deadlines.push_back(std::move(placed));
    }
  }
  return out;
}

Tensor3 add_stripes(const Tensor3& x, double band_fraction, IntRange count, double amplitude, Rng& rng,
                    CorruptionReport* report) {
  check_fraction(band_fraction, "stripe band fraction");
  check_range(count, "stripe count");
  Tensor3 out = x;
  const auto bands = choose_bands(x.bands(), band_fraction, rng);
  std::uniform_real_distribution<double> offset_dist(-amplitude, amplitude);
  std::vector<std::size_t> columns(x.cols());
  std::iota(columns.begin(), columns.end(), 0);
  for (auto k : bands) {
    const auto n = std::min<std::size_t>(static_cast<std::size_t>(draw_int(count, rng)), x.cols());
    std::vector<std::size_t> picked;
    std::sample(columns.begin(), columns.end(), std::back_inserter(picked), n, rng);
    std::vector<Stripe> stripes;
    for (auto j : picked) stripes.push_back({j, amplitude > 0.0 ? offset_dist(rng) : 0.0});
    apply_stripes(out, k, stripes);
    if (report != nullptr) {
      report->stripe_bands.push_back(k);
      report->stripes.push_back(std::move(stripes));
    }
  }
  return out;
}

Tensor3 make_case(const Tensor3& clean, const NoiseSpec& spec, CorruptionReport* report) {
  spec.validate();
  const auto [lo, hi] = std::ranges::minmax(clean.data());
  if (lo < 0.0 || hi > 1.0) {
    spdlog::warn("make_case: clean data spans [{}, {}]; noise levels assume [0, 1] scaling", lo, hi);
  }
  Rng gauss_rng(derive_seed(spec.seed, 0));
  Tensor3 y = add_gaussian(clean, spec.gaussian_std, gauss_rng);
  if (spec.case_id == 1) return y;

  // After the Gaussian stage values routinely leave [0, 1]; that is expected here.
  Rng impulse_rng(derive_seed(spec.seed, 1));
  y = impulse_impl(y, spec.impulse_rate, impulse_rng, report);
  if (spec.case_id == 3 || spec.case_id == 5) {
    Rng rng(derive_seed(spec.seed, 2));
    y = add_deadlines(y, spec.deadline_band_fraction, spec.deadline_count, spec.deadline_width, rng, report);
  }
  if (spec.case_id == 4 || spec.case_id == 5) {
    Rng rng(derive_seed(spec.seed, 3));
    y = add_stripes(y, spec.stripe_band_fraction, spec.stripe_count, spec.stripe_amplitude, rng, report);
  }
  return y;
}

}  // namespace h2tf

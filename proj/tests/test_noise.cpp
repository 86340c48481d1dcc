#include <doctest.h>

#include <cmath>
#include <set>

#include "h2tf/noise.hpp"
#include "h2tf/synthetic.hpp"
#include "oracles.hpp"

using namespace h2tf;

namespace {

// Columns of band k that are entirely zero.
std::size_t zero_columns(const Tensor3& x, std::size_t k) {
  std::size_t n = 0;
  for (std::size_t j = 0; j < x.cols(); ++j) {
    bool all = true;
    for (std::size_t i = 0; i < x.rows() && all; ++i) all = x(i, j, k) == 0.0;
    n += all ? 1 : 0;
  }
  return n;
}

}  // namespace

TEST_CASE("seed derivation") {
  std::set<std::uint64_t> seen;
  for (std::uint64_t s = 0; s < 4; ++s)
    for (std::uint64_t g = 0; g < 4; ++g) seen.insert(derive_seed(s, g));
  CHECK(seen.size() == 16);
  CHECK(derive_seed(5, 2) == derive_seed(5, 2));
}

TEST_CASE("add_gaussian") {
  const Tensor3 zero(64, 64, 8);
  Rng rng(1);
  CHECK(add_gaussian(zero, 0.0, rng) == zero);
  Rng a(2), b(2);
  const Tensor3 na = add_gaussian(zero, 0.2, a);
  CHECK(na == add_gaussian(zero, 0.2, b));
  const double sd = std::sqrt(squared_norm(na) / static_cast<double>(na.size()));
  CHECK(std::abs(sd - 0.2) < 0.05 * 0.2);
  CHECK_THROWS_AS(add_gaussian(zero, -1.0, rng), ArgumentError);
}

TEST_CASE("add_impulse") {
  Rng rng(3);
  const Tensor3 x(10, 10, 1000, 0.5);
  CHECK(add_impulse(x, 0.0, rng) == x);
  const Tensor3 all = add_impulse(Tensor3(4, 4, 2, 0.3), 1.0, rng);
  for (double v : all.data()) CHECK((v == 0.0 || v == 1.0));
  CorruptionReport rep;
  const Tensor3 y = add_impulse(x, 0.1, rng, &rep);
  std::size_t changed = 0;
  for (double v : y.data()) changed += v != 0.5 ? 1 : 0;
  CHECK(changed == rep.impulses);
  const double frac = static_cast<double>(changed) / static_cast<double>(x.size());
  CHECK(frac >= 0.09);
  CHECK(frac <= 0.11);
  // Out-of-range input only warns.
  CHECK_NOTHROW(add_impulse(Tensor3(2, 2, 2, 3.0), 0.5, rng));
  CHECK_THROWS_AS(add_impulse(x, 1.5, rng), ArgumentError);
}

TEST_CASE("add_deadlines") {
  Rng rng(4);
  const Tensor3 ones(8, 8, 4, 1.0);
  CHECK(add_deadlines(ones, 0.0, {6, 10}, {1, 3}, rng) == ones);

  SUBCASE("single full-width deadline blanks the band") {
    const Tensor3 y = add_deadlines(Tensor3(5, 7, 1, 1.0), 1.0, {1, 1}, {7, 7}, rng);
    CHECK(squared_norm(y) == 0.0);
  }
  SUBCASE("too wide is clipped") {
    CorruptionReport rep;
    const Tensor3 y = add_deadlines(Tensor3(5, 4, 1, 1.0), 1.0, {1, 1}, {9, 9}, rng, &rep);
    CHECK(squared_norm(y) == 0.0);
    REQUIRE(rep.deadlines.size() == 1);
    CHECK(rep.deadlines[0][0].width == 4);
  }
  SUBCASE("defaults on 64x64x32") {
    CorruptionReport rep;
    const Tensor3 y = add_deadlines(Tensor3(64, 64, 32, 1.0), 0.5, {6, 10}, {1, 3}, rng, &rep);
    CHECK(rep.deadline_bands.size() == 16);
    std::size_t touched = 0;
    for (std::size_t k = 0; k < 32; ++k) {
      const std::size_t z = zero_columns(y, k);
      if (z > 0) {
        ++touched;
        CHECK(z >= 6);
        CHECK(z <= 30);
      }
    }
    CHECK(touched == 16);
    for (const auto& band : rep.deadlines) {
      CHECK(band.size() >= 6);
      CHECK(band.size() <= 10);
      for (const auto& d : band) {
        CHECK(d.width >= 1);
        CHECK(d.width <= 3);
      }
    }
  }
}

TEST_CASE("add_stripes") {
  Rng rng(5);
  const Tensor3 x(8, 8, 4, 0.5);
  CHECK(add_stripes(x, 0.0, {6, 15}, 0.5, rng) == x);

  SUBCASE("forced offset") {
    Tensor3 z(6, 5, 2);
    apply_stripes(z, 1, {{3, 0.3}});
    for (std::size_t i = 0; i < 6; ++i) CHECK(z(i, 3, 1) == 0.3);
    CHECK(squared_norm(z) == doctest::Approx(6 * 0.09));
    CHECK_THROWS_AS(apply_stripes(z, 2, {{0, 0.1}}), RangeError);
  }
  SUBCASE("defaults on 64x64x32") {
    const Tensor3 base(64, 64, 32, 0.5);
    CorruptionReport rep;
    const Tensor3 y = add_stripes(base, 0.4, {6, 15}, 0.5, rng, &rep);
    CHECK(rep.stripe_bands.size() == 12);
    std::size_t touched = 0;
    for (std::size_t k = 0; k < 32; ++k) {
      std::size_t cols = 0;
      for (std::size_t j = 0; j < 64; ++j) {
        const double off = y(0, j, k) - 0.5;
        bool uniform = true;
        for (std::size_t i = 1; i < 64; ++i) uniform = uniform && y(i, j, k) - 0.5 == off;
        CHECK(uniform);
        if (off != 0.0) {
          ++cols;
          CHECK(std::abs(off) <= 0.5);
        }
      }
      if (cols > 0) {
        ++touched;
        CHECK(cols >= 6);
        CHECK(cols <= 15);
      }
    }
    CHECK(touched == 12);
  }
}

TEST_CASE("make_case") {
  const Tensor3 clean = random_low_tubal_rank({16, 16, 8}, 2, 7);
  SUBCASE("case 1 is the Gaussian stage alone") {
    const NoiseSpec spec = NoiseSpec::for_case(1, 9);
    Rng rng(derive_seed(9, 0));
    CHECK(make_case(clean, spec) == add_gaussian(clean, 0.2, rng));
  }
  SUBCASE("case 5 is the manual composition") {
    const NoiseSpec spec = NoiseSpec::for_case(5, 11);
    Rng g0(derive_seed(11, 0)), g1(derive_seed(11, 1)), g2(derive_seed(11, 2)), g3(derive_seed(11, 3));
    Tensor3 y = add_gaussian(clean, 0.2, g0);
    y = add_impulse(y, 0.1, g1);
    y = add_deadlines(y, 0.5, {6, 10}, {1, 3}, g2);
    y = add_stripes(y, 0.4, {6, 15}, 0.5, g3);
    const Tensor3 got = make_case(clean, spec);
    CHECK(got == y);
    CHECK(got.shape() == clean.shape());
    CHECK(make_case(clean, spec) == got);
  }
  SUBCASE("published parameters") {
    for (int c = 1; c <= 5; ++c) {
      const NoiseSpec s = NoiseSpec::for_case(c);
      CHECK(s.gaussian_std == 0.2);
      CHECK(s.impulse_rate == 0.1);
      CHECK(s.deadline_band_fraction == 0.5);
      CHECK(s.deadline_count == IntRange{6, 10});
      CHECK(s.deadline_width == IntRange{1, 3});
      CHECK(s.stripe_band_fraction == 0.4);
      CHECK(s.stripe_count == IntRange{6, 15});
    }
    CHECK_THROWS_AS(NoiseSpec::for_case(6), ArgumentError);
    NoiseSpec s;
    s.case_id = 0;
    CHECK_THROWS_AS(make_case(clean, s), ArgumentError);
  }
  SUBCASE("noise settings text round trip") {
    NoiseSpec s = NoiseSpec::for_case(4, 123456789012345ULL);
    s.gaussian_std = 0.1 + 1e-17;
    s.stripe_count = {2, 3};
    CHECK(NoiseSpec::from_text(s.to_text()) == s);
  }
}

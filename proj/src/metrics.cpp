#include "h2tf/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

namespace h2tf {

double psnr(const Tensor3& x, const Tensor3& ref) {
  require_same_shape(x, ref, "psnr");
  double total = 0.0;
  for (std::size_t k = 0; k < x.bands(); ++k) {
    auto xs = x.slice_span(k);
    auto rs = ref.slice_span(k);
    double sse = 0.0;
    for (std::size_t n = 0; n < xs.size(); ++n) {
      const double d = xs[n] - rs[n];
      sse += d * d;
    }
    const double mse = sse / static_cast<double>(xs.size());
    total += mse > 0.0 ? std::min(kPsnrCap, -10.0 * std::log10(mse)) : kPsnrCap;
  }
  return total / static_cast<double>(x.bands());
}

std::size_t ssim_window_size(std::size_t h, std::size_t w, const SsimParams& p) {
  std::size_t side = std::min({p.window, h, w});
  if (side % 2 == 0) --side;
  return std::max<std::size_t>(side, 1);
}

namespace {

std::vector<double> gaussian_taps(std::size_t side, double sigma) {
  std::vector<double> g(side);
  const double c = (static_cast<double>(side) - 1.0) / 2.0;
  double sum = 0.0;
  for (std::size_t i = 0; i < side; ++i) {
    const double d = static_cast<double>(i) - c;
    g[i] = std::exp(-d * d / (2.0 * sigma * sigma));
    sum += g[i];
  }
  for (auto& v : g) v /= sum;
  return g;
}

// Separable weighted sum over every fully-contained window ("valid" filtering).
std::vector<double> filter_valid(std::span<const double> img, std::size_t h, std::size_t w,
                                 const std::vector<double>& g1, std::size_t side) {
  const std::size_t oh = h - side + 1;
  const std::size_t ow = w - side + 1;
  std::vector<double> tmp(h * ow, 0.0);
  for (std::size_t i = 0; i < h; ++i)
    for (std::size_t j = 0; j < ow; ++j) {
      double acc = 0.0;
      for (std::size_t t = 0; t < side; ++t) acc += g1[t] * img[i * w + j + t];
      tmp[i * ow + j] = acc;
    }
  std::vector<double> out(oh * ow, 0.0);
  for (std::size_t i = 0; i < oh; ++i)
    for (std::size_t j = 0; j < ow; ++j) {
      double acc = 0.0;
      for (std::size_t t = 0; t < side; ++t) acc += g1[t] * tmp[(i + t) * ow + j];
      out[i * ow + j] = acc;
    }
  return out;
}

}  // namespace

double ssim(const Tensor3& x, const Tensor3& ref, const SsimParams& p) {
  require_same_shape(x, ref, "ssim");
  const std::size_t h = x.rows();
  const std::size_t w = x.cols();
  const std::size_t side = ssim_window_size(h, w, p);
  // The 2-D window is the outer product of these taps.
  const std::vector<double> g1 = gaussian_taps(side, p.sigma);
  const double c1 = (p.k1 * p.dynamic_range) * (p.k1 * p.dynamic_range);
  const double c2 = (p.k2 * p.dynamic_range) * (p.k2 * p.dynamic_range);

  double total = 0.0;
  std::vector<double> xx(h * w), yy(h * w), xy(h * w);
  for (std::size_t k = 0; k < x.bands(); ++k) {
    auto a = x.slice_span(k);
    auto b = ref.slice_span(k);
    for (std::size_t n = 0; n < a.size(); ++n) {
      xx[n] = a[n] * a[n];
      yy[n] = b[n] * b[n];
      xy[n] = a[n] * b[n];
    }
    const auto mu_x = filter_valid(a, h, w, g1, side);
    const auto mu_y = filter_valid(b, h, w, g1, side);
    const auto e_xx = filter_valid(xx, h, w, g1, side);
    const auto e_yy = filter_valid(yy, h, w, g1, side);
    const auto e_xy = filter_valid(xy, h, w, g1, side);
    double band = 0.0;
    for (std::size_t n = 0; n < mu_x.size(); ++n) {
      const double mx = mu_x[n];
      const double my = mu_y[n];
      const double vx = e_xx[n] - mx * mx;
      const double vy = e_yy[n] - my * my;
      const double cov = e_xy[n] - mx * my;
      band += ((2.0 * mx * my + c1) * (2.0 * cov + c2)) / ((mx * mx + my * my + c1) * (vx + vy + c2));
    }
    total += band / static_cast<double>(mu_x.size());
  }
  return total / static_cast<double>(x.bands());
}

}  // namespace h2tf

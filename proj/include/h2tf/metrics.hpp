#pragma once

#include "h2tf/tensor.hpp"

namespace h2tf {

// Per-band PSNR cap, used when a band matches the reference exactly.
inline constexpr double kPsnrCap = 100.0;

// Mean over bands of 10*log10(1 / MSE_k), peak 1 for data scaled to [0, 1].
// Each band is capped at kPsnrCap, so identical inputs give exactly kPsnrCap.
double psnr(const Tensor3& x, const Tensor3& ref);

struct SsimParams {
  std::size_t window = 11;
  double sigma = 1.5;
  double k1 = 0.01;
  double k2 = 0.03;
  double dynamic_range = 1.0;
};

// Side of the Gaussian window actually used for an h x w image: the nominal
// window, shrunk to the largest odd size that fits when the image is smaller.
std::size_t ssim_window_size(std::size_t h, std::size_t w, const SsimParams& p = {});

// Single-scale SSIM per band over all fully-contained windows, averaged over
// windows and then over bands.
double ssim(const Tensor3& x, const Tensor3& ref, const SsimParams& p = {});

}  // namespace h2tf

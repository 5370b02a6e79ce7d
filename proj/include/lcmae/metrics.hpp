#pragma once

#include <vector>

#include "lcmae/image.hpp"

namespace lcmae {

struct SsimParams {
  int window = 11;
  double sigma = 1.5;
  double k1 = 0.01;
  double k2 = 0.03;
  double dynamic_range = 1.0;
  int max_scales = 5;

  double c1() const { return (k1 * dynamic_range) * (k1 * dynamic_range); }
  double c2() const { return (k2 * dynamic_range) * (k2 * dynamic_range); }
  void validate() const;
};

// Weights for the five-scale variant; truncated and renormalized when the
// plane is too small to pool down that far.
const std::vector<double>& msssim_weights();

struct SsimStats {
  double ssim;  // mean over valid window positions
  double cs;    // contrast-structure term alone
};

// x, y are row-major h*w planes. Windows are "valid": the Gaussian window
// never leaves the plane.
SsimStats ssim_stats(const std::vector<double>& x, const std::vector<double>& y,
                     int h, int w, const SsimParams& p = {});
double ssim(const std::vector<double>& x, const std::vector<double>& y, int h, int w,
            const SsimParams& p = {});

double ms_ssim(const std::vector<double>& x, const std::vector<double>& y, int h,
               int w, const SsimParams& p = {});

// Channel mean of per-plane MS-SSIM. Shapes must match.
double ms_ssim(const Image& x, const Image& y, const SsimParams& p = {});

// How many scales a h x w plane supports: the coarsest level must still fit
// one window.
int usable_scales(int h, int w, const SsimParams& p = {});

}  // namespace lcmae

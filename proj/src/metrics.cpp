#include "lcmae/metrics.hpp"

#include <cmath>
#include <stdexcept>

#include "lcmae/common.hpp"

namespace lcmae {

void SsimParams::validate() const {
  if (window < 1 || window % 2 == 0)
    throw ContractError("SsimParams: window must be odd and positive");
  if (sigma <= 0.0) throw ContractError("SsimParams: sigma must be positive");
  if (dynamic_range <= 0.0) throw ContractError("SsimParams: dynamic_range must be positive");
  if (max_scales < 1 || max_scales > 5)
    throw ContractError("SsimParams: max_scales must be in [1,5]");
}

const std::vector<double>& msssim_weights() {
  static const std::vector<double> w = {0.0448, 0.2856, 0.3001, 0.2363, 0.1333};
  return w;
}

namespace {

std::vector<double> gaussian_window(int n, double sigma) {
  std::vector<double> w(static_cast<size_t>(n));
  double c = (n - 1) / 2.0;
  double sum = 0.0;
  for (int i = 0; i < n; ++i) {
    w[i] = std::exp(-(i - c) * (i - c) / (2.0 * sigma * sigma));
    sum += w[i];
  }
  for (double& v : w) v /= sum;
  return w;
}

// Separable valid convolution with a normalized 1-D kernel applied along
// both axes. Output is (h-n+1) x (w-n+1).
std::vector<double> filter_valid(const std::vector<double>& img, int h, int w,
                                 const std::vector<double>& k) {
  int n = static_cast<int>(k.size());
  int oh = h - n + 1, ow = w - n + 1;
  std::vector<double> tmp(static_cast<size_t>(h) * ow);
  for (int r = 0; r < h; ++r)
    for (int c = 0; c < ow; ++c) {
      double s = 0.0;
      for (int i = 0; i < n; ++i) s += k[i] * img[static_cast<size_t>(r) * w + c + i];
      tmp[static_cast<size_t>(r) * ow + c] = s;
    }
  std::vector<double> out(static_cast<size_t>(oh) * ow);
  for (int r = 0; r < oh; ++r)
    for (int c = 0; c < ow; ++c) {
      double s = 0.0;
      for (int i = 0; i < n; ++i) s += k[i] * tmp[static_cast<size_t>(r + i) * ow + c];
      out[static_cast<size_t>(r) * ow + c] = s;
    }
  return out;
}

std::vector<double> downsample2(const std::vector<double>& img, int h, int w, int& oh,
                                int& ow) {
  oh = h / 2;
  ow = w / 2;
  std::vector<double> out(static_cast<size_t>(oh) * ow);
  for (int r = 0; r < oh; ++r)
    for (int c = 0; c < ow; ++c) {
      double s = img[static_cast<size_t>(2 * r) * w + 2 * c] +
                 img[static_cast<size_t>(2 * r) * w + 2 * c + 1] +
                 img[static_cast<size_t>(2 * r + 1) * w + 2 * c] +
                 img[static_cast<size_t>(2 * r + 1) * w + 2 * c + 1];
      out[static_cast<size_t>(r) * ow + c] = s * 0.25;
    }
  return out;
}

}  // namespace

SsimStats ssim_stats(const std::vector<double>& x, const std::vector<double>& y, int h,
                     int w, const SsimParams& p) {
  p.validate();
  if (x.size() != static_cast<size_t>(h) * w || y.size() != x.size())
    throw ShapeError("ssim: plane size mismatch");
  if (h < p.window || w < p.window)
    throw ContractError("ssim: plane smaller than the window");
  std::vector<double> k = gaussian_window(p.window, p.sigma);
  size_t n = x.size();
  std::vector<double> xx(n), yy(n), xy(n);
  for (size_t i = 0; i < n; ++i) {
    xx[i] = x[i] * x[i];
    yy[i] = y[i] * y[i];
    xy[i] = x[i] * y[i];
  }
  std::vector<double> mx = filter_valid(x, h, w, k);
  std::vector<double> my = filter_valid(y, h, w, k);
  std::vector<double> mxx = filter_valid(xx, h, w, k);
  std::vector<double> myy = filter_valid(yy, h, w, k);
  std::vector<double> mxy = filter_valid(xy, h, w, k);
  double c1 = p.c1(), c2 = p.c2();
  double ssim_sum = 0.0, cs_sum = 0.0;
  for (size_t i = 0; i < mx.size(); ++i) {
    double vx = mxx[i] - mx[i] * mx[i];
    double vy = myy[i] - my[i] * my[i];
    double cxy = mxy[i] - mx[i] * my[i];
    double cs = (2.0 * cxy + c2) / (vx + vy + c2);
    double lum = (2.0 * mx[i] * my[i] + c1) / (mx[i] * mx[i] + my[i] * my[i] + c1);
    ssim_sum += lum * cs;
    cs_sum += cs;
  }
  double m = static_cast<double>(mx.size());
  return {ssim_sum / m, cs_sum / m};
}

double ssim(const std::vector<double>& x, const std::vector<double>& y, int h, int w,
            const SsimParams& p) {
  return ssim_stats(x, y, h, w, p).ssim;
}

int usable_scales(int h, int w, const SsimParams& p) {
  p.validate();
  int scales = 0;
  while (scales < p.max_scales) {
    int d = 1 << scales;
    if (h / d < p.window || w / d < p.window) break;
    ++scales;
  }
  return scales;
}

double ms_ssim(const std::vector<double>& x, const std::vector<double>& y, int h, int w,
               const SsimParams& p) {
  int scales = usable_scales(h, w, p);
  if (scales < 1) throw ContractError("ms_ssim: plane smaller than the window");
  std::vector<double> weights(msssim_weights().begin(),
                              msssim_weights().begin() + scales);
  double wsum = 0.0;
  for (double v : weights) wsum += v;
  for (double& v : weights) v /= wsum;

  std::vector<double> cx = x, cy = y;
  int ch = h, cw = w;
  double result = 1.0;
  for (int s = 0; s < scales; ++s) {
    SsimStats st = ssim_stats(cx, cy, ch, cw, p);
    double term = (s == scales - 1) ? st.ssim : st.cs;
    // Negative terms are clamped; the weighted geometric combination is not
    // defined for them and they only arise for adversarial inputs.
    term = std::max(term, 0.0);
    result *= std::pow(term, weights[static_cast<size_t>(s)]);
    if (s != scales - 1) {
      int nh, nw;
      cx = downsample2(cx, ch, cw, nh, nw);
      cy = downsample2(cy, ch, cw, nh, nw);
      ch = nh;
      cw = nw;
    }
  }
  return result;
}

double ms_ssim(const Image& x, const Image& y, const SsimParams& p) {
  if (x.height != y.height || x.width != y.width || x.channels != y.channels)
    throw ShapeError("ms_ssim: image shape mismatch");
  if (x.channels < 1) throw ContractError("ms_ssim: image has no channels");
  double acc = 0.0;
  size_t plane = static_cast<size_t>(x.height) * x.width;
  for (int c = 0; c < x.channels; ++c) {
    std::vector<double> px(plane), py(plane);
    const float* xd = x.plane(c);
    const float* yd = y.plane(c);
    for (size_t i = 0; i < plane; ++i) {
      px[i] = xd[i];
      py[i] = yd[i];
    }
    acc += ms_ssim(px, py, x.height, x.width, p);
  }
  return acc / x.channels;
}

}  // namespace lcmae

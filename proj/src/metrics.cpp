#include "plrp/metrics.hpp"

#include "plrp/error.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace plrp::diagnostics {

namespace {

void check_pair(const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) {
    throw ShapeError("image shapes differ: " + to_string(a.shape()) + " vs " + to_string(b.shape()));
  }
  if (a.size() == 0) throw ShapeError("cannot compare empty images");
  for (const Tensor* t : {&a, &b}) {
    for (double v : t->values()) {
      if (v < 0.0 || v > 1.0) throw ValueError("image values must lie in [0, 1]");
    }
  }
}

} // namespace

double mse(const Tensor& a, const Tensor& b) {
  check_pair(a, b);
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    acc += d * d;
  }
  return acc / static_cast<double>(a.size());
}

double psnr(const Tensor& a, const Tensor& b) {
  const double e = mse(a, b);
  if (e == 0.0) return std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(1.0 / e);
}

double ssim(const Tensor& a, const Tensor& b) {
  check_pair(a, b);
  if (a.rank() != 2 && a.rank() != 3) throw ShapeError("ssim expects [H,W] or [C,H,W]");
  const std::size_t C = a.rank() == 3 ? a.extent(0) : 1;
  const std::size_t H = a.extent(a.rank() - 2), W = a.extent(a.rank() - 1);
  const std::size_t wh = std::min(kSsimWindow, H), ww = std::min(kSsimWindow, W);
  const double n = static_cast<double>(wh * ww);

  double total = 0.0;
  std::size_t windows = 0;
  for (std::size_t c = 0; c < C; ++c) {
    const std::size_t base = c * H * W;
    for (std::size_t y0 = 0; y0 + wh <= H; y0 += wh) {
      for (std::size_t x0 = 0; x0 + ww <= W; x0 += ww) {
        double sa = 0.0, sb = 0.0;
        for (std::size_t y = y0; y < y0 + wh; ++y) {
          for (std::size_t x = x0; x < x0 + ww; ++x) {
            sa += a[base + y * W + x];
            sb += b[base + y * W + x];
          }
        }
        const double ma = sa / n, mb = sb / n;
        double va = 0.0, vb = 0.0, cov = 0.0;
        for (std::size_t y = y0; y < y0 + wh; ++y) {
          for (std::size_t x = x0; x < x0 + ww; ++x) {
            const double da = a[base + y * W + x] - ma;
            const double db = b[base + y * W + x] - mb;
            va += da * da;
            vb += db * db;
            cov += da * db;
          }
        }
        va /= n;
        vb /= n;
        cov /= n;
        total += ((2.0 * ma * mb + kSsimC1) * (2.0 * cov + kSsimC2)) /
                 ((ma * ma + mb * mb + kSsimC1) * (va + vb + kSsimC2));
        ++windows;
      }
    }
  }
  return total / static_cast<double>(windows);
}

} // namespace plrp::diagnostics

#pragma once

#include "plrp/tensor.hpp"

#include <cstddef>

namespace plrp::diagnostics {

inline constexpr std::size_t kSsimWindow = 8;
inline constexpr double kSsimC1 = 0.01 * 0.01;
inline constexpr double kSsimC2 = 0.03 * 0.03;

/// Mean squared error over all elements. ShapeError on a shape mismatch.
double mse(const Tensor& a, const Tensor& b);

/// 10 log10(1 / MSE) in dB for images in [0,1]; +infinity when identical.
double psnr(const Tensor& a, const Tensor& b);

/// Mean SSIM over non-overlapping 8x8 windows (per channel, population
/// statistics, C1 = 0.01^2, C2 = 0.03^2). Trailing rows/columns that do not
/// fill a window are ignored; images smaller than a window use one window
/// covering the whole image. Accepts [H,W] or [C,H,W] in [0,1].
double ssim(const Tensor& a, const Tensor& b);

} // namespace plrp::diagnostics

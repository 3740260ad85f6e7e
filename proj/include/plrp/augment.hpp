#pragma once

#include "plrp/tensor.hpp"

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace plrp::diagnostics {

struct FlipH {};
struct FlipV {};
/// Counterclockwise as displayed (rows grow downwards), about the center.
struct Rotate {
  double degrees = 0.0;
};
/// Positive dx moves content right, positive dy moves it down.
struct Translate {
  double dx = 0.0;
  double dy = 0.0;
};
/// Zoom about the center inside the same canvas. Factors that would shrink
/// the content below one pixel are clamped.
struct Scale {
  double factor = 1.0;
};

using AugmentOp = std::variant<FlipH, FlipV, Rotate, Translate, Scale>;

/// Exposed pixels become exact zeros.
struct ZeroPadding {};
/// Exposed pixels are drawn from N(mu, sigma) with a fixed seed, clamped to
/// [0, 1].
struct NoisePadding {
  double mu = 0.02;
  double sigma = 0.01;
  std::uint64_t seed = 42;
};

using Padding = std::variant<ZeroPadding, NoisePadding>;

struct AugmentResult {
  Tensor image;
  /// Per pixel (row-major, H*W): true when some source pixel maps there.
  std::vector<bool> covered;
};

/// Applies the ops in order as one composed affine map with bilinear
/// resampling (flips and integer shifts land exactly on source pixels), then
/// fills every uncovered pixel per the padding mode. Works on [C,H,W].
AugmentResult augment_with_coverage(const Tensor& image, std::span<const AugmentOp> ops,
                                    const Padding& padding = ZeroPadding{});
Tensor augment_image(const Tensor& image, std::span<const AugmentOp> ops,
                     const Padding& padding = ZeroPadding{});

/// Parses "flipH", "flipV", "rotate:DEG", "translate:DX,DY", "scale:F".
AugmentOp parse_augment_op(std::string_view text);
std::string to_string(const AugmentOp& op);

} // namespace plrp::diagnostics

#pragma once

#include "plrp/image_io.hpp"
#include "plrp/lrp.hpp"
#include "plrp/tensor.hpp"

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <utility>

namespace plrp::render {

enum class Colormap {
  grayscale,
  heat, ///< black -> red -> yellow -> white
};

struct OutputSize {
  std::size_t height = 256;
  std::size_t width = 256;
};

struct HeatmapConfig {
  Colormap colormap = Colormap::grayscale;
  /// Relevance at this percentile of the positive values maps to full
  /// intensity; anything above is clipped. Must lie in (50, 100].
  double clip_percentile = 99.0;
  /// Nearest-neighbor upscale target; must not be smaller than the map.
  std::optional<OutputSize> output_size = OutputSize{};
};

/// Height of the label strip added by render_side_by_side.
inline constexpr std::size_t kLabelStripHeight = 11;

/// Nearest-rank percentile over the strictly positive entries; 0 when there
/// are none.
double positive_percentile(std::span<const double> values, double percentile);

/// 256-entry RGB lookup table indexed by quantized intensity.
std::array<std::array<std::uint8_t, 3>, 256> colormap_table(Colormap colormap);

/// Sums relevance over channels: [C,H,W] -> [H,W]. Rank-2 maps pass through
/// and rank-1 maps become a single row.
Tensor collapse_channels(const Tensor& relevance);

image::Image upscale_nearest(const image::Image& src, std::size_t height, std::size_t width);

/// Deterministic heatmap: channel collapse, percentile clip, colormap,
/// nearest-neighbor upscale. Grayscale yields one channel, heat yields RGB.
/// An all-zero map renders black.
image::Image render_heatmap(const Tensor& relevance, const HeatmapConfig& config = {});
image::Image render_heatmap(const lrp::RelevanceMap& map, const HeatmapConfig& config = {});

/// Horizontal concatenation with a 1-pixel white divider between panels
/// and a label strip along the bottom. All images must share a height.
image::Image render_side_by_side(std::span<const image::Image> images,
                                 std::span<const std::string> labels);

} // namespace plrp::render

#include "plrp/render.hpp"

#include "font5x7.hpp"
#include "plrp/error.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

namespace plrp::render {

using image::Image;

double positive_percentile(std::span<const double> values, double percentile) {
  std::vector<double> positive;
  for (double v : values) {
    if (v > 0.0) positive.push_back(v);
  }
  if (positive.empty()) return 0.0;
  std::sort(positive.begin(), positive.end());
  const auto n = static_cast<double>(positive.size());
  auto rank = static_cast<std::size_t>(std::ceil(percentile / 100.0 * n));
  rank = std::clamp<std::size_t>(rank, 1, positive.size());
  return positive[rank - 1];
}

std::array<std::array<std::uint8_t, 3>, 256> colormap_table(Colormap colormap) {
  std::array<std::array<std::uint8_t, 3>, 256> lut{};
  auto level = [](double v) {
    return static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0));
  };
  for (int q = 0; q < 256; ++q) {
    const double t = q / 255.0;
    if (colormap == Colormap::grayscale) {
      const auto g = static_cast<std::uint8_t>(q);
      lut[q] = {g, g, g};
    } else {
      lut[q] = {level(3.0 * t), level(3.0 * t - 1.0), level(3.0 * t - 2.0)};
    }
  }
  return lut;
}

Tensor collapse_channels(const Tensor& relevance) {
  switch (relevance.rank()) {
  case 1: return reshape(relevance, {1, relevance.size()});
  case 2: return relevance;
  case 3: return sum_along_axis(relevance, 0);
  default: throw ShapeError("cannot render a rank-" + std::to_string(relevance.rank()) + " map");
  }
}

Image upscale_nearest(const Image& src, std::size_t height, std::size_t width) {
  if (height < src.height || width < src.width) {
    throw ValueError("upscale target " + std::to_string(height) + "x" + std::to_string(width) +
                     " is smaller than the source");
  }
  Image out(width, height, src.channels);
  for (std::size_t y = 0; y < height; ++y) {
    const std::size_t sy = y * src.height / height;
    for (std::size_t x = 0; x < width; ++x) {
      const std::size_t sx = x * src.width / width;
      for (std::size_t c = 0; c < src.channels; ++c) out.at(y, x, c) = src.at(sy, sx, c);
    }
  }
  return out;
}

Image render_heatmap(const Tensor& relevance, const HeatmapConfig& config) {
  if (!(config.clip_percentile > 50.0 && config.clip_percentile <= 100.0)) {
    throw ValueError("clip percentile must lie in (50, 100]");
  }
  const Tensor plane = collapse_channels(relevance);
  const std::size_t H = plane.extent(0), W = plane.extent(1);
  for (double v : plane.values()) {
    if (v < 0.0) throw ValueError("relevance maps to render must be non-negative");
  }

  const double clip = positive_percentile(plane.values(), config.clip_percentile);
  const auto lut = colormap_table(config.colormap);
  const std::size_t channels = config.colormap == Colormap::grayscale ? 1 : 3;
  Image img(W, H, channels);
  if (clip > 0.0) {
    for (std::size_t y = 0; y < H; ++y) {
      for (std::size_t x = 0; x < W; ++x) {
        const double t = std::min(plane[y * W + x] / clip, 1.0);
        const auto q = static_cast<std::size_t>(std::lround(t * 255.0));
        for (std::size_t c = 0; c < channels; ++c) img.at(y, x, c) = lut[q][c];
      }
    }
  }
  if (!config.output_size) return img;
  return upscale_nearest(img, config.output_size->height, config.output_size->width);
}

Image render_heatmap(const lrp::RelevanceMap& map, const HeatmapConfig& config) {
  return render_heatmap(map.values, config);
}

namespace {

void draw_text(Image& img, std::size_t x0, std::size_t y0, std::size_t max_x, const std::string& text) {
  std::size_t pen = x0;
  for (char ch : text) {
    if (pen + detail::kGlyphWidth > max_x) break;
    const detail::Glyph g = detail::glyph_for(ch);
    for (int row = 0; row < detail::kGlyphHeight; ++row) {
      for (int col = 0; col < detail::kGlyphWidth; ++col) {
        if (!(g[row] & (1u << (detail::kGlyphWidth - 1 - col)))) continue;
        for (std::size_t c = 0; c < img.channels; ++c) img.at(y0 + row, pen + col, c) = 255;
      }
    }
    pen += detail::kGlyphAdvance;
  }
}

Image to_channels(const Image& src, std::size_t channels) {
  if (src.channels == channels) return src;
  Image out(src.width, src.height, channels);
  for (std::size_t y = 0; y < src.height; ++y) {
    for (std::size_t x = 0; x < src.width; ++x) {
      for (std::size_t c = 0; c < channels; ++c) out.at(y, x, c) = src.at(y, x, 0);
    }
  }
  return out;
}

} // namespace

Image render_side_by_side(std::span<const Image> images, std::span<const std::string> labels) {
  if (images.empty()) throw ValueError("no images to lay out");
  const std::size_t H = images.front().height;
  std::size_t width = images.size() - 1;
  std::size_t channels = 1;
  for (const Image& img : images) {
    if (img.height != H) throw ShapeError("side-by-side panels must share a height");
    if (img.channels != 1 && img.channels != 3) throw ValueError("images must have 1 or 3 channels");
    width += img.width;
    channels = std::max(channels, img.channels);
  }

  Image out(width, H + kLabelStripHeight, channels);
  std::size_t x0 = 0;
  for (std::size_t i = 0; i < images.size(); ++i) {
    const Image panel = to_channels(images[i], channels);
    for (std::size_t y = 0; y < H; ++y) {
      for (std::size_t x = 0; x < panel.width; ++x) {
        for (std::size_t c = 0; c < channels; ++c) out.at(y, x0 + x, c) = panel.at(y, x, c);
      }
    }
    if (i < labels.size()) draw_text(out, x0 + 2, H + 2, x0 + panel.width, labels[i]);
    x0 += panel.width;
    if (i + 1 < images.size()) {
      for (std::size_t y = 0; y < out.height; ++y) {
        for (std::size_t c = 0; c < channels; ++c) out.at(y, x0, c) = 255;
      }
      ++x0;
    }
  }
  return out;
}

} // namespace plrp::render

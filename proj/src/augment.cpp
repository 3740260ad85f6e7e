#include "plrp/augment.hpp"

#include "plrp/error.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <numbers>
#include <random>
#include <sstream>

namespace plrp::diagnostics {

namespace {

// Row-major 3x3 homogeneous transform on (x, y).
using Affine = std::array<double, 9>;

constexpr Affine kIdentity = {1, 0, 0, 0, 1, 0, 0, 0, 1};

Affine multiply(const Affine& a, const Affine& b) {
  Affine r{};
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 3; ++j) {
      double acc = 0.0;
      for (int k = 0; k < 3; ++k) acc += a[i * 3 + k] * b[k * 3 + j];
      r[i * 3 + j] = acc;
    }
  }
  return r;
}

Affine invert(const Affine& m) {
  const double det = m[0] * m[4] - m[1] * m[3];
  if (det == 0.0) throw ValueError("augmentation collapses the image");
  const double a = m[4] / det, b = -m[1] / det, c = -m[3] / det, d = m[0] / det;
  return {a, b, -(a * m[2] + b * m[5]), c, d, -(c * m[2] + d * m[5]), 0, 0, 1};
}

Affine about_center(const Affine& linear, double cx, double cy) {
  const Affine to_origin = {1, 0, -cx, 0, 1, -cy, 0, 0, 1};
  const Affine back = {1, 0, cx, 0, 1, cy, 0, 0, 1};
  return multiply(back, multiply(linear, to_origin));
}

// Forward map of one op: source pixel coordinates -> destination.
Affine op_transform(const AugmentOp& op, std::size_t H, std::size_t W) {
  const double cx = (static_cast<double>(W) - 1.0) / 2.0;
  const double cy = (static_cast<double>(H) - 1.0) / 2.0;
  return std::visit(
      [&](const auto& o) -> Affine {
        using O = std::decay_t<decltype(o)>;
        if constexpr (std::is_same_v<O, FlipH>) {
          return {-1, 0, static_cast<double>(W) - 1.0, 0, 1, 0, 0, 0, 1};
        } else if constexpr (std::is_same_v<O, FlipV>) {
          return {1, 0, 0, 0, -1, static_cast<double>(H) - 1.0, 0, 0, 1};
        } else if constexpr (std::is_same_v<O, Rotate>) {
          const double t = o.degrees * std::numbers::pi / 180.0;
          const double c = std::cos(t), s = std::sin(t);
          return about_center({c, s, 0, -s, c, 0, 0, 0, 1}, cx, cy);
        } else if constexpr (std::is_same_v<O, Translate>) {
          return {1, 0, o.dx, 0, 1, o.dy, 0, 0, 1};
        } else {
          if (!(o.factor > 0.0)) throw ValueError("scale factor must be positive");
          // Content keeps at least one pixel spacing.
          const double floor_factor = 1.0 / static_cast<double>(std::max<std::size_t>(std::min(H, W), 2) - 1);
          const double f = std::max(o.factor, floor_factor);
          return about_center({f, 0, 0, 0, f, 0, 0, 0, 1}, cx, cy);
        }
      },
      op);
}

double parse_number(std::string_view s, std::string_view context) {
  double v = 0.0;
  const auto* end = s.data() + s.size();
  auto [ptr, ec] = std::from_chars(s.data(), end, v);
  if (ec != std::errc() || ptr != end || !std::isfinite(v)) {
    throw ValueError("bad number '" + std::string(s) + "' in augmentation '" + std::string(context) + "'");
  }
  return v;
}

} // namespace

AugmentResult augment_with_coverage(const Tensor& image, std::span<const AugmentOp> ops,
                                    const Padding& padding) {
  if (image.rank() != 3) throw ShapeError("augmentation needs a [C,H,W] image");
  const std::size_t C = image.extent(0), H = image.extent(1), W = image.extent(2);

  Affine forward = kIdentity;
  for (const AugmentOp& op : ops) forward = multiply(op_transform(op, H, W), forward);
  const Affine inverse = invert(forward);

  constexpr double kTolerance = 1e-9;
  const double max_x = static_cast<double>(W) - 1.0;
  const double max_y = static_cast<double>(H) - 1.0;

  AugmentResult result;
  result.covered.assign(H * W, false);
  std::vector<double> out(C * H * W, 0.0);

  for (std::size_t y = 0; y < H; ++y) {
    for (std::size_t x = 0; x < W; ++x) {
      const auto dx = static_cast<double>(x), dy = static_cast<double>(y);
      double sx = inverse[0] * dx + inverse[1] * dy + inverse[2];
      double sy = inverse[3] * dx + inverse[4] * dy + inverse[5];
      if (sx < -kTolerance || sy < -kTolerance || sx > max_x + kTolerance || sy > max_y + kTolerance) {
        continue;
      }
      result.covered[y * W + x] = true;
      sx = std::clamp(sx, 0.0, max_x);
      sy = std::clamp(sy, 0.0, max_y);
      const auto x0 = static_cast<std::size_t>(std::floor(sx));
      const auto y0 = static_cast<std::size_t>(std::floor(sy));
      const std::size_t x1 = std::min(x0 + 1, W - 1), y1 = std::min(y0 + 1, H - 1);
      const double fx = sx - static_cast<double>(x0), fy = sy - static_cast<double>(y0);
      for (std::size_t c = 0; c < C; ++c) {
        const double top = (1.0 - fx) * image.at(c, y0, x0) + fx * image.at(c, y0, x1);
        const double bottom = (1.0 - fx) * image.at(c, y1, x0) + fx * image.at(c, y1, x1);
        out[(c * H + y) * W + x] = (1.0 - fy) * top + fy * bottom;
      }
    }
  }

  if (const auto* noise = std::get_if<NoisePadding>(&padding)) {
    if (!(noise->sigma >= 0.0)) throw ValueError("noise sigma must be >= 0");
    std::mt19937_64 rng(noise->seed);
    std::normal_distribution<double> gauss(noise->mu, noise->sigma);
    for (std::size_t c = 0; c < C; ++c) {
      for (std::size_t i = 0; i < H * W; ++i) {
        if (!result.covered[i]) out[c * H * W + i] = std::clamp(gauss(rng), 0.0, 1.0);
      }
    }
  }
  result.image = Tensor(image.shape(), std::move(out));
  return result;
}

Tensor augment_image(const Tensor& image, std::span<const AugmentOp> ops, const Padding& padding) {
  return augment_with_coverage(image, ops, padding).image;
}

AugmentOp parse_augment_op(std::string_view text) {
  const auto colon = text.find(':');
  const std::string_view name = text.substr(0, colon);
  const std::string_view args = colon == std::string_view::npos ? std::string_view{} : text.substr(colon + 1);
  if (name == "flipH" && args.empty()) return FlipH{};
  if (name == "flipV" && args.empty()) return FlipV{};
  if (name == "rotate") return Rotate{parse_number(args, text)};
  if (name == "scale") return Scale{parse_number(args, text)};
  if (name == "translate") {
    const auto comma = args.find(',');
    if (comma == std::string_view::npos) throw ValueError("translate needs DX,DY");
    return Translate{parse_number(args.substr(0, comma), text), parse_number(args.substr(comma + 1), text)};
  }
  throw ValueError("unknown augmentation '" + std::string(text) + "'");
}

std::string to_string(const AugmentOp& op) {
  std::ostringstream os;
  std::visit(
      [&](const auto& o) {
        using O = std::decay_t<decltype(o)>;
        if constexpr (std::is_same_v<O, FlipH>) os << "flipH";
        else if constexpr (std::is_same_v<O, FlipV>) os << "flipV";
        else if constexpr (std::is_same_v<O, Rotate>) os << "rotate:" << o.degrees;
        else if constexpr (std::is_same_v<O, Translate>) os << "translate:" << o.dx << ',' << o.dy;
        else os << "scale:" << o.factor;
      },
      op);
  return os.str();
}

} // namespace plrp::diagnostics

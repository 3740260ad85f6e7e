#include "plrp/diagnostics.hpp"

#include "plrp/error.hpp"
#include "plrp/render.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <utility>

namespace plrp::diagnostics {

RadialProfile radial_profile(const Tensor& relevance, std::optional<Point> center, double bin_width) {
  if (!(bin_width >= 1.0)) throw ValueError("radial bin width must be >= 1 pixel");
  const Tensor plane = render::collapse_channels(relevance);
  const std::size_t H = plane.extent(0), W = plane.extent(1);

  RadialProfile p;
  p.center = center.value_or(Point{(static_cast<double>(H) - 1.0) / 2.0, (static_cast<double>(W) - 1.0) / 2.0});
  p.bin_width = bin_width;
  for (std::size_t y = 0; y < H; ++y) {
    for (std::size_t x = 0; x < W; ++x) {
      const double v = plane[y * W + x];
      if (v < 0.0) throw ValueError("radial profiles need non-negative relevance");
      const double d = std::hypot(static_cast<double>(y) - p.center.row, static_cast<double>(x) - p.center.col);
      const auto bin = static_cast<std::size_t>(std::floor(d / bin_width));
      if (bin >= p.mass.size()) p.mass.resize(bin + 1, 0.0);
      p.mass[bin] += v;
      p.total_mass += v;
    }
  }
  return p;
}

RadialProfile radial_profile(const lrp::RelevanceMap& map, std::optional<Point> center, double bin_width) {
  return radial_profile(map.values, center, bin_width);
}

std::vector<TrajectoryEntry> compare_trajectory(std::span<const model::NetworkModel> checkpoints,
                                                const Tensor& image, const lrp::ExplainOptions& options,
                                                double bin_width) {
  if (checkpoints.size() < 2) throw ValueError("a trajectory needs at least two checkpoints");
  for (const auto& m : checkpoints) {
    if (m.input_shape != checkpoints.front().input_shape) {
      throw ShapeError("checkpoints disagree on input shape");
    }
  }
  std::vector<TrajectoryEntry> out;
  out.reserve(checkpoints.size());
  for (std::size_t i = 0; i < checkpoints.size(); ++i) {
    const auto& m = checkpoints[i];
    TrajectoryEntry e;
    auto tag = m.metadata.find(kIterationKey);
    e.iteration = tag != m.metadata.end() ? tag->second : std::to_string(i);
    e.map = lrp::explain(m, image, options);
    e.score = e.map.score;
    e.profile = radial_profile(e.map, std::nullopt, bin_width);
    out.push_back(std::move(e));
  }
  return out;
}

std::uint8_t quantize_intensity(double v) noexcept {
  return static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0));
}

RegionHistogram region_histogram(const Tensor& image, const Region& region) {
  if (image.rank() != 3) throw ShapeError("histograms need a [C,H,W] image");
  const std::size_t C = image.extent(0), H = image.extent(1), W = image.extent(2);
  if (region.w == 0 || region.h == 0 || region.x > W || region.y > H || region.w > W - region.x ||
      region.h > H - region.y) {
    throw BoundsError("region (" + std::to_string(region.x) + "," + std::to_string(region.y) + "," +
                      std::to_string(region.w) + "," + std::to_string(region.h) +
                      ") does not fit a " + std::to_string(W) + "x" + std::to_string(H) + " image");
  }
  RegionHistogram h;
  h.region = region;
  for (std::size_t y = region.y; y < region.y + region.h; ++y) {
    for (std::size_t x = region.x; x < region.x + region.w; ++x) {
      double v = 0.0;
      for (std::size_t c = 0; c < C; ++c) v += image.at(c, y, x);
      ++h.bins[quantize_intensity(v / static_cast<double>(C))];
      ++h.count;
    }
  }
  return h;
}

HistogramDivergence histogram_divergence(const RegionHistogram& a, const RegionHistogram& b) {
  if (a.count != b.count) {
    throw ValueError("histograms must hold the same number of pixels (" + std::to_string(a.count) +
                     " vs " + std::to_string(b.count) + ")");
  }
  HistogramDivergence d;
  if (a.count == 0) return d;
  const auto n = static_cast<double>(a.count);
  double cdf_a = 0.0, cdf_b = 0.0;
  for (std::size_t i = 0; i < 256; ++i) {
    const auto x = static_cast<double>(a.bins[i]);
    const auto y = static_cast<double>(b.bins[i]);
    if (x + y > 0.0) d.chi_square += (x - y) * (x - y) / (x + y);
    d.max_bin_gap = std::max(d.max_bin_gap, std::abs(x - y) / n);
    cdf_a += x;
    cdf_b += y;
    d.ks_statistic = std::max(d.ks_statistic, std::abs(cdf_a - cdf_b) / n);
  }
  return d;
}

namespace {

double median_of(std::vector<double> v) {
  const std::size_t n = v.size();
  std::sort(v.begin(), v.end());
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

struct LinePair {
  std::size_t first = 0;
  std::size_t second = 0;
  double strength = -std::numeric_limits<double>::infinity();
};

// Pair of distinct lines maximizing the weaker z-score; ties prefer the
// wider span, then the earlier first line.
LinePair best_pair(const std::vector<double>& z) {
  LinePair best;
  for (std::size_t a = 0; a < z.size(); ++a) {
    for (std::size_t b = a + 1; b < z.size(); ++b) {
      const double s = std::min(z[a], z[b]);
      const bool better = s > best.strength ||
                          (s == best.strength && b - a > best.second - best.first);
      if (better) best = {a, b, s};
    }
  }
  return best;
}

} // namespace

std::vector<double> robust_z_scores(std::span<const double> values) {
  std::vector<double> z(values.size(), 0.0);
  if (values.empty()) return z;
  const double med = median_of({values.begin(), values.end()});
  std::vector<double> dev(values.size());
  for (std::size_t i = 0; i < values.size(); ++i) dev[i] = std::abs(values[i] - med);

  double spread = 1.4826 * median_of(dev);
  if (spread == 0.0) spread = 1.2533 * sum(dev) / static_cast<double>(dev.size());
  if (spread == 0.0) return z;
  for (std::size_t i = 0; i < values.size(); ++i) z[i] = (values[i] - med) / spread;
  return z;
}

BoundaryReport detect_phantom_boundary(std::span<const Tensor> maps, double threshold) {
  if (maps.empty()) throw ValueError("boundary detection needs at least one map");
  if (!(threshold > 0.0)) throw ValueError("boundary threshold must be positive");
  for (const Tensor& m : maps) {
    if (m.shape() != maps.front().shape()) throw ShapeError("relevance maps differ in shape");
  }

  const Tensor first = render::collapse_channels(maps.front());
  const std::size_t H = first.extent(0), W = first.extent(1);
  std::vector<double> mean(H * W, 0.0);
  for (const Tensor& m : maps) {
    const Tensor plane = render::collapse_channels(m);
    for (std::size_t i = 0; i < mean.size(); ++i) mean[i] += plane[i];
  }
  for (double& v : mean) v /= static_cast<double>(maps.size());

  std::vector<double> rows(H, 0.0), cols(W, 0.0);
  for (std::size_t y = 0; y < H; ++y) {
    for (std::size_t x = 0; x < W; ++x) {
      rows[y] += mean[y * W + x];
      cols[x] += mean[y * W + x];
    }
  }
  for (double& r : rows) r /= static_cast<double>(W);
  for (double& c : cols) c /= static_cast<double>(H);

  BoundaryReport report;
  report.threshold = threshold;
  report.row_scores = robust_z_scores(rows);
  report.col_scores = robust_z_scores(cols);
  if (H < 2 || W < 2) return report;

  const LinePair r = best_pair(report.row_scores);
  const LinePair c = best_pair(report.col_scores);
  report.score = std::max(0.0, std::min(r.strength, c.strength));
  if (report.score >= threshold) report.detected = Rect{r.first, c.first, r.second, c.second};
  return report;
}

BoundaryReport detect_phantom_boundary(std::span<const lrp::RelevanceMap> maps, double threshold) {
  std::vector<Tensor> values;
  values.reserve(maps.size());
  for (const auto& m : maps) values.push_back(m.values);
  return detect_phantom_boundary(std::span<const Tensor>(values), threshold);
}

} // namespace plrp::diagnostics

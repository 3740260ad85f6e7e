#pragma once

#include "plrp/lrp.hpp"
#include "plrp/model.hpp"
#include "plrp/tensor.hpp"

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace plrp::diagnostics {

// ---------------------------------------------------------------------------
// Radial relevance profiles

struct Point {
  double row = 0.0;
  double col = 0.0;
};

/// Relevance mass per annulus around a center, innermost first.
struct RadialProfile {
  Point center;
  double bin_width = 1.0;
  std::vector<double> mass;
  double total_mass = 0.0;
};

/// Each pixel's relevance (summed over channels) accrues to annulus
/// floor(distance / bin_width). The default center is ((H-1)/2, (W-1)/2).
RadialProfile radial_profile(const Tensor& relevance, std::optional<Point> center = std::nullopt,
                             double bin_width = 1.0);
RadialProfile radial_profile(const lrp::RelevanceMap& map, std::optional<Point> center = std::nullopt,
                             double bin_width = 1.0);

// ---------------------------------------------------------------------------
// Training trajectories

struct TrajectoryEntry {
  std::string iteration;
  double score = 0.0;
  lrp::RelevanceMap map;
  RadialProfile profile;
};

/// Metadata key holding a checkpoint's training iteration.
inline constexpr const char* kIterationKey = "iteration";

/// Explains the same image under every checkpoint, in order. Needs at least
/// two checkpoints sharing one input shape (ShapeError otherwise). The
/// iteration tag comes from metadata, falling back to the list position.
std::vector<TrajectoryEntry> compare_trajectory(std::span<const model::NetworkModel> checkpoints,
                                                const Tensor& image,
                                                const lrp::ExplainOptions& options = {},
                                                double bin_width = 1.0);

// ---------------------------------------------------------------------------
// Background histograms

struct Region {
  std::size_t x = 0;
  std::size_t y = 0;
  std::size_t w = 0;
  std::size_t h = 0;
};

struct RegionHistogram {
  Region region;
  std::array<std::uint64_t, 256> bins{};
  std::uint64_t count = 0;
};

/// 8-bit intensity of a [0,1] value: round(v * 255), clamped.
std::uint8_t quantize_intensity(double v) noexcept;

/// 256-bin histogram of a region of a [C,H,W] image; multi-channel pixels
/// are averaged before quantization. BoundsError if the region leaves the
/// image.
RegionHistogram region_histogram(const Tensor& image, const Region& region);

struct HistogramDivergence {
  /// Sum over bins with a+b > 0 of (a-b)^2 / (a+b).
  double chi_square = 0.0;
  /// max |a-b| / count.
  double max_bin_gap = 0.0;
  /// Largest gap between the two empirical CDFs.
  double ks_statistic = 0.0;
};

/// ValueError if the histograms have different counts.
HistogramDivergence histogram_divergence(const RegionHistogram& a, const RegionHistogram& b);

// ---------------------------------------------------------------------------
// Phantom boundary detection

inline constexpr double kDefaultBoundaryThreshold = 4.0;

struct Rect {
  std::size_t top = 0;
  std::size_t left = 0;
  std::size_t bottom = 0;
  std::size_t right = 0;
  bool operator==(const Rect&) const = default;
};

struct BoundaryReport {
  std::vector<double> row_scores;
  std::vector<double> col_scores;
  std::optional<Rect> detected;
  double score = 0.0;
  double threshold = kDefaultBoundaryThreshold;
};

/// Robust z-scores (x - median) / (1.4826 * MAD) of a set of line means.
/// When the MAD is zero the mean absolute deviation (scaled by 1.2533)
/// stands in; when that is zero too every score is 0.
std::vector<double> robust_z_scores(std::span<const double> values);

/// Averages the maps, scores every row and column mean against the others
/// and reports the axis-aligned rectangle whose four sides all reach the
/// threshold, choosing the one with the largest weakest side (ties go to
/// the larger span). ShapeError if the maps differ in shape.
BoundaryReport detect_phantom_boundary(std::span<const Tensor> maps,
                                       double threshold = kDefaultBoundaryThreshold);
BoundaryReport detect_phantom_boundary(std::span<const lrp::RelevanceMap> maps,
                                       double threshold = kDefaultBoundaryThreshold);

} // namespace plrp::diagnostics

#pragma once

#include "plrp/diagnostics.hpp"
#include "plrp/lrp.hpp"

#include <span>
#include <string>

namespace plrp::report {

/// Shortest decimal text that round-trips the double ("inf", "-inf", "nan"
/// for non-finite values).
std::string format_number(double v);

/// {score, polarity, initialRelevance, initialRelevanceMode, leakedRelevance,
///  perLayerSums, perLayerLeaked, preSigmoid}
std::string explain_json(const lrp::RelevanceMap& map, lrp::InitialRelevance mode);

/// {detected, rect: {top,left,bottom,right} | null, score, threshold,
///  rowScores, colScores, maps}
std::string boundary_json(const diagnostics::BoundaryReport& report, std::size_t map_count);

/// {regions: [{region: {x,y,w,h}, count, bins: [256 ints]}],
///  divergence: [{a, b, chiSquare, maxBinGap, ksStatistic}]} with one
/// divergence entry per unordered pair of equally sized regions.
std::string histograms_json(std::span<const diagnostics::RegionHistogram> histograms);

/// {mse, psnr, ssim}; an infinite PSNR is written as the string "inf".
std::string metrics_json(double mse, double psnr, double ssim);

/// annulus,inner_radius,outer_radius,mass
std::string radial_csv(const diagnostics::RadialProfile& profile);

/// iteration,score,polarity,leaked,bin_0..bin_{n-1}; shorter profiles are
/// padded with zero mass.
std::string trajectory_csv(std::span<const diagnostics::TrajectoryEntry> entries);

} // namespace plrp::report

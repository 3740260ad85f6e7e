#include "plrp/report.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <sstream>

namespace plrp::report {

namespace {

using nlohmann::ordered_json;

ordered_json number(double v) {
  if (std::isfinite(v)) return v;
  return format_number(v);
}

ordered_json numbers(std::span<const double> values) {
  ordered_json a = ordered_json::array();
  for (double v : values) a.push_back(number(v));
  return a;
}

} // namespace

std::string format_number(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[32];
  for (int precision = 15; precision <= 17; ++precision) {
    std::snprintf(buf, sizeof buf, "%.*g", precision, v);
    if (std::strtod(buf, nullptr) == v) break;
  }
  return buf;
}

std::string explain_json(const lrp::RelevanceMap& map, lrp::InitialRelevance mode) {
  ordered_json j;
  j["score"] = number(map.score);
  j["polarity"] = std::string(lrp::to_string(map.polarity));
  j["initialRelevance"] = number(map.initial_relevance);
  j["initialRelevanceMode"] = std::string(lrp::to_string(mode));
  j["leakedRelevance"] = number(map.leaked_relevance);
  j["perLayerSums"] = numbers(map.per_layer_sums);
  j["perLayerLeaked"] = numbers(map.per_layer_leaked);
  j["preSigmoid"] = number(map.pre_sigmoid);
  return j.dump();
}

std::string boundary_json(const diagnostics::BoundaryReport& report, std::size_t map_count) {
  ordered_json j;
  j["detected"] = report.detected.has_value();
  if (report.detected) {
    const auto& r = *report.detected;
    j["rect"] = {{"top", r.top}, {"left", r.left}, {"bottom", r.bottom}, {"right", r.right}};
  } else {
    j["rect"] = nullptr;
  }
  j["score"] = number(report.score);
  j["threshold"] = number(report.threshold);
  j["maps"] = map_count;
  j["rowScores"] = numbers(report.row_scores);
  j["colScores"] = numbers(report.col_scores);
  return j.dump();
}

std::string histograms_json(std::span<const diagnostics::RegionHistogram> histograms) {
  ordered_json j;
  j["regions"] = ordered_json::array();
  for (const auto& h : histograms) {
    ordered_json r;
    r["region"] = {{"x", h.region.x}, {"y", h.region.y}, {"w", h.region.w}, {"h", h.region.h}};
    r["count"] = h.count;
    r["bins"] = h.bins;
    j["regions"].push_back(std::move(r));
  }
  j["divergence"] = ordered_json::array();
  for (std::size_t a = 0; a < histograms.size(); ++a) {
    for (std::size_t b = a + 1; b < histograms.size(); ++b) {
      if (histograms[a].count != histograms[b].count) continue;
      const auto d = diagnostics::histogram_divergence(histograms[a], histograms[b]);
      j["divergence"].push_back({{"a", a},
                                 {"b", b},
                                 {"chiSquare", number(d.chi_square)},
                                 {"maxBinGap", number(d.max_bin_gap)},
                                 {"ksStatistic", number(d.ks_statistic)}});
    }
  }
  return j.dump();
}

std::string metrics_json(double mse, double psnr, double ssim) {
  ordered_json j;
  j["mse"] = number(mse);
  j["psnr"] = number(psnr);
  j["ssim"] = number(ssim);
  return j.dump();
}

std::string radial_csv(const diagnostics::RadialProfile& profile) {
  std::ostringstream os;
  os << "annulus,inner_radius,outer_radius,mass\n";
  for (std::size_t i = 0; i < profile.mass.size(); ++i) {
    const double inner = static_cast<double>(i) * profile.bin_width;
    os << i << ',' << format_number(inner) << ',' << format_number(inner + profile.bin_width) << ','
       << format_number(profile.mass[i]) << '\n';
  }
  return os.str();
}

std::string trajectory_csv(std::span<const diagnostics::TrajectoryEntry> entries) {
  std::size_t bins = 0;
  for (const auto& e : entries) bins = std::max(bins, e.profile.mass.size());
  std::ostringstream os;
  os << "iteration,score,polarity,leaked";
  for (std::size_t i = 0; i < bins; ++i) os << ",bin_" << i;
  os << '\n';
  for (const auto& e : entries) {
    os << e.iteration << ',' << format_number(e.score) << ',' << lrp::to_string(e.map.polarity) << ','
       << format_number(e.map.leaked_relevance);
    for (std::size_t i = 0; i < bins; ++i) {
      os << ',' << format_number(i < e.profile.mass.size() ? e.profile.mass[i] : 0.0);
    }
    os << '\n';
  }
  return os.str();
}

} // namespace plrp::report

#pragma once

#include "plrp/inference.hpp"
#include "plrp/model.hpp"
#include "plrp/tensor.hpp"

#include <cstddef>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

namespace plrp::lrp {

/// Which truncation the propagation rule uses. Positive explains a "real"
/// verdict through positive contributions, Negative explains a "fake"
/// verdict through negative contributions.
enum class Polarity { positive, negative };

enum class PolaritySelection {
  /// Positive when the score is >= kAutoThreshold, Negative otherwise.
  automatic,
  positive,
  negative,
};

/// What is injected at the output neuron.
enum class InitialRelevance {
  probability, ///< the post-sigmoid score
  one,         ///< 1.0
  logit,       ///< |pre-sigmoid value|
};

inline constexpr double kAutoThreshold = 0.5;
inline constexpr double kDefaultEpsilon = 1e-9;

std::string_view to_string(Polarity p) noexcept;
std::string_view to_string(InitialRelevance r) noexcept;

struct ExplainOptions {
  PolaritySelection polarity = PolaritySelection::automatic;
  InitialRelevance initial = InitialRelevance::probability;
  /// When set, each affine denominator is pushed away from zero by this
  /// amount (sign matched to the polarity); the epsilon's share leaks.
  /// Off by default: degenerate denominators leak the whole output instead.
  std::optional<double> epsilon;
};

/// Per-pixel relevance for one explanation.
///
/// Values are non-negative magnitudes for both polarities; the polarity is
/// carried as a tag. Relevance absorbed by bias terms and by outputs with a
/// zero denominator is accounted in `leaked_relevance`, so that
/// sum(values) + leaked_relevance == initial_relevance.
struct RelevanceMap {
  Tensor values;
  Polarity polarity = Polarity::positive;
  double initial_relevance = 0.0;
  /// Relevance sum at the output and after each layer, output -> input.
  /// Has layers + 1 entries; the first is initial_relevance.
  std::vector<double> per_layer_sums;
  /// Relevance leaked by each layer, output -> input order.
  std::vector<double> per_layer_leaked;
  double leaked_relevance = 0.0;
  double score = 0.0;
  double pre_sigmoid = 0.0;
};

struct LayerRelevance {
  Tensor relevance;
  double leaked = 0.0;
};

/// Redistributes the relevance of a layer's outputs onto its inputs.
///
/// Affine layers (conv2d, dense, avgPool2d as a uniform-weight conv) give
/// input i the share t(w_ij x_i) / (sum_k t(w_kj x_k) + t(b_j)) of output j,
/// where t is truncation at zero towards the polarity's sign. maxPool2d sends
/// everything to the recorded winner; activations and flatten pass relevance
/// through unchanged. `argmax` is only consulted for maxPool2d and is
/// recomputed from `layer_input` when empty.
LayerRelevance propagate_layer(const model::LayerView& layer, const Tensor& layer_input,
                               const Tensor& out_relevance, Polarity polarity,
                               std::span<const std::size_t> argmax = {},
                               std::optional<double> epsilon = std::nullopt);

Polarity select_polarity(double score, PolaritySelection selection) noexcept;

/// Forward pass, polarity selection, relevance injection and layer-by-layer
/// propagation down to the input. Throws ShapeError on an image mismatch and
/// PropagationError if the result breaks non-negativity or conservation.
RelevanceMap explain(const model::NetworkModel& model, const Tensor& image,
                     const ExplainOptions& options = {});
RelevanceMap explain(const model::NetworkModel& model, const inference::ActivationTrace& trace,
                     const ExplainOptions& options = {});

struct LedgerRow {
  std::size_t layer_index = 0;
  double before = 0.0; ///< relevance sum at the layer's output
  double after = 0.0;  ///< relevance sum at the layer's input
  double leaked = 0.0;
};

/// One row per layer, output layer first.
std::vector<LedgerRow> conservation_report(const RelevanceMap& map);

} // namespace plrp::lrp

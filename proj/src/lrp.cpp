#include "plrp/lrp.hpp"

#include "plrp/error.hpp"

#include <cmath>
#include <limits>
#include <utility>

namespace plrp::lrp {

using namespace plrp::model;

namespace {

// Shared bookkeeping for every affine rule: collect the truncated
// contributions of one output neuron, then split its relevance.
class AffineSplitter {
public:
  AffineSplitter(Polarity polarity, std::optional<double> epsilon, std::vector<double>& in_relevance)
      : polarity_(polarity), epsilon_(epsilon), in_(in_relevance) {}

  double truncate(double z) const noexcept {
    if (polarity_ == Polarity::positive) return z > 0.0 ? z : 0.0;
    return z < 0.0 ? z : 0.0;
  }

  void begin() { terms_.clear(); }

  void add(std::size_t input_index, double z) {
    const double t = truncate(z);
    if (t != 0.0) terms_.emplace_back(input_index, t);
  }

  void finish(double relevance, double bias) {
    if (relevance == 0.0) return;
    const double tb = truncate(bias);
    double denom = 0.0;
    for (const auto& term : terms_) denom += term.second;
    denom += tb;
    double stabilizer = 0.0;
    if (epsilon_) {
      stabilizer = polarity_ == Polarity::positive ? *epsilon_ : -*epsilon_;
      denom += stabilizer;
    }
    if (denom == 0.0) {
      leaked_ += relevance;
      return;
    }
    const double scale = relevance / denom;
    for (const auto& [i, t] : terms_) in_[i] += t * scale;
    leaked_ += (tb + stabilizer) * scale;
  }

  double leaked() const noexcept { return leaked_; }

private:
  Polarity polarity_;
  std::optional<double> epsilon_;
  std::vector<double>& in_;
  std::vector<std::pair<std::size_t, double>> terms_;
  double leaked_ = 0.0;
};

void conv2d_relevance(const Conv2d& c, const Tensor& w, const Tensor& b, const Tensor& in,
                      const Tensor& out_rel, AffineSplitter& split) {
  const std::size_t H = in.extent(1), W = in.extent(2);
  const std::size_t OH = out_rel.extent(1), OW = out_rel.extent(2);
  auto wv = w.values();
  for (std::size_t o = 0; o < c.out_channels; ++o) {
    for (std::size_t oy = 0; oy < OH; ++oy) {
      for (std::size_t ox = 0; ox < OW; ++ox) {
        const double r = out_rel.at(o, oy, ox);
        if (r == 0.0) continue;
        split.begin();
        for (std::size_t ch = 0; ch < c.in_channels; ++ch) {
          for (std::size_t ky = 0; ky < c.kernel_h; ++ky) {
            const auto iy = static_cast<std::ptrdiff_t>(oy * c.stride_h + ky) -
                            static_cast<std::ptrdiff_t>(c.pad_h);
            if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(H)) continue;
            for (std::size_t kx = 0; kx < c.kernel_w; ++kx) {
              const auto ix = static_cast<std::ptrdiff_t>(ox * c.stride_w + kx) -
                              static_cast<std::ptrdiff_t>(c.pad_w);
              if (ix < 0 || ix >= static_cast<std::ptrdiff_t>(W)) continue;
              const std::size_t idx = (ch * H + static_cast<std::size_t>(iy)) * W +
                                      static_cast<std::size_t>(ix);
              split.add(idx, wv[((o * c.in_channels + ch) * c.kernel_h + ky) * c.kernel_w + kx] *
                                 in[idx]);
            }
          }
        }
        split.finish(r, b[o]);
      }
    }
  }
}

void dense_relevance(const Dense& d, const Tensor& w, const Tensor& b, const Tensor& in,
                     const Tensor& out_rel, AffineSplitter& split) {
  auto wv = w.values();
  for (std::size_t j = 0; j < d.out_features; ++j) {
    const double r = out_rel[j];
    if (r == 0.0) continue;
    split.begin();
    for (std::size_t i = 0; i < d.in_features; ++i) split.add(i, wv[j * d.in_features + i] * in[i]);
    split.finish(r, b[j]);
  }
}

void avg_pool_relevance(const AvgPool2d& p, const Tensor& in, const Tensor& out_rel,
                        AffineSplitter& split) {
  const std::size_t H = in.extent(1), W = in.extent(2);
  const std::size_t C = out_rel.extent(0), OH = out_rel.extent(1), OW = out_rel.extent(2);
  const double weight = 1.0 / static_cast<double>(p.window * p.window);
  for (std::size_t c = 0; c < C; ++c) {
    for (std::size_t oy = 0; oy < OH; ++oy) {
      for (std::size_t ox = 0; ox < OW; ++ox) {
        const double r = out_rel.at(c, oy, ox);
        if (r == 0.0) continue;
        split.begin();
        for (std::size_t ky = 0; ky < p.window; ++ky) {
          for (std::size_t kx = 0; kx < p.window; ++kx) {
            const std::size_t idx = (c * H + oy * p.stride + ky) * W + ox * p.stride + kx;
            split.add(idx, weight * in[idx]);
          }
        }
        split.finish(r, 0.0);
      }
    }
  }
}

} // namespace

std::string_view to_string(Polarity p) noexcept {
  return p == Polarity::positive ? "positive" : "negative";
}

std::string_view to_string(InitialRelevance r) noexcept {
  switch (r) {
  case InitialRelevance::probability: return "prob";
  case InitialRelevance::one: return "one";
  case InitialRelevance::logit: return "logit";
  }
  return "prob";
}

Polarity select_polarity(double score, PolaritySelection selection) noexcept {
  switch (selection) {
  case PolaritySelection::positive: return Polarity::positive;
  case PolaritySelection::negative: return Polarity::negative;
  case PolaritySelection::automatic: break;
  }
  return score >= kAutoThreshold ? Polarity::positive : Polarity::negative;
}

LayerRelevance propagate_layer(const LayerView& layer, const Tensor& layer_input,
                               const Tensor& out_relevance, Polarity polarity,
                               std::span<const std::size_t> argmax, std::optional<double> epsilon) {
  const Shape expected = output_shape(layer.kind, layer_input.shape());
  if (out_relevance.shape() != expected) {
    throw ShapeError("relevance shape " + plrp::to_string(out_relevance.shape()) +
                     " does not match layer output " + plrp::to_string(expected));
  }
  for (double r : out_relevance.values()) {
    if (r < 0.0) throw PropagationError("negative relevance entering a layer");
  }

  return std::visit(
      [&](const auto& k) -> LayerRelevance {
        using K = std::decay_t<decltype(k)>;
        if constexpr (std::is_same_v<K, Relu> || std::is_same_v<K, LeakyRelu> ||
                      std::is_same_v<K, Sigmoid> || std::is_same_v<K, Flatten>) {
          return {reshape(out_relevance, layer_input.shape()), 0.0};
        } else if constexpr (std::is_same_v<K, MaxPool2d>) {
          std::vector<std::size_t> recomputed;
          if (argmax.empty()) {
            recomputed = inference::max_pool_argmax(k, layer_input);
            argmax = recomputed;
          }
          if (argmax.size() != out_relevance.size()) {
            throw PropagationError("max-pool winner record does not match the layer output");
          }
          std::vector<double> in(layer_input.size(), 0.0);
          for (std::size_t j = 0; j < argmax.size(); ++j) in[argmax[j]] += out_relevance[j];
          return {Tensor(layer_input.shape(), std::move(in)), 0.0};
        } else if constexpr (std::is_same_v<K, BatchNorm2d>) {
          throw StructuralError("batchNorm2d must be folded before relevance propagation");
        } else {
          std::vector<double> in(layer_input.size(), 0.0);
          AffineSplitter split(polarity, epsilon, in);
          if constexpr (std::is_same_v<K, Conv2d>) {
            conv2d_relevance(k, *layer.weight, *layer.bias, layer_input, out_relevance, split);
          } else if constexpr (std::is_same_v<K, Dense>) {
            dense_relevance(k, *layer.weight, *layer.bias, layer_input, out_relevance, split);
          } else {
            avg_pool_relevance(k, layer_input, out_relevance, split);
          }
          return {Tensor(layer_input.shape(), std::move(in)), split.leaked()};
        }
      },
      layer.kind);
}

RelevanceMap explain(const NetworkModel& model, const Tensor& image, const ExplainOptions& options) {
  return explain(model, inference::forward(model, image), options);
}

RelevanceMap explain(const NetworkModel& model, const inference::ActivationTrace& trace,
                     const ExplainOptions& options) {
  if (trace.layer_inputs.size() != model.layers.size()) {
    throw PropagationError("activation trace does not belong to this model");
  }
  RelevanceMap map;
  map.score = trace.final_output;
  map.pre_sigmoid = trace.pre_sigmoid;
  map.polarity = select_polarity(trace.final_output, options.polarity);
  switch (options.initial) {
  case InitialRelevance::probability: map.initial_relevance = trace.final_output; break;
  case InitialRelevance::one: map.initial_relevance = 1.0; break;
  case InitialRelevance::logit: map.initial_relevance = std::abs(trace.pre_sigmoid); break;
  }

  Tensor relevance({1}, {map.initial_relevance});
  map.per_layer_sums.push_back(map.initial_relevance);
  for (std::size_t i = model.layers.size(); i-- > 0;) {
    std::span<const std::size_t> winners;
    if (i < trace.argmax.size()) winners = trace.argmax[i];
    LayerRelevance step = propagate_layer(model.view(i), trace.layer_inputs[i], relevance,
                                          map.polarity, winners, options.epsilon);
    if (step.leaked < -1e-9) throw PropagationError("layer " + std::to_string(i) + " created relevance");
    relevance = std::move(step.relevance);
    map.per_layer_sums.push_back(sum(relevance));
    map.per_layer_leaked.push_back(step.leaked);
    map.leaked_relevance += step.leaked;
  }
  map.values = std::move(relevance);

  for (double v : map.values.values()) {
    if (v < 0.0) throw PropagationError("negative relevance in the input map");
  }
  const double residual = std::abs(map.per_layer_sums.back() + map.leaked_relevance - map.initial_relevance);
  if (residual > 1e-6 * map.initial_relevance + std::numeric_limits<double>::min()) {
    throw PropagationError("relevance not conserved: residual " + std::to_string(residual));
  }
  return map;
}

std::vector<LedgerRow> conservation_report(const RelevanceMap& map) {
  std::vector<LedgerRow> rows;
  const std::size_t n = map.per_layer_leaked.size();
  rows.reserve(n);
  for (std::size_t s = 0; s < n; ++s) {
    rows.push_back({n - 1 - s, map.per_layer_sums[s], map.per_layer_sums[s + 1], map.per_layer_leaked[s]});
  }
  return rows;
}

} // namespace plrp::lrp

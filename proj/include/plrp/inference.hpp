#pragma once

#include "plrp/model.hpp"
#include "plrp/tensor.hpp"

#include <cstddef>
#include <vector>

namespace plrp::inference {

/// Everything relevance propagation needs from one forward pass.
struct ActivationTrace {
  /// Input tensor seen by each layer, index-aligned with model.layers.
  std::vector<Tensor> layer_inputs;
  /// For maxPool2d layers: flat input index of the winner of every output
  /// cell. Empty for all other layers.
  std::vector<std::vector<std::size_t>> argmax;
  double pre_sigmoid = 0.0;
  double final_output = 0.5;
};

/// Numerically stable logistic function.
double sigmoid(double x) noexcept;

/// Flat input indices of the max of every pooling window. Ties go to the
/// first element in row-major window order.
std::vector<std::size_t> max_pool_argmax(const model::MaxPool2d& pool, const Tensor& input);

/// Applies a single layer. For maxPool2d the winners are written to `argmax`
/// when it is non-null. batchNorm2d is only evaluated by forward().
Tensor apply_layer(const model::LayerView& layer, const Tensor& input,
                   std::vector<std::size_t>* argmax = nullptr);

/// Deterministic forward pass, unfolded batchNorm2d included. ShapeError if
/// the image shape differs from model.input_shape.
ActivationTrace forward(const model::NetworkModel& model, const Tensor& image);

/// The Discriminator's probability for `image`.
double score(const model::NetworkModel& model, const Tensor& image);

} // namespace plrp::inference

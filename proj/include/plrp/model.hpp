#pragma once

#include "plrp/tensor.hpp"

#include <cstddef>
#include <map>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace plrp::model {

// Parameter roles a layer may own.
inline constexpr std::string_view kWeight = "weight";
inline constexpr std::string_view kBias = "bias";
inline constexpr std::string_view kGamma = "gamma";
inline constexpr std::string_view kBeta = "beta";
inline constexpr std::string_view kRunningMean = "runningMean";
inline constexpr std::string_view kRunningVar = "runningVar";

/// Cross-correlation over [C,H,W] with zero padding.
/// weight [out_channels, in_channels, kernel_h, kernel_w], bias [out_channels].
struct Conv2d {
  std::size_t in_channels = 1;
  std::size_t out_channels = 1;
  std::size_t kernel_h = 1;
  std::size_t kernel_w = 1;
  std::size_t stride_h = 1;
  std::size_t stride_w = 1;
  std::size_t pad_h = 0;
  std::size_t pad_w = 0;
  bool operator==(const Conv2d&) const = default;
};

/// y = W x + b over the flattened input.
/// weight [out_features, in_features], bias [out_features].
struct Dense {
  std::size_t in_features = 1;
  std::size_t out_features = 1;
  bool operator==(const Dense&) const = default;
};

struct Relu {
  bool operator==(const Relu&) const = default;
};

struct LeakyRelu {
  double alpha = 0.2;
  bool operator==(const LeakyRelu&) const = default;
};

/// Square window, no padding.
struct MaxPool2d {
  std::size_t window = 2;
  std::size_t stride = 2;
  bool operator==(const MaxPool2d&) const = default;
};

struct AvgPool2d {
  std::size_t window = 2;
  std::size_t stride = 2;
  bool operator==(const AvgPool2d&) const = default;
};

struct Flatten {
  bool operator==(const Flatten&) const = default;
};

struct Sigmoid {
  bool operator==(const Sigmoid&) const = default;
};

/// Inference-time batch norm; folded into the preceding conv on load.
struct BatchNorm2d {
  std::size_t channels = 1;
  double epsilon = 1e-5;
  bool operator==(const BatchNorm2d&) const = default;
};

using LayerKind = std::variant<Conv2d, Dense, Relu, LeakyRelu, MaxPool2d, AvgPool2d, Flatten,
                               Sigmoid, BatchNorm2d>;

/// Manifest spelling of a layer kind ("conv2d", "leakyRelu", ...).
std::string_view kind_name(const LayerKind& kind) noexcept;

struct LayerSpec {
  LayerKind kind;
  /// role -> parameter tensor name
  std::map<std::string, std::string> params;
  bool operator==(const LayerSpec&) const = default;
};

/// A layer with its parameter tensors resolved. Pointers are null for roles
/// the layer does not own.
struct LayerView {
  const LayerKind& kind;
  const Tensor* weight = nullptr;
  const Tensor* bias = nullptr;
};

/// The Discriminator under inspection: an ordered layer list plus named
/// parameters. Must end in dense(out_features == 1) followed by sigmoid.
struct NetworkModel {
  Shape input_shape;
  std::vector<LayerSpec> layers;
  std::map<std::string, Tensor> parameters;
  std::map<std::string, std::string> metadata;

  const Tensor& param(const LayerSpec& layer, std::string_view role) const;
  LayerView view(std::size_t layer_index) const;
};

/// Output shape of a layer for a given input shape. Throws ShapeError when
/// the input is incompatible with the layer's hyperparameters.
Shape output_shape(const LayerKind& kind, const Shape& input);

/// Input shape seen by every layer, index-aligned with model.layers, plus
/// the final output shape at the back.
std::vector<Shape> propagate_shapes(const NetworkModel& model);

/// Checks every structural and parameter invariant. Throws ShapeError for
/// shape violations, StructuralError for architecture violations and
/// ValueError for out-of-range hyperparameters.
void validate(const NetworkModel& model);

} // namespace plrp::model

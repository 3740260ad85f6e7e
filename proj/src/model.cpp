#include "plrp/model.hpp"

#include "plrp/error.hpp"

#include <set>

namespace plrp::model {

namespace {

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

std::vector<std::string_view> required_roles(const LayerKind& kind) {
  return std::visit(
      overloaded{
          [](const Conv2d&) -> std::vector<std::string_view> { return {kWeight, kBias}; },
          [](const Dense&) -> std::vector<std::string_view> { return {kWeight, kBias}; },
          [](const BatchNorm2d&) -> std::vector<std::string_view> {
            return {kGamma, kBeta, kRunningMean, kRunningVar};
          },
          [](const auto&) -> std::vector<std::string_view> { return {}; },
      },
      kind);
}

std::size_t pooled_extent(std::size_t in, std::size_t window, std::size_t stride) {
  if (window == 0 || stride == 0) throw ValueError("pool window and stride must be >= 1");
  if (in < window) {
    throw ShapeError("pool window " + std::to_string(window) + " larger than extent " +
                     std::to_string(in));
  }
  return (in - window) / stride + 1;
}

void require_rank3(const Shape& input, std::string_view what) {
  if (input.size() != 3) {
    throw ShapeError(std::string(what) + " expects a [C,H,W] input, got " + to_string(input));
  }
}

void check_param_shape(const NetworkModel& m, const LayerSpec& layer, std::string_view role,
                       const Shape& expected, std::size_t index) {
  const Tensor& t = m.param(layer, role);
  if (t.shape() != expected) {
    throw ShapeError("layer " + std::to_string(index) + " (" + std::string(kind_name(layer.kind)) +
                     ") " + std::string(role) + " has shape " + to_string(t.shape()) +
                     ", expected " + to_string(expected));
  }
}

} // namespace

std::string_view kind_name(const LayerKind& kind) noexcept {
  return std::visit(overloaded{
                        [](const Conv2d&) { return std::string_view("conv2d"); },
                        [](const Dense&) { return std::string_view("dense"); },
                        [](const Relu&) { return std::string_view("relu"); },
                        [](const LeakyRelu&) { return std::string_view("leakyRelu"); },
                        [](const MaxPool2d&) { return std::string_view("maxPool2d"); },
                        [](const AvgPool2d&) { return std::string_view("avgPool2d"); },
                        [](const Flatten&) { return std::string_view("flatten"); },
                        [](const Sigmoid&) { return std::string_view("sigmoid"); },
                        [](const BatchNorm2d&) { return std::string_view("batchNorm2d"); },
                    },
                    kind);
}

const Tensor& NetworkModel::param(const LayerSpec& layer, std::string_view role) const {
  auto name = layer.params.find(std::string(role));
  if (name == layer.params.end()) {
    throw StructuralError(std::string(kind_name(layer.kind)) + " layer has no '" +
                          std::string(role) + "' parameter");
  }
  auto it = parameters.find(name->second);
  if (it == parameters.end()) {
    throw StructuralError("parameter tensor '" + name->second + "' is not defined");
  }
  return it->second;
}

LayerView NetworkModel::view(std::size_t layer_index) const {
  const LayerSpec& layer = layers.at(layer_index);
  LayerView v{layer.kind};
  if (std::holds_alternative<Conv2d>(layer.kind) || std::holds_alternative<Dense>(layer.kind)) {
    v.weight = &param(layer, kWeight);
    v.bias = &param(layer, kBias);
  }
  return v;
}

Shape output_shape(const LayerKind& kind, const Shape& input) {
  return std::visit(
      overloaded{
          [&](const Conv2d& c) -> Shape {
            require_rank3(input, "conv2d");
            if (c.kernel_h == 0 || c.kernel_w == 0 || c.stride_h == 0 || c.stride_w == 0) {
              throw ValueError("conv2d kernel and stride must be >= 1");
            }
            if (input[0] != c.in_channels) {
              throw ShapeError("conv2d expects " + std::to_string(c.in_channels) +
                               " input channels, got " + std::to_string(input[0]));
            }
            const std::size_t ph = input[1] + 2 * c.pad_h;
            const std::size_t pw = input[2] + 2 * c.pad_w;
            if (ph < c.kernel_h || pw < c.kernel_w) {
              throw ShapeError("conv2d kernel larger than padded input " + to_string(input));
            }
            return {c.out_channels, (ph - c.kernel_h) / c.stride_h + 1,
                    (pw - c.kernel_w) / c.stride_w + 1};
          },
          [&](const Dense& d) -> Shape {
            if (element_count(input) != d.in_features) {
              throw ShapeError("dense expects " + std::to_string(d.in_features) +
                               " input features, got " + to_string(input));
            }
            return {d.out_features};
          },
          [&](const MaxPool2d& p) -> Shape {
            require_rank3(input, "maxPool2d");
            return {input[0], pooled_extent(input[1], p.window, p.stride),
                    pooled_extent(input[2], p.window, p.stride)};
          },
          [&](const AvgPool2d& p) -> Shape {
            require_rank3(input, "avgPool2d");
            return {input[0], pooled_extent(input[1], p.window, p.stride),
                    pooled_extent(input[2], p.window, p.stride)};
          },
          [&](const Flatten&) -> Shape { return {element_count(input)}; },
          [&](const BatchNorm2d& b) -> Shape {
            require_rank3(input, "batchNorm2d");
            if (input[0] != b.channels) {
              throw ShapeError("batchNorm2d expects " + std::to_string(b.channels) +
                               " channels, got " + std::to_string(input[0]));
            }
            return input;
          },
          [&](const auto&) -> Shape { return input; },
      },
      kind);
}

std::vector<Shape> propagate_shapes(const NetworkModel& model) {
  std::vector<Shape> shapes;
  shapes.reserve(model.layers.size() + 1);
  shapes.push_back(model.input_shape);
  for (const LayerSpec& layer : model.layers) {
    shapes.push_back(output_shape(layer.kind, shapes.back()));
  }
  return shapes;
}

void validate(const NetworkModel& model) {
  const Shape& in = model.input_shape;
  if (in.size() != 1 && in.size() != 3) {
    throw ShapeError("input_shape must be [C,H,W] or [N], got " + to_string(in));
  }
  for (std::size_t e : in) {
    if (e == 0) throw ShapeError("input_shape extents must be positive");
  }
  if (model.layers.empty()) {
    throw StructuralError("model has no layers; a discriminator ends in dense + sigmoid");
  }

  propagate_shapes(model);

  std::set<std::string> referenced;
  for (std::size_t i = 0; i < model.layers.size(); ++i) {
    const LayerSpec& layer = model.layers[i];
    const auto roles = required_roles(layer.kind);
    for (const auto& [role, name] : layer.params) {
      bool known = false;
      for (auto r : roles) known = known || r == role;
      if (!known) {
        throw StructuralError("layer " + std::to_string(i) + " (" +
                              std::string(kind_name(layer.kind)) + ") has unexpected parameter role '" +
                              role + "'");
      }
      if (!referenced.insert(name).second) {
        throw StructuralError("parameter tensor '" + name + "' is referenced by more than one layer slot");
      }
    }

    std::visit(overloaded{
                   [&](const Conv2d& c) {
                     check_param_shape(model, layer, kWeight,
                                       {c.out_channels, c.in_channels, c.kernel_h, c.kernel_w}, i);
                     check_param_shape(model, layer, kBias, {c.out_channels}, i);
                   },
                   [&](const Dense& d) {
                     check_param_shape(model, layer, kWeight, {d.out_features, d.in_features}, i);
                     check_param_shape(model, layer, kBias, {d.out_features}, i);
                   },
                   [&](const LeakyRelu& l) {
                     if (!(l.alpha > 0.0 && l.alpha < 1.0)) {
                       throw ValueError("leakyRelu alpha must lie in (0, 1), got " +
                                        std::to_string(l.alpha));
                     }
                   },
                   [&](const BatchNorm2d& b) {
                     if (!(b.epsilon >= 0.0)) throw ValueError("batchNorm2d epsilon must be >= 0");
                     for (auto role : {kGamma, kBeta, kRunningMean, kRunningVar}) {
                       check_param_shape(model, layer, role, {b.channels}, i);
                     }
                     for (double v : model.param(layer, kRunningVar).values()) {
                       if (!(v > 0.0)) throw ValueError("batchNorm2d runningVar must be > 0");
                     }
                   },
                   [&](const auto&) {},
               },
               layer.kind);
  }

  const std::size_t n = model.layers.size();
  if (n < 2 || !std::holds_alternative<Sigmoid>(model.layers[n - 1].kind) ||
      !std::holds_alternative<Dense>(model.layers[n - 2].kind)) {
    throw StructuralError("a discriminator must end in dense followed by sigmoid");
  }
  if (std::get<Dense>(model.layers[n - 2].kind).out_features != 1) {
    throw StructuralError("final dense layer must have out_features == 1");
  }
}

} // namespace plrp::model

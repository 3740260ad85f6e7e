#include "plrp/inference.hpp"

#include "plrp/error.hpp"

#include <cmath>

namespace plrp::inference {

using namespace plrp::model;

namespace {

Tensor conv2d_forward(const Conv2d& c, const Tensor& w, const Tensor& b, const Tensor& in) {
  const Shape out_shape = output_shape(c, in.shape());
  const std::size_t H = in.extent(1), W = in.extent(2);
  const std::size_t OH = out_shape[1], OW = out_shape[2];
  auto wv = w.values();
  std::vector<double> out(element_count(out_shape));

  for (std::size_t o = 0; o < c.out_channels; ++o) {
    for (std::size_t oy = 0; oy < OH; ++oy) {
      for (std::size_t ox = 0; ox < OW; ++ox) {
        double acc = b[o];
        for (std::size_t ch = 0; ch < c.in_channels; ++ch) {
          for (std::size_t ky = 0; ky < c.kernel_h; ++ky) {
            const auto iy = static_cast<std::ptrdiff_t>(oy * c.stride_h + ky) -
                            static_cast<std::ptrdiff_t>(c.pad_h);
            if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(H)) continue;
            for (std::size_t kx = 0; kx < c.kernel_w; ++kx) {
              const auto ix = static_cast<std::ptrdiff_t>(ox * c.stride_w + kx) -
                              static_cast<std::ptrdiff_t>(c.pad_w);
              if (ix < 0 || ix >= static_cast<std::ptrdiff_t>(W)) continue;
              acc += wv[((o * c.in_channels + ch) * c.kernel_h + ky) * c.kernel_w + kx] *
                     in.at(ch, static_cast<std::size_t>(iy), static_cast<std::size_t>(ix));
            }
          }
        }
        out[(o * OH + oy) * OW + ox] = acc;
      }
    }
  }
  return Tensor(out_shape, std::move(out));
}

Tensor dense_forward(const Dense& d, const Tensor& w, const Tensor& b, const Tensor& in) {
  output_shape(d, in.shape());
  auto x = in.values();
  auto wv = w.values();
  std::vector<double> out(d.out_features);
  for (std::size_t j = 0; j < d.out_features; ++j) {
    double acc = 0.0;
    for (std::size_t i = 0; i < d.in_features; ++i) acc += wv[j * d.in_features + i] * x[i];
    out[j] = acc + b[j];
  }
  return Tensor({d.out_features}, std::move(out));
}

Tensor avg_pool_forward(const AvgPool2d& p, const Tensor& in) {
  const Shape out_shape = output_shape(p, in.shape());
  const std::size_t C = out_shape[0], OH = out_shape[1], OW = out_shape[2];
  const double weight = 1.0 / static_cast<double>(p.window * p.window);
  std::vector<double> out(element_count(out_shape));
  for (std::size_t c = 0; c < C; ++c) {
    for (std::size_t oy = 0; oy < OH; ++oy) {
      for (std::size_t ox = 0; ox < OW; ++ox) {
        double acc = 0.0;
        for (std::size_t ky = 0; ky < p.window; ++ky) {
          for (std::size_t kx = 0; kx < p.window; ++kx) {
            acc += weight * in.at(c, oy * p.stride + ky, ox * p.stride + kx);
          }
        }
        out[(c * OH + oy) * OW + ox] = acc;
      }
    }
  }
  return Tensor(out_shape, std::move(out));
}

template <class F>
Tensor map_values(const Tensor& in, F f) {
  std::vector<double> out(in.size());
  for (std::size_t i = 0; i < in.size(); ++i) out[i] = f(in[i]);
  return Tensor(in.shape(), std::move(out));
}

} // namespace

double sigmoid(double x) noexcept {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

std::vector<std::size_t> max_pool_argmax(const MaxPool2d& pool, const Tensor& input) {
  const Shape out_shape = output_shape(pool, input.shape());
  const std::size_t C = out_shape[0], OH = out_shape[1], OW = out_shape[2];
  const std::size_t H = input.extent(1), W = input.extent(2);
  std::vector<std::size_t> winners(element_count(out_shape));
  for (std::size_t c = 0; c < C; ++c) {
    for (std::size_t oy = 0; oy < OH; ++oy) {
      for (std::size_t ox = 0; ox < OW; ++ox) {
        std::size_t best = (c * H + oy * pool.stride) * W + ox * pool.stride;
        for (std::size_t ky = 0; ky < pool.window; ++ky) {
          for (std::size_t kx = 0; kx < pool.window; ++kx) {
            const std::size_t idx = (c * H + oy * pool.stride + ky) * W + ox * pool.stride + kx;
            if (input[idx] > input[best]) best = idx;
          }
        }
        winners[(c * OH + oy) * OW + ox] = best;
      }
    }
  }
  return winners;
}

namespace {

Tensor batch_norm_forward(const BatchNorm2d& bn, const NetworkModel& model, const LayerSpec& layer,
                          const Tensor& input) {
  const Tensor& gamma = model.param(layer, kGamma);
  const Tensor& beta = model.param(layer, kBeta);
  const Tensor& mean = model.param(layer, kRunningMean);
  const Tensor& var = model.param(layer, kRunningVar);
  const std::size_t C = input.extent(0), plane = input.size() / C;
  std::vector<double> out(input.values().begin(), input.values().end());
  for (std::size_t c = 0; c < C; ++c) {
    const double scale = gamma[c] / std::sqrt(var[c] + bn.epsilon);
    for (std::size_t i = 0; i < plane; ++i) {
      double& v = out[c * plane + i];
      v = (v - mean[c]) * scale + beta[c];
    }
  }
  return Tensor(input.shape(), std::move(out));
}

} // namespace

Tensor apply_layer(const LayerView& layer, const Tensor& input, std::vector<std::size_t>* argmax) {
  return std::visit(
      [&](const auto& k) -> Tensor {
        using K = std::decay_t<decltype(k)>;
        if constexpr (std::is_same_v<K, Conv2d>) {
          return conv2d_forward(k, *layer.weight, *layer.bias, input);
        } else if constexpr (std::is_same_v<K, Dense>) {
          return dense_forward(k, *layer.weight, *layer.bias, input);
        } else if constexpr (std::is_same_v<K, Relu>) {
          return map_values(input, [](double v) { return v > 0.0 ? v : 0.0; });
        } else if constexpr (std::is_same_v<K, LeakyRelu>) {
          const double alpha = k.alpha;
          return map_values(input, [alpha](double v) { return v < 0.0 ? alpha * v : v; });
        } else if constexpr (std::is_same_v<K, MaxPool2d>) {
          std::vector<std::size_t> winners = max_pool_argmax(k, input);
          const Shape out_shape = output_shape(k, input.shape());
          std::vector<double> out(winners.size());
          for (std::size_t i = 0; i < winners.size(); ++i) out[i] = input[winners[i]];
          if (argmax) *argmax = std::move(winners);
          return Tensor(out_shape, std::move(out));
        } else if constexpr (std::is_same_v<K, AvgPool2d>) {
          return avg_pool_forward(k, input);
        } else if constexpr (std::is_same_v<K, Flatten>) {
          return reshape(input, {input.size()});
        } else if constexpr (std::is_same_v<K, Sigmoid>) {
          return map_values(input, [](double v) { return sigmoid(v); });
        } else {
          throw StructuralError("batchNorm2d needs its model parameters; run forward on the model");
        }
      },
      layer.kind);
}

ActivationTrace forward(const NetworkModel& model, const Tensor& image) {
  if (image.shape() != model.input_shape) {
    throw ShapeError("image shape " + to_string(image.shape()) + " does not match model input " +
                     to_string(model.input_shape));
  }
  ActivationTrace trace;
  trace.layer_inputs.reserve(model.layers.size());
  trace.argmax.resize(model.layers.size());

  Tensor current = image;
  for (std::size_t i = 0; i < model.layers.size(); ++i) {
    trace.layer_inputs.push_back(current);
    const LayerSpec& spec = model.layers[i];
    if (const auto* bn = std::get_if<BatchNorm2d>(&spec.kind)) {
      if (current.rank() != 3 || current.extent(0) != bn->channels) {
        throw ShapeError("batchNorm2d expects " + std::to_string(bn->channels) + " channels, got " +
                         to_string(current.shape()));
      }
      current = batch_norm_forward(*bn, model, spec, current);
    } else {
      current = apply_layer(model.view(i), current, &trace.argmax[i]);
    }
  }
  if (current.size() != 1 || model.layers.empty() ||
      !std::holds_alternative<Sigmoid>(model.layers.back().kind)) {
    throw StructuralError("model does not end in a single sigmoid output");
  }
  trace.pre_sigmoid = trace.layer_inputs.back()[0];
  trace.final_output = sigmoid(trace.pre_sigmoid);
  return trace;
}

double score(const NetworkModel& model, const Tensor& image) {
  return forward(model, image).final_output;
}

} // namespace plrp::inference

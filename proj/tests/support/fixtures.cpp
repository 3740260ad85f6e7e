#include "fixtures.hpp"

#include "plrp/model_io.hpp"

#include <sys/wait.h>

#include <atomic>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iterator>
#include <stdexcept>
#include <unistd.h>

namespace plrp::testing {

using namespace plrp::model;

double uniform(Rng& rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

std::size_t pick(Rng& rng, std::size_t lo, std::size_t hi) {
  return std::uniform_int_distribution<std::size_t>(lo, hi)(rng);
}

Tensor random_tensor(const Shape& shape, Rng& rng, double lo, double hi) {
  std::vector<double> v(element_count(shape));
  for (double& x : v) x = uniform(rng, lo, hi);
  return Tensor(shape, std::move(v));
}

ModelBuilder::ModelBuilder(Shape input_shape) { model_.input_shape = std::move(input_shape); }

std::string ModelBuilder::name(const char* role) {
  return "l" + std::to_string(model_.layers.size()) + "." + role;
}

ModelBuilder& ModelBuilder::conv(const Conv2d& spec, Tensor weight, std::optional<Tensor> bias) {
  LayerSpec layer{spec, {}};
  layer.params["weight"] = name("weight");
  layer.params["bias"] = name("bias");
  model_.parameters.emplace(layer.params["bias"], bias.value_or(Tensor::zeros({spec.out_channels})));
  model_.parameters.emplace(layer.params["weight"], std::move(weight));
  model_.layers.push_back(std::move(layer));
  return *this;
}

ModelBuilder& ModelBuilder::dense(Tensor weight, std::optional<Tensor> bias) {
  LayerSpec layer{Dense{weight.extent(1), weight.extent(0)}, {}};
  layer.params["weight"] = name("weight");
  layer.params["bias"] = name("bias");
  model_.parameters.emplace(layer.params["bias"], bias.value_or(Tensor::zeros({weight.extent(0)})));
  model_.parameters.emplace(layer.params["weight"], std::move(weight));
  model_.layers.push_back(std::move(layer));
  return *this;
}

ModelBuilder& ModelBuilder::batch_norm(double epsilon, Tensor gamma, Tensor beta, Tensor mean, Tensor var) {
  LayerSpec layer{BatchNorm2d{gamma.size(), epsilon}, {}};
  const std::pair<const char*, Tensor*> roles[] = {
      {"gamma", &gamma}, {"beta", &beta}, {"runningMean", &mean}, {"runningVar", &var}};
  for (auto& [role, t] : roles) {
    layer.params[role] = name(role);
    model_.parameters.emplace(layer.params[role], std::move(*t));
  }
  model_.layers.push_back(std::move(layer));
  return *this;
}

ModelBuilder& ModelBuilder::add(LayerKind kind) {
  model_.layers.push_back({std::move(kind), {}});
  return *this;
}

NetworkModel dense_model(const std::vector<double>& weights, double bias, std::optional<Shape> input_shape) {
  const Shape shape = input_shape.value_or(Shape{weights.size()});
  ModelBuilder b(shape);
  if (shape.size() != 1) b.add(Flatten{});
  b.dense(Tensor({1, weights.size()}, weights), Tensor({1}, {bias}));
  b.add(Sigmoid{});
  return b.build();
}

namespace {

struct GenState {
  Shape shape;
  bool non_negative = true;
  bool seen_affine = false;
};

Tensor affine_weight(Rng& rng, const Shape& shape, bool force_positive_per_row) {
  std::vector<double> v(element_count(shape));
  for (double& x : v) x = uniform(rng, -1.0, 1.0);
  if (force_positive_per_row) {
    const std::size_t row = v.size() / shape[0];
    for (std::size_t o = 0; o < shape[0]; ++o) {
      double& w = v[o * row + pick(rng, 0, row - 1)];
      w = std::max(std::abs(w), 0.1);
    }
  }
  return Tensor(shape, std::move(v));
}

void add_activation(ModelBuilder& b, GenState& s, Rng& rng, const RandomModelOptions& o, bool first_affine) {
  const bool leaky = o.non_degenerate ? first_affine && pick(rng, 0, 1) == 1 : pick(rng, 0, 2) == 0;
  if (leaky) {
    b.add(LeakyRelu{uniform(rng, 0.05, 0.5)});
    s.non_negative = false;
  } else {
    b.add(Relu{});
    s.non_negative = true;
  }
}

} // namespace

NetworkModel random_model(Rng& rng, const RandomModelOptions& o) {
  GenState s;
  s.shape = {pick(rng, 1, 3), pick(rng, 2, o.max_spatial), pick(rng, 2, o.max_spatial)};
  ModelBuilder b(s.shape);
  const std::size_t target = pick(rng, o.min_layers, o.max_layers);
  std::size_t count = 0;

  while (count < target) {
    const bool room_for_two = target - count >= 2;
    const bool spatial = s.shape.size() == 3;
    enum Move { conv, dense, maxpool, avgpool, flatten, relu, leaky };
    std::vector<Move> moves = {relu, leaky};
    if (spatial) {
      if (room_for_two) moves.push_back(conv);
      if (s.shape[1] >= 2 && s.shape[2] >= 2) {
        moves.push_back(maxpool);
        if (s.non_negative || !o.non_degenerate) moves.push_back(avgpool);
      }
      moves.push_back(flatten);
    } else if (room_for_two) {
      moves.push_back(dense);
    }
    const Move m = moves[pick(rng, 0, moves.size() - 1)];
    const bool first_affine = !s.seen_affine;

    switch (m) {
    case conv: {
      const std::size_t C = s.shape[0], H = s.shape[1], W = s.shape[2];
      Conv2d c;
      c.in_channels = C;
      c.out_channels = pick(rng, 1, 4);
      c.kernel_h = pick(rng, 1, std::min<std::size_t>(3, H));
      c.kernel_w = pick(rng, 1, std::min<std::size_t>(3, W));
      c.stride_h = pick(rng, 1, 2);
      c.stride_w = pick(rng, 1, 2);
      if (!(o.non_degenerate && first_affine)) {
        c.pad_h = pick(rng, 0, c.kernel_h - 1);
        c.pad_w = pick(rng, 0, c.kernel_w - 1);
      }
      std::optional<Tensor> bias;
      if (o.bias) bias = random_tensor({c.out_channels}, rng, -0.5, 0.5);
      b.conv(c, affine_weight(rng, {c.out_channels, C, c.kernel_h, c.kernel_w}, o.non_degenerate && first_affine),
             bias);
      if (o.batch_norm && pick(rng, 0, 1) == 1) {
        const Shape ch{c.out_channels};
        b.batch_norm(1e-5, random_tensor(ch, rng, 0.5, 1.5), random_tensor(ch, rng, -0.2, 0.2),
                     random_tensor(ch, rng, -0.2, 0.2), random_tensor(ch, rng, 0.5, 1.5));
        ++count;
      }
      s.shape = output_shape(c, s.shape);
      s.seen_affine = true;
      add_activation(b, s, rng, o, first_affine);
      count += 2;
      break;
    }
    case dense: {
      const std::size_t out = pick(rng, 1, 8);
      std::optional<Tensor> bias;
      if (o.bias) bias = random_tensor({out}, rng, -0.5, 0.5);
      b.dense(affine_weight(rng, {out, s.shape[0]}, o.non_degenerate && first_affine), bias);
      s.shape = {out};
      s.seen_affine = true;
      add_activation(b, s, rng, o, first_affine);
      count += 2;
      break;
    }
    case maxpool:
    case avgpool: {
      const std::size_t stride = pick(rng, 1, 2);
      if (m == maxpool) {
        b.add(MaxPool2d{2, stride});
        s.shape = output_shape(MaxPool2d{2, stride}, s.shape);
      } else {
        b.add(AvgPool2d{2, stride});
        s.shape = output_shape(AvgPool2d{2, stride}, s.shape);
      }
      ++count;
      break;
    }
    case flatten:
      b.add(Flatten{});
      s.shape = {element_count(s.shape)};
      ++count;
      break;
    case relu:
      b.add(Relu{});
      s.non_negative = true;
      ++count;
      break;
    case leaky:
      b.add(LeakyRelu{uniform(rng, 0.05, 0.5)});
      ++count;
      break;
    }
  }

  if (s.shape.size() != 1) b.add(Flatten{});
  const NetworkModel so_far = b.build();
  const bool ends_in_relu = !so_far.layers.empty() && std::holds_alternative<Relu>(so_far.layers.back().kind);
  if (o.non_degenerate && !ends_in_relu) b.add(Relu{});
  const std::size_t features = element_count(s.shape);
  Tensor head = o.non_degenerate ? random_tensor({1, features}, rng, 0.1, 1.0)
                                 : random_tensor({1, features}, rng, -1.0, 1.0);
  std::optional<Tensor> bias;
  if (o.bias) bias = random_tensor({1}, rng, -0.5, 0.5);
  b.dense(std::move(head), bias);
  b.add(Sigmoid{});
  return b.build();
}

Tensor random_input(const NetworkModel& m, Rng& rng) { return random_tensor(m.input_shape, rng, 0.05, 1.0); }

void write_model_dir(const NetworkModel& m, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  io::save_model(m, dir / "model.json", dir / "weights.bin");
}

std::filesystem::path scratch_dir(const std::string& tag) {
  static std::atomic<int> counter{0};
  const auto dir = std::filesystem::temp_directory_path() /
                   ("plrp-" + tag + "-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::string shell_quote(const std::string& s) {
  std::string out = "'";
  for (char c : s) {
    if (c == '\'') out += "'\\''";
    else out += c;
  }
  return out + "'";
}

ProcessResult run_command(const std::string& command) {
  const auto err_path = scratch_dir("stderr") / "err.txt";
  ProcessResult r;
  FILE* pipe = ::popen((command + " 2>" + shell_quote(err_path.string())).c_str(), "r");
  if (!pipe) throw std::runtime_error("popen failed");
  char buf[4096];
  std::size_t n = 0;
  while ((n = std::fread(buf, 1, sizeof buf, pipe)) > 0) r.out.append(buf, n);
  const int status = ::pclose(pipe);
  r.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  const auto bytes = read_file(err_path);
  r.err.assign(bytes.begin(), bytes.end());
  std::filesystem::remove_all(err_path.parent_path());
  return r;
}

} // namespace plrp::testing

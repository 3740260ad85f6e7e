#pragma once

#include "plrp/image_io.hpp"
#include "plrp/model.hpp"
#include "plrp/tensor.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <random>
#include <string>
#include <vector>

namespace plrp::testing {

using Rng = std::mt19937_64;

double uniform(Rng& rng, double lo, double hi);
std::size_t pick(Rng& rng, std::size_t lo, std::size_t hi);
Tensor random_tensor(const Shape& shape, Rng& rng, double lo = -1.0, double hi = 1.0);

/// Appends layers and parameters with generated tensor names.
class ModelBuilder {
public:
  explicit ModelBuilder(Shape input_shape);

  /// A missing bias becomes zeros.
  ModelBuilder& conv(const model::Conv2d& spec, Tensor weight, std::optional<Tensor> bias = std::nullopt);
  /// in/out features are taken from the weight shape.
  ModelBuilder& dense(Tensor weight, std::optional<Tensor> bias = std::nullopt);
  ModelBuilder& batch_norm(double epsilon, Tensor gamma, Tensor beta, Tensor mean, Tensor var);
  ModelBuilder& add(model::LayerKind kind);

  model::NetworkModel build() const { return model_; }

private:
  std::string name(const char* role);

  model::NetworkModel model_;
  std::size_t counter_ = 0;
};

/// flatten? + dense(n -> 1) + sigmoid over input shape [n] (or the given shape).
model::NetworkModel dense_model(const std::vector<double>& weights, double bias,
                                std::optional<Shape> input_shape = std::nullopt);

struct RandomModelOptions {
  std::size_t min_layers = 2;
  std::size_t max_layers = 5;
  std::size_t max_spatial = 16;
  bool bias = false;
  /// Inserts batchNorm2d after some convs (not loadable with folding off
  /// into LRP, but valid to save).
  bool batch_norm = false;
  /// Keeps every positive-polarity denominator that can receive relevance
  /// nonzero for strictly positive inputs: activations after all but the
  /// first affine layer are relu, the first affine layer has no padding and
  /// a positive weight per output unit, avgPool only sees non-negative
  /// inputs and the final dense has positive weights behind a relu.
  bool non_degenerate = true;
};

/// A random valid discriminator: `min_layers..max_layers` hidden layers drawn
/// from conv2d/dense/relu/leakyRelu/maxPool2d/avgPool2d/flatten, then
/// dense(1) + sigmoid.
model::NetworkModel random_model(Rng& rng, const RandomModelOptions& options = {});

/// Strictly positive input in [0.05, 1] for the model's input shape.
Tensor random_input(const model::NetworkModel& m, Rng& rng);

/// Writes model.json / weights.bin into `dir` (created if needed).
void write_model_dir(const model::NetworkModel& m, const std::filesystem::path& dir);

/// Fresh empty directory under the system temp dir.
std::filesystem::path scratch_dir(const std::string& tag);

std::vector<std::uint8_t> read_file(const std::filesystem::path& path);

struct ProcessResult {
  int exit_code = -1;
  std::string out;
  std::string err;
};

/// Runs a shell command, capturing stdout and stderr.
ProcessResult run_command(const std::string& command);

/// Single-quoted for /bin/sh.
std::string shell_quote(const std::string& s);

} // namespace plrp::testing

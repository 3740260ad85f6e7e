#pragma once

#include "plrp/model.hpp"
#include "plrp/tensor.hpp"

#include <filesystem>
#include <map>
#include <string>

namespace plrp::io {

/// Manifest format version written and accepted.
inline constexpr int kFormatVersion = 1;

/// A bag of named tensors plus string metadata, stored as a JSON manifest
/// and a raw little-endian f32 blob. Model files and exported relevance maps
/// share this container.
struct TensorContainer {
  std::map<std::string, Tensor> tensors;
  std::map<std::string, std::string> metadata;
};

void save_tensors(const TensorContainer& container, const std::filesystem::path& manifest_path,
                  const std::filesystem::path& weights_path);
TensorContainer load_tensors(const std::filesystem::path& manifest_path,
                             const std::filesystem::path& weights_path);

struct LoadOptions {
  /// Fold every conv2d + batchNorm2d pair into a single conv2d.
  bool fold_batch_norm = true;
};

/// Reads and validates a model. Errors: ParseError (malformed manifest),
/// BoundsError (entry past end of weights file), ShapeError / StructuralError
/// (invariant violations), DtypeError (anything but f32), IoError.
model::NetworkModel load_model(const std::filesystem::path& manifest_path,
                               const std::filesystem::path& weights_path,
                               const LoadOptions& options = {});

/// Validates, then writes. Nothing is written for an invalid model.
void save_model(const model::NetworkModel& model, const std::filesystem::path& manifest_path,
                const std::filesystem::path& weights_path);

/// Replaces each conv2d + batchNorm2d pair by an equivalent conv2d:
///   w' = w * gamma / sqrt(var + eps)        (per output channel)
///   b' = (b - mean) * gamma / sqrt(var + eps) + beta
/// StructuralError if a batchNorm2d does not directly follow a conv2d.
model::NetworkModel fold_batch_norm(const model::NetworkModel& model);

/// Round-trips a value through IEEE binary32, as the weights file does.
double quantize_f32(double v);

} // namespace plrp::io

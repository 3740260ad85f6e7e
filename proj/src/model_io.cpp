#include "plrp/model_io.hpp"

#include "plrp/error.hpp"

#include <json.hpp>

#include <bit>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <iterator>
#include <limits>

namespace plrp::io {

using nlohmann::json;
using namespace plrp::model;

namespace {

std::vector<char> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  return std::vector<char>(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

void write_file(const std::filesystem::path& path, const std::string& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("failed writing " + path.string());
}

json parse_manifest(const std::filesystem::path& path) {
  const std::vector<char> text = read_file(path);
  json doc;
  try {
    doc = json::parse(text.begin(), text.end());
  } catch (const json::exception& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
  if (!doc.is_object()) throw ParseError(path.string() + ": manifest must be a JSON object");
  if (!doc.contains("version") || !doc["version"].is_number_integer() ||
      doc["version"].get<int>() != kFormatVersion) {
    throw ParseError(path.string() + ": manifest version must be " + std::to_string(kFormatVersion));
  }
  return doc;
}

// Typed field access that reports malformed manifests as ParseError.
template <class T>
T field(const json& obj, const char* name) {
  if (!obj.is_object() || !obj.contains(name)) {
    throw ParseError(std::string("missing manifest field '") + name + "'");
  }
  try {
    return obj.at(name).get<T>();
  } catch (const json::exception&) {
    throw ParseError(std::string("manifest field '") + name + "' has the wrong type");
  }
}

template <class T>
T field_or(const json& obj, const char* name, T fallback) {
  if (!obj.contains(name)) return fallback;
  return field<T>(obj, name);
}

float decode_f32_le(const char* p) {
  std::uint32_t bits = 0;
  for (int b = 3; b >= 0; --b) bits = (bits << 8) | static_cast<unsigned char>(p[b]);
  return std::bit_cast<float>(bits);
}

void encode_f32_le(float v, std::string& out) {
  const auto bits = std::bit_cast<std::uint32_t>(v);
  for (int b = 0; b < 4; ++b) out.push_back(static_cast<char>((bits >> (8 * b)) & 0xFFu));
}

std::map<std::string, Tensor> read_entries(const json& entries, const std::vector<char>& blob) {
  if (!entries.is_array()) throw ParseError("manifest field 'tensors' must be an array");
  std::map<std::string, Tensor> tensors;
  for (const json& e : entries) {
    const auto name = field<std::string>(e, "name");
    const auto dtype = field<std::string>(e, "dtype");
    if (dtype != "f32") throw DtypeError("tensor '" + name + "' has dtype '" + dtype + "', expected f32");
    const auto shape = field<Shape>(e, "shape");
    const auto offset = field<std::uint64_t>(e, "offset");
    const auto length = field<std::uint64_t>(e, "length");
    const std::size_t count = element_count(shape);
    if (length != count * sizeof(float)) {
      throw ShapeError("tensor '" + name + "' declares " + std::to_string(length) +
                       " bytes but shape " + to_string(shape) + " needs " +
                       std::to_string(count * sizeof(float)));
    }
    if (offset > blob.size() || length > blob.size() - offset) {
      throw BoundsError("tensor '" + name + "' spans bytes [" + std::to_string(offset) + ", " +
                        std::to_string(offset + length) + ") past end of weights file (" +
                        std::to_string(blob.size()) + " bytes)");
    }
    std::vector<double> data(count);
    for (std::size_t i = 0; i < count; ++i) {
      data[i] = decode_f32_le(blob.data() + offset + i * sizeof(float));
    }
    if (!tensors.emplace(name, Tensor(shape, std::move(data))).second) {
      throw ParseError("duplicate tensor name '" + name + "'");
    }
  }
  return tensors;
}

// Serializes tensors in name order; returns the manifest entries.
json write_entries(const std::map<std::string, Tensor>& tensors, std::string& blob) {
  json entries = json::array();
  for (const auto& [name, t] : tensors) {
    const std::size_t offset = blob.size();
    for (double v : t.values()) {
      const auto f = static_cast<float>(v);
      if (!std::isfinite(f)) throw ValueError("tensor '" + name + "' overflows f32");
      encode_f32_le(f, blob);
    }
    entries.push_back({{"name", name},
                       {"dtype", "f32"},
                       {"shape", t.shape()},
                       {"offset", offset},
                       {"length", blob.size() - offset}});
  }
  return entries;
}

json layer_to_json(const LayerSpec& layer) {
  json j;
  j["kind"] = std::string(kind_name(layer.kind));
  std::visit(
      [&](const auto& k) {
        using K = std::decay_t<decltype(k)>;
        if constexpr (std::is_same_v<K, Conv2d>) {
          j["inChannels"] = k.in_channels;
          j["outChannels"] = k.out_channels;
          j["kernelH"] = k.kernel_h;
          j["kernelW"] = k.kernel_w;
          j["strideH"] = k.stride_h;
          j["strideW"] = k.stride_w;
          j["padH"] = k.pad_h;
          j["padW"] = k.pad_w;
        } else if constexpr (std::is_same_v<K, Dense>) {
          j["inFeatures"] = k.in_features;
          j["outFeatures"] = k.out_features;
        } else if constexpr (std::is_same_v<K, LeakyRelu>) {
          j["alpha"] = k.alpha;
        } else if constexpr (std::is_same_v<K, MaxPool2d> || std::is_same_v<K, AvgPool2d>) {
          j["window"] = k.window;
          j["stride"] = k.stride;
        } else if constexpr (std::is_same_v<K, BatchNorm2d>) {
          j["channels"] = k.channels;
          j["epsilon"] = k.epsilon;
        }
      },
      layer.kind);
  j["params"] = layer.params;
  return j;
}

LayerSpec layer_from_json(const json& j) {
  const auto kind = field<std::string>(j, "kind");
  LayerSpec layer;
  if (kind == "conv2d") {
    Conv2d c;
    c.in_channels = field<std::size_t>(j, "inChannels");
    c.out_channels = field<std::size_t>(j, "outChannels");
    c.kernel_h = field<std::size_t>(j, "kernelH");
    c.kernel_w = field<std::size_t>(j, "kernelW");
    c.stride_h = field_or<std::size_t>(j, "strideH", 1);
    c.stride_w = field_or<std::size_t>(j, "strideW", 1);
    c.pad_h = field_or<std::size_t>(j, "padH", 0);
    c.pad_w = field_or<std::size_t>(j, "padW", 0);
    layer.kind = c;
  } else if (kind == "dense") {
    layer.kind = Dense{field<std::size_t>(j, "inFeatures"), field<std::size_t>(j, "outFeatures")};
  } else if (kind == "relu") {
    layer.kind = Relu{};
  } else if (kind == "leakyRelu") {
    layer.kind = LeakyRelu{field<double>(j, "alpha")};
  } else if (kind == "maxPool2d") {
    layer.kind = MaxPool2d{field<std::size_t>(j, "window"), field<std::size_t>(j, "stride")};
  } else if (kind == "avgPool2d") {
    layer.kind = AvgPool2d{field<std::size_t>(j, "window"), field<std::size_t>(j, "stride")};
  } else if (kind == "flatten") {
    layer.kind = Flatten{};
  } else if (kind == "sigmoid") {
    layer.kind = Sigmoid{};
  } else if (kind == "batchNorm2d") {
    layer.kind = BatchNorm2d{field<std::size_t>(j, "channels"), field<double>(j, "epsilon")};
  } else {
    throw ParseError("unknown layer kind '" + kind + "'");
  }
  layer.params = field_or<std::map<std::string, std::string>>(j, "params", {});
  return layer;
}

} // namespace

double quantize_f32(double v) {
  return static_cast<double>(static_cast<float>(v));
}

void save_tensors(const TensorContainer& container, const std::filesystem::path& manifest_path,
                  const std::filesystem::path& weights_path) {
  std::string blob;
  json doc;
  doc["version"] = kFormatVersion;
  doc["metadata"] = container.metadata;
  doc["tensors"] = write_entries(container.tensors, blob);
  write_file(weights_path, blob);
  write_file(manifest_path, doc.dump(2) + "\n");
}

TensorContainer load_tensors(const std::filesystem::path& manifest_path,
                             const std::filesystem::path& weights_path) {
  const json doc = parse_manifest(manifest_path);
  const std::vector<char> blob = read_file(weights_path);
  TensorContainer c;
  c.tensors = read_entries(doc.contains("tensors") ? doc["tensors"] : json::array(), blob);
  c.metadata = field_or<std::map<std::string, std::string>>(doc, "metadata", {});
  return c;
}

NetworkModel load_model(const std::filesystem::path& manifest_path,
                        const std::filesystem::path& weights_path, const LoadOptions& options) {
  const json doc = parse_manifest(manifest_path);
  const std::vector<char> blob = read_file(weights_path);

  NetworkModel m;
  m.input_shape = field<Shape>(doc, "input_shape");
  const json layers = field<json>(doc, "layers");
  if (!layers.is_array()) throw ParseError("manifest field 'layers' must be an array");
  for (const json& l : layers) m.layers.push_back(layer_from_json(l));
  m.parameters = read_entries(field<json>(doc, "tensors"), blob);
  m.metadata = field_or<std::map<std::string, std::string>>(doc, "metadata", {});

  validate(m);
  return options.fold_batch_norm ? fold_batch_norm(m) : m;
}

void save_model(const NetworkModel& model, const std::filesystem::path& manifest_path,
                const std::filesystem::path& weights_path) {
  validate(model);
  std::string blob;
  json doc;
  doc["version"] = kFormatVersion;
  doc["input_shape"] = model.input_shape;
  doc["layers"] = json::array();
  for (const LayerSpec& l : model.layers) doc["layers"].push_back(layer_to_json(l));
  doc["tensors"] = write_entries(model.parameters, blob);
  doc["metadata"] = model.metadata;
  write_file(weights_path, blob);
  write_file(manifest_path, doc.dump(2) + "\n");
}

NetworkModel fold_batch_norm(const NetworkModel& model) {
  NetworkModel out;
  out.input_shape = model.input_shape;
  out.metadata = model.metadata;
  out.parameters = model.parameters;

  for (std::size_t i = 0; i < model.layers.size(); ++i) {
    const LayerSpec& layer = model.layers[i];
    const auto* bn = std::get_if<BatchNorm2d>(&layer.kind);
    if (!bn) {
      out.layers.push_back(layer);
      continue;
    }
    if (i == 0 || !std::holds_alternative<Conv2d>(model.layers[i - 1].kind)) {
      throw StructuralError("batchNorm2d at layer " + std::to_string(i) +
                            " is not immediately preceded by conv2d");
    }
    const LayerSpec& conv_layer = out.layers.back();
    const auto& conv = std::get<Conv2d>(conv_layer.kind);
    if (conv.out_channels != bn->channels) {
      throw ShapeError("batchNorm2d channels do not match preceding conv2d");
    }

    const Tensor& w = out.param(conv_layer, kWeight);
    const Tensor& b = out.param(conv_layer, kBias);
    auto gamma = model.param(layer, kGamma).values();
    auto beta = model.param(layer, kBeta).values();
    auto mean = model.param(layer, kRunningMean).values();
    auto var = model.param(layer, kRunningVar).values();

    const std::size_t per_channel = w.size() / conv.out_channels;
    std::vector<double> w_new(w.values().begin(), w.values().end());
    std::vector<double> b_new(conv.out_channels);
    for (std::size_t o = 0; o < conv.out_channels; ++o) {
      const double scale = gamma[o] / std::sqrt(var[o] + bn->epsilon);
      for (std::size_t k = 0; k < per_channel; ++k) w_new[o * per_channel + k] *= scale;
      b_new[o] = (b[o] - mean[o]) * scale + beta[o];
    }
    const std::string w_name = conv_layer.params.at(std::string(kWeight));
    const std::string b_name = conv_layer.params.at(std::string(kBias));
    out.parameters.insert_or_assign(w_name, Tensor(w.shape(), std::move(w_new)));
    out.parameters.insert_or_assign(b_name, Tensor(b.shape(), std::move(b_new)));
    for (const auto& [role, name] : layer.params) out.parameters.erase(name);
  }
  return out;
}

} // namespace plrp::io

#include "fixtures.hpp"

#include "plrp/error.hpp"
#include "plrp/inference.hpp"
#include "plrp/model_io.hpp"

#include <doctest.h>

#include <cmath>
#include <cstring>
#include <fstream>

using namespace plrp;
using namespace plrp::model;
namespace fs = std::filesystem;

namespace {

void write_text(const fs::path& p, const std::string& s) { std::ofstream(p, std::ios::binary) << s; }

void write_floats(const fs::path& p, const std::vector<float>& values) {
  std::string bytes(values.size() * 4, '\0');
  for (std::size_t i = 0; i < values.size(); ++i) {
    std::uint32_t u;
    std::memcpy(&u, &values[i], 4);
    for (int b = 0; b < 4; ++b) bytes[i * 4 + b] = static_cast<char>((u >> (8 * b)) & 0xff);
  }
  write_text(p, bytes);
}

const char* kDenseManifest = R"({
  "version": 1,
  "input_shape": [2],
  "layers": [
    {"kind": "dense", "inFeatures": 2, "outFeatures": 1, "params": {"weight": "fc.w", "bias": "fc.b"}},
    {"kind": "sigmoid"}
  ],
  "tensors": [
    {"name": "fc.w", "dtype": "f32", "shape": [1, 2], "offset": 0, "length": 8},
    {"name": "fc.b", "dtype": "f32", "shape": [1], "offset": 8, "length": 4}
  ]
})";

std::string with(std::string text, const std::string& from, const std::string& to) {
  const auto at = text.find(from);
  REQUIRE(at != std::string::npos);
  return text.replace(at, from.size(), to);
}

Tensor quantized(const Tensor& t) {
  std::vector<double> v(t.values().begin(), t.values().end());
  for (double& x : v) x = io::quantize_f32(x);
  return Tensor(t.shape(), std::move(v));
}

} // namespace

TEST_CASE("hand-written dense manifest loads") {
  const auto dir = testing::scratch_dir("io");
  write_text(dir / "m.json", kDenseManifest);
  write_floats(dir / "w.bin", {2.0f, -1.0f, 0.5f});
  const auto m = io::load_model(dir / "m.json", dir / "w.bin");
  REQUIRE(m.layers.size() == 2);
  CHECK(std::holds_alternative<Dense>(m.layers[0].kind));
  CHECK(m.param(m.layers[0], kWeight) == Tensor({1, 2}, {2, -1}));
  CHECK(m.param(m.layers[0], kBias) == Tensor({1}, {0.5}));
  CHECK(inference::score(m, Tensor({2}, {1, 1})) == doctest::Approx(inference::sigmoid(1.5)).epsilon(1e-12));
}

TEST_CASE("malformed files are rejected with the right error") {
  const auto dir = testing::scratch_dir("io");
  write_floats(dir / "w.bin", {2.0f, -1.0f, 0.5f});
  const auto load = [&](const std::string& manifest) {
    write_text(dir / "m.json", manifest);
    return io::load_model(dir / "m.json", dir / "w.bin");
  };

  CHECK_THROWS_AS(load(with(kDenseManifest, R"("offset": 8, "length": 4)", R"("offset": 12, "length": 4)")),
                  BoundsError);
  CHECK_THROWS_AS(load(with(kDenseManifest, R"("offset": 0, "length": 8)", R"("offset": 6, "length": 8)")),
                  BoundsError);
  CHECK_THROWS_AS(load(with(kDenseManifest, R"("dtype": "f32", "shape": [1])", R"("dtype": "f16", "shape": [1])")),
                  DtypeError);
  CHECK_THROWS_AS(load(with(kDenseManifest, R"("version": 1)", R"("version": 2)")), ParseError);
  CHECK_THROWS_AS(load("{ not json"), ParseError);
  CHECK_THROWS_AS(load(with(kDenseManifest, R"("kind": "sigmoid")", R"("kind": "softmax")")), ParseError);
  CHECK_THROWS_AS(load(with(kDenseManifest, R"("shape": [1, 2])", R"("shape": [2, 1])")), ShapeError);
  CHECK_THROWS_AS(load(with(kDenseManifest, R"(,
    {"kind": "sigmoid"})", "")),
                  StructuralError);
  CHECK_THROWS_AS(io::load_model(dir / "missing.json", dir / "w.bin"), IoError);
}

TEST_CASE("conv weight of rank 3 is a shape error") {
  const auto dir = testing::scratch_dir("io");
  write_text(dir / "m.json", R"({
    "version": 1, "input_shape": [1, 3, 3],
    "layers": [
      {"kind": "conv2d", "inChannels": 1, "outChannels": 3, "kernelH": 1, "kernelW": 3,
       "params": {"weight": "c.w", "bias": "c.b"}},
      {"kind": "flatten"},
      {"kind": "dense", "inFeatures": 9, "outFeatures": 1, "params": {"weight": "d.w", "bias": "d.b"}},
      {"kind": "sigmoid"}
    ],
    "tensors": [
      {"name": "c.w", "dtype": "f32", "shape": [3, 1, 3], "offset": 0, "length": 36},
      {"name": "c.b", "dtype": "f32", "shape": [3], "offset": 36, "length": 12},
      {"name": "d.w", "dtype": "f32", "shape": [1, 9], "offset": 48, "length": 36},
      {"name": "d.b", "dtype": "f32", "shape": [1], "offset": 84, "length": 4}
    ]})");
  write_floats(dir / "w.bin", std::vector<float>(22, 0.5f));
  CHECK_THROWS_AS(io::load_model(dir / "m.json", dir / "w.bin"), ShapeError);
}

TEST_CASE("validation of hyperparameters and structure") {
  auto m = testing::dense_model({1, 2}, 0);
  CHECK_NOTHROW(validate(m));

  NetworkModel empty;
  empty.input_shape = {2};
  CHECK_THROWS_AS(validate(empty), StructuralError);

  testing::ModelBuilder leaky({2});
  leaky.add(LeakyRelu{1.5}).dense(Tensor({1, 2}, {1, 1})).add(Sigmoid{});
  CHECK_THROWS_AS(validate(leaky.build()), ValueError);

  testing::ModelBuilder two_out({2});
  two_out.dense(Tensor({2, 2}, {1, 1, 1, 1})).add(Sigmoid{});
  CHECK_THROWS_AS(validate(two_out.build()), StructuralError);

  testing::ModelBuilder bad_var({1, 2, 2});
  bad_var.conv(Conv2d{}, Tensor({1, 1, 1, 1}, {1}))
      .batch_norm(0.0, Tensor({1}, {1}), Tensor({1}, {0}), Tensor({1}, {0}), Tensor({1}, {0}))
      .add(Flatten{})
      .dense(Tensor({1, 4}, {1, 1, 1, 1}))
      .add(Sigmoid{});
  CHECK_THROWS_AS(validate(bad_var.build()), ValueError);

  auto shared = testing::dense_model({1, 2}, 0);
  shared.layers[0].params["bias"] = shared.layers[0].params["weight"];
  CHECK_THROWS(validate(shared));
}

TEST_CASE("save refuses invalid models before writing") {
  const auto dir = testing::scratch_dir("io");
  auto m = testing::dense_model({1, 2}, 0);
  m.parameters.at(m.layers[0].params.at("weight")) = Tensor({1, 3}, {1, 2, 3});
  CHECK_THROWS_AS(io::save_model(m, dir / "m.json", dir / "w.bin"), ShapeError);
  CHECK_FALSE(fs::exists(dir / "m.json"));
  CHECK_FALSE(fs::exists(dir / "w.bin"));

  NetworkModel empty;
  empty.input_shape = {2};
  CHECK_THROWS_AS(io::save_model(empty, dir / "m.json", dir / "w.bin"), StructuralError);
  CHECK_FALSE(fs::exists(dir / "m.json"));
}

TEST_CASE("round trip preserves layers and f32-quantized parameters") {
  testing::Rng rng(11);
  const auto dir = testing::scratch_dir("io");
  for (int trial = 0; trial < 30; ++trial) {
    testing::RandomModelOptions o;
    o.bias = true;
    o.batch_norm = true;
    o.non_degenerate = false;
    auto m = testing::random_model(rng, o);
    m.metadata["iteration"] = std::to_string(trial);
    io::save_model(m, dir / "m.json", dir / "w.bin");
    const auto back = io::load_model(dir / "m.json", dir / "w.bin", {.fold_batch_norm = false});
    CHECK(back.input_shape == m.input_shape);
    CHECK(back.layers == m.layers);
    CHECK(back.metadata == m.metadata);
    REQUIRE(back.parameters.size() == m.parameters.size());
    for (const auto& [name, t] : m.parameters) CHECK(back.parameters.at(name) == quantized(t));
  }
}

TEST_CASE("batch norm folding") {
  SUBCASE("identity normalization leaves conv unchanged") {
    testing::ModelBuilder b({1, 2, 2});
    b.conv(Conv2d{}, Tensor({1, 1, 1, 1}, {0.75}), Tensor({1}, {0.25}))
        .batch_norm(0.0, Tensor({1}, {1}), Tensor({1}, {0}), Tensor({1}, {0}), Tensor({1}, {1}))
        .add(Flatten{})
        .dense(Tensor({1, 4}, {1, 1, 1, 1}))
        .add(Sigmoid{});
    const auto folded = io::fold_batch_norm(b.build());
    REQUIRE(folded.layers.size() == 4);
    CHECK(folded.param(folded.layers[0], kWeight) == Tensor({1, 1, 1, 1}, {0.75}));
    CHECK(folded.param(folded.layers[0], kBias) == Tensor({1}, {0.25}));
  }
  SUBCASE("hand-applied formula") {
    testing::ModelBuilder b({1, 2, 2});
    b.conv(Conv2d{}, Tensor({1, 1, 1, 1}, {2}), Tensor({1}, {0}))
        .batch_norm(0.0, Tensor({1}, {3}), Tensor({1}, {1}), Tensor({1}, {0}), Tensor({1}, {1}))
        .add(Flatten{})
        .dense(Tensor({1, 4}, {1, 1, 1, 1}))
        .add(Sigmoid{});
    const auto folded = io::fold_batch_norm(b.build());
    CHECK(folded.param(folded.layers[0], kWeight) == Tensor({1, 1, 1, 1}, {6}));
    CHECK(folded.param(folded.layers[0], kBias) == Tensor({1}, {1}));
    for (const auto& l : folded.layers) CHECK_FALSE(std::holds_alternative<BatchNorm2d>(l.kind));
    CHECK(folded.parameters.size() == 4);
  }
  SUBCASE("batch norm first is structural") {
    testing::ModelBuilder b({1, 2, 2});
    b.batch_norm(0.0, Tensor({1}, {1}), Tensor({1}, {0}), Tensor({1}, {0}), Tensor({1}, {1}))
        .add(Flatten{})
        .dense(Tensor({1, 4}, {1, 1, 1, 1}))
        .add(Sigmoid{});
    CHECK_THROWS_AS(io::fold_batch_norm(b.build()), StructuralError);
  }
  SUBCASE("folding preserves the forward function") {
    testing::Rng rng(5);
    int folded_models = 0;
    for (int trial = 0; trial < 40; ++trial) {
      testing::RandomModelOptions o;
      o.bias = true;
      o.batch_norm = true;
      o.non_degenerate = false;
      const auto m = testing::random_model(rng, o);
      const auto f = io::fold_batch_norm(m);
      if (f.layers.size() != m.layers.size()) ++folded_models;
      for (int k = 0; k < 5; ++k) {
        const Tensor x = testing::random_tensor(m.input_shape, rng, -1, 1);
        const auto a = inference::forward(m, x), b = inference::forward(f, x);
        CHECK(std::abs(a.pre_sigmoid - b.pre_sigmoid) <= 1e-10);
      }
    }
    CHECK(folded_models > 5);
  }
}

TEST_CASE("load folds batch norm by default") {
  const auto dir = testing::scratch_dir("io");
  testing::ModelBuilder b({1, 2, 2});
  b.conv(Conv2d{}, Tensor({1, 1, 1, 1}, {2}), Tensor({1}, {0}))
      .batch_norm(0.0, Tensor({1}, {3}), Tensor({1}, {1}), Tensor({1}, {0}), Tensor({1}, {1}))
      .add(Flatten{})
      .dense(Tensor({1, 4}, {1, 1, 1, 1}))
      .add(Sigmoid{});
  io::save_model(b.build(), dir / "m.json", dir / "w.bin");
  CHECK(io::load_model(dir / "m.json", dir / "w.bin").layers.size() == 4);
  CHECK(io::load_model(dir / "m.json", dir / "w.bin", {.fold_batch_norm = false}).layers.size() == 5);
}

TEST_CASE("generic tensor container round trip") {
  const auto dir = testing::scratch_dir("io");
  io::TensorContainer c;
  c.tensors.emplace("relevance", Tensor({1, 2, 2}, {0.5, 0.25, 0, 1}));
  c.tensors.emplace("b", Tensor({3}, {1, 2, 3}));
  c.metadata["polarity"] = "positive";
  io::save_tensors(c, dir / "r.json", dir / "r.bin");
  const auto back = io::load_tensors(dir / "r.json", dir / "r.bin");
  CHECK(back.tensors == c.tensors);
  CHECK(back.metadata == c.metadata);
  CHECK(fs::file_size(dir / "r.bin") == 7 * 4);
}

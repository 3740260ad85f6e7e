#include "fixtures.hpp"

#include "plrp/error.hpp"
#include "plrp/image_io.hpp"
#include "plrp/render.hpp"

#include <doctest.h>

#include <set>

using namespace plrp;
using render::Colormap;
using render::HeatmapConfig;

namespace {

HeatmapConfig native(Colormap cm = Colormap::grayscale) {
  HeatmapConfig c;
  c.colormap = cm;
  c.output_size.reset();
  return c;
}

std::set<std::vector<std::uint8_t>> colors(const image::Image& img) {
  std::set<std::vector<std::uint8_t>> s;
  for (std::size_t i = 0; i < img.width * img.height; ++i) {
    s.emplace(img.pixels.begin() + i * img.channels, img.pixels.begin() + (i + 1) * img.channels);
  }
  return s;
}

} // namespace

TEST_CASE("all-zero relevance renders black") {
  const auto img = render::render_heatmap(Tensor::zeros({1, 4, 5}));
  CHECK(img.width == 256);
  CHECK(img.height == 256);
  for (auto p : img.pixels) REQUIRE(p == 0);
  for (auto p : render::render_heatmap(Tensor::zeros({3, 3}), native(Colormap::heat)).pixels) REQUIRE(p == 0);
}

TEST_CASE("single hot pixel is its own percentile") {
  std::vector<double> v(16, 0.0);
  v[5] = 0.003;
  const auto img = render::render_heatmap(Tensor({1, 4, 4}, v), native());
  for (std::size_t i = 0; i < 16; ++i) CHECK(img.pixels[i] == (i == 5 ? 255 : 0));
  const auto heat = render::render_heatmap(Tensor({1, 4, 4}, v), native(Colormap::heat));
  CHECK(heat.at(1, 1, 0) == 255);
  CHECK(heat.at(1, 1, 1) == 255);
  CHECK(heat.at(1, 1, 2) == 255);
  CHECK(heat.at(0, 0, 0) == 0);
}

TEST_CASE("rendering is invariant to relevance scale") {
  testing::Rng rng(14);
  for (int trial = 0; trial < 20; ++trial) {
    const Tensor t = testing::random_tensor({2, 9, 7}, rng, 0, 1);
    const auto base = render::render_heatmap(t, native(Colormap::heat));
    for (double c : {2.0, 1e-3, 37.5}) {
      std::vector<double> v(t.values().begin(), t.values().end());
      for (double& e : v) e *= c;
      CHECK(render::render_heatmap(Tensor(t.shape(), v), native(Colormap::heat)) == base);
    }
  }
}

TEST_CASE("percentile clipping and channel collapse") {
  std::vector<double> v;
  for (int i = 1; i <= 100; ++i) v.push_back(i);
  CHECK(render::positive_percentile(v, 99.0) == 99.0);
  CHECK(render::positive_percentile(v, 100.0) == 100.0);
  CHECK(render::positive_percentile(std::vector<double>{0, 0, 4}, 99.0) == 4.0);
  CHECK(render::positive_percentile(std::vector<double>{0, 0}, 99.0) == 0.0);

  CHECK(render::collapse_channels(Tensor({2, 1, 2}, {1, 2, 3, 4})) == Tensor({1, 2}, {4, 6}));
  CHECK(render::collapse_channels(Tensor({3}, {1, 2, 3})).shape() == Shape{1, 3});

  std::vector<double> ramp(100);
  for (int i = 0; i < 100; ++i) ramp[i] = i + 1;
  const auto img = render::render_heatmap(Tensor({1, 10, 10}, ramp), native());
  CHECK(img.pixels[98] == 255);
  CHECK(img.pixels[99] == 255);
  CHECK(img.pixels[0] == std::lround(255.0 / 99.0));
}

TEST_CASE("heat colormap endpoints and ordering") {
  const auto lut = render::colormap_table(Colormap::heat);
  CHECK(lut[0] == std::array<std::uint8_t, 3>{0, 0, 0});
  CHECK(lut[255] == std::array<std::uint8_t, 3>{255, 255, 255});
  CHECK(lut[85][0] == 255);
  CHECK(lut[85][1] == 0);
  CHECK(lut[170][1] == 255);
  CHECK(lut[170][2] == 0);
  for (std::size_t i = 1; i < 256; ++i) {
    for (int c = 0; c < 3; ++c) CHECK(lut[i][c] >= lut[i - 1][c]);
  }
  const auto gray = render::colormap_table(Colormap::grayscale);
  for (std::size_t i = 0; i < 256; ++i) CHECK(gray[i][0] == i);
}

TEST_CASE("nearest upscale preserves colors") {
  testing::Rng rng(15);
  const auto small = render::render_heatmap(testing::random_tensor({1, 5, 3}, rng, 0, 1), native(Colormap::heat));
  const auto big = render::upscale_nearest(small, 256, 256);
  CHECK(colors(big) == colors(small));
  CHECK(big.at(0, 0, 0) == small.at(0, 0, 0));
  CHECK(big.at(255, 255, 1) == small.at(4, 2, 1));
  CHECK_THROWS_AS(render::upscale_nearest(small, 4, 3), ValueError);
}

TEST_CASE("invalid configurations") {
  HeatmapConfig c;
  c.clip_percentile = 50.0;
  CHECK_THROWS_AS(render::render_heatmap(Tensor::zeros({2, 2}), c), ValueError);
  CHECK_THROWS_AS(render::render_heatmap(Tensor({2, 2}, {0, -1, 0, 0})), ValueError);
}

TEST_CASE("side by side layout") {
  const image::Image a(256, 256, 1, 10), b(256, 256, 3, 20);
  const std::vector<image::Image> two{a, b};
  const std::vector<std::string> labels{"1000", "2000"};
  const auto panel = render::render_side_by_side(two, labels);
  CHECK(panel.width == 513);
  CHECK(panel.height == 256 + render::kLabelStripHeight);
  CHECK(panel.channels == 3);
  CHECK(panel.at(10, 256, 0) == 255);
  CHECK(panel.at(10, 0, 2) == 10);
  CHECK(panel.at(10, 257, 0) == 20);

  const std::vector<image::Image> one{a};
  const auto single = render::render_side_by_side(one, std::vector<std::string>{"x"});
  CHECK(single.width == 256);
  for (std::size_t y = 0; y < 256; ++y)
    for (std::size_t x = 0; x < 256; ++x) REQUIRE(single.at(y, x) == a.at(y, x));
  bool label_drawn = false;
  for (std::size_t y = 256; y < single.height; ++y)
    for (std::size_t x = 0; x < 256; ++x) label_drawn |= single.at(y, x) == 255;
  CHECK(label_drawn);

  const std::vector<image::Image> mismatched{a, image::Image(256, 100, 1)};
  CHECK_THROWS_AS(render::render_side_by_side(mismatched, labels), ShapeError);
}

TEST_CASE("image files round trip") {
  const auto dir = testing::scratch_dir("render");
  testing::Rng rng(16);
  const auto heat = render::render_heatmap(testing::random_tensor({1, 6, 5}, rng, 0, 1), native(Colormap::heat));
  const auto gray = render::render_heatmap(testing::random_tensor({1, 6, 5}, rng, 0, 1), native());

  const auto png = image::encode_png(heat);
  REQUIRE(png.size() > 8);
  CHECK(png[0] == 0x89);
  CHECK(png[1] == 'P');

  image::write_image(dir / "h.png", heat);
  image::write_image(dir / "g.png", gray);
  image::write_image(dir / "g.pgm", gray);
  image::write_image(dir / "h.ppm", heat);
  CHECK(image::read_image(dir / "h.png") == heat);
  CHECK(image::read_image(dir / "g.png") == gray);
  CHECK(image::read_image(dir / "g.pgm") == gray);
  CHECK(image::read_image(dir / "h.ppm") == heat);

  const Tensor t = image::to_tensor(gray);
  CHECK(t.shape() == Shape{1, 6, 5});
  CHECK(image::from_tensor(t) == gray);
  CHECK_THROWS_AS(image::read_image(dir / "missing.png"), IoError);
}

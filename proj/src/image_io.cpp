#include "plrp/image_io.hpp"

#include "plrp/error.hpp"

#include <png.h>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <string>

namespace plrp::image {

namespace {

std::vector<std::uint8_t> read_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  return std::vector<std::uint8_t>(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

void write_bytes(const std::filesystem::path& path, const std::uint8_t* data, std::size_t n) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out.write(reinterpret_cast<const char*>(data), static_cast<std::streamsize>(n));
  if (!out) throw IoError("failed writing " + path.string());
}

Image decode_png(const std::vector<std::uint8_t>& bytes, const std::filesystem::path& path) {
  png_image png;
  std::memset(&png, 0, sizeof(png));
  png.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_memory(&png, bytes.data(), bytes.size())) {
    throw ParseError(path.string() + ": " + png.message);
  }
  const bool color = (png.format & PNG_FORMAT_FLAG_COLOR) != 0;
  png.format = color ? PNG_FORMAT_RGB : PNG_FORMAT_GRAY;
  Image img(png.width, png.height, color ? 3 : 1);
  if (!png_image_finish_read(&png, nullptr, img.pixels.data(), 0, nullptr)) {
    png_image_free(&png);
    throw ParseError(path.string() + ": " + png.message);
  }
  return img;
}

// Minimal PNM tokenizer: skips whitespace and '#' comments.
class PnmReader {
public:
  PnmReader(const std::vector<std::uint8_t>& bytes, const std::filesystem::path& path)
      : bytes_(bytes), path_(path) {}

  std::string token() {
    skip();
    std::string t;
    while (pos_ < bytes_.size() && !std::isspace(bytes_[pos_])) t.push_back(static_cast<char>(bytes_[pos_++]));
    if (t.empty()) fail("truncated header");
    return t;
  }

  std::size_t number() {
    const std::string t = token();
    for (char ch : t) {
      if (!std::isdigit(static_cast<unsigned char>(ch))) fail("expected a number, got '" + t + "'");
    }
    return std::stoul(t);
  }

  // Exactly one whitespace byte separates the header from binary data.
  std::size_t binary_start() {
    if (pos_ >= bytes_.size()) fail("missing raster");
    return pos_ + 1;
  }

  [[noreturn]] void fail(const std::string& what) const { throw ParseError(path_.string() + ": " + what); }

private:
  void skip() {
    while (pos_ < bytes_.size()) {
      if (bytes_[pos_] == '#') {
        while (pos_ < bytes_.size() && bytes_[pos_] != '\n') ++pos_;
      } else if (std::isspace(bytes_[pos_])) {
        ++pos_;
      } else {
        break;
      }
    }
  }

  const std::vector<std::uint8_t>& bytes_;
  const std::filesystem::path& path_;
  std::size_t pos_ = 0;
};

Image decode_pnm(const std::vector<std::uint8_t>& bytes, const std::filesystem::path& path) {
  PnmReader r(bytes, path);
  const std::string magic = r.token();
  const bool ascii = magic == "P2" || magic == "P3";
  const std::size_t channels = (magic == "P3" || magic == "P6") ? 3 : 1;
  if (magic != "P2" && magic != "P3" && magic != "P5" && magic != "P6") r.fail("unsupported PNM type " + magic);
  const std::size_t w = r.number(), h = r.number(), maxval = r.number();
  if (maxval != 255) r.fail("only 8-bit (maxval 255) images are supported");
  if (w == 0 || h == 0) r.fail("empty image");
  Image img(w, h, channels);
  if (ascii) {
    for (auto& p : img.pixels) {
      const std::size_t v = r.number();
      if (v > 255) r.fail("sample out of range");
      p = static_cast<std::uint8_t>(v);
    }
  } else {
    const std::size_t start = r.binary_start();
    if (bytes.size() < start + img.pixels.size()) r.fail("truncated raster");
    std::memcpy(img.pixels.data(), bytes.data() + start, img.pixels.size());
  }
  return img;
}

void check_image(const Image& img) {
  if (img.channels != 1 && img.channels != 3) throw ValueError("images must have 1 or 3 channels");
  if (img.width == 0 || img.height == 0) throw ValueError("cannot encode an empty image");
  if (img.pixels.size() != img.width * img.height * img.channels) {
    throw ValueError("image pixel buffer does not match its dimensions");
  }
}

} // namespace

Image read_image(const std::filesystem::path& path) {
  const std::vector<std::uint8_t> bytes = read_bytes(path);
  static constexpr std::uint8_t kPngSignature[8] = {0x89, 'P', 'N', 'G', '\r', '\n', 0x1A, '\n'};
  if (bytes.size() >= 8 && std::memcmp(bytes.data(), kPngSignature, 8) == 0) return decode_png(bytes, path);
  if (bytes.size() >= 2 && bytes[0] == 'P') return decode_pnm(bytes, path);
  throw ParseError(path.string() + ": not a PNG or PNM image");
}

std::vector<std::uint8_t> encode_png(const Image& img) {
  check_image(img);
  png_image png;
  std::memset(&png, 0, sizeof(png));
  png.version = PNG_IMAGE_VERSION;
  png.width = static_cast<png_uint_32>(img.width);
  png.height = static_cast<png_uint_32>(img.height);
  png.format = img.channels == 3 ? PNG_FORMAT_RGB : PNG_FORMAT_GRAY;

  png_alloc_size_t size = 0;
  if (!png_image_write_get_memory_size(png, size, 0, img.pixels.data(), 0, nullptr)) {
    throw IoError(std::string("PNG encoder: ") + png.message);
  }
  std::vector<std::uint8_t> out(size);
  if (!png_image_write_to_memory(&png, out.data(), &size, 0, img.pixels.data(), 0, nullptr)) {
    throw IoError(std::string("PNG encoder: ") + png.message);
  }
  out.resize(size);
  return out;
}

void write_png(const std::filesystem::path& path, const Image& img) {
  const std::vector<std::uint8_t> bytes = encode_png(img);
  write_bytes(path, bytes.data(), bytes.size());
}

void write_pnm(const std::filesystem::path& path, const Image& img) {
  check_image(img);
  std::string header = (img.channels == 1 ? "P5\n" : "P6\n") + std::to_string(img.width) + " " +
                       std::to_string(img.height) + "\n255\n";
  std::vector<std::uint8_t> bytes(header.begin(), header.end());
  bytes.insert(bytes.end(), img.pixels.begin(), img.pixels.end());
  write_bytes(path, bytes.data(), bytes.size());
}

void write_image(const std::filesystem::path& path, const Image& img) {
  const std::string ext = path.extension().string();
  if (ext == ".pgm" || ext == ".ppm") {
    if ((ext == ".pgm") != (img.channels == 1)) {
      throw ValueError(path.string() + ": PGM holds grayscale, PPM holds RGB");
    }
    write_pnm(path, img);
  } else {
    write_png(path, img);
  }
}

Tensor to_tensor(const Image& img) {
  const std::size_t C = img.channels, H = img.height, W = img.width;
  std::vector<double> data(C * H * W);
  for (std::size_t c = 0; c < C; ++c) {
    for (std::size_t y = 0; y < H; ++y) {
      for (std::size_t x = 0; x < W; ++x) data[(c * H + y) * W + x] = img.at(y, x, c) / 255.0;
    }
  }
  return Tensor({C, H, W}, std::move(data));
}

Image from_tensor(const Tensor& t) {
  if (t.rank() != 3 || (t.extent(0) != 1 && t.extent(0) != 3)) {
    throw ShapeError("expected a [1|3,H,W] tensor, got " + to_string(t.shape()));
  }
  const std::size_t C = t.extent(0), H = t.extent(1), W = t.extent(2);
  Image img(W, H, C);
  for (std::size_t c = 0; c < C; ++c) {
    for (std::size_t y = 0; y < H; ++y) {
      for (std::size_t x = 0; x < W; ++x) {
        const double v = std::clamp(t.at(c, y, x), 0.0, 1.0);
        img.at(y, x, c) = static_cast<std::uint8_t>(std::lround(v * 255.0));
      }
    }
  }
  return img;
}

} // namespace plrp::image

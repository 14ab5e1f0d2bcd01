#include "priorloc/features/image.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <memory>
#include <sstream>

#include "priorloc/common/binary_io.hpp"
#include "priorloc/common/error.hpp"

namespace priorloc {

Image::Image(int width, int height, std::uint8_t fill) : width_(width), height_(height) {
  if (width <= 0 || height <= 0) throw Error(ErrorCode::kConfig, "image size must be positive");
  data_.assign(static_cast<std::size_t>(width) * height, fill);
}

float FloatImage::sample(double x, double y) const {
  x = std::clamp(x, 0.0, static_cast<double>(width - 1));
  y = std::clamp(y, 0.0, static_cast<double>(height - 1));
  const int x0 = std::min(static_cast<int>(x), width - 2 < 0 ? 0 : width - 2);
  const int y0 = std::min(static_cast<int>(y), height - 2 < 0 ? 0 : height - 2);
  const int x1 = std::min(x0 + 1, width - 1);
  const int y1 = std::min(y0 + 1, height - 1);
  const float ax = static_cast<float>(x - x0);
  const float ay = static_cast<float>(y - y0);
  const float top = at(x0, y0) * (1.0f - ax) + at(x1, y0) * ax;
  const float bot = at(x0, y1) * (1.0f - ax) + at(x1, y1) * ax;
  return top * (1.0f - ay) + bot * ay;
}

FloatImage to_float(const Image& img) {
  FloatImage out{img.width(), img.height(), {}};
  out.data.assign(img.data().begin(), img.data().end());
  return out;
}

FloatImage pyr_down(const FloatImage& img) {
  // Separable [1 4 6 4 1]/16 blur, then every other sample.
  static constexpr float k[5] = {1.f / 16, 4.f / 16, 6.f / 16, 4.f / 16, 1.f / 16};
  const int w = img.width, h = img.height;
  std::vector<float> tmp(img.data.size());
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      float s = 0.f;
      for (int i = -2; i <= 2; ++i) s += k[i + 2] * img.at(std::clamp(x + i, 0, w - 1), y);
      tmp[static_cast<std::size_t>(y) * w + x] = s;
    }
  }
  FloatImage out{(w + 1) / 2, (h + 1) / 2, {}};
  out.data.resize(static_cast<std::size_t>(out.width) * out.height);
  for (int y = 0; y < out.height; ++y) {
    for (int x = 0; x < out.width; ++x) {
      float s = 0.f;
      for (int i = -2; i <= 2; ++i) {
        s += k[i + 2] * tmp[static_cast<std::size_t>(std::clamp(2 * y + i, 0, h - 1)) * w + 2 * x];
      }
      out.data[static_cast<std::size_t>(y) * out.width + x] = s;
    }
  }
  return out;
}

namespace {

Image parse_pgm(const std::vector<std::uint8_t>& bytes) {
  std::size_t pos = 0;
  const auto token = [&]() {
    std::string tok;
    while (pos < bytes.size()) {
      const char c = static_cast<char>(bytes[pos]);
      if (c == '#') {
        while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
      } else if (std::isspace(static_cast<unsigned char>(c))) {
        if (!tok.empty()) break;
        ++pos;
      } else {
        tok.push_back(c);
        ++pos;
      }
    }
    if (tok.empty()) throw Error(ErrorCode::kCorrupt, "truncated PGM header");
    return tok;
  };
  const std::string magic = token();
  if (magic != "P5" && magic != "P2") throw Error(ErrorCode::kCorrupt, "not a PGM image");
  int w = 0, h = 0, maxval = 0;
  try {
    w = std::stoi(token());
    h = std::stoi(token());
    maxval = std::stoi(token());
  } catch (const std::logic_error&) {
    throw Error(ErrorCode::kCorrupt, "bad PGM header");
  }
  if (w <= 0 || h <= 0 || maxval <= 0 || maxval > 255) {
    throw Error(ErrorCode::kCorrupt, "unsupported PGM dimensions or depth");
  }
  Image img(w, h);
  if (magic == "P5") {
    ++pos;  // single whitespace after maxval
    if (bytes.size() < pos + img.data().size()) throw Error(ErrorCode::kCorrupt, "truncated PGM");
    std::memcpy(img.data().data(), bytes.data() + pos, img.data().size());
  } else {
    for (auto& v : img.data()) v = static_cast<std::uint8_t>(std::stoi(token()));
  }
  if (maxval != 255) {
    for (auto& v : img.data()) v = static_cast<std::uint8_t>(std::lround(v * 255.0 / maxval));
  }
  return img;
}

struct PngRead {
  const std::vector<std::uint8_t>* bytes;
  std::size_t pos;
};

void png_read_fn(png_structp png, png_bytep out, png_size_t n) {
  auto* src = static_cast<PngRead*>(png_get_io_ptr(png));
  if (src->pos + n > src->bytes->size()) png_error(png, "truncated PNG");
  std::memcpy(out, src->bytes->data() + src->pos, n);
  src->pos += n;
}

void png_error_fn(png_structp png, png_const_charp msg) {
  auto* text = static_cast<std::string*>(png_get_error_ptr(png));
  *text = msg;
  png_longjmp(png, 1);
}

void png_warning_fn(png_structp, png_const_charp) {}

Image parse_png(const std::vector<std::uint8_t>& bytes) {
  std::string err;
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, &err, png_error_fn,
                                           png_warning_fn);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) throw Error(ErrorCode::kInternal, "libpng initialization failed");
  PngRead src{&bytes, 0};
  Image img;
  std::vector<std::uint8_t> row;
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw Error(ErrorCode::kCorrupt, "PNG decode failed: " + err);
  }
  png_set_read_fn(png, &src, png_read_fn);
  png_read_info(png, info);
  png_set_strip_16(png);
  png_set_packing(png);
  png_set_expand(png);
  png_set_strip_alpha(png);
  const int color = png_get_color_type(png, info);
  if (color == PNG_COLOR_TYPE_RGB || color == PNG_COLOR_TYPE_RGB_ALPHA ||
      color == PNG_COLOR_TYPE_PALETTE) {
    png_set_rgb_to_gray_fixed(png, 1, -1, -1);
  }
  png_read_update_info(png, info);
  const int w = static_cast<int>(png_get_image_width(png, info));
  const int h = static_cast<int>(png_get_image_height(png, info));
  const int channels = png_get_channels(png, info);
  img = Image(w, h);
  row.resize(png_get_rowbytes(png, info));
  for (int y = 0; y < h; ++y) {
    png_read_row(png, row.data(), nullptr);
    for (int x = 0; x < w; ++x) img.at(x, y) = row[static_cast<std::size_t>(x) * channels];
  }
  png_destroy_read_struct(&png, &info, nullptr);
  return img;
}

}  // namespace

Image read_image(const std::string& path) {
  const auto bytes = read_file_bytes(path);
  static constexpr std::uint8_t kPngSig[8] = {0x89, 'P', 'N', 'G', '\r', '\n', 0x1a, '\n'};
  if (bytes.size() >= 8 && std::equal(kPngSig, kPngSig + 8, bytes.begin())) {
    return parse_png(bytes);
  }
  return parse_pgm(bytes);
}

void write_pgm(const std::string& path, const Image& img) {
  const std::string header = "P5\n" + std::to_string(img.width()) + " " +
                             std::to_string(img.height()) + "\n255\n";
  std::vector<std::uint8_t> out(header.begin(), header.end());
  out.insert(out.end(), img.data().begin(), img.data().end());
  write_file_bytes(path, out);
}

void write_png(const std::string& path, const Image& img) {
  std::unique_ptr<std::FILE, int (*)(std::FILE*)> f(std::fopen(path.c_str(), "wb"),
                                                    &std::fclose);
  if (!f) throw Error(ErrorCode::kIo, "cannot open " + path + " for writing");
  std::string err;
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, &err, png_error_fn,
                                            png_warning_fn);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) throw Error(ErrorCode::kInternal, "libpng initialization failed");
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw Error(ErrorCode::kIo, "PNG encode failed: " + err);
  }
  png_init_io(png, f.get());
  png_set_IHDR(png, info, static_cast<png_uint_32>(img.width()),
               static_cast<png_uint_32>(img.height()), 8, PNG_COLOR_TYPE_GRAY,
               PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  for (int y = 0; y < img.height(); ++y) {
    png_write_row(png, img.data().data() + static_cast<std::size_t>(y) * img.width());
  }
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

}  // namespace priorloc

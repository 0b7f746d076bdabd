#include <png.h>

#include <cstdio>
#include <cstring>

#include "lang2face/errors.hpp"
#include "lang2face/image.hpp"

namespace lang2face {

namespace {

uint8_t to_byte(float v) {
  float x = (v + 1.0f) * 127.5f;
  if (x < 0.0f) x = 0.0f;
  if (x > 255.0f) x = 255.0f;
  return uint8_t(x + 0.5f);
}

float from_byte(uint8_t b) { return float(b) / 127.5f - 1.0f; }

}  // namespace

void write_png(const std::string& path, const Tensor<float>& img) {
  if (img.rank() != 3 || img.shape[0] != 3)
    throw ShapeMismatch("write_png expects {3,H,W}, got " + shape_str(img.shape));
  int H = img.shape[1], W = img.shape[2];
  FILE* fp = std::fopen(path.c_str(), "wb");
  if (!fp) throw IOError("cannot open for writing: " + path);
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr,
                                            nullptr, nullptr);
  png_infop info = png_create_info_struct(png);
  if (!png || !info || setjmp(png_jmpbuf(png))) {
    if (png) png_destroy_write_struct(&png, &info);
    std::fclose(fp);
    throw IOError("libpng failure writing " + path);
  }
  png_init_io(png, fp);
  png_set_IHDR(png, info, png_uint_32(W), png_uint_32(H), 8,
               PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE,
               PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  std::vector<uint8_t> row(size_t(W) * 3);
  for (int y = 0; y < H; ++y) {
    for (int x = 0; x < W; ++x)
      for (int c = 0; c < 3; ++c)
        row[size_t(x) * 3 + size_t(c)] = to_byte(img.at(c, y, x));
    png_write_row(png, row.data());
  }
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
  std::fclose(fp);
}

Tensor<float> read_png(const std::string& path) {
  FILE* fp = std::fopen(path.c_str(), "rb");
  if (!fp) throw IOError("cannot open for reading: " + path);
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr,
                                           nullptr, nullptr);
  png_infop info = png_create_info_struct(png);
  if (!png || !info || setjmp(png_jmpbuf(png))) {
    if (png) png_destroy_read_struct(&png, &info, nullptr);
    std::fclose(fp);
    throw IOError("libpng failure reading " + path);
  }
  png_init_io(png, fp);
  png_read_info(png, info);
  png_uint_32 W = png_get_image_width(png, info);
  png_uint_32 H = png_get_image_height(png, info);
  png_set_expand(png);
  png_set_strip_16(png);
  png_set_strip_alpha(png);
  png_set_gray_to_rgb(png);
  png_read_update_info(png, info);
  Tensor<float> img({3, int(H), int(W)});
  std::vector<uint8_t> row(size_t(W) * 3);
  for (png_uint_32 y = 0; y < H; ++y) {
    png_read_row(png, row.data(), nullptr);
    for (png_uint_32 x = 0; x < W; ++x)
      for (int c = 0; c < 3; ++c)
        img.at(c, int(y), int(x)) = from_byte(row[size_t(x) * 3 + size_t(c)]);
  }
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);
  std::fclose(fp);
  return img;
}

Tensor<float> downsample(const Tensor<float>& img, int factor) {
  if (factor == 1) return img;
  int H = img.shape[1], W = img.shape[2];
  if (H % factor || W % factor) throw ShapeMismatch("downsample: bad factor");
  int h = H / factor, w = W / factor;
  Tensor<float> out({3, h, w});
  float inv = 1.0f / float(factor * factor);
  for (int c = 0; c < 3; ++c)
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) {
        float s = 0;
        for (int dy = 0; dy < factor; ++dy)
          for (int dx = 0; dx < factor; ++dx)
            s += img.at(c, y * factor + dy, x * factor + dx);
        out.at(c, y, x) = s * inv;
      }
  return out;
}

Tensor<float> upsample(const Tensor<float>& img, int factor) {
  if (factor == 1) return img;
  int H = img.shape[1], W = img.shape[2];
  Tensor<float> out({3, H * factor, W * factor});
  for (int c = 0; c < 3; ++c)
    for (int y = 0; y < H * factor; ++y)
      for (int x = 0; x < W * factor; ++x)
        out.at(c, y, x) = img.at(c, y / factor, x / factor);
  return out;
}

Tensor<float> hcat(const std::vector<Tensor<float>>& imgs) {
  if (imgs.empty()) throw ShapeMismatch("hcat: empty");
  int H = imgs[0].shape[1];
  int sep = 2;
  int W = 0;
  for (const auto& im : imgs) {
    if (im.shape[1] != H) throw ShapeMismatch("hcat: height mismatch");
    W += im.shape[2];
  }
  W += sep * int(imgs.size() - 1);
  Tensor<float> out({3, H, W});
  out.fill(1.0f);
  int x0 = 0;
  for (const auto& im : imgs) {
    for (int c = 0; c < 3; ++c)
      for (int y = 0; y < H; ++y)
        for (int x = 0; x < im.shape[2]; ++x) out.at(c, y, x0 + x) = im.at(c, y, x);
    x0 += im.shape[2] + sep;
  }
  return out;
}

double l1_distance(const Tensor<float>& a, const Tensor<float>& b) {
  if (!a.same_shape(b)) throw ShapeMismatch("l1_distance: shape mismatch");
  double s = 0;
  for (size_t i = 0; i < a.data.size(); ++i)
    s += std::abs(double(a.data[i]) - double(b.data[i]));
  return s / double(a.numel());
}

}  // namespace lang2face

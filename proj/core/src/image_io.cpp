#include "sdeblur/image_io.hpp"

#include <png.h>

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <memory>
#include <sstream>
#include <string>

#include "sdeblur/error.hpp"

namespace sdeblur {
namespace {

struct FileCloser {
  void operator()(std::FILE* f) const { std::fclose(f); }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

FilePtr open_file(const std::filesystem::path& path, const char* mode) {
  FilePtr f(std::fopen(path.c_str(), mode));
  if (!f) {
    throw Error(ErrorCode::kIoError, "cannot open '" + path.string() + "'");
  }
  return f;
}

std::uint16_t quantize(double v, int maxval) {
  const double c = std::clamp(v, 0.0, 1.0);
  return static_cast<std::uint16_t>(std::lround(c * maxval));
}

// Next whitespace-delimited header token, skipping '#' comments.
std::string header_token(std::istream& in, const std::filesystem::path& path) {
  std::string tok;
  while (true) {
    const int c = in.get();
    if (c == EOF) {
      throw Error(ErrorCode::kParseError, "truncated header in '" + path.string() + "'");
    }
    if (c == '#') {
      std::string discard;
      std::getline(in, discard);
      if (!tok.empty()) return tok;
      continue;
    }
    if (std::isspace(c)) {
      if (!tok.empty()) return tok;
      continue;
    }
    tok.push_back(static_cast<char>(c));
  }
}

int header_int(std::istream& in, const std::filesystem::path& path, const char* field) {
  const std::string tok = header_token(in, path);
  try {
    std::size_t used = 0;
    const int v = std::stoi(tok, &used);
    if (used != tok.size()) throw std::invalid_argument(tok);
    return v;
  } catch (const std::exception&) {
    throw Error(ErrorCode::kParseError, "bad " + std::string(field) + " '" + tok + "' in '" +
                                            path.string() + "'");
  }
}

}  // namespace

ImageBuffer read_png(const std::filesystem::path& path) {
  FilePtr fp = open_file(path, "rb");
  png_byte sig[8];
  if (std::fread(sig, 1, 8, fp.get()) != 8 || png_sig_cmp(sig, 0, 8) != 0) {
    throw Error(ErrorCode::kParseError, "'" + path.string() + "' is not a PNG file");
  }
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw Error(ErrorCode::kIoError, "libpng initialisation failed");
  }
  std::vector<png_byte> buffer;
  std::vector<png_bytep> rows;
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw Error(ErrorCode::kParseError, "corrupt PNG '" + path.string() + "'");
  }
  png_init_io(png, fp.get());
  png_set_sig_bytes(png, 8);
  png_read_info(png, info);

  const png_byte color = png_get_color_type(png, info);
  if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
  if (color == PNG_COLOR_TYPE_GRAY && png_get_bit_depth(png, info) < 8) {
    png_set_expand_gray_1_2_4_to_8(png);
  }
  if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(png);
  png_set_strip_alpha(png);
  png_read_update_info(png, info);

  const int width = static_cast<int>(png_get_image_width(png, info));
  const int height = static_cast<int>(png_get_image_height(png, info));
  const int depth = png_get_bit_depth(png, info);
  const int channels = png_get_channels(png, info);
  const std::size_t stride = png_get_rowbytes(png, info);
  buffer.resize(stride * static_cast<std::size_t>(height));
  rows.resize(static_cast<std::size_t>(height));
  for (int y = 0; y < height; ++y) rows[static_cast<std::size_t>(y)] = buffer.data() + stride * y;
  png_read_image(png, rows.data());
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);

  if (channels != 1 && channels != 3) {
    throw Error(ErrorCode::kParseError, "unsupported PNG channel count in '" + path.string() + "'");
  }
  ImageBuffer img(width, height, channels);
  const double maxval = depth == 16 ? 65535.0 : 255.0;
  auto out = img.data();
  const std::size_t per_row = static_cast<std::size_t>(width) * channels;
  for (int y = 0; y < height; ++y) {
    const png_byte* row = rows[static_cast<std::size_t>(y)];
    for (std::size_t i = 0; i < per_row; ++i) {
      const unsigned v = depth == 16 ? (static_cast<unsigned>(row[2 * i]) << 8) | row[2 * i + 1]
                                     : row[i];
      out[static_cast<std::size_t>(y) * per_row + i] = v / maxval;
    }
  }
  return img;
}

void write_png(const std::filesystem::path& path, const ImageBuffer& image, int bit_depth) {
  if (bit_depth != 8 && bit_depth != 16) {
    throw Error(ErrorCode::kInvalidArgument, "PNG bit depth must be 8 or 16");
  }
  const int channels = image.channels();
  const int width = image.width();
  const int height = image.height();
  const int bytes = bit_depth / 8;
  const int maxval = bit_depth == 16 ? 65535 : 255;
  const std::size_t stride = static_cast<std::size_t>(width) * channels * bytes;
  std::vector<png_byte> buffer(stride * static_cast<std::size_t>(height));
  for (std::size_t i = 0; i < image.size(); ++i) {
    const std::uint16_t q = quantize(image.data()[i], maxval);
    if (bytes == 2) {
      buffer[2 * i] = static_cast<png_byte>(q >> 8);
      buffer[2 * i + 1] = static_cast<png_byte>(q & 0xff);
    } else {
      buffer[i] = static_cast<png_byte>(q);
    }
  }
  std::vector<png_bytep> rows(static_cast<std::size_t>(height));
  for (int y = 0; y < height; ++y) rows[static_cast<std::size_t>(y)] = buffer.data() + stride * y;

  FilePtr fp = open_file(path, "wb");
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    png_destroy_write_struct(&png, &info);
    throw Error(ErrorCode::kIoError, "libpng initialisation failed");
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw Error(ErrorCode::kIoError, "failed writing PNG '" + path.string() + "'");
  }
  png_init_io(png, fp.get());
  png_set_IHDR(png, info, static_cast<png_uint_32>(width), static_cast<png_uint_32>(height),
               bit_depth, channels == 3 ? PNG_COLOR_TYPE_RGB : PNG_COLOR_TYPE_GRAY,
               PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  png_write_image(png, rows.data());
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

GrayImage read_pgm(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIoError, "cannot open '" + path.string() + "'");
  if (header_token(in, path) != "P5") {
    throw Error(ErrorCode::kParseError, "'" + path.string() + "' is not a binary PGM");
  }
  GrayImage img;
  img.width = header_int(in, path, "width");
  img.height = header_int(in, path, "height");
  img.maxval = header_int(in, path, "maxval");
  if (img.width <= 0 || img.height <= 0 || img.maxval <= 0 || img.maxval > 65535) {
    throw Error(ErrorCode::kParseError, "invalid PGM header in '" + path.string() + "'");
  }
  const std::size_t n = static_cast<std::size_t>(img.width) * img.height;
  const std::size_t bytes = img.maxval > 255 ? 2 : 1;
  std::vector<unsigned char> raw(n * bytes);
  in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
  if (static_cast<std::size_t>(in.gcount()) != raw.size()) {
    throw Error(ErrorCode::kParseError, "truncated PGM data in '" + path.string() + "'");
  }
  img.values.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    img.values[i] = bytes == 2 ? static_cast<std::uint16_t>((raw[2 * i] << 8) | raw[2 * i + 1])
                               : raw[i];
  }
  return img;
}

void write_pgm(const std::filesystem::path& path, const GrayImage& image) {
  if (image.maxval <= 0 || image.maxval > 65535 ||
      image.values.size() != static_cast<std::size_t>(image.width) * image.height) {
    throw Error(ErrorCode::kInvalidArgument, "malformed PGM image");
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::kIoError, "cannot open '" + path.string() + "'");
  out << "P5\n" << image.width << ' ' << image.height << '\n' << image.maxval << '\n';
  const bool wide = image.maxval > 255;
  for (std::uint16_t v : image.values) {
    if (v > image.maxval) throw Error(ErrorCode::kInvalidArgument, "PGM value exceeds maxval");
    if (wide) out.put(static_cast<char>(v >> 8));
    out.put(static_cast<char>(v & 0xff));
  }
  if (!out) throw Error(ErrorCode::kIoError, "failed writing '" + path.string() + "'");
}

void write_pgm(const std::filesystem::path& path, const ImageBuffer& image, int maxval) {
  if (image.channels() != 1) {
    throw Error(ErrorCode::kInvalidArgument, "PGM output needs a single-channel image");
  }
  GrayImage g{image.width(), image.height(), maxval, {}};
  g.values.reserve(image.size());
  for (double v : image.data()) g.values.push_back(quantize(v, maxval));
  write_pgm(path, g);
}

void write_image(const std::filesystem::path& path, const ImageBuffer& image, int bit_depth) {
  const std::string ext = path.extension().string();
  if (ext == ".pgm") {
    write_pgm(path, image.channels() == 1 ? image : image.luma(),
              bit_depth == 16 ? 65535 : 255);
  } else if (ext == ".png") {
    write_png(path, image, bit_depth);
  } else {
    throw Error(ErrorCode::kInvalidArgument,
                "unsupported image extension '" + ext + "' (use .png or .pgm)");
  }
}

FlowField read_flow_pfm(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIoError, "cannot open '" + path.string() + "'");
  if (header_token(in, path) != "PF4") {
    throw Error(ErrorCode::kParseError, "'" + path.string() + "' is not a 4-channel flow PFM");
  }
  const int width = header_int(in, path, "width");
  const int height = header_int(in, path, "height");
  const std::string scale_tok = header_token(in, path);
  double scale = 0.0;
  try {
    scale = std::stod(scale_tok);
  } catch (const std::exception&) {
    throw Error(ErrorCode::kParseError, "bad PFM scale in '" + path.string() + "'");
  }
  if (width <= 0 || height <= 0 || scale == 0.0) {
    throw Error(ErrorCode::kParseError, "invalid PFM header in '" + path.string() + "'");
  }
  const bool little = scale < 0.0;
  const bool swap = little != (std::endian::native == std::endian::little);

  FlowField flow(width, height);
  std::vector<float> row(static_cast<std::size_t>(width) * 4);
  for (int y = height - 1; y >= 0; --y) {
    in.read(reinterpret_cast<char*>(row.data()),
            static_cast<std::streamsize>(row.size() * sizeof(float)));
    if (!in) throw Error(ErrorCode::kParseError, "truncated PFM data in '" + path.string() + "'");
    if (swap) {
      for (float& f : row) {
        std::uint32_t u;
        std::memcpy(&u, &f, 4);
        u = __builtin_bswap32(u);
        std::memcpy(&f, &u, 4);
      }
    }
    for (int x = 0; x < width; ++x) {
      const std::size_t i = static_cast<std::size_t>(y) * width + x;
      const float* p = &row[static_cast<std::size_t>(x) * 4];
      flow.forward[i] = {p[0], p[1]};
      flow.backward[i] = {p[2], p[3]};
    }
  }
  flow.validate();
  return flow;
}

void write_flow_pfm(const std::filesystem::path& path, const FlowField& flow) {
  flow.validate();
  static_assert(std::endian::native == std::endian::little, "PFM writer assumes little-endian");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::kIoError, "cannot open '" + path.string() + "'");
  out << "PF4\n" << flow.width << ' ' << flow.height << "\n-1.0\n";
  std::vector<float> row(static_cast<std::size_t>(flow.width) * 4);
  for (int y = flow.height - 1; y >= 0; --y) {
    for (int x = 0; x < flow.width; ++x) {
      const std::size_t i = static_cast<std::size_t>(y) * flow.width + x;
      float* p = &row[static_cast<std::size_t>(x) * 4];
      p[0] = static_cast<float>(flow.forward[i].x());
      p[1] = static_cast<float>(flow.forward[i].y());
      p[2] = static_cast<float>(flow.backward[i].x());
      p[3] = static_cast<float>(flow.backward[i].y());
    }
    out.write(reinterpret_cast<const char*>(row.data()),
              static_cast<std::streamsize>(row.size() * sizeof(float)));
  }
  if (!out) throw Error(ErrorCode::kIoError, "failed writing '" + path.string() + "'");
}

}  // namespace sdeblur

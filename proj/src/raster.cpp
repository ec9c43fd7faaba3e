#include "artrecon/raster.hpp"

#include <png.h>

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <memory>
#include <sstream>
#include <stdexcept>
#include <string>

#include "artrecon/error.hpp"

namespace artrecon {

RgbImage::RgbImage(int w, int h, const Eigen::Vector3f& fill)
    : width(w), height(h),
      pixels(static_cast<std::size_t>(std::max(w, 0)) * std::max(h, 0), fill) {}

DepthMap::DepthMap(int w, int h, double fill)
    : width(w), height(h),
      values(static_cast<std::size_t>(std::max(w, 0)) * std::max(h, 0), fill) {}

DepthMap::DepthMap(int w, int h, std::vector<double> data)
    : width(w), height(h), values(std::move(data)) {
  validate(*this);
}

void validate(const DepthMap& d) {
  if (d.width < 1 || d.height < 1) {
    throw std::invalid_argument("depth map must be at least 1x1");
  }
  if (d.values.size() != static_cast<std::size_t>(d.width) * d.height) {
    throw std::invalid_argument("depth map value count does not match dimensions");
  }
  for (double v : d.values) {
    if (!std::isfinite(v) || v < 0.0) {
      throw std::invalid_argument("depth values must be finite and non-negative");
    }
  }
}

void validate(const RgbImage& img) {
  if (img.width < 1 || img.height < 1) {
    throw std::invalid_argument("image must be at least 1x1");
  }
  if (img.pixels.size() != static_cast<std::size_t>(img.width) * img.height) {
    throw std::invalid_argument("image pixel count does not match dimensions");
  }
}

namespace {

struct FileCloser {
  void operator()(std::FILE* f) const { std::fclose(f); }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

FilePtr open_file(const std::filesystem::path& path, const char* mode) {
  FilePtr f(std::fopen(path.c_str(), mode));
  if (!f) {
    throw InputError("cannot open '" + path.string() + "'");
  }
  return f;
}

struct PngRaw {
  int width = 0;
  int height = 0;
  int channels = 0;   // 1 (gray) or 3 (rgb)
  int bit_depth = 0;  // 8 or 16
  std::vector<std::uint16_t> samples;
};

[[noreturn]] void png_error_fn(png_structp png, png_const_charp msg) {
  auto* err = static_cast<std::string*>(png_get_error_ptr(png));
  *err = msg;
  png_longjmp(png, 1);
}

void png_warning_fn(png_structp, png_const_charp) {}

// Decodes 8/16-bit gray or RGB PNGs; palettes are expanded, alpha dropped,
// sub-byte gray rejected.
PngRaw read_png(const std::filesystem::path& path) {
  FilePtr file = open_file(path, "rb");
  unsigned char sig[8] = {};
  if (std::fread(sig, 1, 8, file.get()) != 8 || png_sig_cmp(sig, 0, 8) != 0) {
    throw FormatError("'" + path.string() + "' is not a PNG file");
  }

  std::string err;
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, &err,
                                           png_error_fn, png_warning_fn);
  if (!png) throw std::runtime_error("png_create_read_struct failed");
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_read_struct(&png, nullptr, nullptr);
    throw std::runtime_error("png_create_info_struct failed");
  }

  PngRaw raw;
  std::vector<png_bytep> rows;
  std::vector<unsigned char> buffer;
  volatile bool unsupported = false;
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw FormatError("malformed PNG '" + path.string() + "': " + err);
  }
  png_init_io(png, file.get());
  png_set_sig_bytes(png, 8);
  png_read_info(png, info);

  const int color_type = png_get_color_type(png, info);
  int bit_depth = png_get_bit_depth(png, info);
  if (color_type == PNG_COLOR_TYPE_PALETTE) {
    png_set_palette_to_rgb(png);
    bit_depth = 8;
  } else if (bit_depth != 8 && bit_depth != 16) {
    unsupported = true;
  }
  if (!unsupported) {
    if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(png);
    if (color_type & PNG_COLOR_MASK_ALPHA || png_get_valid(png, info, PNG_INFO_tRNS)) {
      png_set_strip_alpha(png);
    }
    png_read_update_info(png, info);
    raw.width = static_cast<int>(png_get_image_width(png, info));
    raw.height = static_cast<int>(png_get_image_height(png, info));
    raw.channels = png_get_channels(png, info);
    raw.bit_depth = png_get_bit_depth(png, info);
    const std::size_t rowbytes = png_get_rowbytes(png, info);
    buffer.resize(rowbytes * raw.height);
    rows.resize(raw.height);
    for (int y = 0; y < raw.height; ++y) rows[y] = buffer.data() + rowbytes * y;
    png_read_image(png, rows.data());
    png_read_end(png, nullptr);
  }
  png_destroy_read_struct(&png, &info, nullptr);
  if (unsupported) {
    throw FormatError("unsupported PNG bit depth " + std::to_string(bit_depth) +
                      " in '" + path.string() + "'");
  }
  if (raw.channels != 1 && raw.channels != 3) {
    throw FormatError("unsupported PNG channel layout in '" + path.string() + "'");
  }

  const std::size_t count = static_cast<std::size_t>(raw.width) * raw.height * raw.channels;
  raw.samples.resize(count);
  if (raw.bit_depth == 8) {
    for (std::size_t i = 0; i < count; ++i) raw.samples[i] = buffer[i];
  } else {
    // PNG stores 16-bit samples big-endian.
    for (std::size_t i = 0; i < count; ++i) {
      raw.samples[i] = static_cast<std::uint16_t>((buffer[2 * i] << 8) | buffer[2 * i + 1]);
    }
  }
  return raw;
}

void write_png(const std::filesystem::path& path, int width, int height,
               int channels, int bit_depth, const std::vector<std::uint16_t>& samples) {
  FilePtr file = open_file(path, "wb");
  std::string err;
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, &err,
                                            png_error_fn, png_warning_fn);
  if (!png) throw std::runtime_error("png_create_write_struct failed");
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_write_struct(&png, nullptr);
    throw std::runtime_error("png_create_info_struct failed");
  }
  const std::size_t bytes_per_sample = bit_depth == 16 ? 2 : 1;
  const std::size_t rowbytes = static_cast<std::size_t>(width) * channels * bytes_per_sample;
  std::vector<unsigned char> buffer(rowbytes * height);
  for (std::size_t i = 0; i < samples.size(); ++i) {
    if (bit_depth == 16) {
      buffer[2 * i] = static_cast<unsigned char>(samples[i] >> 8);
      buffer[2 * i + 1] = static_cast<unsigned char>(samples[i] & 0xff);
    } else {
      buffer[i] = static_cast<unsigned char>(samples[i]);
    }
  }
  std::vector<png_bytep> rows(height);
  for (int y = 0; y < height; ++y) rows[y] = buffer.data() + rowbytes * y;

  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw std::runtime_error("failed writing PNG '" + path.string() + "': " + err);
  }
  png_init_io(png, file.get());
  png_set_IHDR(png, info, width, height, bit_depth,
               channels == 3 ? PNG_COLOR_TYPE_RGB : PNG_COLOR_TYPE_GRAY,
               PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  png_write_image(png, rows.data());
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

template <typename T, typename Sample>
void resample(int in_w, int in_h, int out_w, int out_h, Sample sample,
              std::vector<T>& out) {
  auto source_coord = [](int i, int in_n, int out_n) {
    if (out_n == 1) return 0.5 * (in_n - 1);
    return static_cast<double>(i) * (in_n - 1) / (out_n - 1);
  };
  out.resize(static_cast<std::size_t>(out_w) * out_h);
  for (int y = 0; y < out_h; ++y) {
    const double sy = source_coord(y, in_h, out_h);
    const int y0 = std::min(static_cast<int>(std::floor(sy)), in_h - 1);
    const int y1 = std::min(y0 + 1, in_h - 1);
    const double fy = sy - y0;
    for (int x = 0; x < out_w; ++x) {
      const double sx = source_coord(x, in_w, out_w);
      const int x0 = std::min(static_cast<int>(std::floor(sx)), in_w - 1);
      const int x1 = std::min(x0 + 1, in_w - 1);
      const double fx = sx - x0;
      out[static_cast<std::size_t>(y) * out_w + x] =
          sample(x0, x1, y0, y1, fx, fy);
    }
  }
}

float swap_float(float v) {
  std::uint32_t bits;
  std::memcpy(&bits, &v, 4);
  bits = ((bits & 0xff) << 24) | ((bits & 0xff00) << 8) | ((bits >> 8) & 0xff00) | (bits >> 24);
  std::memcpy(&v, &bits, 4);
  return v;
}

}  // namespace

RgbImage load_rgb(const std::filesystem::path& path) {
  const PngRaw raw = read_png(path);
  const float scale = raw.bit_depth == 16 ? 1.0f / 65535.0f : 1.0f / 255.0f;
  RgbImage img(raw.width, raw.height);
  for (std::size_t i = 0; i < img.pixels.size(); ++i) {
    if (raw.channels == 1) {
      img.pixels[i].setConstant(raw.samples[i] * scale);
    } else {
      img.pixels[i] = Eigen::Vector3f(raw.samples[3 * i] * scale,
                                      raw.samples[3 * i + 1] * scale,
                                      raw.samples[3 * i + 2] * scale);
    }
  }
  return img;
}

void save_rgb_png(const RgbImage& img, const std::filesystem::path& path) {
  validate(img);
  std::vector<std::uint16_t> samples;
  samples.reserve(img.pixels.size() * 3);
  for (const auto& p : img.pixels) {
    for (int c = 0; c < 3; ++c) {
      samples.push_back(static_cast<std::uint16_t>(
          std::lround(std::clamp(p[c], 0.0f, 1.0f) * 255.0f)));
    }
  }
  write_png(path, img.width, img.height, 3, 8, samples);
}

std::filesystem::path range_sidecar_path(const std::filesystem::path& png) {
  auto p = png;
  p.replace_extension(".range");
  return p;
}

DepthMap read_pfm(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open '" + path.string() + "'");

  std::string magic;
  in >> magic;
  if (magic != "Pf") {
    throw FormatError("'" + path.string() + "' is not a grayscale PFM (magic '" + magic + "')");
  }
  long long w = 0, h = 0;
  double scale = 0.0;
  if (!(in >> w >> h >> scale) || w < 1 || h < 1 || scale == 0.0 || !std::isfinite(scale)) {
    throw FormatError("malformed PFM header in '" + path.string() + "'");
  }
  if (!std::isspace(in.get())) {
    throw FormatError("malformed PFM header in '" + path.string() + "'");
  }
  const bool file_little = scale < 0.0;
  const bool swap = file_little != (std::endian::native == std::endian::little);

  const std::size_t count = static_cast<std::size_t>(w) * static_cast<std::size_t>(h);
  std::vector<float> raw(count);
  in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(count * 4));
  if (in.gcount() != static_cast<std::streamsize>(count * 4)) {
    throw FormatError("truncated PFM body in '" + path.string() + "'");
  }

  DepthMap d(static_cast<int>(w), static_cast<int>(h));
  for (long long row = 0; row < h; ++row) {
    // Rows are stored bottom-to-top.
    const std::size_t src_row = static_cast<std::size_t>(h - 1 - row);
    for (long long col = 0; col < w; ++col) {
      float v = raw[src_row * w + col];
      if (swap) v = swap_float(v);
      if (!std::isfinite(v)) {
        throw FormatError("non-finite depth sample in '" + path.string() + "'");
      }
      if (v < 0.0f) {
        throw FormatError("negative depth sample in '" + path.string() + "'");
      }
      d.values[static_cast<std::size_t>(row) * w + col] = v;
    }
  }
  return d;
}

void write_pfm(const DepthMap& d, const std::filesystem::path& path) {
  validate(d);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write '" + path.string() + "'");
  out << "Pf\n" << d.width << ' ' << d.height << "\n-1.0\n";
  std::vector<float> row(d.width);
  for (int y = d.height - 1; y >= 0; --y) {
    for (int x = 0; x < d.width; ++x) {
      float v = static_cast<float>(d.at(x, y));
      if constexpr (std::endian::native == std::endian::big) v = swap_float(v);
      row[x] = v;
    }
    out.write(reinterpret_cast<const char*>(row.data()),
              static_cast<std::streamsize>(row.size() * 4));
  }
  if (!out) throw std::runtime_error("failed writing '" + path.string() + "'");
}

void save_depth_png16(const DepthMap& d, double min_value, double max_value,
                      const std::filesystem::path& path) {
  validate(d);
  if (!(max_value > min_value)) {
    throw std::invalid_argument("depth PNG range requires max > min");
  }
  std::vector<std::uint16_t> samples(d.values.size());
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const double t = std::clamp((d.values[i] - min_value) / (max_value - min_value), 0.0, 1.0);
    samples[i] = static_cast<std::uint16_t>(std::lround(t * 65535.0));
  }
  write_png(path, d.width, d.height, 1, 16, samples);
  std::ofstream side(range_sidecar_path(path));
  side.precision(17);
  side << min_value << ' ' << max_value << '\n';
  if (!side) throw std::runtime_error("failed writing range sidecar for '" + path.string() + "'");
}

DepthMap load_depth(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) {
    throw InputError("depth file '" + path.string() + "' does not exist");
  }
  auto ext = path.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
  if (ext == ".pfm") return read_pfm(path);
  if (ext != ".png") {
    throw FormatError("unsupported depth format '" + ext + "' (expected .pfm or .png)");
  }

  const auto sidecar = range_sidecar_path(path);
  std::ifstream side(sidecar);
  if (!side) {
    throw FormatError("16-bit depth PNG '" + path.string() + "' has no range sidecar '" +
                      sidecar.string() + "'");
  }
  double lo = 0.0, hi = 0.0;
  if (!(side >> lo >> hi) || !std::isfinite(lo) || !std::isfinite(hi) || hi < lo) {
    throw FormatError("malformed range sidecar '" + sidecar.string() + "'");
  }
  const PngRaw raw = read_png(path);
  if (raw.channels != 1 || raw.bit_depth != 16) {
    throw FormatError("depth PNG '" + path.string() + "' must be 16-bit grayscale");
  }
  DepthMap d(raw.width, raw.height);
  for (std::size_t i = 0; i < d.values.size(); ++i) {
    d.values[i] = lo + (hi - lo) * (raw.samples[i] / 65535.0);
  }
  validate(d);
  return d;
}

DepthMap resize_bilinear(const DepthMap& d, int target_w, int target_h) {
  if (target_w < 1 || target_h < 1) {
    throw std::invalid_argument("resize target dimensions must be >= 1");
  }
  validate(d);
  DepthMap out;
  out.width = target_w;
  out.height = target_h;
  resample<double>(d.width, d.height, target_w, target_h,
                   [&](int x0, int x1, int y0, int y1, double fx, double fy) {
                     const double top = std::lerp(d.at(x0, y0), d.at(x1, y0), fx);
                     const double bottom = std::lerp(d.at(x0, y1), d.at(x1, y1), fx);
                     return std::lerp(top, bottom, fy);
                   },
                   out.values);
  return out;
}

RgbImage resize_bilinear(const RgbImage& img, int target_w, int target_h) {
  if (target_w < 1 || target_h < 1) {
    throw std::invalid_argument("resize target dimensions must be >= 1");
  }
  validate(img);
  RgbImage out;
  out.width = target_w;
  out.height = target_h;
  resample<Eigen::Vector3f>(
      img.width, img.height, target_w, target_h,
      [&](int x0, int x1, int y0, int y1, double fx, double fy) {
        Eigen::Vector3f c;
        for (int k = 0; k < 3; ++k) {
          const double top = std::lerp<double>(img.at(x0, y0)[k], img.at(x1, y0)[k], fx);
          const double bottom = std::lerp<double>(img.at(x0, y1)[k], img.at(x1, y1)[k], fx);
          c[k] = static_cast<float>(std::lerp(top, bottom, fy));
        }
        return c;
      },
      out.pixels);
  return out;
}

RgbImage resize_to_multiple_of_32(const RgbImage& img) {
  validate(img);
  if (img.width < 32 || img.height < 32) {
    std::ostringstream msg;
    msg << "image " << img.width << "x" << img.height
        << " is smaller than 32 pixels in at least one dimension";
    throw std::invalid_argument(msg.str());
  }
  const int w = img.width / 32 * 32;
  const int h = img.height / 32 * 32;
  if (w == img.width && h == img.height) return img;
  return resize_bilinear(img, w, h);
}

}  // namespace artrecon

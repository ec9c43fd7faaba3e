#pragma once

#include <filesystem>
#include <span>
#include <vector>

#include <Eigen/Core>

namespace artrecon {

/// Row-major RGB raster with channels in [0,1].
struct RgbImage {
  int width = 0;
  int height = 0;
  std::vector<Eigen::Vector3f> pixels;

  RgbImage() = default;
  RgbImage(int w, int h, const Eigen::Vector3f& fill = Eigen::Vector3f::Zero());

  const Eigen::Vector3f& at(int u, int v) const { return pixels[index(u, v)]; }
  Eigen::Vector3f& at(int u, int v) { return pixels[index(u, v)]; }
  std::size_t index(int u, int v) const {
    return static_cast<std::size_t>(v) * width + u;
  }
};

/// Row-major relative depth raster. Values are finite and non-negative.
struct DepthMap {
  int width = 0;
  int height = 0;
  std::vector<double> values;

  DepthMap() = default;
  DepthMap(int w, int h, double fill = 0.0);
  DepthMap(int w, int h, std::vector<double> data);

  double at(int u, int v) const { return values[index(u, v)]; }
  double& at(int u, int v) { return values[index(u, v)]; }
  std::size_t index(int u, int v) const {
    return static_cast<std::size_t>(v) * width + u;
  }
};

/// Throws std::invalid_argument if dimensions, counts or values break the
/// DepthMap invariants.
void validate(const DepthMap& d);
void validate(const RgbImage& img);

// PNG input (8- or 16-bit, gray or RGB, alpha dropped).
RgbImage load_rgb(const std::filesystem::path& path);
void save_rgb_png(const RgbImage& img, const std::filesystem::path& path);

// Depth interchange. PFM is read verbatim; a 16-bit grayscale PNG is
// de-quantized through the "<stem>.range" sidecar holding "min max".
DepthMap load_depth(const std::filesystem::path& path);
DepthMap read_pfm(const std::filesystem::path& path);
void write_pfm(const DepthMap& d, const std::filesystem::path& path);
void save_depth_png16(const DepthMap& d, double min_value, double max_value,
                      const std::filesystem::path& path);
std::filesystem::path range_sidecar_path(const std::filesystem::path& png);

/// Corner-aligned bilinear resampling: output pixel (0,0) samples input
/// (0,0) and output (W'-1,H'-1) samples input (W-1,H-1). A single output
/// column (or row) samples the input center line.
DepthMap resize_bilinear(const DepthMap& d, int target_w, int target_h);
RgbImage resize_bilinear(const RgbImage& img, int target_w, int target_h);

/// Floors both dimensions to a multiple of 32. Requires both >= 32.
RgbImage resize_to_multiple_of_32(const RgbImage& img);

}  // namespace artrecon

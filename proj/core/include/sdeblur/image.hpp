#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace sdeblur {

/// Row-major, channel-interleaved image of real intensities.
///
/// Images exchanged with files and metrics are normalised to [0, 1]; solver
/// iterates may temporarily leave that range and are clamped on export.
class ImageBuffer {
 public:
  ImageBuffer() = default;
  ImageBuffer(int width, int height, int channels, double fill = 0.0);
  ImageBuffer(int width, int height, int channels, std::vector<double> data);

  int width() const { return width_; }
  int height() const { return height_; }
  int channels() const { return channels_; }
  std::size_t pixel_count() const {
    return static_cast<std::size_t>(width_) * static_cast<std::size_t>(height_);
  }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  double& at(int x, int y, int c = 0) { return data_[index(x, y, c)]; }
  double at(int x, int y, int c = 0) const { return data_[index(x, y, c)]; }

  std::span<double> data() { return data_; }
  std::span<const double> data() const { return data_; }
  std::vector<double>& storage() { return data_; }

  bool same_shape(const ImageBuffer& other) const {
    return width_ == other.width_ && height_ == other.height_ &&
           channels_ == other.channels_;
  }
  /// True when every intensity lies in [0, 1].
  bool is_normalized() const;
  /// Throws InvariantViolation unless is_normalized().
  void check_normalized(const char* what) const;
  ImageBuffer clamped() const;

  /// Single channel `c` as its own image.
  ImageBuffer channel(int c) const;
  /// Rec. 601 luma; returns a copy for single-channel images.
  ImageBuffer luma() const;

  bool operator==(const ImageBuffer&) const = default;

 private:
  std::size_t index(int x, int y, int c) const {
    return (static_cast<std::size_t>(y) * static_cast<std::size_t>(width_) +
            static_cast<std::size_t>(x)) *
               static_cast<std::size_t>(channels_) +
           static_cast<std::size_t>(c);
  }

  int width_ = 0;
  int height_ = 0;
  int channels_ = 1;
  std::vector<double> data_;
};

/// Bilinear sample at continuous pixel position (x, y); pixel centres sit at
/// integer coordinates. Out-of-range neighbours are clamped to the border.
double sample_bilinear_clamped(const ImageBuffer& image, double x, double y, int c);

}  // namespace sdeblur

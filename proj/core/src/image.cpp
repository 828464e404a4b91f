#include "sdeblur/image.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "sdeblur/error.hpp"

namespace sdeblur {

ImageBuffer::ImageBuffer(int width, int height, int channels, double fill)
    : width_(width), height_(height), channels_(channels) {
  if (width < 0 || height < 0 || (channels != 1 && channels != 3)) {
    throw Error(ErrorCode::kInvalidArgument,
                "image needs non-negative size and 1 or 3 channels");
  }
  data_.assign(pixel_count() * static_cast<std::size_t>(channels), fill);
}

ImageBuffer::ImageBuffer(int width, int height, int channels,
                         std::vector<double> data)
    : ImageBuffer(width, height, channels) {
  if (data.size() != data_.size()) {
    throw Error(ErrorCode::kDimensionMismatch,
                "image data length does not match width*height*channels");
  }
  data_ = std::move(data);
}

bool ImageBuffer::is_normalized() const {
  return std::all_of(data_.begin(), data_.end(),
                     [](double v) { return v >= 0.0 && v <= 1.0; });
}

void ImageBuffer::check_normalized(const char* what) const {
  if (!is_normalized()) {
    throw Error(ErrorCode::kInvariantViolation,
                std::string(what) + " has intensities outside [0, 1]");
  }
}

ImageBuffer ImageBuffer::clamped() const {
  ImageBuffer out = *this;
  for (double& v : out.data_) v = std::clamp(v, 0.0, 1.0);
  return out;
}

ImageBuffer ImageBuffer::channel(int c) const {
  ImageBuffer out(width_, height_, 1);
  for (std::size_t i = 0; i < pixel_count(); ++i) {
    out.data_[i] = data_[i * static_cast<std::size_t>(channels_) +
                         static_cast<std::size_t>(c)];
  }
  return out;
}

ImageBuffer ImageBuffer::luma() const {
  if (channels_ == 1) return *this;
  ImageBuffer out(width_, height_, 1);
  for (std::size_t i = 0; i < pixel_count(); ++i) {
    const double* p = &data_[3 * i];
    out.data_[i] = 0.299 * p[0] + 0.587 * p[1] + 0.114 * p[2];
  }
  return out;
}

double sample_bilinear_clamped(const ImageBuffer& image, double x, double y, int c) {
  const int w = image.width();
  const int h = image.height();
  const double fx = std::floor(x);
  const double fy = std::floor(y);
  const double ax = x - fx;
  const double ay = y - fy;
  const int x0 = static_cast<int>(fx);
  const int y0 = static_cast<int>(fy);
  auto px = [&](int xi, int yi) {
    return image.at(std::clamp(xi, 0, w - 1), std::clamp(yi, 0, h - 1), c);
  };
  return (1.0 - ay) * ((1.0 - ax) * px(x0, y0) + ax * px(x0 + 1, y0)) +
         ay * ((1.0 - ax) * px(x0, y0 + 1) + ax * px(x0 + 1, y0 + 1));
}

}  // namespace sdeblur

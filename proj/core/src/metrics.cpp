#include "sdeblur/metrics.hpp"

#include <array>
#include <cmath>
#include <limits>

#include "sdeblur/error.hpp"

namespace sdeblur {
namespace {

constexpr int kWindow = 11;
constexpr double kSigma = 1.5;
constexpr double kC1 = 0.01 * 0.01;
constexpr double kC2 = 0.03 * 0.03;

void require_same_shape(const ImageBuffer& a, const ImageBuffer& b) {
  if (!a.same_shape(b)) {
    throw Error(ErrorCode::kDimensionMismatch, "metric inputs differ in shape");
  }
}

std::array<double, kWindow> gaussian_taps() {
  std::array<double, kWindow> g{};
  double sum = 0.0;
  for (int i = 0; i < kWindow; ++i) {
    const double d = i - kWindow / 2;
    g[static_cast<std::size_t>(i)] = std::exp(-d * d / (2.0 * kSigma * kSigma));
    sum += g[static_cast<std::size_t>(i)];
  }
  for (double& v : g) v /= sum;
  return g;
}

double psnr_from_mse(double mse) {
  if (mse == 0.0) return std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(1.0 / mse);
}

}  // namespace

double psnr(const ImageBuffer& a, const ImageBuffer& b) {
  require_same_shape(a, b);
  if (a.empty()) throw Error(ErrorCode::kInvalidArgument, "psnr of empty images");
  double sum = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a.data()[i] - b.data()[i];
    sum += d * d;
  }
  return psnr_from_mse(sum / static_cast<double>(a.size()));
}

double psnr_masked(const ImageBuffer& a, const ImageBuffer& b,
                   const std::vector<unsigned char>& mask) {
  require_same_shape(a, b);
  if (mask.size() != a.pixel_count()) {
    throw Error(ErrorCode::kDimensionMismatch, "psnr mask size mismatch");
  }
  const auto ch = static_cast<std::size_t>(a.channels());
  double sum = 0.0;
  std::size_t count = 0;
  for (std::size_t i = 0; i < mask.size(); ++i) {
    if (mask[i] == 0) continue;
    for (std::size_t c = 0; c < ch; ++c) {
      const double d = a.data()[i * ch + c] - b.data()[i * ch + c];
      sum += d * d;
    }
    count += ch;
  }
  if (count == 0) throw Error(ErrorCode::kInvalidArgument, "psnr mask is empty");
  return psnr_from_mse(sum / static_cast<double>(count));
}

namespace {

// Averages local SSIM over 11x11 windows; `keep` selects windows by their
// centre pixel.
template <typename Keep>
double mean_ssim(const ImageBuffer& a, const ImageBuffer& b, Keep keep) {
  require_same_shape(a, b);
  const ImageBuffer ya = a.luma();
  const ImageBuffer yb = b.luma();
  const int w = a.width();
  const int h = a.height();
  if (w < kWindow || h < kWindow) {
    throw Error(ErrorCode::kInvalidArgument, "ssim needs images of at least 11x11");
  }
  const auto g = gaussian_taps();

  double total = 0.0;
  std::size_t windows = 0;
  for (int y = 0; y + kWindow <= h; ++y) {
    for (int x = 0; x + kWindow <= w; ++x) {
      if (!keep(x + kWindow / 2, y + kWindow / 2)) continue;
      double mu_a = 0.0, mu_b = 0.0, aa = 0.0, bb = 0.0, ab = 0.0;
      for (int j = 0; j < kWindow; ++j) {
        for (int i = 0; i < kWindow; ++i) {
          const double wt = g[static_cast<std::size_t>(i)] * g[static_cast<std::size_t>(j)];
          const double va = ya.at(x + i, y + j);
          const double vb = yb.at(x + i, y + j);
          mu_a += wt * va;
          mu_b += wt * vb;
          aa += wt * va * va;
          bb += wt * vb * vb;
          ab += wt * va * vb;
        }
      }
      const double var_a = aa - mu_a * mu_a;
      const double var_b = bb - mu_b * mu_b;
      const double cov = ab - mu_a * mu_b;
      total += ((2.0 * mu_a * mu_b + kC1) * (2.0 * cov + kC2)) /
               ((mu_a * mu_a + mu_b * mu_b + kC1) * (var_a + var_b + kC2));
      ++windows;
    }
  }
  if (windows == 0) throw Error(ErrorCode::kInvalidArgument, "ssim mask selects no window");
  return total / static_cast<double>(windows);
}

}  // namespace

double ssim(const ImageBuffer& a, const ImageBuffer& b) {
  return mean_ssim(a, b, [](int, int) { return true; });
}

double ssim_masked(const ImageBuffer& a, const ImageBuffer& b,
                   const std::vector<unsigned char>& mask) {
  require_same_shape(a, b);
  if (mask.size() != a.pixel_count()) {
    throw Error(ErrorCode::kDimensionMismatch, "ssim mask size mismatch");
  }
  const int w = a.width();
  return mean_ssim(a, b, [&](int x, int y) {
    return mask[static_cast<std::size_t>(y) * w + x] != 0;
  });
}

}  // namespace sdeblur

#pragma once

#include <vector>

#include "sdeblur/image.hpp"

namespace sdeblur {

/// 10 log10(1 / MSE) over all pixels and channels, peak 1. Returns +infinity
/// for identical images.
double psnr(const ImageBuffer& a, const ImageBuffer& b);

/// PSNR restricted to pixels where mask is nonzero.
double psnr_masked(const ImageBuffer& a, const ImageBuffer& b,
                   const std::vector<unsigned char>& mask);

/// Mean SSIM on Rec. 601 luma: 11x11 Gaussian window (sigma 1.5),
/// K1 = 0.01, K2 = 0.03, dynamic range 1, averaged over windows that fit
/// inside the image.
double ssim(const ImageBuffer& a, const ImageBuffer& b);

/// Mean SSIM over the windows whose centre pixel has a nonzero mask entry.
double ssim_masked(const ImageBuffer& a, const ImageBuffer& b,
                   const std::vector<unsigned char>& mask);

}  // namespace sdeblur

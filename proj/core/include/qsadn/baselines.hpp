#pragma once

#include "qsadn/image.hpp"

namespace qsadn {

struct FreqFilterConfig {
  /// Standard deviation of the Gaussian transfer function, in index units of the
  /// centred spectrum.
  double sigma = 55.0;
};

/// 3x3 median with replicate borders.
Image2D median_filter_3x3(const ImageView& img);

struct LowpassResult {
  Image2D image;
  /// Largest |imaginary part| left after the inverse transform.
  double max_imag_residue = 0.0;
};

/// Gaussian low-pass in the frequency domain: DFT at the exact image size, multiply by
/// exp(-D^2 / (2 sigma^2)) where D is the distance from the zero frequency on the
/// centred spectrum, inverse DFT, keep the real part.
Image2D gaussian_lowpass_freq(const ImageView& img, const FreqFilterConfig& cfg = {});
LowpassResult gaussian_lowpass_freq_detailed(const ImageView& img, const FreqFilterConfig& cfg = {});

}  // namespace qsadn

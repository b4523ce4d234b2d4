#pragma once

#include <cstddef>
#include <string>

#include "qsadn/image.hpp"

namespace qsadn {

/// PSNR result; infinite exactly when the two images are identical.
class QualityScore {
 public:
  static QualityScore finite(double v) { return QualityScore(v, false); }
  static QualityScore infinite() { return QualityScore(0.0, true); }

  bool is_infinite() const { return infinite_; }
  /// Throws InvalidArgument on an infinite score.
  double value() const;
  /// +inf for the infinite case, otherwise the finite value.
  double as_double() const;

  bool operator==(const QualityScore&) const = default;

 private:
  QualityScore(double v, bool inf) : value_(v), infinite_(inf) {}
  double value_;
  bool infinite_;
};

double mse(const ImageView& x, const ImageView& y);

/// 10 log10(max_val^2 / mse), or infinite when mse == 0.
QualityScore psnr(const ImageView& x, const ImageView& y, double max_val);

struct SsimParams {
  double k1 = 0.01;
  double k2 = 0.03;
  double dynamic_range = 1.0;
};

/// SSIM from whole-image statistics (population moments):
///   (2 mx my + c1)(2 sxy + c2) / ((mx^2 + my^2 + c1)(sx^2 + sy^2 + c2)),
/// with c1 = (k1 L)^2 and c2 = (k2 L)^2.
double ssim(const ImageView& x, const ImageView& y, const SsimParams& params);

/// Mean of the same formula over every window x window block at unit stride.
/// Falls back to the global value when the image is smaller than the window.
double ssim_windowed(const ImageView& x, const ImageView& y, const SsimParams& params,
                     std::size_t window = 8);

}  // namespace qsadn

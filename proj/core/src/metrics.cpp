#include "qsadn/metrics.hpp"

#include <cmath>
#include <limits>

namespace qsadn {
namespace {

void require_range(const SsimParams& p) {
  if (!(p.dynamic_range > 0.0)) fail(ErrorCode::kNonpositiveRange, "ssim: L must be positive");
  if (p.k1 < 0.0 || p.k2 < 0.0) fail(ErrorCode::kInvalidArgument, "ssim: negative k constant");
}

double ssim_block(const ImageView& x, const ImageView& y, const SsimParams& p) {
  const double n = double(x.size());
  double sx = 0.0, sy = 0.0;
  for (std::size_t r = 0; r < x.rows; ++r) {
    for (std::size_t c = 0; c < x.cols; ++c) {
      sx += x(r, c);
      sy += y(r, c);
    }
  }
  const double mx = sx / n, my = sy / n;
  double vxx = 0.0, vyy = 0.0, vxy = 0.0;
  for (std::size_t r = 0; r < x.rows; ++r) {
    for (std::size_t c = 0; c < x.cols; ++c) {
      const double dx = x(r, c) - mx;
      const double dy = y(r, c) - my;
      vxx += dx * dx;
      vyy += dy * dy;
      vxy += dx * dy;
    }
  }
  vxx /= n;
  vyy /= n;
  vxy /= n;
  const double c1 = (p.k1 * p.dynamic_range) * (p.k1 * p.dynamic_range);
  const double c2 = (p.k2 * p.dynamic_range) * (p.k2 * p.dynamic_range);
  const double num = (2.0 * mx * my + c1) * (2.0 * vxy + c2);
  const double den = (mx * mx + my * my + c1) * (vxx + vyy + c2);
  // Only reachable with k1 = k2 = 0 on two all-zero blocks.
  if (den == 0.0) return 1.0;
  return num / den;
}

}  // namespace

double QualityScore::value() const {
  if (infinite_) fail(ErrorCode::kInvalidArgument, "quality score is infinite");
  return value_;
}

double QualityScore::as_double() const {
  return infinite_ ? std::numeric_limits<double>::infinity() : value_;
}

double mse(const ImageView& x, const ImageView& y) {
  require_same_shape(x, y, "mse: images differ in size");
  if (x.size() == 0) fail(ErrorCode::kEmptyInput, "mse: empty images");
  double s = 0.0;
  for (std::size_t r = 0; r < x.rows; ++r) {
    for (std::size_t c = 0; c < x.cols; ++c) {
      const double d = x(r, c) - y(r, c);
      s += d * d;
    }
  }
  return s / double(x.size());
}

QualityScore psnr(const ImageView& x, const ImageView& y, double max_val) {
  require_same_shape(x, y, "psnr: images differ in size");
  if (!(max_val > 0.0)) fail(ErrorCode::kNonpositiveMax, "psnr: max must be positive");
  const double e = mse(x, y);
  if (e == 0.0) return QualityScore::infinite();
  return QualityScore::finite(10.0 * std::log10(max_val * max_val / e));
}

double ssim(const ImageView& x, const ImageView& y, const SsimParams& params) {
  require_same_shape(x, y, "ssim: images differ in size");
  require_range(params);
  if (x.size() == 0) fail(ErrorCode::kEmptyInput, "ssim: empty images");
  return ssim_block(x, y, params);
}

double ssim_windowed(const ImageView& x, const ImageView& y, const SsimParams& params,
                     std::size_t window) {
  require_same_shape(x, y, "ssim: images differ in size");
  require_range(params);
  if (window == 0) fail(ErrorCode::kInvalidArgument, "ssim: window must be positive");
  if (x.rows < window || x.cols < window) return ssim(x, y, params);
  double sum = 0.0;
  std::size_t count = 0;
  for (std::size_t r = 0; r + window <= x.rows; ++r) {
    for (std::size_t c = 0; c + window <= x.cols; ++c) {
      sum += ssim_block(x.window(r, c, window, window), y.window(r, c, window, window), params);
      ++count;
    }
  }
  return sum / double(count);
}

}  // namespace qsadn

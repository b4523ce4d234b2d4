#include "qsadn/baselines.hpp"

#include <fftw3.h>

#include <algorithm>
#include <array>
#include <cmath>
#include <memory>
#include <mutex>

namespace qsadn {
namespace {

// FFTW's planner is not thread-safe; execution of distinct plans is.
std::mutex& planner_mutex() {
  static std::mutex mu;
  return mu;
}

struct FftwFree {
  void operator()(fftw_complex* p) const { fftw_free(p); }
};
struct PlanDestroy {
  void operator()(fftw_plan_s* p) const {
    std::lock_guard lock(planner_mutex());
    fftw_destroy_plan(p);
  }
};
using ComplexBuffer = std::unique_ptr<fftw_complex[], FftwFree>;
using Plan = std::unique_ptr<fftw_plan_s, PlanDestroy>;

ComplexBuffer alloc_complex(std::size_t n) {
  auto* p = static_cast<fftw_complex*>(fftw_malloc(sizeof(fftw_complex) * n));
  if (!p) throw std::bad_alloc();
  return ComplexBuffer(p);
}

// FFTW_ESTIMATE keeps the chosen algorithm, and so the output bits, independent of timing.
Plan make_plan(std::size_t rows, std::size_t cols, fftw_complex* in, fftw_complex* out, int dir) {
  std::lock_guard lock(planner_mutex());
  return Plan(fftw_plan_dft_2d(int(rows), int(cols), in, out, dir, FFTW_ESTIMATE));
}

// Signed frequency of index u on an n-point axis after centring (fftshift).
double centred_frequency(std::size_t u, std::size_t n) {
  return u < (n + 1) / 2 ? double(u) : double(u) - double(n);
}

}  // namespace

Image2D median_filter_3x3(const ImageView& img) {
  if (img.rows == 0 || img.cols == 0) fail(ErrorCode::kEmptyInput, "median filter on empty image");
  Image2D out(img.rows, img.cols);
  const auto last_r = std::ptrdiff_t(img.rows) - 1;
  const auto last_c = std::ptrdiff_t(img.cols) - 1;
  std::array<double, 9> win{};
  for (std::size_t r = 0; r < img.rows; ++r) {
    for (std::size_t c = 0; c < img.cols; ++c) {
      std::size_t n = 0;
      for (std::ptrdiff_t dr = -1; dr <= 1; ++dr) {
        const auto rr = std::clamp<std::ptrdiff_t>(std::ptrdiff_t(r) + dr, 0, last_r);
        for (std::ptrdiff_t dc = -1; dc <= 1; ++dc) {
          const auto cc = std::clamp<std::ptrdiff_t>(std::ptrdiff_t(c) + dc, 0, last_c);
          win[n++] = img(std::size_t(rr), std::size_t(cc));
        }
      }
      std::nth_element(win.begin(), win.begin() + 4, win.end());
      out(r, c) = win[4];
    }
  }
  return out;
}

LowpassResult gaussian_lowpass_freq_detailed(const ImageView& img, const FreqFilterConfig& cfg) {
  if (img.rows < 2 || img.cols < 2) fail(ErrorCode::kImageTooSmall, "low-pass needs at least 2x2");
  if (!(cfg.sigma > 0.0)) fail(ErrorCode::kNonpositiveSigma, "low-pass sigma must be positive");
  const std::size_t rows = img.rows, cols = img.cols, n = rows * cols;

  auto spatial = alloc_complex(n);
  auto spectrum = alloc_complex(n);
  const Plan forward = make_plan(rows, cols, spatial.get(), spectrum.get(), FFTW_FORWARD);
  const Plan inverse = make_plan(rows, cols, spectrum.get(), spatial.get(), FFTW_BACKWARD);

  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < cols; ++c) {
      spatial[r * cols + c][0] = img(r, c);
      spatial[r * cols + c][1] = 0.0;
    }
  }
  fftw_execute(forward.get());

  const double inv_two_sigma_sq = 1.0 / (2.0 * cfg.sigma * cfg.sigma);
  for (std::size_t u = 0; u < rows; ++u) {
    const double fu = centred_frequency(u, rows);
    for (std::size_t v = 0; v < cols; ++v) {
      const double fv = centred_frequency(v, cols);
      const double gain = std::exp(-(fu * fu + fv * fv) * inv_two_sigma_sq);
      spectrum[u * cols + v][0] *= gain;
      spectrum[u * cols + v][1] *= gain;
    }
  }
  fftw_execute(inverse.get());

  LowpassResult result{Image2D(rows, cols), 0.0};
  const double scale = 1.0 / double(n);
  for (std::size_t i = 0; i < n; ++i) {
    result.image.pixels()[i] = spatial[i][0] * scale;
    result.max_imag_residue = std::max(result.max_imag_residue, std::abs(spatial[i][1] * scale));
  }
  return result;
}

Image2D gaussian_lowpass_freq(const ImageView& img, const FreqFilterConfig& cfg) {
  return gaussian_lowpass_freq_detailed(img, cfg).image;
}

}  // namespace qsadn

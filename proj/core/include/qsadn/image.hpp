#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "qsadn/error.hpp"

namespace qsadn {

struct IntensityRange {
  double lo = 0.0;
  double hi = 65535.0;

  double span() const { return hi - lo; }
  bool operator==(const IntensityRange&) const = default;
};

/// Non-owning, read-only window into row-major pixel storage.
/// `stride` is the distance in elements between the starts of two rows.
template <typename T>
struct View2D {
  const T* data = nullptr;
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::size_t stride = 0;

  const T& operator()(std::size_t r, std::size_t c) const { return data[r * stride + c]; }
  const T* row(std::size_t r) const { return data + r * stride; }
  std::size_t size() const { return rows * cols; }

  View2D window(std::size_t r0, std::size_t c0, std::size_t h, std::size_t w) const {
    return View2D{data + r0 * stride + c0, h, w, stride};
  }
};

using ImageView = View2D<double>;

/// Dense row-major 2D array of real intensities.
class Image2D {
 public:
  Image2D() = default;
  Image2D(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}
  Image2D(std::size_t rows, std::size_t cols, std::vector<double> data)
      : rows_(rows), cols_(cols), data_(std::move(data)) {
    if (data_.size() != rows_ * cols_) {
      fail(ErrorCode::kSizeMismatch, "pixel buffer does not match dimensions");
    }
  }

  /// Copies an arbitrary view into owned storage.
  static Image2D from_view(const ImageView& v) {
    Image2D out(v.rows, v.cols);
    for (std::size_t r = 0; r < v.rows; ++r) {
      for (std::size_t c = 0; c < v.cols; ++c) out(r, c) = v(r, c);
    }
    return out;
  }

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

  std::span<double> pixels() { return data_; }
  std::span<const double> pixels() const { return data_; }

  ImageView view() const { return ImageView{data_.data(), rows_, cols_, cols_}; }
  operator ImageView() const { return view(); }

  bool operator==(const Image2D&) const = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

inline bool same_shape(const ImageView& a, const ImageView& b) {
  return a.rows == b.rows && a.cols == b.cols;
}

inline void require_same_shape(const ImageView& a, const ImageView& b, const char* what) {
  if (!same_shape(a, b)) fail(ErrorCode::kSizeMismatch, what);
}

}  // namespace qsadn

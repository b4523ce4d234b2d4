#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "qsadn/image.hpp"
#include "qsadn/imgio.hpp"
#include "qsadn/matcher.hpp"

namespace qsadn {

/// k x k correlation kernel plus bias, applied with replicate borders.
/// Coefficient layout (used by the solvers and the text format): the k*k kernel
/// row-major, then the bias.
class LinearDenoiser {
 public:
  explicit LinearDenoiser(std::size_t k = 3);
  LinearDenoiser(std::size_t k, std::vector<double> coefficients);

  static LinearDenoiser identity(std::size_t k);

  std::size_t k() const { return k_; }
  std::size_t parameter_count() const { return coeffs_.size(); }
  std::span<const double> coefficients() const { return coeffs_; }
  std::span<double> coefficients() { return coeffs_; }
  double kernel(std::size_t r, std::size_t c) const { return coeffs_[r * k_ + c]; }
  double bias() const { return coeffs_.back(); }

  Image2D apply(const ImageView& img) const;

  /// `k` on the first line, then k*k+1 coefficients, one per line, 17 significant digits.
  void write(const std::filesystem::path& path) const;
  static LinearDenoiser read(const std::filesystem::path& path);

 private:
  std::size_t k_;
  std::vector<double> coeffs_;
};

/// Output of the denoiser with replicate borders; dimensions equal the input's.
Image2D denoise(const LinearDenoiser& d, const ImageView& img);

struct WeightedPair {
  Image2D ld;
  Image2D nd;
  double weight = 1.0;
};

struct WeightedPairSet {
  std::vector<WeightedPair> pairs;

  /// Throws EmptySet, SizeMismatch or WeightOutOfRange.
  void validate() const;
  double weight_sum() const;
};

/// Materialises the manifest's pairs from the referenced volumes. With `normalize`
/// every patch is mapped to [0, 1] through its volume's declared range.
WeightedPairSet pairs_from_manifest(const PairManifest& manifest,
                                    std::span<const ImageVolume> volumes, bool normalize = true);

struct TrainConfig {
  /// Step size applied to the per-pixel gradient (objective / pixels-per-patch).
  double learning_rate = 1e-2;
  std::size_t epochs = 2000;
  std::uint64_t seed = 0;
  /// Half-width of the seeded uniform perturbation added to the identity start.
  double init_jitter = 1e-3;

  void validate() const;
};

/// (1 / sum w) * sum_i w_i * ||f(x_i) - y_i||_2^2.
double weighted_mse_objective(const LinearDenoiser& d, const WeightedPairSet& s);

/// Full-batch gradient descent from a jittered identity kernel. When `trace` is given
/// it receives the objective before every epoch and once more after the last.
/// Throws Divergence if the objective becomes non-finite or exceeds 10x its start.
LinearDenoiser gd_train(const WeightedPairSet& s, std::size_t k, const TrainConfig& cfg,
                        std::vector<double>* trace = nullptr);

/// Solves the weighted normal equations (A^T W A) theta = A^T W b directly.
LinearDenoiser closed_form_weighted_ls(const WeightedPairSet& s, std::size_t k);

}  // namespace qsadn

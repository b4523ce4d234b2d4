#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "qsadn/image.hpp"

namespace qsadn {

/// Joint intensity histogram of two equally sized images over a shared range.
/// counts is row-major with the first image's bin as the row index.
struct JointHistogram {
  std::size_t bins = 0;
  std::vector<std::uint32_t> counts;
  IntensityRange range;
  std::uint64_t total = 0;

  /// Wraps externally built counts (e.g. for property tests). total is recomputed.
  static JointHistogram from_counts(std::size_t bins, std::vector<std::uint32_t> counts,
                                    IntensityRange range = {0.0, 1.0});

  std::uint32_t at(std::size_t row, std::size_t col) const { return counts[row * bins + col]; }
  std::vector<std::uint32_t> marginal_first() const;
  std::vector<std::uint32_t> marginal_second() const;
};

/// Bin index of one intensity: clamp into [lo, hi], then min(floor((v-lo)/(hi-lo)*bins), bins-1).
std::size_t bin_index(double v, IntensityRange range, std::size_t bins);

JointHistogram joint_histogram(const ImageView& a, const ImageView& b, std::size_t bins,
                               IntensityRange range);

/// Shannon entropy in bits of a histogram given as raw counts.
double entropy(std::span<const std::uint32_t> counts);
double joint_entropy(const JointHistogram& h);
/// I(X;Y) in bits, summed cell by cell from the joint distribution.
double mutual_information(const JointHistogram& h);
/// 2 I / (H(X) + H(Y)); when both marginals are point masses the result is 1
/// if they sit in the same bin and 0 otherwise.
double nmi(const JointHistogram& h);

double nmi(const ImageView& a, const ImageView& b, std::size_t bins, IntensityRange range);
/// Population-moment Pearson correlation. Throws ZeroVariance on a constant input.
double pearson(const ImageView& a, const ImageView& b);
/// Same arithmetic as pearson(), but reports a constant input as nullopt instead of throwing.
std::optional<double> try_pearson(const ImageView& a, const ImageView& b);
double rbf(const ImageView& a, const ImageView& b, double sigma);

using BinView = View2D<std::uint16_t>;

/// An image whose pixels have been replaced by their histogram bin indices.
class BinnedImage {
 public:
  BinnedImage(const ImageView& img, IntensityRange range, std::size_t bins);

  std::size_t bins() const { return bins_; }
  BinView view() const { return BinView{data_.data(), rows_, cols_, cols_}; }

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::size_t bins_ = 0;
  std::vector<std::uint16_t> data_;
};

/// Reusable NMI evaluator over pre-binned windows. Holds scratch buffers, so one
/// instance per thread. The free nmi() functions route through this same code,
/// which keeps matcher scores bit-identical to per-patch recomputation.
class NmiKernel {
 public:
  explicit NmiKernel(std::size_t bins);

  double operator()(const BinView& a, const BinView& b);
  std::size_t bins() const { return bins_; }

 private:
  std::size_t bins_;
  std::vector<std::uint32_t> joint_;
  std::vector<std::uint32_t> first_;
  std::vector<std::uint32_t> second_;
  std::vector<std::uint32_t> touched_;
};

struct NmiMetric {
  std::size_t bins = 64;
  bool operator==(const NmiMetric&) const = default;
};
struct PearsonMetric {
  bool operator==(const PearsonMetric&) const = default;
};
struct RbfMetric {
  double sigma = 1.0;
  bool operator==(const RbfMetric&) const = default;
};

using SimilarityMetric = std::variant<NmiMetric, PearsonMetric, RbfMetric>;

/// Throws InvalidArgument / NonpositiveSigma when the metric's parameters are unusable.
void validate(const SimilarityMetric& m);
/// "nmi:<bins>", "pearson", "rbf:<sigma>". A bare "nmi" means 64 bins.
SimilarityMetric parse_metric(std::string_view text);
std::string to_string(const SimilarityMetric& m);

/// Raw similarity score. `range` is only consulted by NMI.
double similarity(const ImageView& a, const ImageView& b, const SimilarityMetric& m,
                  IntensityRange range);

/// Maps a raw score to a loss weight in [0, 1]: Pearson is clamped at 0, others pass through.
double weight_from_score(double score, const SimilarityMetric& m);

}  // namespace qsadn

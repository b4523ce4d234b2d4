#pragma once

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "qsadn/imgio.hpp"
#include "qsadn/similarity.hpp"

namespace qsadn {

struct SliceMatch {
  std::string ld_volume_id;
  std::size_t ld_slice = 0;
  std::string nd_volume_id;
  std::size_t nd_slice = 0;
  double score = 0.0;

  bool operator==(const SliceMatch&) const = default;
};

/// One matched LD/ND patch pair. `rank` is 0 for the best candidate of its LD patch.
struct PatchMatch {
  PatchProvenance ld;
  PatchProvenance nd;
  std::size_t patch_size = 0;
  std::size_t rank = 0;
  double score = 0.0;
  double weight = 0.0;

  bool operator==(const PatchMatch&) const = default;
};

struct MatchConfig {
  std::size_t patch_size = 64;
  /// LD-side tiling stride; unset means non-overlapping tiles (stride = patch_size).
  std::optional<std::size_t> stride;
  SimilarityMetric metric = NmiMetric{64};
  double threshold = 0.1;
  std::size_t top_k = 1;
  bool slice_match_enabled = true;
  /// Thread count for the search. 0 picks std::thread::hardware_concurrency().
  /// Results never depend on this value.
  std::size_t workers = 0;

  std::size_t effective_stride() const { return stride.value_or(patch_size); }
  std::size_t effective_workers() const;
  void validate() const;
};

struct ManifestHeader {
  std::size_t patch_size = 0;
  std::size_t stride = 0;
  SimilarityMetric metric = NmiMetric{64};
  double threshold = 0.0;
  std::size_t top_k = 1;
  /// "<id>:<slices>x<height>x<width>" for every input volume. Kept in memory only;
  /// the v1 header line has no slot for it.
  std::vector<std::string> fingerprints;
};

struct PairManifest {
  ManifestHeader header;
  std::vector<PatchMatch> records;

  bool empty() const { return records.empty(); }
  double mean_weight() const;
};

/// Union of the declared intensity ranges of every volume given. Used as the
/// NMI binning range so all pairs share one quantisation.
IntensityRange shared_range(std::span<const ImageVolume> a, std::span<const ImageVolume> b = {});

/// Best ND slice for every LD slice, scored on whole slices with `metric`.
/// Ties go to the lexicographically smallest ND volume id, then the lowest slice.
std::vector<SliceMatch> match_slices(const ImageVolume& ld, std::span<const ImageVolume> nd_set,
                                     const SimilarityMetric& metric, std::size_t workers = 1);

/// Dense search of one ND slice for every LD tile of one LD slice. Keeps the top_k
/// candidates per LD tile (ties to the earliest row-major ND position), then drops
/// those whose weight falls below the threshold.
std::vector<PatchMatch> match_patches(const ImageVolume& ld, std::size_t ld_slice,
                                      const ImageVolume& nd, std::size_t nd_slice,
                                      const MatchConfig& cfg,
                                      std::optional<IntensityRange> range = std::nullopt);

/// Full pairing workflow over two volume sets. With slice matching enabled each
/// LD slice only searches its matched ND slice; otherwise every ND slice is searched.
PairManifest build_manifest(std::span<const ImageVolume> ld_set,
                            std::span<const ImageVolume> nd_set, const MatchConfig& cfg);

/// Co-located patch scores of two truly paired volumes (same shape), tiled at `stride`.
/// Pearson scores of constant patches are skipped.
std::vector<double> paired_scores(const ImageVolume& ld, const ImageVolume& nd, std::size_t p,
                                  std::size_t stride, const SimilarityMetric& metric);

/// Fixed [0, 1] histogram of similarity scores. Scores outside [0, 1] are clamped.
struct ScoreHistogram {
  std::vector<std::size_t> counts;
  double mean = 0.0;
  std::size_t mode_bin = 0;

  std::size_t bins() const { return counts.size(); }
  double bin_lo(std::size_t i) const { return double(i) / double(counts.size()); }
  double bin_hi(std::size_t i) const { return double(i + 1) / double(counts.size()); }
  double mode_center() const { return (bin_lo(mode_bin) + bin_hi(mode_bin)) / 2.0; }
};

ScoreHistogram nmi_histogram(std::span<const double> scores, std::size_t bin_count);
ScoreHistogram nmi_histogram(std::span<const PatchMatch> pairs, std::size_t bin_count);

// Manifest text format:
//   #qsmatch v1 p=<int> stride=<int> metric=<name[:params]> threshold=<float> topk=<int>
//   ld_vol \t ld_slice \t ld_row \t ld_col \t nd_vol \t nd_slice \t nd_row \t nd_col \t score \t weight
// Scores and weights carry 9 significant digits in positional decimal form.
void write_manifest(const PairManifest& m, std::ostream& out);
void write_manifest(const PairManifest& m, const std::filesystem::path& path);
PairManifest read_manifest(std::istream& in);
PairManifest read_manifest(const std::filesystem::path& path);

}  // namespace qsadn

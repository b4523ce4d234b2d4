#include "qsadn/similarity.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <limits>

namespace qsadn {
namespace {

void require_bins(std::size_t bins) {
  if (bins < 2) fail(ErrorCode::kInvalidArgument, "histogram needs at least 2 bins");
  if (bins > std::numeric_limits<std::uint16_t>::max()) {
    fail(ErrorCode::kInvalidArgument, "too many histogram bins");
  }
}

void require_range(IntensityRange r) {
  if (!(r.lo < r.hi)) fail(ErrorCode::kDegenerateRange, "histogram range lo >= hi");
}

bool is_constant(const ImageView& v) {
  const double first = v(0, 0);
  for (std::size_t r = 0; r < v.rows; ++r) {
    for (std::size_t c = 0; c < v.cols; ++c) {
      if (v(r, c) != first) return false;
    }
  }
  return true;
}

double entropy_of(const std::uint32_t* counts, std::size_t n, double total) {
  double h = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    if (counts[i] == 0) continue;
    const double c = counts[i];
    h += (c / total) * std::log2(total / c);
  }
  return h;
}

// Sum over joint cells of p(x,y) log2(p(x,y) / (p(x) p(y))). Cells (i,j) and (j,i)
// are added as one unit in (min, max) order, which makes the result bit-identical
// under transposition of the histogram.
double mutual_information_of(const std::uint32_t* joint, const std::uint32_t* first,
                             const std::uint32_t* second, std::size_t bins, double total) {
  auto term = [&](std::size_t i, std::size_t j) {
    const std::uint32_t c = joint[i * bins + j];
    if (c == 0) return 0.0;
    const double cd = c;
    const double marg = double(first[i]) * double(second[j]);
    return (cd / total) * std::log2(cd * total / marg);
  };
  double mi = 0.0;
  for (std::size_t i = 0; i < bins; ++i) {
    mi += term(i, i);
    for (std::size_t j = i + 1; j < bins; ++j) {
      mi += term(i, j) + term(j, i);
    }
  }
  return std::max(mi, 0.0);
}

// Same sum as mutual_information_of, visiting only the (min, max) cell pairs listed in
// `keys` (sorted, unique, key = min * bins + max). Skipped cells would add +0.0.
double mutual_information_sparse(const std::uint32_t* joint, const std::uint32_t* first,
                                 const std::uint32_t* second, std::size_t bins, double total,
                                 const std::vector<std::uint32_t>& keys) {
  auto term = [&](std::size_t i, std::size_t j) {
    const std::uint32_t c = joint[i * bins + j];
    if (c == 0) return 0.0;
    const double cd = c;
    const double marg = double(first[i]) * double(second[j]);
    return (cd / total) * std::log2(cd * total / marg);
  };
  double mi = 0.0;
  for (std::uint32_t key : keys) {
    const std::size_t i = key / bins, j = key % bins;
    mi += i == j ? term(i, i) : term(i, j) + term(j, i);
  }
  return std::max(mi, 0.0);
}

template <typename Mi>
double nmi_with(const std::uint32_t* first, const std::uint32_t* second, std::size_t bins,
                double total, Mi&& mi_fn) {
  const double hx = entropy_of(first, bins, total);
  const double hy = entropy_of(second, bins, total);
  const double denom = hx + hy;
  if (denom == 0.0) {
    const auto a = std::find_if(first, first + bins, [](auto c) { return c != 0; }) - first;
    const auto b = std::find_if(second, second + bins, [](auto c) { return c != 0; }) - second;
    return a == b ? 1.0 : 0.0;
  }
  return std::clamp(2.0 * mi_fn() / denom, 0.0, 1.0);
}

double nmi_of(const std::uint32_t* joint, const std::uint32_t* first, const std::uint32_t* second,
              std::size_t bins, double total) {
  return nmi_with(first, second, bins, total,
                  [&] { return mutual_information_of(joint, first, second, bins, total); });
}

}  // namespace

JointHistogram JointHistogram::from_counts(std::size_t bins, std::vector<std::uint32_t> counts,
                                           IntensityRange range) {
  if (counts.size() != bins * bins) fail(ErrorCode::kSizeMismatch, "counts must be bins x bins");
  JointHistogram h;
  h.bins = bins;
  h.range = range;
  h.total = 0;
  for (auto c : counts) h.total += c;
  h.counts = std::move(counts);
  return h;
}

std::vector<std::uint32_t> JointHistogram::marginal_first() const {
  std::vector<std::uint32_t> m(bins, 0);
  for (std::size_t i = 0; i < bins; ++i) {
    for (std::size_t j = 0; j < bins; ++j) m[i] += at(i, j);
  }
  return m;
}

std::vector<std::uint32_t> JointHistogram::marginal_second() const {
  std::vector<std::uint32_t> m(bins, 0);
  for (std::size_t i = 0; i < bins; ++i) {
    for (std::size_t j = 0; j < bins; ++j) m[j] += at(i, j);
  }
  return m;
}

std::size_t bin_index(double v, IntensityRange range, std::size_t bins) {
  const double t = (std::clamp(v, range.lo, range.hi) - range.lo) / (range.hi - range.lo);
  const auto b = static_cast<std::size_t>(std::floor(t * double(bins)));
  return std::min(b, bins - 1);
}

JointHistogram joint_histogram(const ImageView& a, const ImageView& b, std::size_t bins,
                               IntensityRange range) {
  require_same_shape(a, b, "joint_histogram: patches differ in size");
  require_bins(bins);
  require_range(range);
  JointHistogram h;
  h.bins = bins;
  h.range = range;
  h.counts.assign(bins * bins, 0);
  for (std::size_t r = 0; r < a.rows; ++r) {
    for (std::size_t c = 0; c < a.cols; ++c) {
      ++h.counts[bin_index(a(r, c), range, bins) * bins + bin_index(b(r, c), range, bins)];
    }
  }
  h.total = a.size();
  return h;
}

double entropy(std::span<const std::uint32_t> counts) {
  std::uint64_t total = 0;
  for (auto c : counts) total += c;
  if (total == 0) fail(ErrorCode::kEmptyHistogram, "entropy of an empty histogram");
  return entropy_of(counts.data(), counts.size(), double(total));
}

double joint_entropy(const JointHistogram& h) {
  if (h.total == 0) fail(ErrorCode::kEmptyHistogram, "joint entropy of an empty histogram");
  return entropy_of(h.counts.data(), h.counts.size(), double(h.total));
}

double mutual_information(const JointHistogram& h) {
  if (h.total == 0) fail(ErrorCode::kEmptyHistogram, "mutual information of an empty histogram");
  const auto first = h.marginal_first();
  const auto second = h.marginal_second();
  return mutual_information_of(h.counts.data(), first.data(), second.data(), h.bins,
                               double(h.total));
}

double nmi(const JointHistogram& h) {
  if (h.total == 0) fail(ErrorCode::kEmptyHistogram, "nmi of an empty histogram");
  const auto first = h.marginal_first();
  const auto second = h.marginal_second();
  return nmi_of(h.counts.data(), first.data(), second.data(), h.bins, double(h.total));
}

BinnedImage::BinnedImage(const ImageView& img, IntensityRange range, std::size_t bins)
    : rows_(img.rows), cols_(img.cols), bins_(bins), data_(img.rows * img.cols) {
  require_bins(bins);
  require_range(range);
  for (std::size_t r = 0; r < rows_; ++r) {
    for (std::size_t c = 0; c < cols_; ++c) {
      data_[r * cols_ + c] = static_cast<std::uint16_t>(bin_index(img(r, c), range, bins));
    }
  }
}

NmiKernel::NmiKernel(std::size_t bins)
    : bins_(bins), joint_(bins * bins), first_(bins), second_(bins) {
  require_bins(bins);
}

double NmiKernel::operator()(const BinView& a, const BinView& b) {
  if (a.rows != b.rows || a.cols != b.cols) fail(ErrorCode::kSizeMismatch, "nmi: size mismatch");
  std::fill(first_.begin(), first_.end(), 0u);
  std::fill(second_.begin(), second_.end(), 0u);
  touched_.clear();
  for (std::size_t r = 0; r < a.rows; ++r) {
    const std::uint16_t* ra = a.row(r);
    const std::uint16_t* rb = b.row(r);
    for (std::size_t c = 0; c < a.cols; ++c) {
      const std::size_t i = ra[c], j = rb[c];
      if (joint_[i * bins_ + j]++ == 0) {
        touched_.push_back(std::uint32_t(std::min(i, j) * bins_ + std::max(i, j)));
      }
      ++first_[i];
      ++second_[j];
    }
  }
  const double total = double(a.size());
  // Dense histograms are cheaper to scan than to sort.
  if (touched_.size() * 8 >= joint_.size()) {
    const double out = nmi_of(joint_.data(), first_.data(), second_.data(), bins_, total);
    std::fill(joint_.begin(), joint_.end(), 0u);
    return out;
  }
  std::sort(touched_.begin(), touched_.end());
  touched_.erase(std::unique(touched_.begin(), touched_.end()), touched_.end());
  const double out = nmi_with(first_.data(), second_.data(), bins_, total, [&] {
    return mutual_information_sparse(joint_.data(), first_.data(), second_.data(), bins_, total, touched_);
  });
  for (std::uint32_t key : touched_) {
    const std::size_t i = key / bins_, j = key % bins_;
    joint_[i * bins_ + j] = 0;
    joint_[j * bins_ + i] = 0;
  }
  return out;
}

double nmi(const ImageView& a, const ImageView& b, std::size_t bins, IntensityRange range) {
  require_same_shape(a, b, "nmi: patches differ in size");
  BinnedImage ba(a, range, bins);
  BinnedImage bb(b, range, bins);
  NmiKernel kernel(bins);
  return kernel(ba.view(), bb.view());
}

std::optional<double> try_pearson(const ImageView& a, const ImageView& b) {
  require_same_shape(a, b, "pearson: patches differ in size");
  if (a.size() == 0) fail(ErrorCode::kEmptyInput, "pearson: empty patches");
  const double n = double(a.size());
  double sa = 0.0, sb = 0.0;
  for (std::size_t r = 0; r < a.rows; ++r) {
    for (std::size_t c = 0; c < a.cols; ++c) {
      sa += a(r, c);
      sb += b(r, c);
    }
  }
  const double ma = sa / n, mb = sb / n;
  double saa = 0.0, sbb = 0.0, sab = 0.0;
  for (std::size_t r = 0; r < a.rows; ++r) {
    for (std::size_t c = 0; c < a.cols; ++c) {
      const double da = a(r, c) - ma;
      const double db = b(r, c) - mb;
      saa += da * da;
      sbb += db * db;
      sab += da * db;
    }
  }
  if (saa == 0.0 || sbb == 0.0 || is_constant(a) || is_constant(b)) return std::nullopt;
  return std::clamp(sab / std::sqrt(saa * sbb), -1.0, 1.0);
}

double pearson(const ImageView& a, const ImageView& b) {
  const auto rho = try_pearson(a, b);
  if (!rho) fail(ErrorCode::kZeroVariance, "pearson: constant patch");
  return *rho;
}

double rbf(const ImageView& a, const ImageView& b, double sigma) {
  require_same_shape(a, b, "rbf: patches differ in size");
  if (!(sigma > 0.0)) fail(ErrorCode::kNonpositiveSigma, "rbf: sigma must be positive");
  double ss = 0.0;
  for (std::size_t r = 0; r < a.rows; ++r) {
    for (std::size_t c = 0; c < a.cols; ++c) {
      const double d = a(r, c) - b(r, c);
      ss += d * d;
    }
  }
  return std::exp(-ss / (2.0 * sigma * sigma));
}

void validate(const SimilarityMetric& m) {
  if (const auto* n = std::get_if<NmiMetric>(&m)) require_bins(n->bins);
  if (const auto* r = std::get_if<RbfMetric>(&m); r && !(r->sigma > 0.0)) {
    fail(ErrorCode::kNonpositiveSigma, "rbf sigma must be positive");
  }
}

SimilarityMetric parse_metric(std::string_view text) {
  const auto colon = text.find(':');
  const auto name = text.substr(0, colon);
  const auto param = colon == std::string_view::npos ? std::string_view{} : text.substr(colon + 1);
  SimilarityMetric m;
  if (name == "nmi") {
    NmiMetric n;
    if (!param.empty()) {
      auto [p, ec] = std::from_chars(param.data(), param.data() + param.size(), n.bins);
      if (ec != std::errc{} || p != param.data() + param.size()) {
        fail(ErrorCode::kInvalidArgument, "bad nmi bin count '" + std::string(param) + "'");
      }
    }
    m = n;
  } else if (name == "pearson" && param.empty()) {
    m = PearsonMetric{};
  } else if (name == "rbf" && !param.empty()) {
    std::string tmp(param);
    char* end = nullptr;
    const double sigma = std::strtod(tmp.c_str(), &end);
    if (end != tmp.c_str() + tmp.size()) {
      fail(ErrorCode::kInvalidArgument, "bad rbf sigma '" + tmp + "'");
    }
    m = RbfMetric{sigma};
  } else {
    fail(ErrorCode::kInvalidArgument, "unknown similarity metric '" + std::string(text) + "'");
  }
  validate(m);
  return m;
}

std::string to_string(const SimilarityMetric& m) {
  struct Visitor {
    std::string operator()(const NmiMetric& n) const { return "nmi:" + std::to_string(n.bins); }
    std::string operator()(const PearsonMetric&) const { return "pearson"; }
    std::string operator()(const RbfMetric& r) const {
      char buf[48];
      std::snprintf(buf, sizeof buf, "rbf:%.17g", r.sigma);
      return buf;
    }
  };
  return std::visit(Visitor{}, m);
}

double similarity(const ImageView& a, const ImageView& b, const SimilarityMetric& m,
                  IntensityRange range) {
  struct Visitor {
    const ImageView& a;
    const ImageView& b;
    IntensityRange range;
    double operator()(const NmiMetric& n) const { return nmi(a, b, n.bins, range); }
    double operator()(const PearsonMetric&) const { return pearson(a, b); }
    double operator()(const RbfMetric& r) const { return rbf(a, b, r.sigma); }
  };
  return std::visit(Visitor{a, b, range}, m);
}

// NMI and RBF already lie in [0, 1]; the clamp only bites for negative Pearson scores.
double weight_from_score(double score, const SimilarityMetric&) {
  return std::clamp(score, 0.0, 1.0);
}

}  // namespace qsadn

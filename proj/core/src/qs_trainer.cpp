#include "qsadn/qs_trainer.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <random>
#include <sstream>

#include "qsadn/numfmt.hpp"

namespace qsadn {
namespace {

// For every pixel of a rows x cols image, the flat indices of its k x k
// neighbourhood under replicate-border clamping.
std::vector<std::uint32_t> neighbourhood_table(std::size_t rows, std::size_t cols, std::size_t k) {
  const auto half = static_cast<std::ptrdiff_t>(k / 2);
  std::vector<std::uint32_t> table(rows * cols * k * k);
  std::size_t at = 0;
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < cols; ++c) {
      for (std::size_t i = 0; i < k; ++i) {
        const auto rr = std::clamp<std::ptrdiff_t>(std::ptrdiff_t(r + i) - half, 0,
                                                   std::ptrdiff_t(rows) - 1);
        for (std::size_t j = 0; j < k; ++j) {
          const auto cc = std::clamp<std::ptrdiff_t>(std::ptrdiff_t(c + j) - half, 0,
                                                     std::ptrdiff_t(cols) - 1);
          table[at++] = static_cast<std::uint32_t>(rr * std::ptrdiff_t(cols) + cc);
        }
      }
    }
  }
  return table;
}

void require_kernel_size(std::size_t k) {
  if (k == 0 || k % 2 == 0) fail(ErrorCode::kInvalidArgument, "kernel size must be odd and >= 1");
}

void require_fits(std::size_t k, std::size_t rows, std::size_t cols) {
  if (rows < k || cols < k) fail(ErrorCode::kImageTooSmall, "image smaller than the kernel");
}

struct PixelLayout {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<std::uint32_t> table;
};

PixelLayout layout_for(const WeightedPairSet& s, std::size_t k) {
  s.validate();
  require_kernel_size(k);
  const auto& first = s.pairs.front().ld;
  require_fits(k, first.rows(), first.cols());
  return PixelLayout{first.rows(), first.cols(), neighbourhood_table(first.rows(), first.cols(), k)};
}

double predict(const double* theta, std::size_t kk, const double* src, const std::uint32_t* nb) {
  double v = theta[kk];
  for (std::size_t t = 0; t < kk; ++t) v += theta[t] * src[nb[t]];
  return v;
}

// Weighted objective and (optionally) its gradient with respect to the coefficients,
// both normalised by sum w. Zero-weight pairs are skipped entirely.
double objective_and_gradient(const WeightedPairSet& s, const PixelLayout& layout,
                              std::span<const double> theta, double weight_sum,
                              std::vector<double>* grad) {
  const std::size_t kk = theta.size() - 1;
  const std::size_t npix = layout.rows * layout.cols;
  if (grad) std::fill(grad->begin(), grad->end(), 0.0);
  double obj = 0.0;
  std::vector<double> pair_grad(theta.size());
  for (const auto& pair : s.pairs) {
    if (pair.weight == 0.0) continue;
    const double* src = pair.ld.pixels().data();
    const double* dst = pair.nd.pixels().data();
    double sq = 0.0;
    std::fill(pair_grad.begin(), pair_grad.end(), 0.0);
    for (std::size_t p = 0; p < npix; ++p) {
      const std::uint32_t* nb = layout.table.data() + p * kk;
      const double res = predict(theta.data(), kk, src, nb) - dst[p];
      sq += res * res;
      if (grad) {
        for (std::size_t t = 0; t < kk; ++t) pair_grad[t] += res * src[nb[t]];
        pair_grad[kk] += res;
      }
    }
    obj += pair.weight * sq;
    if (grad) {
      for (std::size_t t = 0; t <= kk; ++t) (*grad)[t] += 2.0 * pair.weight * pair_grad[t];
    }
  }
  if (grad) {
    for (double& g : *grad) g /= weight_sum;
  }
  return obj / weight_sum;
}

}  // namespace

LinearDenoiser::LinearDenoiser(std::size_t k) : k_(k), coeffs_(k * k + 1, 0.0) {
  require_kernel_size(k);
}

LinearDenoiser::LinearDenoiser(std::size_t k, std::vector<double> coefficients)
    : k_(k), coeffs_(std::move(coefficients)) {
  require_kernel_size(k);
  if (coeffs_.size() != k * k + 1) {
    fail(ErrorCode::kSizeMismatch, "expected k*k+1 coefficients");
  }
}

LinearDenoiser LinearDenoiser::identity(std::size_t k) {
  LinearDenoiser d(k);
  d.coeffs_[(k / 2) * k + k / 2] = 1.0;
  return d;
}

Image2D LinearDenoiser::apply(const ImageView& img) const {
  require_fits(k_, img.rows, img.cols);
  const Image2D src = Image2D::from_view(img);
  const auto table = neighbourhood_table(img.rows, img.cols, k_);
  const std::size_t kk = k_ * k_;
  Image2D out(img.rows, img.cols);
  for (std::size_t p = 0; p < src.size(); ++p) {
    out.pixels()[p] = predict(coeffs_.data(), kk, src.pixels().data(), table.data() + p * kk);
  }
  return out;
}

void LinearDenoiser::write(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::trunc);
  if (!out) fail(ErrorCode::kIoError, "cannot create " + path.string());
  out << k_ << '\n';
  for (double c : coeffs_) out << format_general(c, 17) << '\n';
  if (!out) fail(ErrorCode::kIoError, "write failed for " + path.string());
}

LinearDenoiser LinearDenoiser::read(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::kFileNotFound, path.string());
  std::size_t k = 0;
  if (!(in >> k)) fail(ErrorCode::kMalformedHeader, "missing kernel size in " + path.string());
  std::vector<double> coeffs;
  double v = 0.0;
  while (in >> v) coeffs.push_back(v);
  if (!in.eof()) fail(ErrorCode::kMalformedHeader, "bad coefficient in " + path.string());
  return LinearDenoiser(k, std::move(coeffs));
}

Image2D denoise(const LinearDenoiser& d, const ImageView& img) { return d.apply(img); }

void WeightedPairSet::validate() const {
  if (pairs.empty()) fail(ErrorCode::kEmptySet, "no training pairs");
  const auto& ref = pairs.front().ld;
  for (const auto& p : pairs) {
    require_same_shape(ref, p.ld, "training patches differ in size");
    require_same_shape(ref, p.nd, "training patches differ in size");
    if (!(p.weight >= 0.0 && p.weight <= 1.0)) {
      fail(ErrorCode::kWeightOutOfRange, "pair weight outside [0, 1]");
    }
  }
}

double WeightedPairSet::weight_sum() const {
  double s = 0.0;
  for (const auto& p : pairs) s += p.weight;
  return s;
}

WeightedPairSet pairs_from_manifest(const PairManifest& manifest,
                                    std::span<const ImageVolume> volumes, bool normalize) {
  std::map<std::string, const ImageVolume*> by_id;
  for (const auto& v : volumes) by_id[v.id()] = &v;
  auto lookup = [&](const std::string& id) {
    auto it = by_id.find(id);
    if (it == by_id.end()) fail(ErrorCode::kFileNotFound, "manifest references unknown volume '" + id + "'");
    return it->second;
  };
  auto patch = [&](const PatchProvenance& prov) {
    const ImageVolume* v = lookup(prov.volume_id);
    Image2D px = extract_patch(*v, prov.slice, prov.row, prov.col, manifest.header.patch_size).pixels;
    if (normalize) {
      const auto r = v->range();
      for (double& x : px.pixels()) x = (x - r.lo) / r.span();
    }
    return px;
  };
  WeightedPairSet s;
  s.pairs.reserve(manifest.records.size());
  for (const auto& rec : manifest.records) {
    s.pairs.push_back(WeightedPair{patch(rec.ld), patch(rec.nd), rec.weight});
  }
  return s;
}

void TrainConfig::validate() const {
  if (!(learning_rate > 0.0)) fail(ErrorCode::kInvalidArgument, "learning rate must be positive");
  if (epochs < 1) fail(ErrorCode::kInvalidArgument, "epochs must be at least 1");
  if (!(init_jitter >= 0.0)) fail(ErrorCode::kInvalidArgument, "init jitter must be nonnegative");
}

double weighted_mse_objective(const LinearDenoiser& d, const WeightedPairSet& s) {
  const auto layout = layout_for(s, d.k());
  const double wsum = s.weight_sum();
  if (wsum == 0.0) fail(ErrorCode::kAllZeroWeights, "every pair has zero weight");
  return objective_and_gradient(s, layout, d.coefficients(), wsum, nullptr);
}

LinearDenoiser gd_train(const WeightedPairSet& s, std::size_t k, const TrainConfig& cfg,
                        std::vector<double>* trace) {
  cfg.validate();
  const auto layout = layout_for(s, k);
  const double wsum = s.weight_sum();
  if (wsum == 0.0) fail(ErrorCode::kAllZeroWeights, "every pair has zero weight");

  LinearDenoiser d = LinearDenoiser::identity(k);
  if (cfg.init_jitter > 0.0) {
    std::mt19937_64 rng(cfg.seed);
    std::uniform_real_distribution<double> jitter(-cfg.init_jitter, cfg.init_jitter);
    for (double& c : d.coefficients()) c += jitter(rng);
  }

  const double step = cfg.learning_rate / double(layout.rows * layout.cols);
  std::vector<double> grad(d.parameter_count());
  double initial = 0.0;
  if (trace) trace->clear();
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    const double obj = objective_and_gradient(s, layout, d.coefficients(), wsum, &grad);
    if (epoch == 0) initial = obj;
    if (!std::isfinite(obj) || obj > 10.0 * initial) {
      fail(ErrorCode::kDivergence, "objective grew from " + format_general(initial, 6) + " to " +
                                       format_general(obj, 6) + " at epoch " + std::to_string(epoch));
    }
    if (trace) trace->push_back(obj);
    auto theta = d.coefficients();
    for (std::size_t t = 0; t < theta.size(); ++t) theta[t] -= step * grad[t];
  }
  if (trace) trace->push_back(objective_and_gradient(s, layout, d.coefficients(), wsum, nullptr));
  return d;
}

LinearDenoiser closed_form_weighted_ls(const WeightedPairSet& s, std::size_t k) {
  const auto layout = layout_for(s, k);
  const std::size_t kk = k * k;
  const std::size_t n = kk + 1;
  const std::size_t npix = layout.rows * layout.cols;

  Eigen::MatrixXd ata = Eigen::MatrixXd::Zero(n, n);
  Eigen::VectorXd atb = Eigen::VectorXd::Zero(n);
  Eigen::VectorXd row(n);
  for (const auto& pair : s.pairs) {
    if (pair.weight == 0.0) continue;
    const double* src = pair.ld.pixels().data();
    const double* dst = pair.nd.pixels().data();
    for (std::size_t p = 0; p < npix; ++p) {
      const std::uint32_t* nb = layout.table.data() + p * kk;
      for (std::size_t t = 0; t < kk; ++t) row[Eigen::Index(t)] = src[nb[t]];
      row[Eigen::Index(kk)] = 1.0;
      ata.selfadjointView<Eigen::Lower>().rankUpdate(row, pair.weight);
      atb += pair.weight * dst[p] * row;
    }
  }
  if (s.weight_sum() == 0.0) fail(ErrorCode::kAllZeroWeights, "every pair has zero weight");
  const Eigen::MatrixXd normal = ata.selfadjointView<Eigen::Lower>();

  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(normal);
  qr.setThreshold(1e-12);
  if (qr.rank() < Eigen::Index(n)) {
    fail(ErrorCode::kRankDeficient, "neighbourhood design matrix is rank deficient (rank " +
                                        std::to_string(qr.rank()) + " of " + std::to_string(n) + ")");
  }
  const Eigen::VectorXd theta = qr.solve(atb);
  return LinearDenoiser(k, std::vector<double>(theta.data(), theta.data() + n));
}

}  // namespace qsadn

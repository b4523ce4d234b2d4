#include "qsadn/adn_losses.hpp"

#include <cmath>

namespace qsadn {
namespace {

void require_probability(double v, const char* name) {
  if (!(v > 0.0 && v < 1.0)) {
    fail(ErrorCode::kOutOfDomain, std::string(name) + " must lie strictly inside (0, 1)");
  }
}

}  // namespace

void DisentangleBundle::validate() const {
  for (const Image2D* img : {&y, &x_hat, &y_hat, &x_a_hat, &y_a_hat, &y_tilde}) {
    require_same_shape(x_a, *img, "bundle images differ in size");
  }
  if (x_a.empty()) fail(ErrorCode::kEmptyInput, "bundle images are empty");
}

double l1_mean(const ImageView& a, const ImageView& b) {
  require_same_shape(a, b, "l1_mean: images differ in size");
  if (a.size() == 0) fail(ErrorCode::kEmptyInput, "l1_mean: empty images");
  double s = 0.0;
  for (std::size_t r = 0; r < a.rows; ++r) {
    for (std::size_t c = 0; c < a.cols; ++c) s += std::abs(a(r, c) - b(r, c));
  }
  return s / double(a.size());
}

double adversarial_loss(const DiscriminatorOutputs& d, AdversarialForm form) {
  require_probability(d.d_i_y, "D_I(y)");
  require_probability(d.d_i_xhat, "D_I(x_hat)");
  require_probability(d.d_ia_xa, "D_Ia(x_a)");
  require_probability(d.d_ia_yahat, "D_Ia(y_a_hat)");
  auto fake = [form](double p) {
    return form == AdversarialForm::kLiteral ? 1.0 - std::log(p) : std::log(1.0 - p);
  };
  return std::log(d.d_i_y) + fake(d.d_i_xhat) + std::log(d.d_ia_xa) + fake(d.d_ia_yahat);
}

double reconstruction_loss(const DisentangleBundle& b) {
  b.validate();
  return l1_mean(b.x_a_hat, b.x_a) + l1_mean(b.y_hat, b.y);
}

double artifact_consistency_loss(const DisentangleBundle& b) {
  b.validate();
  double s = 0.0;
  for (std::size_t i = 0; i < b.x_a.size(); ++i) {
    const double removed = b.x_a.pixels()[i] - b.x_hat.pixels()[i];
    const double added = b.y_a_hat.pixels()[i] - b.y.pixels()[i];
    s += std::abs(removed - added);
  }
  return s / double(b.x_a.size());
}

double self_reduction_loss(const DisentangleBundle& b) {
  b.validate();
  return l1_mean(b.y_tilde, b.y);
}

LossReport total_loss(const DisentangleBundle& b, const DiscriminatorOutputs& d,
                      const LossWeights& lw, double w, AdversarialForm form) {
  if (!(w >= 0.0 && w <= 1.0)) fail(ErrorCode::kWeightOutOfRange, "pair weight outside [0, 1]");
  if (lw.lambda_rec < 0.0 || lw.lambda_art < 0.0 || lw.lambda_self < 0.0) {
    fail(ErrorCode::kInvalidArgument, "loss weights must be nonnegative");
  }
  LossReport r;
  r.l_adv = adversarial_loss(d, form);
  r.l_rec = reconstruction_loss(b);
  r.l_art = artifact_consistency_loss(b);
  r.l_self = self_reduction_loss(b);
  r.total = r.l_adv + w * (lw.lambda_rec * r.l_rec + lw.lambda_art * r.l_art +
                           lw.lambda_self * r.l_self);
  return r;
}

LossReport batch_loss(std::span<const WeightedSample> batch, const LossWeights& lw,
                      AdversarialForm form) {
  if (batch.empty()) fail(ErrorCode::kEmptyInput, "empty mini-batch");
  LossReport mean;
  for (const auto& s : batch) {
    const auto r = total_loss(*s.bundle, s.d, lw, s.weight, form);
    mean.l_adv += r.l_adv;
    mean.l_rec += r.l_rec;
    mean.l_art += r.l_art;
    mean.l_self += r.l_self;
    mean.total += r.total;
  }
  const double n = double(batch.size());
  mean.l_adv /= n;
  mean.l_rec /= n;
  mean.l_art /= n;
  mean.l_self /= n;
  mean.total /= n;
  return mean;
}

}  // namespace qsadn

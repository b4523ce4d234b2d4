#pragma once

#include <span>

#include "qsadn/image.hpp"

namespace qsadn {

/// The seven images of one artifact-disentanglement forward pass.
struct DisentangleBundle {
  Image2D x_a;      ///< artifact-affected input
  Image2D y;        ///< artifact-free input
  Image2D x_hat;    ///< artifact-reduced x_a
  Image2D y_hat;    ///< reconstruction of y
  Image2D x_a_hat;  ///< reconstruction of x_a
  Image2D y_a_hat;  ///< y with x_a's artifacts added
  Image2D y_tilde;  ///< y_a_hat with its artifacts removed again

  /// Throws SizeMismatch unless all seven images share one shape.
  void validate() const;
};

/// Discriminator probabilities, each strictly inside (0, 1).
struct DiscriminatorOutputs {
  double d_i_y = 0.5;       ///< D_I(y)
  double d_i_xhat = 0.5;    ///< D_I(x_hat)
  double d_ia_xa = 0.5;     ///< D_Ia(x_a)
  double d_ia_yahat = 0.5;  ///< D_Ia(y_a_hat)
};

struct LossWeights {
  double lambda_rec = 20.0;
  double lambda_art = 20.0;
  double lambda_self = 20.0;
};

/// kLiteral: log D(real) + (1 - log D(fake)), as written for ADN.
/// kStandard: log D(real) + log(1 - D(fake)).
enum class AdversarialForm { kLiteral, kStandard };

struct LossReport {
  double l_adv = 0.0;
  double l_rec = 0.0;
  double l_art = 0.0;
  double l_self = 0.0;
  double total = 0.0;
};

/// Mean absolute difference.
double l1_mean(const ImageView& a, const ImageView& b);

double adversarial_loss(const DiscriminatorOutputs& d,
                        AdversarialForm form = AdversarialForm::kLiteral);
double reconstruction_loss(const DisentangleBundle& b);
double artifact_consistency_loss(const DisentangleBundle& b);
double self_reduction_loss(const DisentangleBundle& b);

/// l_adv + w (lambda_rec l_rec + lambda_art l_art + lambda_self l_self), w in [0, 1].
LossReport total_loss(const DisentangleBundle& b, const DiscriminatorOutputs& d,
                      const LossWeights& lw, double w,
                      AdversarialForm form = AdversarialForm::kLiteral);

struct WeightedSample {
  const DisentangleBundle* bundle = nullptr;
  DiscriminatorOutputs d;
  double weight = 1.0;
};

/// Mini-batch expectation: each field is the equal-weight mean of the per-sample
/// reports, so `total` is the mean of l_adv_i + w_i * supervised_i.
LossReport batch_loss(std::span<const WeightedSample> batch, const LossWeights& lw,
                      AdversarialForm form = AdversarialForm::kLiteral);

}  // namespace qsadn

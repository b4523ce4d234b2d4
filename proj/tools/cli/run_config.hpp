#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "qsadn/adn_losses.hpp"
#include "qsadn/baselines.hpp"
#include "qsadn/imgio.hpp"
#include "qsadn/matcher.hpp"
#include "qsadn/qs_trainer.hpp"

namespace qsadn::cli {

/// Seven bundle images plus discriminator outputs and pair weight for `loss-eval`.
struct BundleSpec {
  std::filesystem::path x_a, y, x_hat, y_hat, x_a_hat, y_a_hat, y_tilde;
  DiscriminatorOutputs d;
  double weight = 1.0;

  bool complete() const;
};

/// Plain-text `key=value` run configuration. Blank lines and `#` comments are
/// ignored; unknown keys and invalid values raise ConfigError.
struct RunConfig {
  MatchConfig match;
  FreqFilterConfig freq;
  LossWeights loss;
  AdversarialForm adv_form = AdversarialForm::kLiteral;
  TrainConfig train;
  std::size_t kernel_size = 3;
  std::size_t hist_bins = 20;

  std::optional<std::filesystem::path> dataset;
  std::vector<std::filesystem::path> ld_volumes;
  std::vector<std::filesystem::path> nd_volumes;
  std::optional<std::filesystem::path> manifest;
  std::optional<std::filesystem::path> theta_out;
  BundleSpec bundle;

  static RunConfig parse(std::string_view text, const std::filesystem::path& base_dir = {});
  static RunConfig read(const std::filesystem::path& path);

  void validate() const;
  /// Volumes from `dataset`, or else from the ld_volumes / nd_volumes lists.
  std::vector<ImageVolume> load_volumes(DoseLabel dose) const;
};

}  // namespace qsadn::cli

#include "commands.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <chrono>
#include <optional>
#include <ostream>

#include "qsadn/adn_losses.hpp"
#include "qsadn/baselines.hpp"
#include "qsadn/imgio.hpp"
#include "qsadn/matcher.hpp"
#include "qsadn/metrics.hpp"
#include "qsadn/numfmt.hpp"
#include "qsadn/qs_trainer.hpp"
#include "run_config.hpp"

namespace qsadn::cli {
namespace fs = std::filesystem;

int exit_code_for(ErrorCode code) {
  switch (code) {
    case ErrorCode::kConfigError:
    case ErrorCode::kInvalidArgument:
    case ErrorCode::kNonpositiveSigma:
    case ErrorCode::kNonpositiveMax:
    case ErrorCode::kNonpositiveRange:
    case ErrorCode::kWeightOutOfRange:
    case ErrorCode::kOutOfDomain:
    case ErrorCode::kDegenerateRange:
      return kExitConfig;
    case ErrorCode::kFileNotFound:
    case ErrorCode::kIoError:
    case ErrorCode::kMalformedHeader:
    case ErrorCode::kTruncatedData:
    case ErrorCode::kMalformedManifest:
      return kExitIo;
    case ErrorCode::kEmptyInput:
    case ErrorCode::kEmptySet:
    case ErrorCode::kEmptyHistogram:
    case ErrorCode::kEmptyTarget:
    case ErrorCode::kAllZeroWeights:
      return kExitEmpty;
    case ErrorCode::kSizeMismatch:
    case ErrorCode::kDimensionMismatch:
    case ErrorCode::kPatchTooLarge:
    case ErrorCode::kOutOfBounds:
    case ErrorCode::kImageTooSmall:
      return kExitDimension;
    case ErrorCode::kZeroVariance:
    case ErrorCode::kDivergence:
    case ErrorCode::kRankDeficient:
      return kExitFailure;
  }
  return kExitFailure;
}

namespace {

struct GlobalOptions {
  std::string config_path;
  std::optional<std::size_t> workers;
  std::optional<std::uint64_t> seed;
};

RunConfig load_config(const GlobalOptions& g) {
  RunConfig cfg = g.config_path.empty() ? RunConfig{} : RunConfig::read(g.config_path);
  if (g.workers) cfg.match.workers = *g.workers;
  if (g.seed) cfg.train.seed = *g.seed;
  return cfg;
}

fs::path require_path(const std::optional<fs::path>& from_config, const std::string& from_flag,
                      const char* what) {
  if (!from_flag.empty()) return from_flag;
  if (from_config) return *from_config;
  fail(ErrorCode::kConfigError, std::string("no ") + what + " path given");
}

int cmd_match(const RunConfig& cfg, const std::string& out_flag, std::ostream& out,
              std::ostream& err) {
  const auto manifest_path = require_path(cfg.manifest, out_flag, "manifest");
  const auto ld = cfg.load_volumes(DoseLabel::kLD);
  const auto nd = cfg.load_volumes(DoseLabel::kND);
  const auto start = std::chrono::steady_clock::now();
  const auto manifest = build_manifest(ld, nd, cfg.match);
  const std::chrono::duration<double> elapsed = std::chrono::steady_clock::now() - start;
  write_manifest(manifest, manifest_path);
  if (manifest.empty()) {
    out << "EMPTY records=0 mean_weight=0\n";
  } else {
    out << "records=" << manifest.records.size()
        << " mean_weight=" << format_general(manifest.mean_weight(), 9) << '\n';
  }
  err << "wall_time_s=" << format_general(elapsed.count(), 4) << '\n';
  return kExitOk;
}

int cmd_hist(const RunConfig& cfg, const std::string& manifest_flag, const std::string& paired_ld,
             const std::string& paired_nd, std::optional<std::size_t> bins_flag,
             std::ostream& out) {
  const std::size_t bins = bins_flag.value_or(cfg.hist_bins);
  std::vector<double> scores;
  if (!paired_ld.empty() || !paired_nd.empty()) {
    if (paired_ld.empty() || paired_nd.empty()) {
      fail(ErrorCode::kConfigError, "--paired-ld and --paired-nd go together");
    }
    scores = paired_scores(load_volume(paired_ld), load_volume(paired_nd), cfg.match.patch_size,
                           cfg.match.effective_stride(), cfg.match.metric);
  } else {
    const auto manifest = read_manifest(require_path(cfg.manifest, manifest_flag, "manifest"));
    for (const auto& r : manifest.records) scores.push_back(r.score);
  }
  const auto h = nmi_histogram(scores, bins);
  for (std::size_t i = 0; i < h.bins(); ++i) {
    out << format_general(h.bin_lo(i), 6) << '\t' << format_general(h.bin_hi(i), 6) << '\t'
        << h.counts[i] << '\n';
  }
  out << "mean=" << format_general(h.mean, 6) << '\n';
  out << "mode_bin=" << format_general(h.mode_center(), 6) << '\n';
  return kExitOk;
}

int cmd_eval(const std::string& x_path, const std::string& y_path, std::optional<double> max_flag,
             bool windowed, std::ostream& out) {
  IntensityRange rx, ry;
  const Image2D x = load_image(x_path, &rx);
  const Image2D y = load_image(y_path, &ry);
  require_same_shape(x, y, "eval: images differ in size");
  // Taking the larger declared range keeps the output symmetric in (x, y).
  const double max_val = max_flag.value_or(std::max(rx.hi, ry.hi));
  const SsimParams params{0.01, 0.03, std::max(rx.span(), ry.span())};
  const auto p = psnr(x, y, max_val);
  const double s = windowed ? ssim_windowed(x, y, params) : ssim(x, y, params);
  out << "psnr=" << (p.is_infinite() ? std::string("inf") : format_general(p.value(), 6)) << '\n';
  out << "ssim=" << format_fixed(s, 6) << '\n';
  return kExitOk;
}

int cmd_denoise_baseline(const RunConfig& cfg, const std::string& method,
                         std::optional<double> sigma, const std::string& in_path,
                         const std::string& out_path, std::ostream& out) {
  IntensityRange range;
  const Image2D img = load_image(in_path, &range);
  Image2D result;
  if (method == "median") {
    result = median_filter_3x3(img);
  } else if (method == "gauss") {
    FreqFilterConfig fc = cfg.freq;
    if (sigma) fc.sigma = *sigma;
    result = gaussian_lowpass_freq(img, fc);
  } else {
    fail(ErrorCode::kConfigError, "unknown method '" + method + "'");
  }
  save_image(result, range, out_path);
  out << "wrote " << out_path << '\n';
  return kExitOk;
}

int cmd_loss_eval(const RunConfig& cfg, std::ostream& out) {
  const auto& b = cfg.bundle;
  if (!b.complete()) fail(ErrorCode::kConfigError, "loss-eval needs all seven bundle image keys");
  DisentangleBundle bundle{load_image(b.x_a),     load_image(b.y),       load_image(b.x_hat),
                           load_image(b.y_hat),   load_image(b.x_a_hat), load_image(b.y_a_hat),
                           load_image(b.y_tilde)};
  const auto r = total_loss(bundle, b.d, cfg.loss, b.weight, cfg.adv_form);
  out << "l_adv=" << format_general(r.l_adv, 17) << '\n'
      << "l_rec=" << format_general(r.l_rec, 17) << '\n'
      << "l_art=" << format_general(r.l_art, 17) << '\n'
      << "l_self=" << format_general(r.l_self, 17) << '\n'
      << "total=" << format_general(r.total, 17) << '\n';
  return kExitOk;
}

int cmd_train_toy(const RunConfig& cfg, const std::string& manifest_flag,
                  const std::string& out_flag, const std::string& solver, std::ostream& out) {
  const auto manifest = read_manifest(require_path(cfg.manifest, manifest_flag, "manifest"));
  const auto theta_path = require_path(cfg.theta_out, out_flag, "theta output");
  auto volumes = cfg.load_volumes(DoseLabel::kLD);
  for (auto& v : cfg.load_volumes(DoseLabel::kND)) volumes.push_back(std::move(v));
  const auto pairs = pairs_from_manifest(manifest, volumes);
  pairs.validate();

  LinearDenoiser d;
  if (solver == "gd") {
    d = gd_train(pairs, cfg.kernel_size, cfg.train);
  } else if (solver == "closed") {
    d = closed_form_weighted_ls(pairs, cfg.kernel_size);
  } else {
    fail(ErrorCode::kConfigError, "unknown solver '" + solver + "'");
  }
  d.write(theta_path);
  out << "pairs=" << pairs.pairs.size()
      << " objective=" << format_general(weighted_mse_objective(d, pairs), 9) << '\n';
  return kExitOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Quasi-supervised LDCT pairing and denoising toolkit", "qsadn"};
  app.require_subcommand(1);
  GlobalOptions g;
  app.add_option("--config", g.config_path, "key=value run configuration");
  app.add_option("--workers", g.workers, "matcher thread count (results do not depend on it)");
  app.add_option("--seed", g.seed, "seed for trainer initialisation");

  std::string out_path, manifest_path, paired_ld, paired_nd, method, solver = "gd";
  std::string in_image, out_image, x_path, y_path;
  std::optional<std::size_t> bins;
  std::optional<double> max_val, sigma;
  bool windowed = false;

  auto* match = app.add_subcommand("match", "pair LD and ND patches and write a manifest");
  match->add_option("--out", out_path, "manifest output path");

  auto* hist = app.add_subcommand("hist", "histogram of similarity scores");
  hist->add_option("--manifest", manifest_path, "manifest to read scores from");
  hist->add_option("--paired-ld", paired_ld, "LD volume of a truly paired set");
  hist->add_option("--paired-nd", paired_nd, "ND volume of a truly paired set");
  hist->add_option("--bins", bins, "histogram bin count");

  auto* eval = app.add_subcommand("eval", "PSNR and SSIM between two images");
  eval->add_option("x", x_path)->required();
  eval->add_option("y", y_path)->required();
  eval->add_option("--max", max_val, "PSNR peak value (default: declared intensity max)");
  eval->add_flag("--windowed", windowed, "8x8 sliding-window SSIM instead of global");

  auto* baseline = app.add_subcommand("denoise-baseline", "median or Gaussian low-pass filtering");
  baseline->add_option("--method", method)->required()->check(CLI::IsMember({"median", "gauss"}));
  baseline->add_option("--sigma", sigma, "Gaussian sigma in spectrum index units");
  baseline->add_option("input", in_image)->required();
  baseline->add_option("output", out_image)->required();

  app.add_subcommand("loss-eval", "evaluate the weighted ADN losses of one bundle");

  auto* train = app.add_subcommand("train-toy", "fit a linear denoiser to manifest pairs");
  train->add_option("--manifest", manifest_path, "manifest to train on");
  train->add_option("--out", out_path, "coefficient output path");
  train->add_option("--solver", solver, "gd or closed")->check(CLI::IsMember({"gd", "closed"}));

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    app.exit(e, out, err);
    return kExitConfig;
  }

  try {
    const RunConfig cfg = load_config(g);
    if (*match) return cmd_match(cfg, out_path, out, err);
    if (*hist) return cmd_hist(cfg, manifest_path, paired_ld, paired_nd, bins, out);
    if (*eval) return cmd_eval(x_path, y_path, max_val, windowed, out);
    if (*baseline) return cmd_denoise_baseline(cfg, method, sigma, in_image, out_image, out);
    if (app.got_subcommand("loss-eval")) return cmd_loss_eval(cfg, out);
    if (*train) return cmd_train_toy(cfg, manifest_path, out_path, solver, out);
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return exit_code_for(e.code());
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitFailure;
  }
  return kExitFailure;
}

}  // namespace qsadn::cli

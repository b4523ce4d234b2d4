#include "run_config.hpp"

#include <charconv>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <iterator>
#include <map>
#include <set>
#include <sstream>

namespace qsadn::cli {
namespace fs = std::filesystem;

namespace {

std::string_view trim(std::string_view s) {
  const auto* ws = " \t\r\n";
  const auto b = s.find_first_not_of(ws);
  if (b == std::string_view::npos) return {};
  return s.substr(b, s.find_last_not_of(ws) - b + 1);
}

[[noreturn]] void bad_value(const std::string& key, std::string_view value) {
  fail(ErrorCode::kConfigError, "invalid value '" + std::string(value) + "' for key '" + key + "'");
}

double to_double(const std::string& key, std::string_view v) {
  std::string tmp(v);
  char* end = nullptr;
  const double d = std::strtod(tmp.c_str(), &end);
  if (tmp.empty() || end != tmp.c_str() + tmp.size()) bad_value(key, v);
  return d;
}

template <typename T>
T to_unsigned(const std::string& key, std::string_view v) {
  T out{};
  auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (v.empty() || ec != std::errc{} || p != v.data() + v.size()) bad_value(key, v);
  return out;
}

bool to_bool(const std::string& key, std::string_view v) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  bad_value(key, v);
}

fs::path resolve(const fs::path& base, std::string_view v) {
  fs::path p{std::string(v)};
  return p.is_relative() && !base.empty() ? base / p : p;
}

std::vector<fs::path> path_list(const fs::path& base, std::string_view v) {
  std::vector<fs::path> out;
  while (!v.empty()) {
    const auto comma = v.find(',');
    const auto item = trim(v.substr(0, comma));
    if (!item.empty()) out.push_back(resolve(base, item));
    if (comma == std::string_view::npos) break;
    v.remove_prefix(comma + 1);
  }
  return out;
}

}  // namespace

bool BundleSpec::complete() const {
  for (const auto* p : {&x_a, &y, &x_hat, &y_hat, &x_a_hat, &y_a_hat, &y_tilde}) {
    if (p->empty()) return false;
  }
  return true;
}

RunConfig RunConfig::parse(std::string_view text, const fs::path& base_dir) {
  RunConfig cfg;
  using Setter = std::function<void(const std::string&, std::string_view)>;
  const fs::path& base = base_dir;
  const std::map<std::string, Setter> setters{
      {"patch_size", [&](auto& k, auto v) { cfg.match.patch_size = to_unsigned<std::size_t>(k, v); }},
      {"stride", [&](auto& k, auto v) { cfg.match.stride = to_unsigned<std::size_t>(k, v); }},
      {"metric",
       [&](auto& k, auto v) {
         try {
           cfg.match.metric = parse_metric(v);
         } catch (const Error&) {
           bad_value(k, v);
         }
       }},
      {"threshold", [&](auto& k, auto v) { cfg.match.threshold = to_double(k, v); }},
      {"top_k", [&](auto& k, auto v) { cfg.match.top_k = to_unsigned<std::size_t>(k, v); }},
      {"slice_match", [&](auto& k, auto v) { cfg.match.slice_match_enabled = to_bool(k, v); }},
      {"workers", [&](auto& k, auto v) { cfg.match.workers = to_unsigned<std::size_t>(k, v); }},
      {"seed", [&](auto& k, auto v) { cfg.train.seed = to_unsigned<std::uint64_t>(k, v); }},
      {"dataset", [&](auto&, auto v) { cfg.dataset = resolve(base, v); }},
      {"ld_volumes", [&](auto&, auto v) { cfg.ld_volumes = path_list(base, v); }},
      {"nd_volumes", [&](auto&, auto v) { cfg.nd_volumes = path_list(base, v); }},
      {"manifest", [&](auto&, auto v) { cfg.manifest = resolve(base, v); }},
      {"theta_out", [&](auto&, auto v) { cfg.theta_out = resolve(base, v); }},
      {"hist_bins", [&](auto& k, auto v) { cfg.hist_bins = to_unsigned<std::size_t>(k, v); }},
      {"gauss_sigma", [&](auto& k, auto v) { cfg.freq.sigma = to_double(k, v); }},
      {"lambda",
       [&](auto& k, auto v) {
         const double l = to_double(k, v);
         cfg.loss = LossWeights{l, l, l};
       }},
      {"lambda_rec", [&](auto& k, auto v) { cfg.loss.lambda_rec = to_double(k, v); }},
      {"lambda_art", [&](auto& k, auto v) { cfg.loss.lambda_art = to_double(k, v); }},
      {"lambda_self", [&](auto& k, auto v) { cfg.loss.lambda_self = to_double(k, v); }},
      {"adv_form",
       [&](auto& k, auto v) {
         if (v == "literal") {
           cfg.adv_form = AdversarialForm::kLiteral;
         } else if (v == "standard") {
           cfg.adv_form = AdversarialForm::kStandard;
         } else {
           bad_value(k, v);
         }
       }},
      {"learning_rate", [&](auto& k, auto v) { cfg.train.learning_rate = to_double(k, v); }},
      {"epochs", [&](auto& k, auto v) { cfg.train.epochs = to_unsigned<std::size_t>(k, v); }},
      {"init_jitter", [&](auto& k, auto v) { cfg.train.init_jitter = to_double(k, v); }},
      {"kernel_size", [&](auto& k, auto v) { cfg.kernel_size = to_unsigned<std::size_t>(k, v); }},
      {"x_a", [&](auto&, auto v) { cfg.bundle.x_a = resolve(base, v); }},
      {"y", [&](auto&, auto v) { cfg.bundle.y = resolve(base, v); }},
      {"x_hat", [&](auto&, auto v) { cfg.bundle.x_hat = resolve(base, v); }},
      {"y_hat", [&](auto&, auto v) { cfg.bundle.y_hat = resolve(base, v); }},
      {"x_a_hat", [&](auto&, auto v) { cfg.bundle.x_a_hat = resolve(base, v); }},
      {"y_a_hat", [&](auto&, auto v) { cfg.bundle.y_a_hat = resolve(base, v); }},
      {"y_tilde", [&](auto&, auto v) { cfg.bundle.y_tilde = resolve(base, v); }},
      {"d_i_y", [&](auto& k, auto v) { cfg.bundle.d.d_i_y = to_double(k, v); }},
      {"d_i_xhat", [&](auto& k, auto v) { cfg.bundle.d.d_i_xhat = to_double(k, v); }},
      {"d_ia_xa", [&](auto& k, auto v) { cfg.bundle.d.d_ia_xa = to_double(k, v); }},
      {"d_ia_yahat", [&](auto& k, auto v) { cfg.bundle.d.d_ia_yahat = to_double(k, v); }},
      {"w", [&](auto& k, auto v) { cfg.bundle.weight = to_double(k, v); }},
  };

  std::set<std::string> seen;
  std::istringstream lines{std::string(text)};
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(lines, line)) {
    ++lineno;
    const auto t = trim(line);
    if (t.empty() || t.front() == '#') continue;
    const auto eq = t.find('=');
    if (eq == std::string_view::npos) {
      fail(ErrorCode::kConfigError, "line " + std::to_string(lineno) + ": expected key=value");
    }
    const std::string key(trim(t.substr(0, eq)));
    const auto value = trim(t.substr(eq + 1));
    const auto it = setters.find(key);
    if (it == setters.end()) fail(ErrorCode::kConfigError, "unknown key '" + key + "'");
    if (!seen.insert(key).second) fail(ErrorCode::kConfigError, "duplicate key '" + key + "'");
    it->second(key, value);
  }
  cfg.validate();
  return cfg;
}

RunConfig RunConfig::read(const fs::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::kFileNotFound, path.string());
  const std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return parse(text, path.parent_path());
}

void RunConfig::validate() const {
  try {
    match.validate();
    train.validate();
    if (!(freq.sigma > 0.0)) fail(ErrorCode::kConfigError, "gauss_sigma must be positive");
    if (loss.lambda_rec < 0.0 || loss.lambda_art < 0.0 || loss.lambda_self < 0.0) {
      fail(ErrorCode::kConfigError, "loss weights must be nonnegative");
    }
    if (kernel_size == 0 || kernel_size % 2 == 0) {
      fail(ErrorCode::kConfigError, "kernel_size must be odd and positive");
    }
    if (hist_bins == 0) fail(ErrorCode::kConfigError, "hist_bins must be positive");
    if (!(bundle.weight >= 0.0 && bundle.weight <= 1.0)) {
      fail(ErrorCode::kConfigError, "w must lie in [0, 1]");
    }
  } catch (const Error& e) {
    if (e.code() == ErrorCode::kConfigError) throw;
    fail(ErrorCode::kConfigError, e.what());
  }
}

std::vector<ImageVolume> RunConfig::load_volumes(DoseLabel dose) const {
  if (dataset) return DatasetManifest::read(*dataset).load(dose);
  std::vector<ImageVolume> out;
  for (const auto& p : dose == DoseLabel::kLD ? ld_volumes : nd_volumes) out.push_back(load_volume(p));
  return out;
}

}  // namespace qsadn::cli

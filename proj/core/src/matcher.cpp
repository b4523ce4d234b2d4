#include "qsadn/matcher.hpp"

#include <algorithm>
#include <atomic>
#include <exception>
#include <fstream>
#include <functional>
#include <istream>
#include <map>
#include <mutex>
#include <ostream>
#include <set>
#include <sstream>
#include <thread>

#include "qsadn/numfmt.hpp"

namespace qsadn {
namespace {

struct SliceData {
  ImageView pixels;
  std::optional<BinnedImage> binned;
};

SliceData prepare(const Image2D& s, const SimilarityMetric& m, IntensityRange range) {
  SliceData d{s.view(), std::nullopt};
  if (const auto* n = std::get_if<NmiMetric>(&m)) d.binned.emplace(s.view(), range, n->bins);
  return d;
}

// Scores two equally sized windows. Holds per-thread scratch for NMI.
class WindowScorer {
 public:
  explicit WindowScorer(const SimilarityMetric& m) : metric_(m) {
    if (const auto* n = std::get_if<NmiMetric>(&m)) kernel_.emplace(n->bins);
  }

  std::optional<double> operator()(const SliceData& a, std::size_t ar, std::size_t ac,
                                   const SliceData& b, std::size_t br, std::size_t bc,
                                   std::size_t h, std::size_t w) {
    if (kernel_) {
      return (*kernel_)(a.binned->view().window(ar, ac, h, w), b.binned->view().window(br, bc, h, w));
    }
    const auto va = a.pixels.window(ar, ac, h, w);
    const auto vb = b.pixels.window(br, bc, h, w);
    if (std::holds_alternative<PearsonMetric>(metric_)) return try_pearson(va, vb);
    return rbf(va, vb, std::get<RbfMetric>(metric_).sigma);
  }

 private:
  SimilarityMetric metric_;
  std::optional<NmiKernel> kernel_;
};

// Runs fn(i) for i in [0, n) on `workers` threads. Each thread owns one `State`
// built by make_state(); the first exception is rethrown after all threads join.
template <typename MakeState, typename Fn>
void parallel_for(std::size_t n, std::size_t workers, MakeState make_state, Fn fn) {
  workers = std::max<std::size_t>(1, std::min(workers, n));
  if (workers == 1) {
    auto state = make_state();
    for (std::size_t i = 0; i < n; ++i) fn(state, i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mu;
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (std::size_t t = 0; t < workers; ++t) {
    pool.emplace_back([&] {
      try {
        auto state = make_state();
        for (std::size_t i = next++; i < n; i = next++) fn(state, i);
      } catch (...) {
        std::lock_guard lock(error_mu);
        if (!error) error = std::current_exception();
        next = n;
      }
    });
  }
  for (auto& th : pool) th.join();
  if (error) std::rethrow_exception(error);
}

struct Target {
  const ImageVolume* vol = nullptr;
  std::size_t slice = 0;
  const SliceData* data = nullptr;
};

struct Candidate {
  double score = 0.0;
  std::size_t target = 0;
  std::size_t row = 0;
  std::size_t col = 0;
};

// Keeps the k best candidates seen so far. Candidates arrive in search order, so a
// later candidate only displaces an earlier one with a strictly higher score.
class TopK {
 public:
  explicit TopK(std::size_t k) : k_(k) { best_.reserve(k + 1); }

  void offer(const Candidate& c) {
    if (best_.size() == k_ && !(c.score > best_.back().score)) return;
    auto at = std::find_if(best_.begin(), best_.end(),
                           [&](const Candidate& b) { return c.score > b.score; });
    best_.insert(at, c);
    if (best_.size() > k_) best_.pop_back();
  }

  const std::vector<Candidate>& best() const { return best_; }

 private:
  std::size_t k_;
  std::vector<Candidate> best_;
};

struct LdJob {
  const ImageVolume* vol = nullptr;
  std::size_t slice = 0;
  const SliceData* data = nullptr;
  TilePosition pos;
  const std::vector<Target>* targets = nullptr;
};

std::vector<PatchMatch> search_one(WindowScorer& scorer, const LdJob& job, const MatchConfig& cfg) {
  const std::size_t p = cfg.patch_size;
  TopK top(cfg.top_k);
  for (std::size_t t = 0; t < job.targets->size(); ++t) {
    const Target& target = (*job.targets)[t];
    const auto& nd = *target.data;
    for (std::size_t r = 0; r + p <= nd.pixels.rows; ++r) {
      for (std::size_t c = 0; c + p <= nd.pixels.cols; ++c) {
        const auto s = scorer(*job.data, job.pos.row, job.pos.col, nd, r, c, p, p);
        if (s) top.offer(Candidate{*s, t, r, c});
      }
    }
  }
  std::vector<PatchMatch> out;
  std::size_t rank = 0;
  for (const auto& c : top.best()) {
    const Target& target = (*job.targets)[c.target];
    PatchMatch m;
    m.ld = PatchProvenance{job.vol->id(), job.slice, job.pos.row, job.pos.col};
    m.nd = PatchProvenance{target.vol->id(), target.slice, c.row, c.col};
    m.patch_size = p;
    m.rank = rank++;
    m.score = c.score;
    m.weight = weight_from_score(c.score, cfg.metric);
    if (m.weight >= cfg.threshold) out.push_back(std::move(m));
  }
  return out;
}

std::vector<PatchMatch> run_jobs(const std::vector<LdJob>& jobs, const MatchConfig& cfg) {
  std::vector<std::vector<PatchMatch>> per_job(jobs.size());
  parallel_for(
      jobs.size(), cfg.effective_workers(), [&] { return WindowScorer(cfg.metric); },
      [&](WindowScorer& scorer, std::size_t i) { per_job[i] = search_one(scorer, jobs[i], cfg); });
  std::vector<PatchMatch> out;
  for (auto& v : per_job) {
    for (auto& m : v) out.push_back(std::move(m));
  }
  return out;
}

void require_dims(const ImageVolume& ref, const ImageVolume& v) {
  if (ref.width() != v.width() || ref.height() != v.height()) {
    fail(ErrorCode::kDimensionMismatch, "volume '" + v.id() + "' is " + std::to_string(v.height()) +
                                            "x" + std::to_string(v.width()) + ", expected " +
                                            std::to_string(ref.height()) + "x" +
                                            std::to_string(ref.width()));
  }
}

std::vector<const ImageVolume*> sorted_by_id(std::span<const ImageVolume> set) {
  std::vector<const ImageVolume*> out;
  for (const auto& v : set) out.push_back(&v);
  std::sort(out.begin(), out.end(), [](auto* a, auto* b) { return a->id() < b->id(); });
  for (std::size_t i = 1; i < out.size(); ++i) {
    if (out[i]->id() == out[i - 1]->id()) {
      fail(ErrorCode::kInvalidArgument, "duplicate volume id '" + out[i]->id() + "'");
    }
  }
  return out;
}

std::string fingerprint(const ImageVolume& v) {
  return v.id() + ":" + std::to_string(v.slice_count()) + "x" + std::to_string(v.height()) + "x" +
         std::to_string(v.width());
}

}  // namespace

std::size_t MatchConfig::effective_workers() const {
  if (workers > 0) return workers;
  return std::max(1u, std::thread::hardware_concurrency());
}

void MatchConfig::validate() const {
  if (patch_size < 2) fail(ErrorCode::kInvalidArgument, "patch size must be at least 2");
  if (stride && *stride == 0) fail(ErrorCode::kInvalidArgument, "stride must be at least 1");
  if (!(threshold >= 0.0 && threshold <= 1.0)) {
    fail(ErrorCode::kInvalidArgument, "threshold must lie in [0, 1]");
  }
  if (top_k < 1) fail(ErrorCode::kInvalidArgument, "top_k must be at least 1");
  qsadn::validate(metric);
}

double PairManifest::mean_weight() const {
  if (records.empty()) return 0.0;
  double s = 0.0;
  for (const auto& r : records) s += r.weight;
  return s / double(records.size());
}

IntensityRange shared_range(std::span<const ImageVolume> a, std::span<const ImageVolume> b) {
  if (a.empty() && b.empty()) fail(ErrorCode::kEmptyInput, "no volumes to take a range from");
  IntensityRange r{std::numeric_limits<double>::infinity(), -std::numeric_limits<double>::infinity()};
  for (auto set : {a, b}) {
    for (const auto& v : set) {
      r.lo = std::min(r.lo, v.range().lo);
      r.hi = std::max(r.hi, v.range().hi);
    }
  }
  return r;
}

std::vector<SliceMatch> match_slices(const ImageVolume& ld, std::span<const ImageVolume> nd_set,
                                     const SimilarityMetric& metric, std::size_t workers) {
  if (nd_set.empty()) fail(ErrorCode::kEmptyTarget, "no ND volumes to match against");
  validate(metric);
  for (const auto& nd : nd_set) require_dims(ld, nd);
  const auto nds = sorted_by_id(nd_set);
  const IntensityRange range = shared_range(std::span(&ld, 1), nd_set);

  std::vector<SliceData> ld_data;
  for (const auto& s : ld.slices()) ld_data.push_back(prepare(s, metric, range));
  std::vector<SliceData> nd_data;
  std::vector<std::pair<const ImageVolume*, std::size_t>> nd_index;
  for (const auto* v : nds) {
    for (std::size_t k = 0; k < v->slice_count(); ++k) {
      nd_data.push_back(prepare(v->slice(k), metric, range));
      nd_index.emplace_back(v, k);
    }
  }

  const std::size_t h = ld.height(), w = ld.width();
  std::vector<SliceMatch> out(ld.slice_count());
  parallel_for(
      ld.slice_count(), workers == 0 ? MatchConfig{}.effective_workers() : workers,
      [&] { return WindowScorer(metric); },
      [&](WindowScorer& scorer, std::size_t i) {
        std::optional<std::size_t> best;
        double best_score = 0.0;
        for (std::size_t j = 0; j < nd_data.size(); ++j) {
          const auto s = scorer(ld_data[i], 0, 0, nd_data[j], 0, 0, h, w);
          if (s && (!best || *s > best_score)) {
            best = j;
            best_score = *s;
          }
        }
        // Every candidate unscorable (constant slices under Pearson): fall back to
        // the first ND slice in tie-break order with a zero score.
        const std::size_t j = best.value_or(0);
        out[i] = SliceMatch{ld.id(), i, nd_index[j].first->id(), nd_index[j].second,
                            best ? best_score : 0.0};
      });
  return out;
}

std::vector<PatchMatch> match_patches(const ImageVolume& ld, std::size_t ld_slice,
                                      const ImageVolume& nd, std::size_t nd_slice,
                                      const MatchConfig& cfg, std::optional<IntensityRange> range) {
  cfg.validate();
  require_dims(ld, nd);
  const auto& ls = ld.slice(ld_slice);
  const auto& ns = nd.slice(nd_slice);
  const auto positions = tile_positions(ls.rows(), ls.cols(), cfg.patch_size, cfg.effective_stride());
  const IntensityRange r = range ? *range : IntensityRange{std::min(ld.range().lo, nd.range().lo),
                                                           std::max(ld.range().hi, nd.range().hi)};
  const SliceData ld_data = prepare(ls, cfg.metric, r);
  const SliceData nd_data = prepare(ns, cfg.metric, r);
  const std::vector<Target> targets{Target{&nd, nd_slice, &nd_data}};

  std::vector<LdJob> jobs;
  for (const auto& pos : positions) jobs.push_back(LdJob{&ld, ld_slice, &ld_data, pos, &targets});
  return run_jobs(jobs, cfg);
}

PairManifest build_manifest(std::span<const ImageVolume> ld_set,
                            std::span<const ImageVolume> nd_set, const MatchConfig& cfg) {
  cfg.validate();
  if (ld_set.empty()) fail(ErrorCode::kEmptyInput, "no LD volumes");
  if (nd_set.empty()) fail(ErrorCode::kEmptyTarget, "no ND volumes");
  const ImageVolume& ref = ld_set.front();
  for (const auto& v : ld_set) require_dims(ref, v);
  for (const auto& v : nd_set) require_dims(ref, v);
  // Fails early with PatchTooLarge when the patch does not fit.
  const auto positions =
      tile_positions(ref.height(), ref.width(), cfg.patch_size, cfg.effective_stride());

  const auto lds = sorted_by_id(ld_set);
  const auto nds = sorted_by_id(nd_set);
  const IntensityRange range = shared_range(ld_set, nd_set);

  PairManifest manifest;
  manifest.header = ManifestHeader{cfg.patch_size, cfg.effective_stride(), cfg.metric,
                                   cfg.threshold, cfg.top_k, {}};
  for (const auto* v : lds) manifest.header.fingerprints.push_back(fingerprint(*v));
  for (const auto* v : nds) manifest.header.fingerprints.push_back(fingerprint(*v));

  // Prepared slices, addressable by (volume, slice).
  std::map<std::pair<const ImageVolume*, std::size_t>, SliceData> prepared;
  auto data_for = [&](const ImageVolume* v, std::size_t k) -> const SliceData* {
    auto [it, inserted] = prepared.try_emplace({v, k});
    if (inserted) it->second = prepare(v->slice(k), cfg.metric, range);
    return &it->second;
  };

  std::vector<Target> all_targets;
  for (const auto* v : nds) {
    for (std::size_t k = 0; k < v->slice_count(); ++k) all_targets.push_back({v, k, data_for(v, k)});
  }

  // Per-LD-slice target lists; restricted lists hold the single matched ND slice.
  std::vector<std::vector<Target>> restricted;
  std::vector<const std::vector<Target>*> targets_for_slice;
  std::vector<std::pair<const ImageVolume*, std::size_t>> ld_slices;
  for (const auto* v : lds) {
    for (std::size_t k = 0; k < v->slice_count(); ++k) ld_slices.emplace_back(v, k);
  }
  if (cfg.slice_match_enabled) {
    restricted.reserve(ld_slices.size());
    std::map<std::pair<std::string, std::size_t>, std::size_t> target_index;
    for (std::size_t t = 0; t < all_targets.size(); ++t) {
      target_index[{all_targets[t].vol->id(), all_targets[t].slice}] = t;
    }
    for (const auto* v : lds) {
      for (const auto& sm : match_slices(*v, nd_set, cfg.metric, cfg.effective_workers())) {
        restricted.push_back({all_targets.at(target_index.at({sm.nd_volume_id, sm.nd_slice}))});
      }
    }
    for (const auto& r : restricted) targets_for_slice.push_back(&r);
  } else {
    targets_for_slice.assign(ld_slices.size(), &all_targets);
  }

  std::vector<LdJob> jobs;
  jobs.reserve(ld_slices.size() * positions.size());
  for (std::size_t s = 0; s < ld_slices.size(); ++s) {
    const auto [vol, k] = ld_slices[s];
    const SliceData* data = data_for(vol, k);
    for (const auto& pos : positions) jobs.push_back(LdJob{vol, k, data, pos, targets_for_slice[s]});
  }
  manifest.records = run_jobs(jobs, cfg);
  return manifest;
}

std::vector<double> paired_scores(const ImageVolume& ld, const ImageVolume& nd, std::size_t p,
                                  std::size_t stride, const SimilarityMetric& metric) {
  require_dims(ld, nd);
  if (ld.slice_count() != nd.slice_count()) {
    fail(ErrorCode::kDimensionMismatch, "paired volumes differ in slice count");
  }
  validate(metric);
  const IntensityRange range{std::min(ld.range().lo, nd.range().lo),
                             std::max(ld.range().hi, nd.range().hi)};
  const auto positions = tile_positions(ld.height(), ld.width(), p, stride);
  WindowScorer scorer(metric);
  std::vector<double> out;
  for (std::size_t k = 0; k < ld.slice_count(); ++k) {
    const auto a = prepare(ld.slice(k), metric, range);
    const auto b = prepare(nd.slice(k), metric, range);
    for (const auto& pos : positions) {
      if (auto s = scorer(a, pos.row, pos.col, b, pos.row, pos.col, p, p)) out.push_back(*s);
    }
  }
  return out;
}

ScoreHistogram nmi_histogram(std::span<const double> scores, std::size_t bin_count) {
  if (scores.empty()) fail(ErrorCode::kEmptyInput, "no scores to histogram");
  if (bin_count < 1) fail(ErrorCode::kInvalidArgument, "histogram needs at least one bin");
  ScoreHistogram h;
  h.counts.assign(bin_count, 0);
  double sum = 0.0;
  for (double s : scores) {
    const double v = std::clamp(s, 0.0, 1.0);
    sum += v;
    const auto b = std::min(static_cast<std::size_t>(v * double(bin_count)), bin_count - 1);
    ++h.counts[b];
  }
  h.mean = sum / double(scores.size());
  h.mode_bin = static_cast<std::size_t>(std::max_element(h.counts.begin(), h.counts.end()) -
                                        h.counts.begin());
  return h;
}

ScoreHistogram nmi_histogram(std::span<const PatchMatch> pairs, std::size_t bin_count) {
  std::vector<double> scores;
  scores.reserve(pairs.size());
  for (const auto& m : pairs) scores.push_back(m.score);
  return nmi_histogram(scores, bin_count);
}

void write_manifest(const PairManifest& m, std::ostream& out) {
  const auto& h = m.header;
  out << "#qsmatch v1 p=" << h.patch_size << " stride=" << h.stride
      << " metric=" << to_string(h.metric) << " threshold=" << format_general(h.threshold, 9)
      << " topk=" << h.top_k << '\n';
  for (const auto& r : m.records) {
    out << r.ld.volume_id << '\t' << r.ld.slice << '\t' << r.ld.row << '\t' << r.ld.col << '\t'
        << r.nd.volume_id << '\t' << r.nd.slice << '\t' << r.nd.row << '\t' << r.nd.col << '\t'
        << format_decimal(r.score, 9) << '\t' << format_decimal(r.weight, 9) << '\n';
  }
}

void write_manifest(const PairManifest& m, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorCode::kIoError, "cannot create " + path.string());
  write_manifest(m, out);
  if (!out) fail(ErrorCode::kIoError, "write failed for " + path.string());
}

namespace {

template <typename T>
T parse_field(const std::string& s, const char* what) {
  std::istringstream in(s);
  T v{};
  if (!(in >> v) || !(in >> std::ws).eof()) {
    fail(ErrorCode::kMalformedManifest, std::string("bad ") + what + " '" + s + "'");
  }
  return v;
}

std::vector<std::string> split(const std::string& line, char sep) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == sep) {
      out.push_back(std::move(cur));
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  out.push_back(std::move(cur));
  return out;
}

}  // namespace

PairManifest read_manifest(std::istream& in) {
  PairManifest m;
  std::string line;
  if (!std::getline(in, line)) fail(ErrorCode::kMalformedManifest, "missing header line");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  const auto tokens = split(line, ' ');
  if (tokens.size() != 7 || tokens[0] != "#qsmatch" || tokens[1] != "v1") {
    fail(ErrorCode::kMalformedManifest, "bad header line '" + line + "'");
  }
  std::map<std::string, std::string> kv;
  for (std::size_t i = 2; i < tokens.size(); ++i) {
    const auto eq = tokens[i].find('=');
    if (eq == std::string::npos) fail(ErrorCode::kMalformedManifest, "bad header token " + tokens[i]);
    kv[tokens[i].substr(0, eq)] = tokens[i].substr(eq + 1);
  }
  for (const char* key : {"p", "stride", "metric", "threshold", "topk"}) {
    if (!kv.count(key)) fail(ErrorCode::kMalformedManifest, std::string("header lacks ") + key);
  }
  auto& h = m.header;
  h.patch_size = parse_field<std::size_t>(kv["p"], "patch size");
  h.stride = parse_field<std::size_t>(kv["stride"], "stride");
  h.threshold = parse_field<double>(kv["threshold"], "threshold");
  h.top_k = parse_field<std::size_t>(kv["topk"], "topk");
  try {
    h.metric = parse_metric(kv["metric"]);
  } catch (const Error& e) {
    fail(ErrorCode::kMalformedManifest, e.what());
  }

  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto f = split(line, '\t');
    if (f.size() != 10) {
      fail(ErrorCode::kMalformedManifest, "line " + std::to_string(lineno) + ": expected 10 fields");
    }
    PatchMatch r;
    r.ld = PatchProvenance{f[0], parse_field<std::size_t>(f[1], "ld_slice"),
                           parse_field<std::size_t>(f[2], "ld_row"),
                           parse_field<std::size_t>(f[3], "ld_col")};
    r.nd = PatchProvenance{f[4], parse_field<std::size_t>(f[5], "nd_slice"),
                           parse_field<std::size_t>(f[6], "nd_row"),
                           parse_field<std::size_t>(f[7], "nd_col")};
    r.patch_size = h.patch_size;
    r.score = parse_field<double>(f[8], "score");
    r.weight = parse_field<double>(f[9], "weight");
    if (!(r.weight >= 0.0 && r.weight <= 1.0)) {
      fail(ErrorCode::kMalformedManifest, "line " + std::to_string(lineno) + ": weight outside [0,1]");
    }
    r.rank = (!m.records.empty() && m.records.back().ld == r.ld) ? m.records.back().rank + 1 : 0;
    m.records.push_back(std::move(r));
  }
  return m;
}

PairManifest read_manifest(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) fail(ErrorCode::kFileNotFound, path.string());
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::kIoError, "cannot open " + path.string());
  return read_manifest(in);
}

}  // namespace qsadn

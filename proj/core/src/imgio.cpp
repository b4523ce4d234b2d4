#include "qsadn/imgio.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <iterator>
#include <set>
#include <sstream>

namespace qsadn {
namespace fs = std::filesystem;

namespace {

constexpr double kRaw16Max = 65535.0;

std::string read_file_bytes(const fs::path& path) {
  if (!fs::exists(path)) fail(ErrorCode::kFileNotFound, path.string());
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::kIoError, "cannot open " + path.string());
  return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

void write_file_bytes(const fs::path& path, std::string_view bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorCode::kIoError, "cannot create " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) fail(ErrorCode::kIoError, "write failed for " + path.string());
}

std::string_view trim(std::string_view s) {
  const auto* ws = " \t\r\n";
  const auto b = s.find_first_not_of(ws);
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(ws);
  return s.substr(b, e - b + 1);
}

template <typename T>
bool parse_number(std::string_view s, T& out) {
  s = trim(s);
  if (s.empty()) return false;
  if constexpr (std::is_floating_point_v<T>) {
    // from_chars for double is available, but strtod accepts the same inputs
    // the header writer produces and handles "inf" consistently.
    std::string tmp(s);
    char* end = nullptr;
    out = std::strtod(tmp.c_str(), &end);
    return end == tmp.c_str() + tmp.size() && std::isfinite(out);
  } else {
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
    return ec == std::errc{} && ptr == s.data() + s.size();
  }
}

struct RawHeader {
  std::size_t width = 0;
  std::size_t height = 0;
  std::size_t slices = 0;
  IntensityRange range{0.0, kRaw16Max};
};

RawHeader parse_raw_header(const std::string& text, const fs::path& where) {
  RawHeader h;
  std::set<std::string> seen;
  std::istringstream lines(text);
  std::string line;
  while (std::getline(lines, line)) {
    auto t = trim(line);
    if (t.empty() || t.front() == '#') continue;
    const auto eq = t.find('=');
    if (eq == std::string_view::npos) {
      fail(ErrorCode::kMalformedHeader, where.string() + ": expected key=value, got '" + line + "'");
    }
    const std::string key(trim(t.substr(0, eq)));
    const auto value = t.substr(eq + 1);
    if (!seen.insert(key).second) fail(ErrorCode::kMalformedHeader, "duplicate key " + key);
    bool ok = false;
    if (key == "width") {
      ok = parse_number(value, h.width) && h.width > 0;
    } else if (key == "height") {
      ok = parse_number(value, h.height) && h.height > 0;
    } else if (key == "slices") {
      ok = parse_number(value, h.slices) && h.slices > 0;
    } else if (key == "min") {
      ok = parse_number(value, h.range.lo);
    } else if (key == "max") {
      ok = parse_number(value, h.range.hi);
    } else {
      fail(ErrorCode::kMalformedHeader, where.string() + ": unknown key " + key);
    }
    if (!ok) fail(ErrorCode::kMalformedHeader, where.string() + ": bad value for " + key);
  }
  for (const char* required : {"width", "height", "slices"}) {
    if (!seen.count(required)) {
      fail(ErrorCode::kMalformedHeader, where.string() + ": missing " + required);
    }
  }
  if (!(h.range.lo < h.range.hi)) {
    fail(ErrorCode::kMalformedHeader, where.string() + ": min must be below max");
  }
  return h;
}

fs::path with_ext(fs::path p, const char* ext) { return p.replace_extension(ext); }

ImageVolume load_raw16(const fs::path& path, std::string id) {
  const auto hdr_path = with_ext(path, ".hdr");
  const auto raw_path = with_ext(path, ".raw");
  const auto header = parse_raw_header(read_file_bytes(hdr_path), hdr_path);
  const std::string bytes = read_file_bytes(raw_path);

  const std::size_t per_slice = header.width * header.height;
  const std::size_t expected = per_slice * header.slices * 2;
  if (bytes.size() != expected) {
    fail(ErrorCode::kTruncatedData, raw_path.string() + ": expected " + std::to_string(expected) +
                                        " bytes, found " + std::to_string(bytes.size()));
  }

  const auto* u8 = reinterpret_cast<const unsigned char*>(bytes.data());
  std::vector<Image2D> slices;
  slices.reserve(header.slices);
  for (std::size_t k = 0; k < header.slices; ++k) {
    std::vector<double> px(per_slice);
    for (std::size_t i = 0; i < per_slice; ++i) {
      const std::size_t at = 2 * (k * per_slice + i);
      px[i] = static_cast<double>(static_cast<std::uint16_t>(u8[at] | (u8[at + 1] << 8)));
    }
    slices.emplace_back(header.height, header.width, std::move(px));
  }
  return ImageVolume(std::move(id), std::move(slices), header.range);
}

// Skips whitespace and '#' comments between PGM header tokens.
std::size_t pgm_token(const std::string& bytes, std::size_t pos, std::string& tok) {
  while (pos < bytes.size()) {
    const char c = bytes[pos];
    if (c == '#') {
      while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
    } else if (std::isspace(static_cast<unsigned char>(c))) {
      ++pos;
    } else {
      break;
    }
  }
  tok.clear();
  while (pos < bytes.size() && !std::isspace(static_cast<unsigned char>(bytes[pos])) &&
         bytes[pos] != '#') {
    tok.push_back(bytes[pos++]);
  }
  return pos;
}

ImageVolume load_pgm(const fs::path& path, std::string id) {
  const std::string bytes = read_file_bytes(path);
  std::string tok;
  std::size_t pos = pgm_token(bytes, 0, tok);
  if (tok != "P5") fail(ErrorCode::kMalformedHeader, path.string() + ": not a binary PGM");
  std::size_t width = 0, height = 0;
  unsigned maxval = 0;
  pos = pgm_token(bytes, pos, tok);
  if (!parse_number(tok, width) || width == 0) fail(ErrorCode::kMalformedHeader, "bad PGM width");
  pos = pgm_token(bytes, pos, tok);
  if (!parse_number(tok, height) || height == 0) fail(ErrorCode::kMalformedHeader, "bad PGM height");
  pos = pgm_token(bytes, pos, tok);
  if (!parse_number(tok, maxval) || maxval == 0 || maxval > 65535) {
    fail(ErrorCode::kMalformedHeader, "bad PGM maxval");
  }
  if (pos >= bytes.size()) fail(ErrorCode::kTruncatedData, path.string() + ": no pixel data");
  ++pos;  // exactly one whitespace byte precedes the raster

  const std::size_t bps = maxval < 256 ? 1 : 2;
  const std::size_t n = width * height;
  if (bytes.size() - pos < n * bps) {
    fail(ErrorCode::kTruncatedData, path.string() + ": raster shorter than header declares");
  }
  const auto* u8 = reinterpret_cast<const unsigned char*>(bytes.data() + pos);
  std::vector<double> px(n);
  for (std::size_t i = 0; i < n; ++i) {
    const unsigned v = bps == 1 ? u8[i] : static_cast<unsigned>((u8[2 * i] << 8) | u8[2 * i + 1]);
    if (v > maxval) fail(ErrorCode::kMalformedHeader, path.string() + ": sample exceeds maxval");
    px[i] = static_cast<double>(v);
  }
  std::vector<Image2D> slices;
  slices.emplace_back(height, width, std::move(px));
  return ImageVolume(std::move(id), std::move(slices), IntensityRange{0.0, double(maxval)});
}

std::uint16_t quantize(double v, double hi) {
  const double r = std::nearbyint(std::clamp(v, 0.0, hi));
  return static_cast<std::uint16_t>(r);
}

std::string format_real(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

std::string_view to_string(PixelFormat f) noexcept {
  return f == PixelFormat::kRaw16 ? "raw16" : "pgm";
}

PixelFormat parse_pixel_format(std::string_view name) {
  if (name == "raw16" || name == "raw") return PixelFormat::kRaw16;
  if (name == "pgm") return PixelFormat::kPgm;
  fail(ErrorCode::kInvalidArgument, "unsupported pixel format '" + std::string(name) + "'");
}

PixelFormat pixel_format_for_path(const fs::path& path) {
  const auto ext = path.extension().string();
  if (ext == ".raw" || ext == ".hdr") return PixelFormat::kRaw16;
  if (ext == ".pgm") return PixelFormat::kPgm;
  fail(ErrorCode::kInvalidArgument, "cannot infer pixel format from '" + path.string() + "'");
}

ImageVolume::ImageVolume(std::string id, std::vector<Image2D> slices, IntensityRange range)
    : id_(std::move(id)), slices_(std::move(slices)), range_(range) {
  if (slices_.empty()) fail(ErrorCode::kInvalidArgument, "volume needs at least one slice");
  if (!(range_.lo < range_.hi)) fail(ErrorCode::kDegenerateRange, "intensity range is empty");
  height_ = slices_.front().rows();
  width_ = slices_.front().cols();
  if (width_ == 0 || height_ == 0) fail(ErrorCode::kInvalidArgument, "empty slice");
  for (const auto& s : slices_) {
    if (s.rows() != height_ || s.cols() != width_) {
      fail(ErrorCode::kDimensionMismatch, "slices of volume '" + id_ + "' differ in size");
    }
    for (double v : s.pixels()) {
      if (!(v >= range_.lo && v <= range_.hi)) {
        fail(ErrorCode::kOutOfBounds, "pixel value outside declared range in '" + id_ + "'");
      }
    }
  }
}

const Image2D& ImageVolume::slice(std::size_t k) const {
  if (k >= slices_.size()) fail(ErrorCode::kOutOfBounds, "slice index " + std::to_string(k));
  return slices_[k];
}

ImageVolume load_volume(const fs::path& path, PixelFormat format, std::optional<std::string> id) {
  std::string vid = id ? *id : path.stem().string();
  return format == PixelFormat::kRaw16 ? load_raw16(path, std::move(vid))
                                       : load_pgm(path, std::move(vid));
}

ImageVolume load_volume(const fs::path& path) {
  return load_volume(path, pixel_format_for_path(path));
}

void save_volume(const ImageVolume& vol, const fs::path& path, PixelFormat format) {
  if (format == PixelFormat::kRaw16) {
    std::string hdr = "width=" + std::to_string(vol.width()) + "\n" +
                      "height=" + std::to_string(vol.height()) + "\n" +
                      "slices=" + std::to_string(vol.slice_count()) + "\n" +
                      "min=" + format_real(vol.range().lo) + "\n" +
                      "max=" + format_real(vol.range().hi) + "\n";
    std::string raw;
    raw.reserve(vol.width() * vol.height() * vol.slice_count() * 2);
    for (const auto& s : vol.slices()) {
      for (double v : s.pixels()) {
        const auto q = quantize(v, kRaw16Max);
        raw.push_back(static_cast<char>(q & 0xff));
        raw.push_back(static_cast<char>(q >> 8));
      }
    }
    write_file_bytes(with_ext(path, ".hdr"), hdr);
    write_file_bytes(with_ext(path, ".raw"), raw);
    return;
  }

  if (vol.slice_count() != 1) {
    fail(ErrorCode::kInvalidArgument, "PGM holds exactly one slice");
  }
  const unsigned maxval = vol.range().hi <= 255.0 ? 255u : 65535u;
  std::string out = "P5\n" + std::to_string(vol.width()) + " " + std::to_string(vol.height()) +
                    "\n" + std::to_string(maxval) + "\n";
  for (double v : vol.slice(0).pixels()) {
    const auto q = quantize(v, maxval);
    if (maxval == 255u) {
      out.push_back(static_cast<char>(q));
    } else {
      out.push_back(static_cast<char>(q >> 8));
      out.push_back(static_cast<char>(q & 0xff));
    }
  }
  write_file_bytes(path, out);
}

void save_volume(const ImageVolume& vol, const fs::path& path) {
  save_volume(vol, path, pixel_format_for_path(path));
}

Image2D load_image(const fs::path& path, IntensityRange* range_out) {
  auto vol = load_volume(path);
  if (range_out) *range_out = vol.range();
  return vol.slice(0);
}

void save_image(const Image2D& img, IntensityRange range, const fs::path& path) {
  Image2D clamped = img;
  for (double& v : clamped.pixels()) v = std::clamp(v, range.lo, range.hi);
  save_volume(ImageVolume(path.stem().string(), {std::move(clamped)}, range), path);
}

DatasetManifest DatasetManifest::parse(std::string_view text, const fs::path& base_dir) {
  DatasetManifest m;
  std::istringstream lines{std::string(text)};
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(lines, line)) {
    ++lineno;
    auto t = trim(line);
    if (t.empty() || t.front() == '#') continue;
    std::istringstream fields{std::string(t)};
    std::string id, dose, path, format;
    if (!(fields >> id >> dose >> path >> format)) {
      fail(ErrorCode::kConfigError, "dataset line " + std::to_string(lineno) + ": expected 4 fields");
    }
    DatasetEntry e;
    e.volume_id = id;
    if (dose == "LD") {
      e.dose = DoseLabel::kLD;
    } else if (dose == "ND") {
      e.dose = DoseLabel::kND;
    } else {
      fail(ErrorCode::kConfigError, "dataset line " + std::to_string(lineno) + ": dose must be LD or ND");
    }
    e.path = fs::path(path).is_relative() && !base_dir.empty() ? base_dir / path : fs::path(path);
    e.format = parse_pixel_format(format);
    m.entries.push_back(std::move(e));
  }
  m.validate();
  return m;
}

DatasetManifest DatasetManifest::read(const fs::path& path) {
  return parse(read_file_bytes(path), path.parent_path());
}

void DatasetManifest::validate() const {
  std::set<std::string> ids;
  for (const auto& e : entries) {
    if (!ids.insert(e.volume_id).second) {
      fail(ErrorCode::kConfigError, "duplicate volume id '" + e.volume_id + "'");
    }
  }
}

std::vector<ImageVolume> DatasetManifest::load(DoseLabel dose) const {
  std::vector<ImageVolume> out;
  for (const auto& e : entries) {
    if (e.dose == dose) out.push_back(load_volume(e.path, e.format, e.volume_id));
  }
  return out;
}

Patch extract_patch(const ImageVolume& vol, std::size_t slice_index, std::size_t row,
                    std::size_t col, std::size_t p) {
  if (p < 2) fail(ErrorCode::kInvalidArgument, "patch size must be at least 2");
  const auto& s = vol.slice(slice_index);
  if (row + p > s.rows() || col + p > s.cols()) {
    fail(ErrorCode::kOutOfBounds, "patch at (" + std::to_string(row) + "," + std::to_string(col) +
                                      ") size " + std::to_string(p) + " exceeds slice");
  }
  return Patch{Image2D::from_view(s.view().window(row, col, p, p)),
               PatchProvenance{vol.id(), slice_index, row, col}};
}

std::vector<TilePosition> tile_positions(std::size_t rows, std::size_t cols, std::size_t p,
                                         std::size_t stride) {
  if (stride == 0) fail(ErrorCode::kInvalidArgument, "stride must be at least 1");
  if (p == 0 || p > rows || p > cols) {
    fail(ErrorCode::kPatchTooLarge, "patch size " + std::to_string(p) + " does not fit " +
                                        std::to_string(rows) + "x" + std::to_string(cols));
  }
  std::vector<TilePosition> out;
  out.reserve(((rows - p) / stride + 1) * ((cols - p) / stride + 1));
  for (std::size_t r = 0; r + p <= rows; r += stride) {
    for (std::size_t c = 0; c + p <= cols; c += stride) out.push_back({r, c});
  }
  return out;
}

std::vector<Patch> tile_patches(const ImageView& slice, std::size_t p, std::size_t stride,
                                const std::string& volume_id, std::size_t slice_index) {
  std::vector<Patch> out;
  for (const auto& pos : tile_positions(slice.rows, slice.cols, p, stride)) {
    out.push_back(Patch{Image2D::from_view(slice.window(pos.row, pos.col, p, p)),
                        PatchProvenance{volume_id, slice_index, pos.row, pos.col}});
  }
  return out;
}

}  // namespace qsadn

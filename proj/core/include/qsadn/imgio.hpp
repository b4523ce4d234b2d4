#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "qsadn/image.hpp"

namespace qsadn {

/// On-disk pixel layouts understood by load_volume / save_volume.
///   kRaw16: `<name>.raw` little-endian uint16, slice-major then row-major, with a
///           `<name>.hdr` sidecar of `key=value` lines (width, height, slices, min, max).
///   kPgm:   binary P5, a single slice, maxval up to 65535 (16-bit samples big-endian).
enum class PixelFormat { kRaw16, kPgm };

std::string_view to_string(PixelFormat f) noexcept;
PixelFormat parse_pixel_format(std::string_view name);
/// Picks the format from the extension (.raw/.hdr -> raw16, .pgm -> pgm).
PixelFormat pixel_format_for_path(const std::filesystem::path& path);

/// A stack of equally sized slices with a declared intensity range.
/// Immutable after construction; the constructor enforces every invariant.
class ImageVolume {
 public:
  ImageVolume(std::string id, std::vector<Image2D> slices, IntensityRange range);

  const std::string& id() const { return id_; }
  std::size_t width() const { return width_; }
  std::size_t height() const { return height_; }
  std::size_t slice_count() const { return slices_.size(); }
  const Image2D& slice(std::size_t k) const;
  const std::vector<Image2D>& slices() const { return slices_; }
  IntensityRange range() const { return range_; }

 private:
  std::string id_;
  std::size_t width_ = 0;
  std::size_t height_ = 0;
  std::vector<Image2D> slices_;
  IntensityRange range_;
};

/// Loads a volume. `id` defaults to the file stem.
ImageVolume load_volume(const std::filesystem::path& path, PixelFormat format,
                        std::optional<std::string> id = std::nullopt);
ImageVolume load_volume(const std::filesystem::path& path);

/// Writes a volume. Pixels are rounded to the nearest integer and clamped to
/// the container's representable range (and to the PGM maxval).
void save_volume(const ImageVolume& vol, const std::filesystem::path& path, PixelFormat format);
void save_volume(const ImageVolume& vol, const std::filesystem::path& path);

/// Single-image helpers; a raw volume contributes its first slice.
Image2D load_image(const std::filesystem::path& path, IntensityRange* range_out = nullptr);
void save_image(const Image2D& img, IntensityRange range, const std::filesystem::path& path);

enum class DoseLabel { kLD, kND };

struct DatasetEntry {
  std::string volume_id;
  DoseLabel dose = DoseLabel::kLD;
  std::filesystem::path path;
  PixelFormat format = PixelFormat::kRaw16;
};

/// Tab- or space-separated lines: `volume_id dose(LD|ND) path format(raw16|pgm)`.
/// Blank lines and `#` comments are skipped; relative paths resolve against `base_dir`.
struct DatasetManifest {
  std::vector<DatasetEntry> entries;

  static DatasetManifest parse(std::string_view text, const std::filesystem::path& base_dir = {});
  static DatasetManifest read(const std::filesystem::path& path);
  void validate() const;
  std::vector<ImageVolume> load(DoseLabel dose) const;
};

struct PatchProvenance {
  std::string volume_id;
  std::size_t slice = 0;
  std::size_t row = 0;
  std::size_t col = 0;

  bool operator==(const PatchProvenance&) const = default;
};

struct Patch {
  Image2D pixels;
  PatchProvenance provenance;

  std::size_t size() const { return pixels.rows(); }
  ImageView view() const { return pixels.view(); }
};

struct TilePosition {
  std::size_t row = 0;
  std::size_t col = 0;
  bool operator==(const TilePosition&) const = default;
};

Patch extract_patch(const ImageVolume& vol, std::size_t slice_index, std::size_t row,
                    std::size_t col, std::size_t p);

/// Row-major top-left positions of every in-bounds p x p window at `stride`.
std::vector<TilePosition> tile_positions(std::size_t rows, std::size_t cols, std::size_t p,
                                         std::size_t stride);

std::vector<Patch> tile_patches(const ImageView& slice, std::size_t p, std::size_t stride,
                                const std::string& volume_id = {}, std::size_t slice_index = 0);

}  // namespace qsadn

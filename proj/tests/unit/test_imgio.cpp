#include <gtest/gtest.h>

#include <fstream>
#include <random>

#include "fixtures.hpp"
#include "qsadn/imgio.hpp"

using namespace qsadn;
namespace t = qsadn::testing;
using t::TempDir;

namespace {

ImageVolume ramp_volume() {
  std::vector<Image2D> slices;
  for (std::size_t k = 0; k < 3; ++k) {
    Image2D s(8, 8);
    for (std::size_t i = 0; i < 8; ++i) {
      for (std::size_t j = 0; j < 8; ++j) s(i, j) = double(i + 8 * j + 64 * k);
    }
    slices.push_back(s);
  }
  return ImageVolume("ramp", slices, IntensityRange{});
}

void write_text(const std::filesystem::path& p, const std::string& text) {
  std::ofstream(p, std::ios::binary) << text;
}

void write_bytes(const std::filesystem::path& p, std::size_t n) {
  std::ofstream out(p, std::ios::binary);
  std::string zeros(n, '\0');
  out.write(zeros.data(), std::streamsize(zeros.size()));
}

template <typename F>
ErrorCode code_of(F&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "no error thrown";
  return ErrorCode::kInvalidArgument;
}

}  // namespace

TEST(ImageVolume, RejectsInconsistentSlices) {
  std::vector<Image2D> s{Image2D(4, 4), Image2D(4, 5)};
  EXPECT_EQ(code_of([&] { ImageVolume("v", s, IntensityRange{}); }), ErrorCode::kDimensionMismatch);
  EXPECT_EQ(code_of([&] { ImageVolume("v", {}, IntensityRange{}); }), ErrorCode::kInvalidArgument);
  EXPECT_EQ(code_of([&] { ImageVolume("v", {Image2D(2, 2, 300.0)}, IntensityRange{0, 255}); }),
            ErrorCode::kOutOfBounds);
  EXPECT_EQ(code_of([&] { ImageVolume("v", {Image2D(2, 2)}, IntensityRange{1, 1}); }),
            ErrorCode::kDegenerateRange);
}

TEST(LoadVolume, AllZeroRawGivesConstantSlice) {
  TempDir dir("zero");
  write_text(dir / "z.hdr", "width=512\nheight=512\nslices=1\n");
  write_bytes(dir / "z.raw", 512 * 512 * 2);
  const auto v = load_volume(dir / "z.raw", PixelFormat::kRaw16);
  EXPECT_EQ(v.id(), "z");
  EXPECT_EQ(v.slice_count(), 1u);
  EXPECT_EQ(v.width(), 512u);
  EXPECT_EQ(v.height(), 512u);
  for (double p : v.slice(0).pixels()) ASSERT_EQ(p, 0.0);
  EXPECT_EQ(v.range(), (IntensityRange{0.0, 65535.0}));
}

TEST(LoadVolume, ShortRasterIsTruncated) {
  TempDir dir("trunc");
  write_text(dir / "t.hdr", "width=512\nheight=512\nslices=1\n");
  write_bytes(dir / "t.raw", 511 * 512 * 2);
  EXPECT_EQ(code_of([&] { load_volume(dir / "t.raw", PixelFormat::kRaw16); }),
            ErrorCode::kTruncatedData);
}

TEST(LoadVolume, HeaderErrors) {
  TempDir dir("hdr");
  write_bytes(dir / "a.raw", 8);
  EXPECT_EQ(code_of([&] { load_volume(dir / "a.raw", PixelFormat::kRaw16); }),
            ErrorCode::kFileNotFound);
  write_text(dir / "a.hdr", "width=2\nheight=2\n");
  EXPECT_EQ(code_of([&] { load_volume(dir / "a.raw", PixelFormat::kRaw16); }),
            ErrorCode::kMalformedHeader);
  write_text(dir / "a.hdr", "width=2\nheight=2\nslices=1\ndepth=3\n");
  EXPECT_EQ(code_of([&] { load_volume(dir / "a.raw", PixelFormat::kRaw16); }),
            ErrorCode::kMalformedHeader);
  write_text(dir / "a.hdr", "width=2\nheight=x\nslices=1\n");
  EXPECT_EQ(code_of([&] { load_volume(dir / "a.raw", PixelFormat::kRaw16); }),
            ErrorCode::kMalformedHeader);
  write_text(dir / "a.hdr", "width=2\nheight=2\nslices=1\nmin=10\nmax=5\n");
  EXPECT_EQ(code_of([&] { load_volume(dir / "a.raw", PixelFormat::kRaw16); }),
            ErrorCode::kMalformedHeader);
  EXPECT_EQ(code_of([&] { load_volume(dir / "missing.raw", PixelFormat::kRaw16); }),
            ErrorCode::kFileNotFound);
}

TEST(LoadVolume, HeaderOverridesRange) {
  TempDir dir("range");
  write_text(dir / "r.hdr", "# converted\nwidth=2\nheight=1\nslices=1\nmin=0\nmax=4095\n");
  write_bytes(dir / "r.raw", 4);
  EXPECT_EQ(load_volume(dir / "r.raw").range(), (IntensityRange{0.0, 4095.0}));
}

TEST(SaveLoad, RawRoundTripIsBitExact) {
  TempDir dir("rt");
  const auto v = ramp_volume();
  save_volume(v, dir / "ramp.raw", PixelFormat::kRaw16);
  const auto back = load_volume(dir / "ramp.raw", PixelFormat::kRaw16);
  ASSERT_EQ(back.slice_count(), 3u);
  EXPECT_EQ(back.width(), 8u);
  EXPECT_EQ(back.height(), 8u);
  EXPECT_EQ(back.range(), v.range());
  for (std::size_t k = 0; k < 3; ++k) EXPECT_EQ(back.slice(k), v.slice(k));
  EXPECT_EQ(back.slice(2)(7, 1), 7.0 + 8.0 + 128.0);
}

TEST(SaveLoad, RawIsLittleEndianSliceMajor) {
  TempDir dir("le");
  Image2D s0(1, 2, std::vector<double>{1.0, 258.0});
  Image2D s1(1, 2, std::vector<double>{65535.0, 0.0});
  save_volume(ImageVolume("le", {s0, s1}, IntensityRange{}), dir / "le.raw");
  std::ifstream in(dir / "le.raw", std::ios::binary);
  std::vector<unsigned char> b((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  ASSERT_EQ(b.size(), 8u);
  EXPECT_EQ(b, (std::vector<unsigned char>{1, 0, 2, 1, 255, 255, 0, 0}));
}

TEST(SaveLoad, PgmRoundTripEightAndSixteenBit) {
  TempDir dir("pgm");
  std::mt19937_64 rng(11);
  const Image2D small = t::random_integer_image(5, 7, rng, 0, 255);
  save_volume(ImageVolume("a", {small}, IntensityRange{0, 255}), dir / "a.pgm", PixelFormat::kPgm);
  const auto a = load_volume(dir / "a.pgm", PixelFormat::kPgm);
  EXPECT_EQ(a.slice(0), small);
  EXPECT_EQ(a.range(), (IntensityRange{0, 255}));

  const Image2D wide = t::random_integer_image(6, 3, rng, 0, 65535);
  save_volume(ImageVolume("b", {wide}, IntensityRange{}), dir / "b.pgm");
  const auto b = load_volume(dir / "b.pgm");
  EXPECT_EQ(b.slice(0), wide);
  EXPECT_EQ(b.range(), (IntensityRange{0, 65535}));
}

TEST(SaveLoad, PgmHeaderWithComments) {
  TempDir dir("pgmc");
  std::ofstream out(dir / "c.pgm", std::ios::binary);
  out << "P5\n# made by hand\n3 1\n255\n";
  out.put(char(0)).put(char(17)).put(char(255));
  out.close();
  const auto v = load_volume(dir / "c.pgm");
  EXPECT_EQ(v.slice(0), Image2D(1, 3, std::vector<double>{0, 17, 255}));
}

TEST(SaveLoad, PgmErrors) {
  TempDir dir("pgme");
  write_text(dir / "bad.pgm", "P2\n1 1\n255\n0\n");
  EXPECT_EQ(code_of([&] { load_volume(dir / "bad.pgm"); }), ErrorCode::kMalformedHeader);
  write_text(dir / "short.pgm", "P5\n4 4\n255\nab");
  EXPECT_EQ(code_of([&] { load_volume(dir / "short.pgm"); }), ErrorCode::kTruncatedData);
  const auto v = ramp_volume();
  EXPECT_EQ(code_of([&] { save_volume(v, dir / "multi.pgm"); }), ErrorCode::kInvalidArgument);
}

TEST(PixelFormat, NamesAndExtensions) {
  EXPECT_EQ(parse_pixel_format("raw16"), PixelFormat::kRaw16);
  EXPECT_EQ(parse_pixel_format("pgm"), PixelFormat::kPgm);
  EXPECT_EQ(pixel_format_for_path("x/y.hdr"), PixelFormat::kRaw16);
  EXPECT_EQ(pixel_format_for_path("x/y.pgm"), PixelFormat::kPgm);
  EXPECT_EQ(code_of([] { parse_pixel_format("tiff"); }), ErrorCode::kInvalidArgument);
  EXPECT_EQ(code_of([] { pixel_format_for_path("a.png"); }), ErrorCode::kInvalidArgument);
}

TEST(ExtractPatch, WholeSliceAndBounds) {
  const auto v = ramp_volume();
  const Patch whole = extract_patch(v, 1, 0, 0, 8);
  EXPECT_EQ(whole.pixels, v.slice(1));
  EXPECT_EQ(whole.provenance, (PatchProvenance{"ramp", 1, 0, 0}));
  EXPECT_EQ(code_of([&] { extract_patch(v, 0, 8 - 4 + 1, 0, 4); }), ErrorCode::kOutOfBounds);
  EXPECT_EQ(code_of([&] { extract_patch(v, 0, 0, 5, 4); }), ErrorCode::kOutOfBounds);
  EXPECT_EQ(code_of([&] { extract_patch(v, 3, 0, 0, 4); }), ErrorCode::kOutOfBounds);
  EXPECT_EQ(code_of([&] { extract_patch(v, 0, 0, 0, 1); }), ErrorCode::kInvalidArgument);
}

TEST(ExtractPatch, PixelsMatchSubArray) {
  const auto v = ramp_volume();
  const Patch p = extract_patch(v, 2, 3, 1, 4);
  for (std::size_t i = 0; i < 4; ++i) {
    for (std::size_t j = 0; j < 4; ++j) EXPECT_EQ(p.pixels(i, j), v.slice(2)(3 + i, 1 + j));
  }
}

TEST(TilePatches, Counts) {
  const Image2D s64(64, 64), s512(512, 512);
  EXPECT_EQ(tile_patches(s64, 64, 1).size(), 1u);
  EXPECT_EQ(tile_patches(s64, 16, 16).size(), 16u);
  EXPECT_EQ(tile_patches(s512, 64, 64).size(), 64u);
  for (std::size_t s : {1u, 3u, 5u, 7u, 16u}) {
    const std::size_t per_axis = (64 - 16) / s + 1;
    EXPECT_EQ(tile_positions(64, 64, 16, s).size(), per_axis * per_axis) << "stride " << s;
  }
  EXPECT_EQ(code_of([&] { tile_patches(s64, 65, 1); }), ErrorCode::kPatchTooLarge);
  EXPECT_EQ(code_of([&] { tile_positions(64, 64, 8, 0); }), ErrorCode::kInvalidArgument);
}

TEST(TilePatches, RowMajorDistinctAndReproducible) {
  std::mt19937_64 rng(5);
  std::vector<Image2D> s{t::random_integer_image(20, 27, rng, 0, 1000)};
  const ImageVolume v("t", s, IntensityRange{});
  const auto tiles = tile_patches(v.slice(0), 6, 4, "t", 0);
  ASSERT_FALSE(tiles.empty());
  for (std::size_t k = 1; k < tiles.size(); ++k) {
    const auto& a = tiles[k - 1].provenance;
    const auto& b = tiles[k].provenance;
    EXPECT_TRUE(a.row < b.row || (a.row == b.row && a.col < b.col));
  }
  for (const auto& t : tiles) {
    EXPECT_EQ(extract_patch(v, 0, t.provenance.row, t.provenance.col, 6).pixels, t.pixels);
  }
}

TEST(DatasetManifest, ParseValidateLoad) {
  TempDir dir("ds");
  save_volume(ramp_volume(), dir / "ld1.raw");
  save_volume(ImageVolume("n", {Image2D(8, 8, 3.0)}, IntensityRange{0, 255}), dir / "nd1.pgm");
  write_text(dir / "set.txt",
             "# dataset\n"
             "patient_ld\tLD\tld1.raw\traw16\n"
             "\n"
             "patient_nd ND nd1.pgm pgm\n");
  const auto m = DatasetManifest::read(dir / "set.txt");
  ASSERT_EQ(m.entries.size(), 2u);
  EXPECT_EQ(m.entries[1].dose, DoseLabel::kND);
  const auto ld = m.load(DoseLabel::kLD);
  ASSERT_EQ(ld.size(), 1u);
  EXPECT_EQ(ld[0].id(), "patient_ld");
  EXPECT_EQ(ld[0].slice_count(), 3u);
  EXPECT_EQ(m.load(DoseLabel::kND)[0].slice(0)(0, 0), 3.0);
}

TEST(DatasetManifest, Rejections) {
  EXPECT_EQ(code_of([] { DatasetManifest::parse("a LD x.raw raw16\na ND y.raw raw16\n").validate(); }),
            ErrorCode::kConfigError);
  EXPECT_EQ(code_of([] { DatasetManifest::parse("a XD x.raw raw16\n"); }), ErrorCode::kConfigError);
  EXPECT_EQ(code_of([] { DatasetManifest::parse("a LD x.raw\n"); }), ErrorCode::kConfigError);
}

TEST(SingleImage, SaveLoadKeepsRange) {
  TempDir dir("img");
  const Image2D img(3, 4, 9.0);
  save_image(img, IntensityRange{0, 255}, dir / "i.pgm");
  IntensityRange r;
  EXPECT_EQ(load_image(dir / "i.pgm", &r), img);
  EXPECT_EQ(r, (IntensityRange{0, 255}));
}

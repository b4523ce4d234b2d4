#pragma once

// Seeded fixture generators shared by the unit and acceptance suites.

#include <unistd.h>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "qsadn/adn_losses.hpp"
#include "qsadn/image.hpp"
#include "qsadn/imgio.hpp"
#include "qsadn/qs_trainer.hpp"

namespace qsadn::testing {

inline Image2D random_image(std::size_t rows, std::size_t cols, std::mt19937_64& rng,
                            double lo = 0.0, double hi = 1.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  Image2D img(rows, cols);
  for (double& v : img.pixels()) v = u(rng);
  return img;
}

inline Image2D random_integer_image(std::size_t rows, std::size_t cols, std::mt19937_64& rng,
                                    int lo, int hi) {
  std::uniform_int_distribution<int> u(lo, hi);
  Image2D img(rows, cols);
  for (double& v : img.pixels()) v = u(rng);
  return img;
}

/// Sum of random filled ellipses on a dark background, values in [0, 1].
inline Image2D phantom(std::size_t size, std::uint64_t seed, int ellipses = 6) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> centre(0.2, 0.8), axis(0.08, 0.35), angle(0.0, 3.14159),
      level(0.15, 0.45);
  Image2D img(size, size, 0.05);
  const double n = double(size);
  // Body outline first so every phantom has a large bright region.
  struct E { double cy, cx, ay, ax, th, v; };
  std::vector<E> es{{0.5, 0.5, 0.42, 0.36, 0.0, 0.25}};
  for (int i = 0; i < ellipses; ++i) {
    es.push_back({centre(rng), centre(rng), axis(rng), axis(rng), angle(rng), level(rng)});
  }
  for (std::size_t r = 0; r < size; ++r) {
    for (std::size_t c = 0; c < size; ++c) {
      const double y = (double(r) + 0.5) / n, x = (double(c) + 0.5) / n;
      double v = 0.05;
      for (const auto& e : es) {
        const double dy = y - e.cy, dx = x - e.cx;
        const double u = (dx * std::cos(e.th) + dy * std::sin(e.th)) / e.ax;
        const double w = (-dx * std::sin(e.th) + dy * std::cos(e.th)) / e.ay;
        if (u * u + w * w <= 1.0) v += e.v;
      }
      img(r, c) = std::min(v, 1.0);
    }
  }
  return img;
}

inline Image2D add_gaussian_noise(const Image2D& img, double sigma, std::uint64_t seed,
                                  bool clamp_unit = true) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n(0.0, sigma);
  Image2D out = img;
  for (double& v : out.pixels()) {
    v += n(rng);
    if (clamp_unit) v = std::clamp(v, 0.0, 1.0);
  }
  return out;
}

/// Integer-valued volume in [0, 255]: phantom slices plus seeded noise.
inline ImageVolume noisy_volume(const std::string& id, std::size_t slices, std::size_t size,
                                std::uint64_t seed, double noise = 0.05) {
  std::vector<Image2D> out;
  for (std::size_t k = 0; k < slices; ++k) {
    Image2D s = add_gaussian_noise(phantom(size, seed * 101 + k), noise, seed * 977 + k);
    for (double& v : s.pixels()) v = std::round(v * 255.0);
    out.push_back(std::move(s));
  }
  return ImageVolume(id, std::move(out), IntensityRange{0.0, 255.0});
}

/// `n` random 8x8 pairs in [0, 1]: targets are a fixed blur of the input plus a
/// small offset and noise, weights drawn from [0.2, 1].
inline WeightedPairSet trainer_fixture(std::size_t n, std::uint64_t seed, std::size_t size = 8) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> noise(0.0, 0.02);
  std::uniform_real_distribution<double> w(0.2, 1.0);
  const LinearDenoiser truth(3, {0.05, 0.1, 0.05, 0.1, 0.4, 0.1, 0.05, 0.1, 0.05, 0.03});
  WeightedPairSet s;
  for (std::size_t i = 0; i < n; ++i) {
    Image2D x = random_image(size, size, rng);
    Image2D y = truth.apply(x);
    for (double& v : y.pixels()) v += noise(rng);
    s.pairs.push_back(WeightedPair{std::move(x), std::move(y), w(rng)});
  }
  return s;
}

inline DisentangleBundle random_bundle(std::size_t rows, std::size_t cols, std::mt19937_64& rng) {
  return DisentangleBundle{random_image(rows, cols, rng), random_image(rows, cols, rng),
                           random_image(rows, cols, rng), random_image(rows, cols, rng),
                           random_image(rows, cols, rng), random_image(rows, cols, rng),
                           random_image(rows, cols, rng)};
}

inline DiscriminatorOutputs random_discriminator(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.05, 0.95);
  return DiscriminatorOutputs{u(rng), u(rng), u(rng), u(rng)};
}

/// Scratch directory removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    static std::uint64_t counter = 0;
    path_ = std::filesystem::temp_directory_path() /
            ("qsadn_" + tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

}  // namespace qsadn::testing

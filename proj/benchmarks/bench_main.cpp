#include <benchmark/benchmark.h>

#include <random>

#include "qsadn/baselines.hpp"
#include "qsadn/matcher.hpp"
#include "qsadn/similarity.hpp"

using namespace qsadn;

namespace {

Image2D noise_image(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Image2D img(n, n);
  for (double& v : img.pixels()) v = u(rng);
  return img;
}

ImageVolume noise_volume(const std::string& id, std::size_t slices, std::size_t n, std::uint64_t seed) {
  std::vector<Image2D> s;
  for (std::size_t k = 0; k < slices; ++k) s.push_back(noise_image(n, seed + k));
  return ImageVolume(id, std::move(s), IntensityRange{0.0, 1.0});
}

void BM_NmiKernel(benchmark::State& state) {
  const auto p = std::size_t(state.range(0));
  const Image2D a = noise_image(p, 1), b = noise_image(p, 2);
  const BinnedImage ba(a, {0.0, 1.0}, 64), bb(b, {0.0, 1.0}, 64);
  NmiKernel kernel(64);
  for (auto _ : state) benchmark::DoNotOptimize(kernel(ba.view(), bb.view()));
}
BENCHMARK(BM_NmiKernel)->Arg(8)->Arg(32)->Arg(64);

void BM_Pearson(benchmark::State& state) {
  const auto p = std::size_t(state.range(0));
  const Image2D a = noise_image(p, 3), b = noise_image(p, 4);
  for (auto _ : state) benchmark::DoNotOptimize(pearson(a, b));
}
BENCHMARK(BM_Pearson)->Arg(8)->Arg(64);

void BM_MatchPatches(benchmark::State& state) {
  const ImageVolume ld = noise_volume("ld", 1, 64, 10), nd = noise_volume("nd", 1, 64, 20);
  MatchConfig cfg;
  cfg.patch_size = std::size_t(state.range(0));
  cfg.workers = 1;
  for (auto _ : state) benchmark::DoNotOptimize(match_patches(ld, 0, nd, 0, cfg));
}
BENCHMARK(BM_MatchPatches)->Arg(8)->Arg(16)->Unit(benchmark::kMillisecond);

void BM_GaussianLowpass(benchmark::State& state) {
  const Image2D img = noise_image(std::size_t(state.range(0)), 5);
  for (auto _ : state) benchmark::DoNotOptimize(gaussian_lowpass_freq(img));
}
BENCHMARK(BM_GaussianLowpass)->Arg(128)->Arg(512)->Unit(benchmark::kMillisecond);

void BM_Median3x3(benchmark::State& state) {
  const Image2D img = noise_image(std::size_t(state.range(0)), 6);
  for (auto _ : state) benchmark::DoNotOptimize(median_filter_3x3(img));
}
BENCHMARK(BM_Median3x3)->Arg(128)->Arg(512)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();

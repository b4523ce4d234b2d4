#include <gtest/gtest.h>

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>

#include "fixtures.hpp"
#include "qsadn/qs_trainer.hpp"

using namespace qsadn;
namespace t = qsadn::testing;

namespace {

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

double max_abs_diff(std::span<const double> a, std::span<const double> b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::fabs(a[i] - b[i]));
  return m;
}

// Dense A^T W (A theta - b), built row by row with explicit border clamping.
Eigen::VectorXd normal_residual(const WeightedPairSet& s, const LinearDenoiser& d) {
  const std::size_t k = d.k(), n = k * k + 1;
  const long half = long(k / 2);
  Eigen::VectorXd res = Eigen::VectorXd::Zero(Eigen::Index(n));
  for (const auto& p : s.pairs) {
    const long R = long(p.ld.rows()), C = long(p.ld.cols());
    for (long r = 0; r < R; ++r) {
      for (long c = 0; c < C; ++c) {
        Eigen::VectorXd a = Eigen::VectorXd::Zero(Eigen::Index(n));
        std::size_t at = 0;
        for (long i = -half; i <= half; ++i) {
          for (long j = -half; j <= half; ++j) {
            a[Eigen::Index(at++)] =
                p.ld(std::size_t(std::clamp(r + i, 0L, R - 1)), std::size_t(std::clamp(c + j, 0L, C - 1)));
          }
        }
        a[Eigen::Index(at)] = 1.0;
        double pred = 0.0;
        for (std::size_t q = 0; q < n; ++q) pred += a[Eigen::Index(q)] * d.coefficients()[q];
        res += p.weight * (pred - p.nd(std::size_t(r), std::size_t(c))) * a;
      }
    }
  }
  return res;
}

}  // namespace

TEST(LinearDenoiser, IdentityAndLayout) {
  const auto d = LinearDenoiser::identity(3);
  EXPECT_EQ(d.parameter_count(), 10u);
  EXPECT_EQ(d.kernel(1, 1), 1.0);
  EXPECT_EQ(d.bias(), 0.0);
  std::mt19937_64 rng(1);
  const Image2D img = t::random_image(6, 7, rng);
  EXPECT_EQ(denoise(d, img), img);
  EXPECT_EQ(code_of([] { LinearDenoiser(2); }), ErrorCode::kInvalidArgument);
  EXPECT_EQ(code_of([] { LinearDenoiser(3, {1.0, 2.0}); }), ErrorCode::kSizeMismatch);
}

TEST(Denoise, AveragingKernelOnConstant) {
  std::vector<double> c(9, 1.0 / 9.0);
  c.push_back(0.0);
  const LinearDenoiser box(3, c);
  const Image2D flat(5, 5, 4.5);
  const Image2D out = denoise(box, flat);
  for (double v : out.pixels()) EXPECT_NEAR(v, 4.5, 1e-14);
}

TEST(Denoise, BoxOnImpulseGivesPlateau) {
  std::vector<double> c(9, 1.0 / 9.0);
  c.push_back(0.0);
  const LinearDenoiser box(3, c);
  Image2D img(7, 7);
  img(3, 3) = 9.0;
  const Image2D out = denoise(box, img);
  for (std::size_t r = 0; r < 7; ++r) {
    for (std::size_t col = 0; col < 7; ++col) {
      const bool inside = r >= 2 && r <= 4 && col >= 2 && col <= 4;
      EXPECT_NEAR(out(r, col), inside ? 1.0 : 0.0, 1e-15);
    }
  }
  EXPECT_EQ(code_of([&] { denoise(LinearDenoiser(5), Image2D(4, 8)); }), ErrorCode::kImageTooSmall);
}

TEST(Denoise, ReplicateBorder) {
  // Kernel picks the upper-left neighbour; along the top row and left column that
  // falls back to the clamped edge pixel.
  std::vector<double> c(10, 0.0);
  c[0] = 1.0;
  const LinearDenoiser shift(3, c);
  const Image2D img(3, 3, std::vector<double>{1, 2, 3, 4, 5, 6, 7, 8, 9});
  EXPECT_EQ(denoise(shift, img), Image2D(3, 3, std::vector<double>{1, 1, 2, 1, 1, 2, 4, 4, 5}));
  EXPECT_EQ(code_of([&] { denoise(shift, Image2D(2, 2)); }), ErrorCode::kImageTooSmall);
}

TEST(LinearDenoiser, TextRoundTrip) {
  t::TempDir dir("theta");
  std::vector<double> c{0.1, -2.5e-7, 1.0 / 3.0, 4, 5, 6, 7, 8, 9, 1e-300};
  const LinearDenoiser d(3, c);
  d.write(dir / "theta.txt");
  const auto back = LinearDenoiser::read(dir / "theta.txt");
  EXPECT_EQ(back.k(), 3u);
  for (std::size_t i = 0; i < c.size(); ++i) EXPECT_EQ(back.coefficients()[i], c[i]);
  std::ifstream in(dir / "theta.txt");
  std::string first;
  std::getline(in, first);
  EXPECT_EQ(first, "3");
}

TEST(Objective, Examples) {
  std::mt19937_64 rng(2);
  WeightedPairSet same;
  for (int i = 0; i < 3; ++i) {
    const Image2D x = t::random_image(5, 5, rng);
    same.pairs.push_back({x, x, 0.5});
  }
  EXPECT_EQ(weighted_mse_objective(LinearDenoiser::identity(3), same), 0.0);

  for (auto& p : same.pairs) p.weight = 0.0;
  EXPECT_EQ(code_of([&] { weighted_mse_objective(LinearDenoiser::identity(3), same); }),
            ErrorCode::kAllZeroWeights);
  EXPECT_EQ(code_of([&] { weighted_mse_objective(LinearDenoiser::identity(3), WeightedPairSet{}); }),
            ErrorCode::kEmptySet);

  // One pair, two pixels, 1x1 kernel (a, b): w * sum (a x + b - y)^2 / w.
  const WeightedPairSet one{{WeightedPair{Image2D(1, 2, std::vector<double>{1, 2}),
                                          Image2D(1, 2, std::vector<double>{3, 1}), 0.4}}};
  const LinearDenoiser ab(1, {2.0, 0.5});
  const double e1 = 2.0 * 1 + 0.5 - 3, e2 = 2.0 * 2 + 0.5 - 1;
  EXPECT_NEAR(weighted_mse_objective(ab, one), e1 * e1 + e2 * e2, 1e-14);
}

TEST(Objective, ScaleInvariantInWeights) {
  auto s = t::trainer_fixture(12, 3);
  const LinearDenoiser d(3, {0.1, 0.2, 0.0, 0.3, 0.5, 0.1, 0.0, 0.1, 0.2, 0.05});
  const double base = weighted_mse_objective(d, s);
  const auto theta = closed_form_weighted_ls(s, 3);
  for (auto& p : s.pairs) p.weight *= 0.25;
  EXPECT_NEAR(weighted_mse_objective(d, s), base, 1e-12);
  EXPECT_LT(max_abs_diff(closed_form_weighted_ls(s, 3).coefficients(), theta.coefficients()), 1e-10);
}

TEST(PairSet, Validation) {
  WeightedPairSet s{{WeightedPair{Image2D(4, 4), Image2D(4, 4), 1.5}}};
  EXPECT_EQ(code_of([&] { s.validate(); }), ErrorCode::kWeightOutOfRange);
  s.pairs[0].weight = 1.0;
  s.pairs.push_back({Image2D(4, 4), Image2D(4, 5), 1.0});
  EXPECT_EQ(code_of([&] { s.validate(); }), ErrorCode::kSizeMismatch);
}

TEST(GdTrain, IdentityDataConvergesToIdentity) {
  std::mt19937_64 rng(4);
  WeightedPairSet s;
  for (int i = 0; i < 8; ++i) {
    const Image2D x = t::random_image(6, 6, rng);
    s.pairs.push_back({x, x, 1.0});
  }
  TrainConfig cfg;
  cfg.init_jitter = 0.05;
  cfg.learning_rate = 0.5;
  cfg.epochs = 4000;
  const auto d = gd_train(s, 1, cfg);
  EXPECT_NEAR(d.coefficients()[0], 1.0, 1e-4);
  EXPECT_NEAR(d.bias(), 0.0, 1e-4);
}

TEST(GdTrain, BiasAbsorbsShift) {
  std::mt19937_64 rng(5);
  WeightedPairSet s;
  for (int i = 0; i < 8; ++i) {
    const Image2D x = t::random_image(6, 6, rng);
    Image2D y = x;
    for (double& v : y.pixels()) v += 5.0;
    s.pairs.push_back({x, y, 1.0});
  }
  TrainConfig cfg;
  cfg.learning_rate = 0.2;
  cfg.epochs = 6000;
  const auto d = gd_train(s, 1, cfg);
  EXPECT_NEAR(d.coefficients()[0], 1.0, 1e-4);
  EXPECT_NEAR(d.bias(), 5.0, 1e-4);
}

TEST(GdTrain, ObjectiveNonIncreasingAtDefaults) {
  const auto s = t::trainer_fixture(64, 6);
  std::vector<double> trace;
  gd_train(s, 3, TrainConfig{}, &trace);
  ASSERT_EQ(trace.size(), TrainConfig{}.epochs + 1);
  for (std::size_t i = 1; i < trace.size(); ++i) ASSERT_LE(trace[i], trace[i - 1]) << "epoch " << i;
}

TEST(GdTrain, MatchesClosedFormAndOls) {
  auto s = t::trainer_fixture(32, 7);
  TrainConfig cfg;
  cfg.learning_rate = 0.25;
  cfg.epochs = 6000;
  const auto gd = gd_train(s, 3, cfg);
  const auto cf = closed_form_weighted_ls(s, 3);
  EXPECT_LT(max_abs_diff(gd.coefficients(), cf.coefficients()), 1e-6);

  for (auto& p : s.pairs) p.weight = 1.0;
  EXPECT_LT(max_abs_diff(gd_train(s, 3, cfg).coefficients(), closed_form_weighted_ls(s, 3).coefficients()),
            1e-6);
}

TEST(GdTrain, ZeroWeightPairsAreInert) {
  auto s = t::trainer_fixture(16, 8);
  s.pairs[3].weight = 0.0;
  s.pairs[9].weight = 0.0;
  TrainConfig cfg;
  cfg.epochs = 300;
  const auto before = gd_train(s, 3, cfg);
  for (double& v : s.pairs[3].nd.pixels()) v = v * 7.0 - 3.0;
  for (double& v : s.pairs[9].ld.pixels()) v = 100.0;
  const auto after = gd_train(s, 3, cfg);
  for (std::size_t i = 0; i < before.parameter_count(); ++i) {
    EXPECT_EQ(before.coefficients()[i], after.coefficients()[i]);
  }
}

TEST(GdTrain, DivergenceDetected) {
  const auto s = t::trainer_fixture(8, 9);
  TrainConfig cfg;
  cfg.learning_rate = 50.0;
  cfg.epochs = 100;
  EXPECT_EQ(code_of([&] { gd_train(s, 3, cfg); }), ErrorCode::kDivergence);
  cfg.learning_rate = 0.0;
  EXPECT_EQ(code_of([&] { gd_train(s, 3, cfg); }), ErrorCode::kInvalidArgument);
}

TEST(GdTrain, SeedOnlyMovesTheStart) {
  const auto s = t::trainer_fixture(8, 10);
  TrainConfig a, b;
  a.epochs = b.epochs = 5;
  b.seed = 1;
  EXPECT_NE(gd_train(s, 3, a).coefficients()[0], gd_train(s, 3, b).coefficients()[0]);
  EXPECT_EQ(gd_train(s, 3, a).coefficients()[0], gd_train(s, 3, a).coefficients()[0]);
}

TEST(ClosedForm, IdentityData) {
  std::mt19937_64 rng(11);
  WeightedPairSet s;
  for (int i = 0; i < 6; ++i) {
    const Image2D x = t::random_image(7, 7, rng);
    s.pairs.push_back({x, x, 0.7});
  }
  const auto d = closed_form_weighted_ls(s, 3);
  EXPECT_LT(max_abs_diff(d.coefficients(), LinearDenoiser::identity(3).coefficients()), 1e-10);
}

TEST(ClosedForm, DoubledWeightEqualsDuplicate) {
  auto base = t::trainer_fixture(10, 12);
  for (auto& p : base.pairs) p.weight = 0.5;
  auto doubled = base;
  doubled.pairs[0].weight = 1.0;
  auto duplicated = base;
  duplicated.pairs.push_back(base.pairs[0]);
  EXPECT_LT(max_abs_diff(closed_form_weighted_ls(doubled, 3).coefficients(),
                         closed_form_weighted_ls(duplicated, 3).coefficients()),
            1e-12);
}

TEST(ClosedForm, NormalEquationResidualIsSmall) {
  const auto s = t::trainer_fixture(20, 13);
  const auto d = closed_form_weighted_ls(s, 3);
  EXPECT_LT(normal_residual(s, d).lpNorm<Eigen::Infinity>(), 1e-8);
}

TEST(ClosedForm, RankDeficientDesign) {
  WeightedPairSet s{{WeightedPair{Image2D(5, 5, 0.3), Image2D(5, 5, 0.6), 1.0}}};
  EXPECT_EQ(code_of([&] { closed_form_weighted_ls(s, 3); }), ErrorCode::kRankDeficient);
  s.pairs[0].weight = 0.0;
  EXPECT_EQ(code_of([&] { closed_form_weighted_ls(s, 3); }), ErrorCode::kAllZeroWeights);
}

TEST(PairsFromManifest, NormalisesByDeclaredRange) {
  const ImageVolume ld("ld", {Image2D(8, 8, 51.0)}, IntensityRange{0, 255});
  const ImageVolume nd("nd", {Image2D(8, 8, 102.0)}, IntensityRange{0, 255});
  PairManifest m;
  m.header.patch_size = 4;
  m.records.push_back(PatchMatch{{"ld", 0, 4, 0}, {"nd", 0, 1, 2}, 4, 0, 0.6, 0.6});
  const std::vector<ImageVolume> vols{ld, nd};
  const auto s = pairs_from_manifest(m, vols);
  ASSERT_EQ(s.pairs.size(), 1u);
  EXPECT_EQ(s.pairs[0].weight, 0.6);
  EXPECT_EQ(s.pairs[0].ld, Image2D(4, 4, 0.2));
  EXPECT_EQ(s.pairs[0].nd, Image2D(4, 4, 0.4));
  EXPECT_EQ(pairs_from_manifest(m, vols, false).pairs[0].nd, Image2D(4, 4, 102.0));
  m.records[0].nd.volume_id = "gone";
  EXPECT_EQ(code_of([&] { pairs_from_manifest(m, vols); }), ErrorCode::kFileNotFound);
}

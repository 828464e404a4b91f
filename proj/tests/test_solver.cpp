#include <gtest/gtest.h>

#include <Eigen/Dense>
#include <cmath>
#include <numeric>

#include "sdeblur/blur_model.hpp"
#include "sdeblur/error.hpp"
#include "sdeblur/metrics.hpp"
#include "sdeblur/parallel.hpp"
#include "sdeblur/solver.hpp"
#include "test_support.hpp"

namespace sdeblur {
namespace {

using test::dot;
using test::expect_error;
using test::random_image;

GradientField unit_rho(int w, int h, int ch) {
  GradientField g;
  g.width = w;
  g.height = h;
  g.channels = ch;
  g.dx.assign(static_cast<std::size_t>(w) * h * ch, 1.0);
  g.dy = g.dx;
  return g;
}

// Smooth-ish test image: a few blobs and edges.
ImageBuffer test_scene(int size) {
  ImageBuffer img(size, size, 3);
  for (int y = 0; y < size; ++y) {
    for (int x = 0; x < size; ++x) {
      const double u = static_cast<double>(x) / size;
      const double v = static_cast<double>(y) / size;
      img.at(x, y, 0) = 0.2 + 0.6 * (((x / 8) + (y / 8)) % 2);
      img.at(x, y, 1) = 0.5 + 0.4 * std::sin(6.0 * u) * std::cos(5.0 * v);
      img.at(x, y, 2) = (u - 0.5) * (u - 0.5) + (v - 0.5) * (v - 0.5) < 0.06 ? 0.9 : 0.1;
    }
  }
  return img;
}

BlurOperator translation_operator(int size, double px) {
  const double c = 0.5 * (size - 1);
  const CameraModel cam = CameraModel::pinhole(100.0, c, c);
  PlanePatch p;
  p.normal = Eigen::Vector3d(0.0, 0.0, 0.5);
  p.motion = se3_log(make_motion(Eigen::Vector3d::Zero(), Eigen::Vector3d(px * 2.0 / 100.0, 0.0, 0.0)));
  const std::vector<PlanePatch> patches{p};
  return assemble_operator(cam, patches, SegmentationMap(size, size, 0), BlurSpec{});
}

TEST(SolverConfig, Validation) {
  SolverConfig cfg;
  EXPECT_NO_THROW(cfg.validate());
  EXPECT_DOUBLE_EQ(cfg.k_sigma, 4000.0 / 3.0);
  cfg.alpha = 0.0;
  expect_error(ErrorCode::kInvariantViolation, [&] { cfg.validate(); });
  cfg = SolverConfig{};
  cfg.epsilon = 1.0;
  expect_error(ErrorCode::kInvariantViolation, [&] { cfg.validate(); });
  cfg = SolverConfig{};
  cfg.prior_exponent = 2.0;
  expect_error(ErrorCode::kInvariantViolation, [&] { cfg.validate(); });
}

TEST(BoundaryWeights, ExactEstimateGivesOnes) {
  const BlurOperator op = translation_operator(24, 4.0);
  const ImageBuffer sharp = random_image(24, 24, 3, 5);
  const ImageBuffer blurred = apply_blur(op, sharp);
  const WeightMap w = update_boundary_weights(blurred, op, sharp, SolverConfig{});
  for (double v : w.w) EXPECT_DOUBLE_EQ(v, 1.0);
}

TEST(BoundaryWeights, ResidualExamples) {
  const BlurOperator op = BlurOperator::identity(4, 3);
  const ImageBuffer estimate(4, 3, 3, 0.5);
  const SolverConfig cfg;
  {
    const ImageBuffer blurred(4, 3, 3, 0.55);
    const WeightMap w = update_boundary_weights(blurred, op, estimate, cfg);
    for (double v : w.w) EXPECT_NEAR(v, std::exp(-10.0), 1e-12);
    EXPECT_NEAR(w.w[0], 4.54e-5, 1e-7);
  }
  {
    const ImageBuffer blurred(4, 3, 3, 0.49);
    const WeightMap w = update_boundary_weights(blurred, op, estimate, cfg);
    for (double v : w.w) EXPECT_NEAR(v, std::exp(-0.4), 1e-12);
    EXPECT_NEAR(w.w[0], 0.670, 1e-3);
  }
}

TEST(BoundaryWeights, BoundedAndDimensionChecked) {
  const BlurOperator op = BlurOperator::identity(6, 6);
  const WeightMap w = update_boundary_weights(random_image(6, 6, 3, 1), op,
                                              random_image(6, 6, 3, 2), SolverConfig{});
  for (double v : w.w) {
    EXPECT_GE(v, 0.0);
    EXPECT_LE(v, 1.0);
  }
  expect_error(ErrorCode::kDimensionMismatch, [&] {
    update_boundary_weights(ImageBuffer(6, 5, 3), op, ImageBuffer(6, 5, 3), SolverConfig{});
  });
}

TEST(InitWeights, FollowsMask) {
  OcclusionMask mask(5, 4);
  for (double v : init_weights(mask).w) EXPECT_EQ(v, 1.0);
  mask.occluded[7] = 1;
  const WeightMap w = init_weights(mask);
  EXPECT_EQ(w.w[7], 0.0);
  EXPECT_EQ(std::accumulate(w.w.begin(), w.w.end(), 0.0), 19.0);
  EXPECT_EQ(mask.count(), 1u);
  std::fill(mask.occluded.begin(), mask.occluded.end(), 1);
  for (double v : init_weights(mask).w) EXPECT_EQ(v, 0.0);
}

TEST(PriorWeights, Examples) {
  GradientField g = unit_rho(3, 1, 1);
  g.dx = {1.0, 0.0, 0.1};
  g.dy = {-1.0, 0.005, -0.1};
  const GradientField rho = irls_prior_weights(g, SolverConfig{});
  EXPECT_NEAR(rho.dx[0], 1.0, 1e-12);
  EXPECT_NEAR(rho.dx[1], std::pow(0.01, -1.2), 1e-9);
  EXPECT_NEAR(rho.dx[1], 251.19, 0.01);
  EXPECT_NEAR(rho.dx[2], 15.85, 0.01);
  EXPECT_NEAR(rho.dy[0], 1.0, 1e-12);
  EXPECT_NEAR(rho.dy[1], rho.dx[1], 1e-12);
  EXPECT_NEAR(rho.dy[2], rho.dx[2], 1e-12);
}

TEST(Gradient, ConstantAndRamp) {
  const ImageBuffer c(7, 5, 3, 0.3);
  const GradientField gc = gradient(c);
  for (double v : gc.dx) EXPECT_EQ(v, 0.0);
  for (double v : gc.dy) EXPECT_EQ(v, 0.0);

  const int w = 10;
  ImageBuffer ramp(w, 4, 1);
  for (int y = 0; y < 4; ++y) {
    for (int x = 0; x < w; ++x) ramp.at(x, y) = static_cast<double>(x) / w;
  }
  const GradientField g = gradient(ramp);
  for (int y = 0; y < 4; ++y) {
    for (int x = 0; x < w; ++x) {
      const std::size_t i = static_cast<std::size_t>(y) * w + x;
      EXPECT_NEAR(g.dx[i], x + 1 < w ? 1.0 / w : 0.0, 1e-15);
      EXPECT_EQ(g.dy[i], 0.0);
    }
  }
}

TEST(Gradient, TransposeIsAdjoint) {
  const ImageBuffer u = random_image(8, 8, 3, 21);
  GradientField p = gradient(random_image(8, 8, 3, 22));
  const ImageBuffer r1 = random_image(8, 8, 3, 23);
  const ImageBuffer r2 = random_image(8, 8, 3, 24);
  std::copy(r1.data().begin(), r1.data().end(), p.dx.begin());
  std::copy(r2.data().begin(), r2.data().end(), p.dy.begin());
  const GradientField gu = gradient(u);
  double lhs = 0.0;
  for (std::size_t i = 0; i < gu.dx.size(); ++i) lhs += gu.dx[i] * p.dx[i] + gu.dy[i] * p.dy[i];
  const double rhs = dot(u, gradient_transpose(p));
  EXPECT_NEAR(lhs, rhs, 1e-10);
}

TEST(SolveInner, IdentityOperatorReturnsData) {
  const ImageBuffer blurred = random_image(16, 16, 3, 31);
  SolverConfig cfg;
  cfg.alpha = 1e-12;
  const ImageBuffer out =
      solve_inner(blurred, BlurOperator::identity(16, 16), WeightMap(16, 16, 1.0),
                  unit_rho(16, 16, 3), cfg, ImageBuffer(16, 16, 3, 0.5));
  double worst = 0.0;
  for (std::size_t i = 0; i < out.size(); ++i) {
    worst = std::max(worst, std::abs(out.data()[i] - blurred.data()[i]));
  }
  EXPECT_LT(worst, 1e-6);
}

TEST(SolveInner, ExactEstimateIsFixedPoint) {
  const BlurOperator op = translation_operator(24, 3.0);
  const ImageBuffer sharp = random_image(24, 24, 1, 7);
  const ImageBuffer blurred = apply_blur(op, sharp);
  SolverConfig cfg;
  cfg.alpha = 1e-14;
  const ImageBuffer out =
      solve_inner(blurred, op, WeightMap(24, 24, 1.0), unit_rho(24, 24, 1), cfg, sharp);
  for (std::size_t i = 0; i < out.size(); ++i) {
    EXPECT_NEAR(out.data()[i], sharp.data()[i], 1e-9);
  }
}

TEST(SolveInner, ZeroWeightsKeepMeanAndSmooth) {
  const ImageBuffer start = random_image(16, 16, 3, 41);
  const ImageBuffer blurred = random_image(16, 16, 3, 42);
  const SolverConfig cfg;
  const GradientField rho = unit_rho(16, 16, 3);
  const WeightMap zero(16, 16, 0.0);
  const BlurOperator op = BlurOperator::identity(16, 16);
  const ImageBuffer out = solve_inner(blurred, op, zero, rho, cfg, start);
  for (int c = 0; c < 3; ++c) {
    double m0 = 0.0;
    double m1 = 0.0;
    for (int y = 0; y < 16; ++y) {
      for (int x = 0; x < 16; ++x) {
        m0 += start.at(x, y, c);
        m1 += out.at(x, y, c);
      }
    }
    EXPECT_NEAR(m0, m1, 1e-9);
  }
  // The prior alone drives the estimate towards flat.
  EXPECT_LT(inner_energy(blurred, op, zero, rho, cfg, out),
            1e-3 * inner_energy(blurred, op, zero, rho, cfg, start));
}

TEST(SolveInner, EnergyTraceIsMonotone) {
  const int size = 64;
  const BlurOperator op = translation_operator(size, 6.0);
  const ImageBuffer blurred = apply_blur(op, test_scene(size));
  const SolverConfig cfg;
  const GradientField rho = irls_prior_weights(gradient(blurred), cfg);
  const WeightMap w(size, size, 1.0);
  std::vector<double> energies{inner_energy(blurred, op, w, rho, cfg, blurred)};
  const ImageBuffer out = solve_inner(blurred, op, w, rho, cfg, blurred,
                                      [&](const TraceRecord& r) { energies.push_back(r.energy); });
  ASSERT_EQ(energies.size(), 1u + 3u * static_cast<std::size_t>(cfg.cg_iterations));
  for (std::size_t k = 1; k < energies.size(); ++k) {
    EXPECT_LE(energies[k], energies[k - 1] * (1.0 + 1e-8)) << k;
  }
  EXPECT_LT(energies.back(), energies.front());
  EXPECT_NEAR(energies.back(), inner_energy(blurred, op, w, rho, cfg, out),
              1e-9 * energies.back());
}

TEST(SolveInner, DimensionChecks) {
  const BlurOperator op = BlurOperator::identity(8, 8);
  const ImageBuffer img(8, 8, 3);
  expect_error(ErrorCode::kDimensionMismatch, [&] {
    solve_inner(img, op, WeightMap(8, 7, 1.0), unit_rho(8, 8, 3), SolverConfig{}, img);
  });
  expect_error(ErrorCode::kDimensionMismatch, [&] {
    solve_inner(img, op, WeightMap(8, 8, 1.0), unit_rho(8, 8, 1), SolverConfig{}, img);
  });
}

// Deviation statistics of deblur() under the identity operator.
std::pair<double, double> identity_deviation(const ImageBuffer& img, double alpha = 0.001) {
  SolverConfig cfg;
  cfg.alpha = alpha;
  const DeblurResult r = deblur(img, BlurOperator::identity(img.width(), img.height()),
                                OcclusionMask(img.width(), img.height()), cfg);
  EXPECT_EQ(r.weight_changes.size(), 10u);
  double worst = 0.0;
  double sq = 0.0;
  for (std::size_t i = 0; i < img.size(); ++i) {
    const double d = r.image.data()[i] - img.data()[i];
    worst = std::max(worst, std::abs(d));
    sq += d * d;
  }
  return {worst, std::sqrt(sq / static_cast<double>(img.size()))};
}

TEST(Deblur, IdentityOperatorNearlyUnchanged) {
  ImageBuffer smooth(32, 32, 3);
  for (int y = 0; y < 32; ++y) {
    for (int x = 0; x < 32; ++x) {
      for (int c = 0; c < 3; ++c) {
        smooth.at(x, y, c) = 0.5 + 0.3 * std::sin(0.2 * x + c) * std::cos(0.15 * y);
      }
    }
  }
  // Where gradients vanish rho reaches epsilon^-1.2 = 251, so extrema are
  // flattened by an amount proportional to alpha.
  const auto [worst, rms] = identity_deviation(smooth);
  EXPECT_LT(worst, 5e-3);
  EXPECT_LT(rms, 1.5e-3);
  const auto [worst_small, rms_small] = identity_deviation(smooth, 1e-4);
  EXPECT_LT(worst_small, 1e-3);
  EXPECT_LT(rms_small, 1.5e-4);
  // Hard 0.6 steps: the prior rounds edges by a few 1e-3 at most.
  const auto [edge_worst, edge_rms] = identity_deviation(test_scene(32));
  EXPECT_LT(edge_worst, 1e-2);
  EXPECT_LT(edge_rms, 1e-3);
}

TEST(Deblur, TranslationBlurGainsThreeDecibels) {
  const int size = 64;
  const BlurOperator op = translation_operator(size, 6.0);
  const ImageBuffer sharp = test_scene(size);
  const ImageBuffer blurred = apply_blur(op, sharp);
  const DeblurResult r = deblur(blurred, op, OcclusionMask(size, size), SolverConfig{});
  const auto valid = in_domain_mask(op);
  EXPECT_GT(psnr_masked(r.image, sharp, valid), psnr_masked(blurred, sharp, valid) + 3.0);
  EXPECT_TRUE(r.image.is_normalized());
  for (double v : r.weights.w) {
    EXPECT_GE(v, 0.0);
    EXPECT_LE(v, 1.0);
  }
}

TEST(Deblur, DisabledBoundaryWeightsStayOne) {
  const int size = 24;
  const BlurOperator op = translation_operator(size, 4.0);
  OcclusionMask mask(size, size);
  std::fill(mask.occluded.begin(), mask.occluded.begin() + 50, 1);
  SolverConfig cfg;
  cfg.boundary_weights = false;
  cfg.outer_iterations = 2;
  const DeblurResult r = deblur(apply_blur(op, test_scene(size)), op, mask, cfg);
  for (double v : r.weights.w) EXPECT_EQ(v, 1.0);
}

TEST(Deblur, TraceRecordsOuterRounds) {
  const int size = 24;
  const BlurOperator op = translation_operator(size, 4.0);
  SolverConfig cfg;
  cfg.outer_iterations = 3;
  cfg.cg_iterations = 5;
  std::vector<TraceRecord> outer;
  std::size_t cg = 0;
  const DeblurResult r = deblur(apply_blur(op, test_scene(size)), op, OcclusionMask(size, size), cfg,
                                [&](const TraceRecord& rec) {
                                  if (rec.kind == TraceRecord::Kind::kOuter) {
                                    outer.push_back(rec);
                                  } else {
                                    ++cg;
                                  }
                                });
  ASSERT_EQ(outer.size(), 3u);
  EXPECT_EQ(cg, 3u * 5u * 3u);
  for (std::size_t k = 0; k < outer.size(); ++k) {
    EXPECT_EQ(outer[k].max_weight_change, r.weight_changes[k]);
  }
  const std::string line = format_trace(outer[0]);
  EXPECT_EQ(line.rfind("outer outer=", 0), 0u) << line;
  EXPECT_NE(line.find("max_weight_change="), std::string::npos);
}

TEST(Deblur, BitIdenticalAcrossThreadCounts) {
  const int size = 48;
  const BlurOperator op = translation_operator(size, 5.0);
  const ImageBuffer blurred = apply_blur(op, test_scene(size));
  SolverConfig cfg;
  cfg.outer_iterations = 3;
  DeblurResult ref;
  {
    ScopedThreadCount t(1);
    ref = deblur(blurred, op, OcclusionMask(size, size), cfg);
  }
  for (unsigned threads : {2u, 4u, 8u}) {
    ScopedThreadCount t(threads);
    const DeblurResult r = deblur(blurred, op, OcclusionMask(size, size), cfg);
    EXPECT_EQ(r.image, ref.image) << threads;
    EXPECT_EQ(r.weights.w, ref.weights.w) << threads;
  }
}

}  // namespace
}  // namespace sdeblur

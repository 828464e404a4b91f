#include <gtest/gtest.h>

#include <cmath>
#include <map>
#include <numbers>

#include <Eigen/Dense>

#include "sdeblur/blur_model.hpp"
#include "sdeblur/error.hpp"
#include "sdeblur/parallel.hpp"
#include "test_support.hpp"

namespace sdeblur {
namespace {

using test::dot;
using test::expect_error;
using test::random_image;

constexpr double kFocal = 100.0;
constexpr double kDepth = 2.0;

CameraModel camera(int size) {
  const double c = 0.5 * (size - 1);
  return CameraModel::pinhole(kFocal, c, c);
}

// Fronto-parallel plane translating by `px` pixels per frame interval.
PlanePatch translating_patch(Eigen::Vector2d px, int id = 0) {
  PlanePatch p;
  p.normal = Eigen::Vector3d(0.0, 0.0, 1.0 / kDepth);
  p.motion = se3_log(make_motion(Eigen::Vector3d::Zero(),
                                 Eigen::Vector3d(px.x(), px.y(), 0.0) * kDepth / kFocal));
  p.segment_id = id;
  return p;
}

// In-plane rotation about the optical-axis direction through image point c.
PlanePatch spinning_patch(const CameraModel& cam, Eigen::Vector2d c, double angle) {
  PlanePatch p;
  p.normal = Eigen::Vector3d(0.0, 0.0, 1.0 / kDepth);
  const Eigen::Vector3d pivot =
      kDepth * (cam.intrinsics.inverse() * Eigen::Vector3d(c.x(), c.y(), 1.0));
  p.motion = se3_log(rotation_about(Eigen::Vector3d::UnitZ(), angle, pivot));
  return p;
}

std::map<std::uint32_t, double> as_map(std::span<const SparseEntry> row) {
  std::map<std::uint32_t, double> m;
  for (const auto& e : row) m[e.index] += e.weight;
  return m;
}

double l1_distance(std::span<const SparseEntry> a, std::span<const SparseEntry> b) {
  auto m = as_map(a);
  for (const auto& e : b) m[e.index] -= e.weight;
  double s = 0.0;
  for (const auto& [k, v] : m) s += std::abs(v);
  return s;
}

double row_sum(std::span<const SparseEntry> row) {
  double s = 0.0;
  for (const auto& e : row) s += e.weight;
  return s;
}

// Dense bilinear rasterisation of the segment a..b with many samples.
SparseRow dense_segment(Eigen::Vector2d a, Eigen::Vector2d b, int width, int samples) {
  std::map<std::uint32_t, double> m;
  for (int k = 0; k < samples; ++k) {
    const Eigen::Vector2d p = a + (b - a) * ((k + 0.5) / samples);
    const int x0 = static_cast<int>(std::floor(p.x()));
    const int y0 = static_cast<int>(std::floor(p.y()));
    const double fx = p.x() - x0;
    const double fy = p.y() - y0;
    const double w = 1.0 / samples;
    m[static_cast<std::uint32_t>(y0 * width + x0)] += w * (1 - fx) * (1 - fy);
    m[static_cast<std::uint32_t>(y0 * width + x0 + 1)] += w * fx * (1 - fy);
    m[static_cast<std::uint32_t>((y0 + 1) * width + x0)] += w * (1 - fx) * fy;
    m[static_cast<std::uint32_t>((y0 + 1) * width + x0 + 1)] += w * fx * fy;
  }
  SparseRow row;
  for (const auto& [k, v] : m) {
    if (v != 0.0) row.push_back({k, v});
  }
  return row;
}

void expect_operators_near(const BlurOperator& a, const BlurOperator& b, double tol) {
  ASSERT_EQ(a.width(), b.width());
  ASSERT_EQ(a.height(), b.height());
  for (std::size_t i = 0; i < a.pixel_count(); ++i) {
    ASSERT_LT(l1_distance(a.row(i), b.row(i)), tol) << "row " << i;
  }
}

TEST(BlurSpec, MidpointOffsets) {
  const BlurSpec spec{0.5, 4};
  const auto t = spec.sample_offsets();
  ASSERT_EQ(t.size(), 4u);
  EXPECT_DOUBLE_EQ(t[0], -0.1875);
  EXPECT_DOUBLE_EQ(t[3], 0.1875);
  expect_error(ErrorCode::kInvariantViolation, [] { BlurSpec{0.0, 10}.validate(); });
  expect_error(ErrorCode::kInvariantViolation, [] { BlurSpec{1.0, 0}.validate(); });
}

TEST(BlurModel, IdentityTwistGivesDeltaRow) {
  const CameraModel cam = camera(16);
  PlanePatch patch;
  patch.normal = Eigen::Vector3d(0.0, 0.0, 0.5);
  const SparseRow row = homography_blur_row(5, 7, 16, 16, cam, patch, BlurSpec{});
  ASSERT_EQ(row.size(), 1u);
  EXPECT_EQ(row[0].index, 7u * 16 + 5);
  EXPECT_NEAR(row[0].weight, 1.0, 1e-12);
}

TEST(BlurModel, TranslationMatchesDenseLineOracle) {
  const int size = 64;
  const BlurSpec spec;
  const PlanePatch patch = translating_patch({8.0, 0.0});
  for (const Eigen::Vector2i px : {Eigen::Vector2i(32, 30), Eigen::Vector2i(20, 11)}) {
    const SparseRow row = homography_blur_row(px.x(), px.y(), size, size, camera(size), patch, spec);
    EXPECT_NEAR(row_sum(row), 1.0, 1e-12);
    const Eigen::Vector2d c = px.cast<double>();
    const SparseRow oracle =
        dense_segment(c - Eigen::Vector2d(4.0, 0.0), c + Eigen::Vector2d(4.0, 0.0), size, 10000);
    EXPECT_LT(l1_distance(row, oracle), 0.02);
    // Support is a horizontal segment of about 8 px.
    for (const auto& e : row) {
      EXPECT_EQ(static_cast<int>(e.index) / size, px.y());
      EXPECT_LE(std::abs(static_cast<int>(e.index) % size - px.x()), 5);
    }
  }
}

TEST(BlurModel, SpinKernelLiesOnCircle) {
  const int size = 256;
  const CameraModel cam = camera(size);
  const Eigen::Vector2d centre(60.0, 128.0);
  const PlanePatch patch = spinning_patch(cam, centre, 10.0 * std::numbers::pi / 180.0);
  const Eigen::Vector2d px(160.0, 128.0);  // radius 100
  for (const auto& h : sample_homographies(cam, patch, BlurSpec{})) {
    const Eigen::Vector2d p = apply_homography(h, px);
    EXPECT_NEAR((p - centre).norm(), 100.0, 0.5);
  }
  // Weighted centroid of the stamped row sits on the arc's chord side but
  // its mass stays within half a pixel of the circle locally.
  const SparseRow row = homography_blur_row(160, 128, size, size, cam, patch, BlurSpec{});
  for (const auto& e : row) {
    const Eigen::Vector2d q(static_cast<double>(e.index % size), static_cast<double>(e.index / size));
    EXPECT_LT(std::abs((q - centre).norm() - 100.0), 1.5);
  }
}

TEST(BlurModel, FlowAgreesWithHomographyOnTranslation) {
  const int size = 48;
  const BlurSpec spec;
  const PlanePatch patch = translating_patch({8.0, 0.0});
  FlowField flow(size, size);
  for (auto& f : flow.forward) f = Eigen::Vector2d(8.0, 0.0);
  for (auto& b : flow.backward) b = Eigen::Vector2d(-8.0, 0.0);
  const SegmentationMap seg(size, size, 0);
  const std::vector<PlanePatch> patches{patch};
  const BlurOperator h = assemble_operator(camera(size), patches, seg, spec);
  const BlurOperator f = assemble_flow_operator(flow, spec);
  double worst = 0.0;
  for (std::size_t i = 0; i < h.pixel_count(); ++i) {
    worst = std::max(worst, l1_distance(h.row(i), f.row(i)));
  }
  EXPECT_LT(worst, 1e-6);
}

TEST(BlurModel, FlowChordDeviatesFromSpinArc) {
  const int size = 256;
  const CameraModel cam = camera(size);
  const Eigen::Vector2d centre(60.0, 128.0);
  const PlanePatch patch = spinning_patch(cam, centre, 10.0 * std::numbers::pi / 180.0);
  const SegmentationMap seg(size, size, 0);
  const std::vector<PlanePatch> patches{patch};
  const FlowField flow = project_scene_flow(cam, patches, seg);
  const std::size_t i = 128u * size + 160u;
  // Chord samples x + s * forward, s in (0, 1/2]; their distance from the
  // circle grows to the sagitta r (1 - cos 5 deg) = 0.38 px.
  const Eigen::Vector2d px(160.0, 128.0);
  double worst = 0.0;
  for (double s : BlurSpec{}.sample_offsets()) {
    const Eigen::Vector2d q = px + (s > 0 ? s * flow.forward[i] : -s * flow.backward[i]);
    worst = std::max(worst, std::abs((q - centre).norm() - 100.0));
  }
  EXPECT_GT(worst, 0.3);
}

TEST(BlurModel, ZeroFlowIsIdentity) {
  const FlowField flow(12, 9);
  expect_operators_near(assemble_flow_operator(flow, BlurSpec{}), BlurOperator::identity(12, 9),
                        1e-12);
}

TEST(BlurModel, IdentityMotionGivesIdentityOperator) {
  PlanePatch patch;
  patch.normal = Eigen::Vector3d(0.01, 0.0, 0.5);
  const std::vector<PlanePatch> patches{patch};
  expect_operators_near(
      assemble_operator(camera(20), patches, SegmentationMap(20, 20, 0), BlurSpec{}),
      BlurOperator::identity(20, 20), 1e-12);
}

TEST(BlurModel, AdjointIdentity) {
  const int size = 40;
  const PlanePatch a = translating_patch({5.3, -2.1}, 0);
  PlanePatch b = spinning_patch(camera(size), {10.0, 30.0}, 0.2);
  b.segment_id = 1;
  SegmentationMap seg(size, size, 0);
  for (int y = 0; y < size; ++y) {
    for (int x = size / 2; x < size; ++x) seg.at(x, y) = 1;
  }
  const std::vector<PlanePatch> patches{a, b};
  const BlurOperator op = assemble_operator(camera(size), patches, seg, BlurSpec{});
  const ImageBuffer u = random_image(size, size, 3, 1);
  const ImageBuffer v = random_image(size, size, 3, 2);
  const double lhs = dot(apply_blur(op, u), v);
  const double rhs = dot(u, apply_blur_transpose(op, v));
  EXPECT_NEAR(lhs, rhs, 1e-10 * std::abs(lhs));
}

TEST(BlurModel, StepEdgeBecomesRamp) {
  const int size = 48;
  const std::vector<PlanePatch> patches{translating_patch({8.0, 0.0})};
  const BlurOperator op =
      assemble_operator(camera(size), patches, SegmentationMap(size, size, 0), BlurSpec{});
  ImageBuffer step(size, size, 1);
  for (int y = 0; y < size; ++y) {
    for (int x = 24; x < size; ++x) step.at(x, y) = 1.0;
  }
  const ImageBuffer out = apply_blur(op, step);
  // Box of width 8 convolved with a step whose jump lies between 23 and 24:
  // linear from 0 at x = 19.5 to 1 at x = 27.5 (bilinear rounds the ends).
  for (int x = 20; x <= 27; ++x) {
    EXPECT_NEAR(out.at(x, 10), (x - 19.5) / 8.0, 0.02) << x;
  }
  EXPECT_NEAR(out.at(12, 10), 0.0, 1e-12);
  EXPECT_NEAR(out.at(35, 10), 1.0, 1e-12);
}

TEST(BlurModel, ConstantImagePreservedOnFullRows) {
  const int size = 32;
  const std::vector<PlanePatch> patches{translating_patch({6.0, 3.0})};
  const BlurOperator op =
      assemble_operator(camera(size), patches, SegmentationMap(size, size, 0), BlurSpec{});
  const ImageBuffer c(size, size, 3, 0.37);
  const ImageBuffer out = apply_blur(op, c);
  int interior = 0;
  for (int y = 0; y < size; ++y) {
    for (int x = 0; x < size; ++x) {
      const auto row = op.row(x, y);
      for (const auto& e : row) EXPECT_GE(e.weight, 0.0);
      EXPECT_LE(row.size(), 4u * BlurSpec{}.samples);
      if (!row_fully_in_domain(row)) {
        EXPECT_LT(row_sum(row), 1.0);
        continue;
      }
      ++interior;
      for (int ch = 0; ch < 3; ++ch) EXPECT_NEAR(out.at(x, y, ch), 0.37, 1e-12);
    }
  }
  EXPECT_GT(interior, 400);
}

TEST(BlurModel, TwoSegmentsUseOwnHomography) {
  const int size = 24;
  const CameraModel cam = camera(size);
  const PlanePatch left = translating_patch({4.0, 0.0}, 3);
  PlanePatch right = translating_patch({0.0, -5.0}, 9);
  SegmentationMap seg(size, size, 3);
  for (int y = 0; y < size; ++y) {
    for (int x = 12; x < size; ++x) seg.at(x, y) = 9;
  }
  const std::vector<PlanePatch> patches{left, right};
  const BlurSpec spec;
  const BlurOperator op = assemble_operator(cam, patches, seg, spec);
  for (int y = 0; y < size; ++y) {
    for (int x = 0; x < size; ++x) {
      const PlanePatch& p = x < 12 ? left : right;
      const SparseRow expected = homography_blur_row(x, y, size, size, cam, p, spec);
      const auto got = op.row(x, y);
      ASSERT_EQ(got.size(), expected.size());
      for (std::size_t k = 0; k < got.size(); ++k) EXPECT_EQ(got[k], expected[k]);
    }
  }
}

TEST(BlurModel, MissingSegmentIsReported) {
  const std::vector<PlanePatch> patches{translating_patch({1.0, 0.0}, 0)};
  SegmentationMap seg(8, 8, 0);
  seg.at(3, 3) = 42;
  expect_error(ErrorCode::kMissingSegment,
               [&] { assemble_operator(camera(8), patches, seg, BlurSpec{}); });
}

TEST(BlurModel, ConstantFlowKernelIsShiftInvariant) {
  const int size = 40;
  FlowField flow(size, size);
  for (auto& f : flow.forward) f = Eigen::Vector2d(8.0, 0.0);
  for (auto& b : flow.backward) b = Eigen::Vector2d(-8.0, 0.0);
  const BlurOperator op = assemble_flow_operator(flow, BlurSpec{});
  const auto ref = op.row(20, 20);
  for (int y = 5; y < 35; y += 7) {
    for (int x = 8; x < 32; x += 5) {
      const auto row = op.row(x, y);
      ASSERT_EQ(row.size(), ref.size());
      const std::int64_t shift = (y - 20) * size + (x - 20);
      for (std::size_t k = 0; k < row.size(); ++k) {
        EXPECT_EQ(static_cast<std::int64_t>(row[k].index),
                  static_cast<std::int64_t>(ref[k].index) + shift);
        EXPECT_NEAR(row[k].weight, ref[k].weight, 1e-15);
      }
    }
  }
}

TEST(BlurModel, ProjectedFlowOfTranslationIsConstant) {
  const int size = 16;
  const std::vector<PlanePatch> patches{translating_patch({3.0, -2.0})};
  const FlowField flow = project_scene_flow(camera(size), patches, SegmentationMap(size, size, 0));
  for (std::size_t i = 0; i < flow.forward.size(); ++i) {
    EXPECT_LT((flow.forward[i] - Eigen::Vector2d(3.0, -2.0)).norm(), 1e-9);
    EXPECT_LT((flow.backward[i] - Eigen::Vector2d(-3.0, 2.0)).norm(), 1e-9);
  }
}

TEST(BlurModel, DimensionMismatchIsReported) {
  const BlurOperator op = BlurOperator::identity(8, 8);
  expect_error(ErrorCode::kDimensionMismatch, [&] { apply_blur(op, ImageBuffer(8, 9, 1)); });
  expect_error(ErrorCode::kDimensionMismatch,
               [&] { apply_blur_transpose(op, ImageBuffer(7, 8, 1)); });
}

TEST(BlurModel, IdentityOperatorLeavesImage) {
  const ImageBuffer img = random_image(9, 7, 3, 4);
  const BlurOperator op = BlurOperator::identity(9, 7);
  EXPECT_EQ(apply_blur(op, img), img);
  EXPECT_EQ(apply_blur_transpose(op, img), img);
}

TEST(BlurModel, AssemblyIndependentOfThreadCount) {
  const int size = 48;
  const std::vector<PlanePatch> patches{spinning_patch(camera(size), {5.0, 5.0}, 0.15)};
  const SegmentationMap seg(size, size, 0);
  BlurOperator one;
  BlurOperator many;
  {
    ScopedThreadCount t(1);
    one = assemble_operator(camera(size), patches, seg, BlurSpec{});
  }
  {
    ScopedThreadCount t(4);
    many = assemble_operator(camera(size), patches, seg, BlurSpec{});
  }
  EXPECT_EQ(one, many);
}

TEST(BlurModel, KernelImageShowsRow) {
  const int size = 32;
  const std::vector<PlanePatch> patches{translating_patch({6.0, 0.0})};
  const BlurOperator op =
      assemble_operator(camera(size), patches, SegmentationMap(size, size, 0), BlurSpec{});
  const ImageBuffer k = kernel_image(op, 16, 16, true);
  double peak = 0.0;
  double total = 0.0;
  for (double v : k.data()) {
    peak = std::max(peak, v);
    total += v;
  }
  EXPECT_DOUBLE_EQ(peak, 1.0);
  const ImageBuffer raw = kernel_image(op, 16, 16, false);
  double sum = 0.0;
  for (double v : raw.data()) sum += v;
  EXPECT_NEAR(sum, 1.0, 1e-12);
  EXPECT_GT(total, 1.0);
}

}  // namespace
}  // namespace sdeblur

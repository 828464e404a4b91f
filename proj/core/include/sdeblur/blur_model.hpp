#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <span>
#include <vector>

#include "sdeblur/geometry.hpp"
#include "sdeblur/image.hpp"

namespace sdeblur {

/// Exposure discretisation: duty_cycle is exposure time over the frame
/// interval, samples the number of quadrature points.
struct BlurSpec {
  double duty_cycle = 1.0;
  int samples = 70;

  void validate() const;
  /// Midpoint-rule sample times in frame intervals, symmetric about t0:
  /// -d/2 + (k + 0.5) d / N for k = 0..N-1.
  std::vector<double> sample_offsets() const;
};

struct SegmentationMap {
  int width = 0;
  int height = 0;
  std::vector<int> labels;

  SegmentationMap() = default;
  SegmentationMap(int w, int h, int fill = 0)
      : width(w), height(h), labels(static_cast<std::size_t>(w) * h, fill) {}

  int at(int x, int y) const { return labels[static_cast<std::size_t>(y) * width + x]; }
  int& at(int x, int y) { return labels[static_cast<std::size_t>(y) * width + x]; }
};

/// Per-pixel 2D displacements (pixels per frame interval) to the next and
/// previous frame.
struct FlowField {
  int width = 0;
  int height = 0;
  std::vector<Eigen::Vector2d> forward;
  std::vector<Eigen::Vector2d> backward;

  FlowField() = default;
  FlowField(int w, int h)
      : width(w),
        height(h),
        forward(static_cast<std::size_t>(w) * h, Eigen::Vector2d::Zero()),
        backward(static_cast<std::size_t>(w) * h, Eigen::Vector2d::Zero()) {}

  void validate() const;
};

struct SparseEntry {
  std::uint32_t index = 0;
  double weight = 0.0;

  bool operator==(const SparseEntry&) const = default;
};

/// Sorted, duplicate-free list of (pixel index, weight).
using SparseRow = std::vector<SparseEntry>;

/// Compressed sparse row matrix.
class SparseMatrix {
 public:
  SparseMatrix() = default;
  SparseMatrix(std::size_t cols, const std::vector<SparseRow>& rows);

  std::size_t rows() const { return row_ptr_.empty() ? 0 : row_ptr_.size() - 1; }
  std::size_t cols() const { return cols_; }
  std::size_t nonzeros() const { return entries_.size(); }

  std::span<const SparseEntry> row(std::size_t r) const {
    return {entries_.data() + row_ptr_[r], row_ptr_[r + 1] - row_ptr_[r]};
  }

  /// out = M in for channel-interleaved vectors.
  void multiply(std::span<const double> in, std::span<double> out, int channels) const;
  SparseMatrix transpose() const;

  bool operator==(const SparseMatrix&) const = default;

 private:
  std::size_t cols_ = 0;
  std::vector<std::size_t> row_ptr_{0};
  std::vector<SparseEntry> entries_;
};

/// Spatially-variant blur matrix with one row per output pixel. Immutable
/// after construction; holds its transpose for adjoint products.
class BlurOperator {
 public:
  BlurOperator() = default;
  BlurOperator(int width, int height, const std::vector<SparseRow>& rows);

  static BlurOperator identity(int width, int height);

  int width() const { return width_; }
  int height() const { return height_; }
  std::size_t pixel_count() const { return a_.rows(); }
  std::size_t nonzeros() const { return a_.nonzeros(); }

  std::span<const SparseEntry> row(std::size_t r) const { return a_.row(r); }
  std::span<const SparseEntry> row(int x, int y) const {
    return a_.row(static_cast<std::size_t>(y) * width_ + x);
  }
  const SparseMatrix& matrix() const { return a_; }
  const SparseMatrix& transpose_matrix() const { return at_; }

  bool operator==(const BlurOperator& o) const {
    return width_ == o.width_ && height_ == o.height_ && a_ == o.a_;
  }

 private:
  int width_ = 0;
  int height_ = 0;
  SparseMatrix a_;
  SparseMatrix at_;
};

/// Blur row of pixel (x, y) from a list of homographies mapping each sample
/// time back to the reference frame. Samples are stamped bilinearly with
/// weight 1/N; stamps outside the image are dropped without renormalising.
SparseRow trajectory_row(int x, int y, int width, int height,
                         std::span<const Eigen::Matrix3d> homographies);

/// Reference-time homographies of a patch at the quadrature sample times.
std::vector<Eigen::Matrix3d> sample_homographies(const CameraModel& camera,
                                                 const PlanePatch& patch,
                                                 const BlurSpec& spec);

SparseRow homography_blur_row(int x, int y, int width, int height,
                              const CameraModel& camera, const PlanePatch& patch,
                              const BlurSpec& spec);

/// Baseline row: straight-line trajectories along the forward flow for
/// positive sample times and along the backward flow for negative ones.
SparseRow flow_blur_row(int x, int y, const FlowField& flow, const BlurSpec& spec);

BlurOperator assemble_operator(const CameraModel& camera,
                               std::span<const PlanePatch> patches,
                               const SegmentationMap& segmentation,
                               const BlurSpec& spec);

BlurOperator assemble_flow_operator(const FlowField& flow, const BlurSpec& spec);

/// 2D projection of piecewise-planar scene flow: each pixel's displacement
/// to t0 + 1 and t0 - 1 under its own segment's motion.
FlowField project_scene_flow(const CameraModel& camera,
                             std::span<const PlanePatch> patches,
                             const SegmentationMap& segmentation);

ImageBuffer apply_blur(const BlurOperator& op, const ImageBuffer& image);
ImageBuffer apply_blur_transpose(const BlurOperator& op, const ImageBuffer& image);

/// True when no stamp of the row's trajectory was dropped at the border,
/// i.e. its weights sum to one.
bool row_fully_in_domain(std::span<const SparseEntry> row, double tol = 1e-6);

/// Per-pixel flag (1/0) of rows that are fully in the domain. Outside this
/// region the observation depends on content beyond the frame.
std::vector<unsigned char> in_domain_mask(const BlurOperator& op, double tol = 1e-6);

/// Dense single-channel image of one blur row, optionally scaled so the
/// largest weight is 1.
ImageBuffer kernel_image(const BlurOperator& op, int x, int y, bool normalize_peak);

/// Looks up a patch by segment id; throws MissingSegment.
const PlanePatch& find_patch(std::span<const PlanePatch> patches, int segment_id);

}  // namespace sdeblur

#include "sdeblur/blur_model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <unordered_map>

#include "sdeblur/error.hpp"
#include "sdeblur/parallel.hpp"

namespace sdeblur {
namespace {

// Sample positions this close to a pixel centre are snapped onto it, so a
// static pixel stamps exactly one entry.
constexpr double kSnap = 1e-9;

double snap(double v) {
  const double r = std::round(v);
  return std::abs(v - r) < kSnap ? r : v;
}

void stamp_bilinear(double px, double py, double weight, int width, int height,
                    SparseRow& row) {
  if (!std::isfinite(px) || !std::isfinite(py)) return;
  px = snap(px);
  py = snap(py);
  const double fx = std::floor(px);
  const double fy = std::floor(py);
  if (fx < -1.0 || fy < -1.0 || fx >= width || fy >= height) return;
  const int x0 = static_cast<int>(fx);
  const int y0 = static_cast<int>(fy);
  const double ax = px - fx;
  const double ay = py - fy;
  const double wx[2] = {1.0 - ax, ax};
  const double wy[2] = {1.0 - ay, ay};
  for (int dy = 0; dy < 2; ++dy) {
    const int yy = y0 + dy;
    if (wy[dy] == 0.0 || yy < 0 || yy >= height) continue;
    for (int dx = 0; dx < 2; ++dx) {
      const int xx = x0 + dx;
      if (wx[dx] == 0.0 || xx < 0 || xx >= width) continue;
      row.push_back({static_cast<std::uint32_t>(yy * width + xx),
                     weight * wx[dx] * wy[dy]});
    }
  }
}

void merge_row(SparseRow& row) {
  std::stable_sort(row.begin(), row.end(),
                   [](const SparseEntry& a, const SparseEntry& b) {
                     return a.index < b.index;
                   });
  std::size_t out = 0;
  for (std::size_t i = 0; i < row.size(); ++i) {
    if (out > 0 && row[out - 1].index == row[i].index) {
      row[out - 1].weight += row[i].weight;
    } else {
      row[out++] = row[i];
    }
  }
  row.resize(out);
}

void check_pixel(int x, int y, int width, int height) {
  if (x < 0 || y < 0 || x >= width || y >= height) {
    throw Error(ErrorCode::kInvalidArgument,
                "pixel (" + std::to_string(x) + ", " + std::to_string(y) +
                    ") is outside the image");
  }
}

void check_segmentation(const SegmentationMap& seg) {
  if (seg.width <= 0 || seg.height <= 0 ||
      seg.labels.size() != static_cast<std::size_t>(seg.width) * seg.height) {
    throw Error(ErrorCode::kDimensionMismatch, "segmentation map is malformed");
  }
}

// Homography lists for every segment id used in the segmentation.
std::unordered_map<int, std::vector<Eigen::Matrix3d>> trajectories_by_segment(
    const CameraModel& camera, std::span<const PlanePatch> patches,
    const SegmentationMap& seg, const BlurSpec& spec, bool forward_flow) {
  std::unordered_map<int, std::vector<Eigen::Matrix3d>> out;
  for (int label : seg.labels) {
    if (out.contains(label)) continue;
    const PlanePatch& patch = find_patch(patches, label);
    if (forward_flow) {
      out[label] = {forward_homography(camera, patch, 1.0),
                    forward_homography(camera, patch, -1.0)};
    } else {
      out[label] = sample_homographies(camera, patch, spec);
    }
  }
  return out;
}

void check_image(const BlurOperator& op, const ImageBuffer& image) {
  if (image.width() != op.width() || image.height() != op.height()) {
    throw Error(ErrorCode::kDimensionMismatch,
                "image is " + std::to_string(image.width()) + "x" +
                    std::to_string(image.height()) + " but operator is " +
                    std::to_string(op.width()) + "x" + std::to_string(op.height()));
  }
}

}  // namespace

void BlurSpec::validate() const {
  if (!(duty_cycle > 0.0 && duty_cycle <= 1.0)) {
    throw Error(ErrorCode::kInvariantViolation, "duty_cycle must lie in (0, 1]");
  }
  if (samples < 1) {
    throw Error(ErrorCode::kInvariantViolation, "samples must be >= 1");
  }
}

std::vector<double> BlurSpec::sample_offsets() const {
  validate();
  std::vector<double> t(static_cast<std::size_t>(samples));
  for (int k = 0; k < samples; ++k) {
    t[static_cast<std::size_t>(k)] =
        duty_cycle * (-0.5 + (k + 0.5) / static_cast<double>(samples));
  }
  return t;
}

void FlowField::validate() const {
  const std::size_t n = static_cast<std::size_t>(width) * height;
  if (forward.size() != n || backward.size() != n) {
    throw Error(ErrorCode::kDimensionMismatch, "flow field is malformed");
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (!forward[i].allFinite() || !backward[i].allFinite()) {
      throw Error(ErrorCode::kInvariantViolation, "flow field has non-finite entries");
    }
  }
}

SparseMatrix::SparseMatrix(std::size_t cols, const std::vector<SparseRow>& rows)
    : cols_(cols) {
  row_ptr_.assign(rows.size() + 1, 0);
  for (std::size_t r = 0; r < rows.size(); ++r) {
    row_ptr_[r + 1] = row_ptr_[r] + rows[r].size();
  }
  entries_.reserve(row_ptr_.back());
  for (const auto& row : rows) {
    for (const auto& e : row) {
      if (e.index >= cols) {
        throw Error(ErrorCode::kDimensionMismatch, "sparse column index out of range");
      }
      entries_.push_back(e);
    }
  }
}

void SparseMatrix::multiply(std::span<const double> in, std::span<double> out,
                            int channels) const {
  const auto c = static_cast<std::size_t>(channels);
  if (in.size() != cols_ * c || out.size() != rows() * c) {
    throw Error(ErrorCode::kDimensionMismatch, "sparse product size mismatch");
  }
  parallel_for(rows(), [&](std::size_t begin, std::size_t end) {
    for (std::size_t r = begin; r < end; ++r) {
      const auto entries = row(r);
      for (std::size_t ch = 0; ch < c; ++ch) {
        double s = 0.0;
        for (const auto& e : entries) s += e.weight * in[e.index * c + ch];
        out[r * c + ch] = s;
      }
    }
  });
}

SparseMatrix SparseMatrix::transpose() const {
  SparseMatrix t;
  t.cols_ = rows();
  t.row_ptr_.assign(cols_ + 1, 0);
  for (const auto& e : entries_) ++t.row_ptr_[e.index + 1];
  for (std::size_t i = 0; i < cols_; ++i) t.row_ptr_[i + 1] += t.row_ptr_[i];
  t.entries_.resize(entries_.size());
  std::vector<std::size_t> fill(t.row_ptr_.begin(), t.row_ptr_.end() - 1);
  // Rows are visited in order, so every transposed row comes out sorted.
  for (std::size_t r = 0; r < rows(); ++r) {
    for (const auto& e : row(r)) {
      t.entries_[fill[e.index]++] = {static_cast<std::uint32_t>(r), e.weight};
    }
  }
  return t;
}

BlurOperator::BlurOperator(int width, int height, const std::vector<SparseRow>& rows)
    : width_(width),
      height_(height),
      a_(static_cast<std::size_t>(width) * height, rows),
      at_(a_.transpose()) {
  if (rows.size() != static_cast<std::size_t>(width) * height) {
    throw Error(ErrorCode::kDimensionMismatch, "operator needs one row per pixel");
  }
}

BlurOperator BlurOperator::identity(int width, int height) {
  std::vector<SparseRow> rows(static_cast<std::size_t>(width) * height);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    rows[i] = {{static_cast<std::uint32_t>(i), 1.0}};
  }
  return BlurOperator(width, height, rows);
}

const PlanePatch& find_patch(std::span<const PlanePatch> patches, int segment_id) {
  for (const auto& p : patches) {
    if (p.segment_id == segment_id) return p;
  }
  throw Error(ErrorCode::kMissingSegment,
              "no plane patch for segment label " + std::to_string(segment_id));
}

std::vector<Eigen::Matrix3d> sample_homographies(const CameraModel& camera,
                                                 const PlanePatch& patch,
                                                 const BlurSpec& spec) {
  std::vector<Eigen::Matrix3d> hs;
  for (double t : spec.sample_offsets()) {
    hs.push_back(blur_homography(camera, patch, t));
  }
  return hs;
}

SparseRow trajectory_row(int x, int y, int width, int height,
                         std::span<const Eigen::Matrix3d> homographies) {
  check_pixel(x, y, width, height);
  SparseRow row;
  row.reserve(4 * homographies.size());
  const double weight = 1.0 / static_cast<double>(homographies.size());
  const Eigen::Vector2d pixel(x, y);
  for (const auto& h : homographies) {
    const Eigen::Vector2d p = apply_homography(h, pixel);
    stamp_bilinear(p.x(), p.y(), weight, width, height, row);
  }
  merge_row(row);
  return row;
}

SparseRow homography_blur_row(int x, int y, int width, int height,
                              const CameraModel& camera, const PlanePatch& patch,
                              const BlurSpec& spec) {
  const auto hs = sample_homographies(camera, patch, spec);
  return trajectory_row(x, y, width, height, hs);
}

SparseRow flow_blur_row(int x, int y, const FlowField& flow, const BlurSpec& spec) {
  check_pixel(x, y, flow.width, flow.height);
  const auto offsets = spec.sample_offsets();
  const std::size_t i = static_cast<std::size_t>(y) * flow.width + x;
  const Eigen::Vector2d& fwd = flow.forward[i];
  const Eigen::Vector2d& bwd = flow.backward[i];
  const double weight = 1.0 / static_cast<double>(offsets.size());
  SparseRow row;
  row.reserve(4 * offsets.size());
  for (double s : offsets) {
    Eigen::Vector2d p(x, y);
    if (s > 0.0) {
      p += s * fwd;
    } else if (s < 0.0) {
      p += -s * bwd;
    }
    stamp_bilinear(p.x(), p.y(), weight, flow.width, flow.height, row);
  }
  merge_row(row);
  return row;
}

BlurOperator assemble_operator(const CameraModel& camera,
                               std::span<const PlanePatch> patches,
                               const SegmentationMap& segmentation,
                               const BlurSpec& spec) {
  check_segmentation(segmentation);
  spec.validate();
  const auto traj =
      trajectories_by_segment(camera, patches, segmentation, spec, false);
  const int w = segmentation.width;
  const int h = segmentation.height;
  std::vector<SparseRow> rows(static_cast<std::size_t>(w) * h);
  parallel_for(rows.size(), [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) {
      const int x = static_cast<int>(i % w);
      const int y = static_cast<int>(i / w);
      rows[i] = trajectory_row(x, y, w, h, traj.at(segmentation.labels[i]));
    }
  });
  return BlurOperator(w, h, rows);
}

BlurOperator assemble_flow_operator(const FlowField& flow, const BlurSpec& spec) {
  flow.validate();
  spec.validate();
  std::vector<SparseRow> rows(static_cast<std::size_t>(flow.width) * flow.height);
  parallel_for(rows.size(), [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) {
      rows[i] = flow_blur_row(static_cast<int>(i % flow.width),
                              static_cast<int>(i / flow.width), flow, spec);
    }
  });
  return BlurOperator(flow.width, flow.height, rows);
}

FlowField project_scene_flow(const CameraModel& camera,
                             std::span<const PlanePatch> patches,
                             const SegmentationMap& segmentation) {
  check_segmentation(segmentation);
  const auto ends =
      trajectories_by_segment(camera, patches, segmentation, BlurSpec{}, true);
  FlowField flow(segmentation.width, segmentation.height);
  for (int y = 0; y < flow.height; ++y) {
    for (int x = 0; x < flow.width; ++x) {
      const std::size_t i = static_cast<std::size_t>(y) * flow.width + x;
      const auto& hs = ends.at(segmentation.labels[i]);
      const Eigen::Vector2d p(x, y);
      flow.forward[i] = apply_homography(hs[0], p) - p;
      flow.backward[i] = apply_homography(hs[1], p) - p;
    }
  }
  return flow;
}

ImageBuffer apply_blur(const BlurOperator& op, const ImageBuffer& image) {
  check_image(op, image);
  ImageBuffer out(image.width(), image.height(), image.channels());
  op.matrix().multiply(image.data(), out.data(), image.channels());
  return out;
}

ImageBuffer apply_blur_transpose(const BlurOperator& op, const ImageBuffer& image) {
  check_image(op, image);
  ImageBuffer out(image.width(), image.height(), image.channels());
  op.transpose_matrix().multiply(image.data(), out.data(), image.channels());
  return out;
}

bool row_fully_in_domain(std::span<const SparseEntry> row, double tol) {
  double s = 0.0;
  for (const auto& e : row) s += e.weight;
  return std::abs(s - 1.0) <= tol;
}

std::vector<unsigned char> in_domain_mask(const BlurOperator& op, double tol) {
  std::vector<unsigned char> mask(op.pixel_count());
  for (std::size_t i = 0; i < mask.size(); ++i) {
    mask[i] = row_fully_in_domain(op.row(i), tol) ? 1 : 0;
  }
  return mask;
}

ImageBuffer kernel_image(const BlurOperator& op, int x, int y, bool normalize_peak) {
  check_pixel(x, y, op.width(), op.height());
  ImageBuffer img(op.width(), op.height(), 1);
  double peak = 0.0;
  for (const auto& e : op.row(x, y)) {
    img.data()[e.index] = e.weight;
    peak = std::max(peak, e.weight);
  }
  if (normalize_peak && peak > 0.0) {
    for (double& v : img.data()) v /= peak;
  }
  return img;
}

}  // namespace sdeblur

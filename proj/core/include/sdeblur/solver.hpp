#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "sdeblur/blur_model.hpp"
#include "sdeblur/image.hpp"

namespace sdeblur {

struct SolverConfig {
  double alpha = 0.001;
  double k_sigma = 4000.0 / 3.0;
  double epsilon = 0.01;
  double prior_exponent = 0.8;
  int outer_iterations = 10;
  int cg_iterations = 25;
  int n_samples = 70;
  /// When false the data weights are held at 1 (no motion-boundary handling).
  bool boundary_weights = true;

  void validate() const;
};

/// Per-pixel confidence in the image formation model, in [0, 1].
struct WeightMap {
  int width = 0;
  int height = 0;
  std::vector<double> w;

  WeightMap() = default;
  WeightMap(int width_, int height_, double fill)
      : width(width_), height(height_), w(static_cast<std::size_t>(width_) * height_, fill) {}

  ImageBuffer as_image() const;
};

/// Binary per-pixel mask; nonzero marks an occluded / motion-boundary pixel.
struct OcclusionMask {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> occluded;

  OcclusionMask() = default;
  OcclusionMask(int width_, int height_)
      : width(width_), height(height_), occluded(static_cast<std::size_t>(width_) * height_, 0) {}

  std::size_t count() const;
};

/// Horizontal and vertical components of a per-pixel, per-channel vector
/// field, interleaved by channel like ImageBuffer.
struct GradientField {
  int width = 0;
  int height = 0;
  int channels = 1;
  std::vector<double> dx;
  std::vector<double> dy;
};

/// Forward differences; the last column (row) has zero horizontal (vertical)
/// gradient.
GradientField gradient(const ImageBuffer& image);
/// Exact adjoint of gradient().
ImageBuffer gradient_transpose(const GradientField& field);

/// rho(c) = max(|c|, epsilon)^(prior_exponent - 2) for every component.
GradientField irls_prior_weights(const GradientField& gradients, const SolverConfig& cfg);

/// w(x) = exp(-k_sigma * sum_c (B(x) - (A I)(x))^2).
WeightMap update_boundary_weights(const ImageBuffer& blurred, const BlurOperator& op,
                                  const ImageBuffer& estimate, const SolverConfig& cfg);

/// 0 on occluded pixels, 1 elsewhere.
WeightMap init_weights(const OcclusionMask& mask);

struct TraceRecord {
  enum class Kind { kCgStep, kOuter };
  Kind kind = Kind::kCgStep;
  int outer = 0;
  int cg_step = 0;
  int channel = 0;
  double energy = 0.0;
  double max_weight_change = 0.0;
};

/// Receives progress records. When set, solve_inner evaluates the full
/// quadratic energy after every CG step.
using TraceSink = std::function<void(const TraceRecord&)>;

/// One line per record, e.g. "cg outer=3 channel=0 step=12 energy=1.25e-02".
std::string format_trace(const TraceRecord& record);

/// Quadratic energy sum_x w(x)^2 |B(x) - A_x I|^2 + alpha * sum rho |grad I|^2
/// for fixed weights.
double inner_energy(const ImageBuffer& blurred, const BlurOperator& op,
                    const WeightMap& w, const GradientField& rho,
                    const SolverConfig& cfg, const ImageBuffer& estimate);

/// Runs cfg.cg_iterations conjugate-gradient steps per channel on the normal
/// equations (A^T W^2 A + alpha D^T P D) I = A^T W^2 B, starting from
/// warm_start, where P holds the IRLS prior weights.
ImageBuffer solve_inner(const ImageBuffer& blurred, const BlurOperator& op,
                        const WeightMap& w, const GradientField& rho,
                        const SolverConfig& cfg, const ImageBuffer& warm_start,
                        const TraceSink& trace = {}, int outer_index = 0);

struct DeblurResult {
  ImageBuffer image;           // clamped to [0, 1]
  WeightMap weights;           // data weights after the last round
  std::vector<double> weight_changes;  // max |w_n - w_{n-1}| per outer round
};

/// Alternates prior reweighting, the inner solve, and boundary weight
/// updates for cfg.outer_iterations rounds, starting from the blurred image.
DeblurResult deblur(const ImageBuffer& blurred, const BlurOperator& op,
                    const OcclusionMask& mask, const SolverConfig& cfg,
                    const TraceSink& trace = {});

}  // namespace sdeblur

#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <string>
#include <vector>

#include "sdeblur/blur_model.hpp"
#include "sdeblur/geometry.hpp"
#include "sdeblur/image.hpp"
#include "sdeblur/solver.hpp"

namespace sdeblur {

enum class TextureKind { kCheckerboard, kNoise, kGlyphs };

/// Procedural RGB texture in [0, 1], reproducible from the seed.
ImageBuffer make_texture(TextureKind kind, int width, int height, std::uint64_t seed);

/// One textured plane. The texture is registered to the reference frame:
/// texture pixel (u, v) shows reference pixel (u - margin, v - margin).
/// An empty region covers the whole plane; otherwise the layer is the convex
/// polygon `region` given in reference pixel coordinates.
struct SceneLayer {
  ImageBuffer texture;
  int margin = 0;
  std::vector<Eigen::Vector2d> region;
  PlanePatch patch;

  bool covers(const Eigen::Vector2d& reference_pixel) const;
  double sample(const Eigen::Vector2d& reference_pixel, int channel) const;
};

enum class SceneKind { kPlanar, kLayered };

struct SceneSpec {
  std::string name;
  SceneKind kind = SceneKind::kPlanar;
  /// Pure translation of a fronto-parallel plane, where 2D flow is exact.
  bool fronto_parallel_translation = false;
  int width = 0;
  int height = 0;
  CameraModel camera;
  std::vector<SceneLayer> layers;  // front to back
  BlurSpec spec;
  int render_samples = 200;
  double noise_sigma = 0.0;
  std::uint64_t noise_seed = 0;

  void validate() const;
  std::vector<PlanePatch> patches() const;
};

struct RenderedFrames {
  ImageBuffer blurred;
  ImageBuffer sharp_reference;
};

/// Averages render_samples sub-frames over the exposure; each sub-frame
/// warps every layer with its exact homography and keeps the front-most hit.
RenderedFrames render_blurred(const SceneSpec& scene);

/// Renders the instantaneous frame at time offset t (frame intervals).
ImageBuffer render_subframe(const SceneSpec& scene, double t_offset);

struct GroundTruth {
  SegmentationMap segmentation;
  std::vector<PlanePatch> patches;
  /// Pixels whose front-most layer changes during the exposure.
  OcclusionMask mixed;
  /// `mixed` dilated by mask_dilation pixels; this is the exported mask.
  OcclusionMask occlusion;
  FlowField flow;
};

/// The mixed set is exact for rendered frames (it is evaluated at every
/// render sub-frame), so the default adds no dilation.
GroundTruth ground_truth_sidecar(const SceneSpec& scene, int mask_dilation = 0);

/// Parameterised scenes: six single-plane motions and two layered occlusion
/// scenes, all with duty cycle 1.
std::vector<SceneSpec> standard_suite(int size = 128);

/// Named scene from standard_suite(size); throws InvalidArgument.
SceneSpec suite_scene(const std::string& name, int size = 128);
std::vector<std::string> suite_scene_names();

/// Single textured plane at depth `depth` under an arbitrary motion.
SceneSpec planar_scene(const std::string& name, int size, TextureKind texture,
                       std::uint64_t seed, const RigidMotion& motion,
                       const Eigen::Vector3d& normal);

/// Default pinhole camera used by the suite for a size x size image.
CameraModel suite_camera(int size);

}  // namespace sdeblur

#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "sdeblur/blur_model.hpp"
#include "sdeblur/geometry.hpp"
#include "sdeblur/image.hpp"
#include "sdeblur/solver.hpp"
#include "sdeblur/synth.hpp"

namespace sdeblur {

/// On-disk scene: a directory holding
///   blurred.png        8/16-bit RGB or gray, the frame to deblur
///   reference.png      optional sharp ground truth
///   segmentation.pgm   16-bit segment labels
///   scene.sdv          camera, exposure and per-segment plane + motion
///   occlusion.pgm      optional binary motion-boundary mask
///   flow.pfm           optional 2D displacements (see write_flow_pfm)
struct Dataset {
  ImageBuffer blurred;
  std::optional<ImageBuffer> reference;
  SegmentationMap segmentation;
  std::vector<PlanePatch> patches;
  CameraModel camera;
  BlurSpec spec;
  OcclusionMask occlusion;
  std::optional<FlowField> flow;
};

inline constexpr const char* kBlurredFile = "blurred.png";
inline constexpr const char* kReferenceFile = "reference.png";
inline constexpr const char* kSegmentationFile = "segmentation.pgm";
inline constexpr const char* kSidecarFile = "scene.sdv";
inline constexpr const char* kOcclusionFile = "occlusion.pgm";
inline constexpr const char* kFlowFile = "flow.pfm";

struct Sidecar {
  CameraModel camera;
  BlurSpec spec;
  std::vector<PlanePatch> patches;
};

/// Text sidecar: the line "sdv1" followed by a JSON object
///   {"camera": {"K": [9 reals, row-major], "center": [3 reals],
///               "duty_cycle": d, "samples": N},
///    "segments": [{"id": i, "normal": [3 reals],
///                  "motion": {"rotation": [9 reals, row-major],
///                             "translation": [3 reals]}}, ...]}
/// "center" and "samples" are optional (defaults: origin, 70).
std::string format_sidecar(const Sidecar& sidecar);
/// Rotations are converted to twists via se3_log. `source` names the input
/// in error messages.
Sidecar parse_sidecar(const std::string& text, const std::string& source = "sidecar");

Dataset load_dataset(const std::filesystem::path& dir);
/// Writes every present component; images as 16-bit PNG.
void save_dataset(const std::filesystem::path& dir, const Dataset& dataset);

/// Renders a synthetic scene and packages it with its ground-truth sidecar.
Dataset make_dataset(const SceneSpec& scene, int mask_dilation = 0);

}  // namespace sdeblur

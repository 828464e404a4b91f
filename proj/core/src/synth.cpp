#include "sdeblur/synth.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <random>

#include "sdeblur/error.hpp"
#include "sdeblur/parallel.hpp"

namespace sdeblur {
namespace {

constexpr int kTextureMargin = 48;
constexpr double kDepth = 2.0;

using Color = std::array<double, 3>;

Color lerp(const Color& a, const Color& b, double t) {
  return {a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1]), a[2] + t * (b[2] - a[2])};
}

void put(ImageBuffer& img, int x, int y, const Color& c) {
  for (int k = 0; k < 3; ++k) img.at(x, y, k) = std::clamp(c[static_cast<std::size_t>(k)], 0.0, 1.0);
}

// Sum of bilinearly upsampled random lattices, normalised to [0, 1].
std::vector<double> value_noise(int width, int height, std::mt19937_64& rng,
                                std::initializer_list<int> cells) {
  std::vector<double> acc(static_cast<std::size_t>(width) * height, 0.0);
  std::uniform_real_distribution<double> uni(0.0, 1.0);
  double amplitude = 1.0;
  for (int cell : cells) {
    const int gw = width / cell + 2;
    const int gh = height / cell + 2;
    std::vector<double> grid(static_cast<std::size_t>(gw) * gh);
    for (double& g : grid) g = uni(rng);
    for (int y = 0; y < height; ++y) {
      const double gy = static_cast<double>(y) / cell;
      const int y0 = static_cast<int>(gy);
      const double ty = gy - y0;
      for (int x = 0; x < width; ++x) {
        const double gx = static_cast<double>(x) / cell;
        const int x0 = static_cast<int>(gx);
        const double tx = gx - x0;
        auto at = [&](int i, int j) { return grid[static_cast<std::size_t>(j) * gw + i]; };
        // Smoothstep interpolation avoids visible lattice creases.
        const double sx = tx * tx * (3.0 - 2.0 * tx);
        const double sy = ty * ty * (3.0 - 2.0 * ty);
        const double v = (1 - sy) * ((1 - sx) * at(x0, y0) + sx * at(x0 + 1, y0)) +
                         sy * ((1 - sx) * at(x0, y0 + 1) + sx * at(x0 + 1, y0 + 1));
        acc[static_cast<std::size_t>(y) * width + x] += amplitude * v;
      }
    }
    amplitude *= 0.7;
  }
  const auto [lo, hi] = std::minmax_element(acc.begin(), acc.end());
  const double range = std::max(*hi - *lo, 1e-12);
  const double base = *lo;
  for (double& v : acc) v = (v - base) / range;
  return acc;
}

ImageBuffer checkerboard(int width, int height, std::mt19937_64& rng) {
  const Color dark{0.15, 0.22, 0.45};
  const Color light{0.92, 0.85, 0.55};
  const int cell = 10;
  const auto shade = value_noise(width, height, rng, {24, 6});
  ImageBuffer img(width, height, 3);
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      const bool odd = ((x / cell) + (y / cell)) % 2 != 0;
      const double s = 0.85 + 0.15 * shade[static_cast<std::size_t>(y) * width + x];
      Color c = odd ? light : dark;
      for (double& v : c) v *= s;
      put(img, x, y, c);
    }
  }
  return img;
}

// Posterised value noise: flat patches separated by sharp contours, with a
// faint smooth shading on top.
ImageBuffer noise_texture(int width, int height, std::mt19937_64& rng) {
  constexpr double kLevels = 4.0;
  std::array<std::vector<double>, 3> planes;
  for (auto& p : planes) p = value_noise(width, height, rng, {20, 9});
  const auto shade = value_noise(width, height, rng, {12, 4});
  const Color lo{0.2, 0.15, 0.1};
  const Color span{0.7, 0.65, 0.6};
  ImageBuffer img(width, height, 3);
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      const std::size_t i = static_cast<std::size_t>(y) * width + x;
      Color c;
      for (std::size_t k = 0; k < 3; ++k) {
        const double q = std::min(std::floor(planes[k][i] * kLevels), kLevels - 1.0) /
                         (kLevels - 1.0);
        c[k] = lo[k] + span[k] * q + 0.08 * (shade[i] - 0.5);
      }
      put(img, x, y, c);
    }
  }
  return img;
}

// Rows of dark stroke glyphs on light paper.
ImageBuffer glyph_texture(int width, int height, std::mt19937_64& rng) {
  const Color paper{0.88, 0.9, 0.93};
  const Color ink{0.4, 0.42, 0.55};
  const auto tone = value_noise(width, height, rng, {40});
  ImageBuffer img(width, height, 3);
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      put(img, x, y, lerp(paper, Color{0.7, 0.75, 0.85},
                          0.5 * tone[static_cast<std::size_t>(y) * width + x]));
    }
  }
  std::uniform_int_distribution<int> stroke_len(5, 12);
  std::uniform_int_distribution<int> coin(0, 3);
  const int cell_w = 13;
  const int cell_h = 20;
  for (int cy = 2; cy + cell_h < height; cy += cell_h) {
    for (int cx = 2; cx + cell_w < width; cx += cell_w) {
      if (coin(rng) == 0) continue;  // word gap
      const int strokes = 2 + coin(rng) % 2;
      for (int s = 0; s < strokes; ++s) {
        const bool vertical = coin(rng) % 2 == 0;
        const int len = stroke_len(rng);
        const int ox = cx + coin(rng) * 3;
        const int oy = cy + coin(rng) * 3;
        for (int k = 0; k < len; ++k) {
          for (int t = 0; t < 3; ++t) {
            const int x = vertical ? ox + t : ox + k;
            const int y = vertical ? oy + k : oy + t;
            if (x < width && y < height) put(img, x, y, ink);
          }
        }
      }
    }
  }
  return img;
}

ImageBuffer layer_texture(TextureKind kind, int width, int height, std::uint64_t seed) {
  return make_texture(kind, width + 2 * kTextureMargin, height + 2 * kTextureMargin, seed);
}

PlanePatch make_patch(const Eigen::Vector3d& normal, const RigidMotion& motion, int id) {
  PlanePatch p;
  p.normal = normal;
  p.motion = se3_log(motion);
  p.segment_id = id;
  return p;
}

std::vector<Eigen::Vector2d> rectangle(double x0, double y0, double x1, double y1) {
  return {{x0, y0}, {x1, y0}, {x1, y1}, {x0, y1}};
}

// Front-most layer index for every pixel at each time offset, -1 if none.
std::vector<int> layer_indices(const SceneSpec& scene, double t) {
  std::vector<Eigen::Matrix3d> hs;
  for (const auto& layer : scene.layers) {
    hs.push_back(blur_homography(scene.camera, layer.patch, t));
  }
  std::vector<int> idx(static_cast<std::size_t>(scene.width) * scene.height, -1);
  parallel_for(idx.size(), [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) {
      const Eigen::Vector2d x(static_cast<double>(i % scene.width),
                              static_cast<double>(i / scene.width));
      for (std::size_t l = 0; l < hs.size(); ++l) {
        if (scene.layers[l].covers(apply_homography(hs[l], x))) {
          idx[i] = static_cast<int>(l);
          break;
        }
      }
    }
  });
  return idx;
}

SceneSpec base_scene(const std::string& name, int size) {
  SceneSpec s;
  s.name = name;
  s.width = size;
  s.height = size;
  s.camera = suite_camera(size);
  s.spec = BlurSpec{1.0, 70};
  return s;
}

}  // namespace

ImageBuffer make_texture(TextureKind kind, int width, int height, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  switch (kind) {
    case TextureKind::kCheckerboard: return checkerboard(width, height, rng);
    case TextureKind::kNoise: return noise_texture(width, height, rng);
    case TextureKind::kGlyphs: return glyph_texture(width, height, rng);
  }
  throw Error(ErrorCode::kInvalidArgument, "unknown texture kind");
}

bool SceneLayer::covers(const Eigen::Vector2d& p) const {
  if (!p.allFinite()) return false;
  if (region.empty()) return true;
  // Convex polygon, either winding.
  int sign = 0;
  for (std::size_t i = 0; i < region.size(); ++i) {
    const Eigen::Vector2d& a = region[i];
    const Eigen::Vector2d& b = region[(i + 1) % region.size()];
    const double cross = (b.x() - a.x()) * (p.y() - a.y()) - (b.y() - a.y()) * (p.x() - a.x());
    const int s = cross > 0.0 ? 1 : (cross < 0.0 ? -1 : 0);
    if (s == 0) continue;
    if (sign == 0) sign = s;
    if (s != sign) return false;
  }
  return true;
}

double SceneLayer::sample(const Eigen::Vector2d& p, int channel) const {
  return sample_bilinear_clamped(texture, p.x() + margin, p.y() + margin, channel);
}

void SceneSpec::validate() const {
  if (layers.empty()) {
    throw Error(ErrorCode::kInvariantViolation, "scene needs at least one layer");
  }
  if (width <= 0 || height <= 0 || render_samples < 1) {
    throw Error(ErrorCode::kInvariantViolation, "scene size and render_samples must be positive");
  }
  spec.validate();
  for (const auto& l : layers) {
    sdeblur::validate(camera, l.patch);
    if (l.texture.channels() != layers.front().texture.channels()) {
      throw Error(ErrorCode::kInvariantViolation, "layers disagree on channel count");
    }
  }
}

std::vector<PlanePatch> SceneSpec::patches() const {
  std::vector<PlanePatch> out;
  for (const auto& l : layers) out.push_back(l.patch);
  return out;
}

ImageBuffer render_subframe(const SceneSpec& scene, double t_offset) {
  scene.validate();
  const int channels = scene.layers.front().texture.channels();
  std::vector<Eigen::Matrix3d> hs;
  for (const auto& layer : scene.layers) {
    hs.push_back(blur_homography(scene.camera, layer.patch, t_offset));
  }
  ImageBuffer out(scene.width, scene.height, channels);
  parallel_for(static_cast<std::size_t>(scene.height), [&](std::size_t y0, std::size_t y1) {
    for (std::size_t y = y0; y < y1; ++y) {
      for (int x = 0; x < scene.width; ++x) {
        const Eigen::Vector2d px(x, static_cast<double>(y));
        for (std::size_t l = 0; l < hs.size(); ++l) {
          const Eigen::Vector2d p = apply_homography(hs[l], px);
          if (!scene.layers[l].covers(p)) continue;
          for (int c = 0; c < channels; ++c) {
            out.at(x, static_cast<int>(y), c) = scene.layers[l].sample(p, c);
          }
          break;
        }
      }
    }
  });
  return out;
}

RenderedFrames render_blurred(const SceneSpec& scene) {
  scene.validate();
  const BlurSpec render_spec{scene.spec.duty_cycle, scene.render_samples};
  RenderedFrames frames;
  frames.sharp_reference = render_subframe(scene, 0.0);
  // Running mean: exact when every sub-frame is identical.
  ImageBuffer acc;
  int count = 0;
  for (double t : render_spec.sample_offsets()) {
    ImageBuffer sub = render_subframe(scene, t);
    if (++count == 1) {
      acc = std::move(sub);
      continue;
    }
    const double inv = 1.0 / count;
    for (std::size_t i = 0; i < acc.size(); ++i) {
      acc.data()[i] += (sub.data()[i] - acc.data()[i]) * inv;
    }
  }

  if (scene.noise_sigma > 0.0) {
    std::mt19937_64 rng(scene.noise_seed);
    std::normal_distribution<double> noise(0.0, scene.noise_sigma);
    for (double& v : acc.data()) v += noise(rng);
  }
  frames.blurred = acc.clamped();
  return frames;
}

GroundTruth ground_truth_sidecar(const SceneSpec& scene, int mask_dilation) {
  scene.validate();
  GroundTruth gt;
  gt.patches = scene.patches();
  const std::vector<int> ref = layer_indices(scene, 0.0);
  gt.segmentation = SegmentationMap(scene.width, scene.height);
  for (std::size_t i = 0; i < ref.size(); ++i) {
    // Pixels hit by no layer are assigned to the back layer.
    const int l = ref[i] < 0 ? static_cast<int>(scene.layers.size()) - 1 : ref[i];
    gt.segmentation.labels[i] = scene.layers[static_cast<std::size_t>(l)].patch.segment_id;
  }

  gt.mixed = OcclusionMask(scene.width, scene.height);
  const BlurSpec render_spec{scene.spec.duty_cycle, scene.render_samples};
  for (double t : render_spec.sample_offsets()) {
    const std::vector<int> at_t = layer_indices(scene, t);
    for (std::size_t i = 0; i < at_t.size(); ++i) {
      if (at_t[i] != ref[i]) gt.mixed.occluded[i] = 1;
    }
  }

  gt.occlusion = gt.mixed;
  for (int pass = 0; pass < mask_dilation; ++pass) {
    const OcclusionMask prev = gt.occlusion;
    for (int y = 0; y < scene.height; ++y) {
      for (int x = 0; x < scene.width; ++x) {
        bool hit = false;
        for (int dy = -1; dy <= 1 && !hit; ++dy) {
          for (int dx = -1; dx <= 1 && !hit; ++dx) {
            const int xx = x + dx;
            const int yy = y + dy;
            if (xx < 0 || yy < 0 || xx >= scene.width || yy >= scene.height) continue;
            hit = prev.occluded[static_cast<std::size_t>(yy) * scene.width + xx] != 0;
          }
        }
        gt.occlusion.occluded[static_cast<std::size_t>(y) * scene.width + x] = hit ? 1 : 0;
      }
    }
  }

  gt.flow = project_scene_flow(scene.camera, gt.patches, gt.segmentation);
  return gt;
}

CameraModel suite_camera(int size) {
  const double c = 0.5 * (size - 1);
  return CameraModel::pinhole(1.2 * size, c, c);
}

SceneSpec planar_scene(const std::string& name, int size, TextureKind texture,
                       std::uint64_t seed, const RigidMotion& motion,
                       const Eigen::Vector3d& normal) {
  SceneSpec s = base_scene(name, size);
  SceneLayer layer;
  layer.texture = layer_texture(texture, size, size, seed);
  layer.margin = kTextureMargin;
  layer.patch = make_patch(normal, motion, 0);
  s.layers.push_back(std::move(layer));
  return s;
}

std::vector<SceneSpec> standard_suite(int size) {
  const Eigen::Vector3d center(0.0, 0.0, kDepth);
  // Yaw pivots behind the plane so its texture sweeps sideways.
  const Eigen::Vector3d behind(0.0, 0.0, 2.0 * kDepth);
  const Eigen::Vector3d fronto(0.0, 0.0, 1.0 / kDepth);
  // Slightly tilted plane through (0, 0, kDepth): "roughly fronto-parallel".
  const Eigen::Vector3d tilted = Eigen::Vector3d(0.08, -0.05, 1.0).normalized() /
                                 Eigen::Vector3d(0.08, -0.05, 1.0).normalized().z() / kDepth;
  const Eigen::Vector3d x_axis = Eigen::Vector3d::UnitX();
  const Eigen::Vector3d y_axis = Eigen::Vector3d::UnitY();
  const Eigen::Vector3d z_axis = Eigen::Vector3d::UnitZ();
  // Motions are specified for a 128 px image; scale keeps pixel speeds
  // comparable across sizes.
  const double scale = 128.0 / size;

  auto translate = [](double x, double y, double z) {
    return make_motion(Eigen::Vector3d::Zero(), Eigen::Vector3d(x, y, z));
  };

  std::vector<SceneSpec> suite;
  suite.push_back(planar_scene("forward", size, TextureKind::kNoise, 11,
                               translate(0.0, 0.0, -0.2 * scale), tilted));
  suite.push_back(planar_scene(
      "forward+roll", size, TextureKind::kGlyphs, 12,
      rotation_about(z_axis, 0.2 * scale, center) * translate(0.0, 0.0, -0.06 * scale),
      tilted));
  {
    SceneSpec up = planar_scene("upward", size, TextureKind::kCheckerboard, 13,
                                translate(0.0, -0.10 * scale, 0.0), fronto);
    up.fronto_parallel_translation = true;
    suite.push_back(std::move(up));
  }
  suite.push_back(planar_scene(
      "forward+yaw", size, TextureKind::kNoise, 14,
      rotation_about(y_axis, 0.05 * scale, behind) * translate(0.0, 0.0, -0.12 * scale),
      tilted));
  suite.push_back(planar_scene("yaw", size, TextureKind::kGlyphs, 15,
                               rotation_about(y_axis, 0.1 * scale, behind), tilted));
  suite.push_back(planar_scene(
      "lateral+pitch", size, TextureKind::kCheckerboard, 16,
      rotation_about(x_axis, 0.1 * scale, center) * translate(0.05 * scale, 0.0, 0.0),
      tilted));

  const double s = static_cast<double>(size);
  {
    SceneSpec sq = base_scene("squares", size);
    sq.kind = SceneKind::kLayered;
    SceneLayer fg;
    fg.texture = layer_texture(TextureKind::kNoise, size, size, 21);
    fg.margin = kTextureMargin;
    fg.region = rectangle(0.28 * s, 0.25 * s, 0.72 * s, 0.7 * s);
    const Eigen::Vector3d fg_center(0.0, 0.0, kDepth);
    fg.patch = make_patch(fronto, rotation_about(z_axis, 0.04 * scale, fg_center) *
                                      translate(0.09 * scale, 0.03 * scale, 0.0), 1);
    SceneLayer bg;
    bg.texture = layer_texture(TextureKind::kGlyphs, size, size, 22);
    bg.margin = kTextureMargin;
    bg.patch = make_patch(Eigen::Vector3d(0.0, 0.0, 0.25),
                          translate(-0.02 * scale, 0.0, 0.0), 0);
    sq.layers = {std::move(fg), std::move(bg)};
    suite.push_back(std::move(sq));
  }
  {
    SceneSpec tri = base_scene("triplane", size);
    tri.kind = SceneKind::kLayered;
    SceneLayer left;
    left.texture = layer_texture(TextureKind::kNoise, size, size, 31);
    left.margin = kTextureMargin;
    left.region = rectangle(0.12 * s, 0.2 * s, 0.45 * s, 0.8 * s);
    left.patch = make_patch(fronto, translate(0.08 * scale, -0.02 * scale, -0.04 * scale), 1);
    SceneLayer right;
    right.texture = layer_texture(TextureKind::kNoise, size, size, 32);
    right.margin = kTextureMargin;
    right.region = rectangle(0.58 * s, 0.3 * s, 0.88 * s, 0.75 * s);
    right.patch = make_patch(tilted, rotation_about(y_axis, -0.05 * scale, center), 2);
    SceneLayer bg;
    bg.texture = layer_texture(TextureKind::kCheckerboard, size, size, 33);
    bg.margin = kTextureMargin;
    bg.patch = make_patch(Eigen::Vector3d(0.0, 0.0, 0.25),
                          translate(0.0, 0.015 * scale, 0.0), 0);
    tri.layers = {std::move(left), std::move(right), std::move(bg)};
    suite.push_back(std::move(tri));
  }
  return suite;
}

std::vector<std::string> suite_scene_names() {
  return {"forward", "forward+roll", "upward", "forward+yaw",
          "yaw", "lateral+pitch", "squares", "triplane"};
}

SceneSpec suite_scene(const std::string& name, int size) {
  for (auto& s : standard_suite(size)) {
    if (s.name == name) return s;
  }
  throw Error(ErrorCode::kInvalidArgument, "unknown suite scene '" + name + "'");
}

}  // namespace sdeblur

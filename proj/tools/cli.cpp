#include "cli.hpp"

#include <CLI11.hpp>
#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <optional>
#include <sstream>

#include "sdeblur/blur_model.hpp"
#include "sdeblur/dataset.hpp"
#include "sdeblur/error.hpp"
#include "sdeblur/image_io.hpp"
#include "sdeblur/metrics.hpp"
#include "sdeblur/parallel.hpp"
#include "sdeblur/solver.hpp"
#include "sdeblur/synth.hpp"

namespace sdeblur::cli {
namespace {

namespace fs = std::filesystem;

enum class KernelSource { kHomography, kFlow, kGtFlow };

const std::map<std::string, KernelSource> kKernelNames{
    {"homography", KernelSource::kHomography},
    {"flow", KernelSource::kFlow},
    {"gt-flow", KernelSource::kGtFlow},
};

const std::map<std::string, TextureKind> kTextureNames{
    {"checker", TextureKind::kCheckerboard},
    {"noise", TextureKind::kNoise},
    {"glyphs", TextureKind::kGlyphs},
};

struct Pixel {
  int x = 0;
  int y = 0;
};

std::optional<Pixel> parse_pixel(const std::string& text) {
  Pixel p;
  char comma = 0;
  char extra = 0;
  if (std::sscanf(text.c_str(), "%d %c %d %c", &p.x, &comma, &p.y, &extra) != 3 || comma != ',') {
    return std::nullopt;
  }
  return p;
}

std::string format_number(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.6f", v);
  return buf;
}

BlurOperator build_operator(const Dataset& d, KernelSource source, const BlurSpec& spec) {
  switch (source) {
    case KernelSource::kHomography:
      return assemble_operator(d.camera, d.patches, d.segmentation, spec);
    case KernelSource::kFlow:
      if (!d.flow) {
        throw Error(ErrorCode::kIoError, std::string("--kernel flow needs ") + kFlowFile);
      }
      return assemble_flow_operator(*d.flow, spec);
    case KernelSource::kGtFlow:
      return assemble_flow_operator(project_scene_flow(d.camera, d.patches, d.segmentation), spec);
  }
  throw Error(ErrorCode::kInvalidArgument, "unknown kernel source");
}

struct SynthArgs {
  std::string scene;
  int size = 128;
  std::string out;
  int mask_dilation = 0;
  double noise = 0.0;
  std::uint64_t noise_seed = 1;
  std::string texture = "noise";
  std::uint64_t texture_seed = 1;
  std::vector<double> rotation{0.0, 0.0, 0.0};
  std::vector<double> translation{0.0, 0.0, 0.0};
  std::vector<double> normal{0.0, 0.0, 0.5};
  double duty_cycle = 1.0;
};

int run_synth(const SynthArgs& a, std::ostream& out) {
  SceneSpec scene;
  if (!a.scene.empty()) {
    scene = suite_scene(a.scene, a.size);
  } else {
    const RigidMotion m = make_motion(Eigen::Vector3d(a.rotation.data()),
                                      Eigen::Vector3d(a.translation.data()));
    scene = planar_scene("custom", a.size, kTextureNames.at(a.texture), a.texture_seed, m,
                         Eigen::Vector3d(a.normal.data()));
  }
  scene.spec.duty_cycle = a.duty_cycle;
  scene.noise_sigma = a.noise;
  scene.noise_seed = a.noise_seed;
  const Dataset d = make_dataset(scene, a.mask_dilation);
  save_dataset(a.out, d);
  out << "wrote " << scene.name << " (" << scene.width << "x" << scene.height << ", "
      << d.patches.size() << " segment" << (d.patches.size() == 1 ? "" : "s") << ", "
      << d.occlusion.count() << " masked pixels) to " << a.out << "\n";
  return kExitOk;
}

struct BlurArgs {
  std::string dataset;
  std::string image;
  std::string out;
  std::string kernel = "homography";
  int samples = 0;
};

int run_blur(const BlurArgs& a, std::ostream& out) {
  const Dataset d = load_dataset(a.dataset);
  const ImageBuffer sharp = read_png(a.image);
  BlurSpec spec = d.spec;
  if (a.samples > 0) spec.samples = a.samples;
  const BlurOperator op = build_operator(d, kKernelNames.at(a.kernel), spec);
  write_image(a.out, apply_blur(op, sharp));
  out << "wrote " << a.out << "\n";
  return kExitOk;
}

struct DeblurArgs {
  std::string dataset;
  std::string out;
  std::string kernel = "homography";
  bool no_boundary_weights = false;
  std::string trace;
  unsigned threads = 0;
  SolverConfig cfg;
  int samples = 0;
};

int run_deblur(const DeblurArgs& a, std::ostream& out) {
  if (a.threads > 0) set_thread_count(a.threads);
  const Dataset d = load_dataset(a.dataset);
  BlurSpec spec = d.spec;
  if (a.samples > 0) spec.samples = a.samples;
  SolverConfig cfg = a.cfg;
  cfg.n_samples = spec.samples;
  cfg.boundary_weights = !a.no_boundary_weights;

  const BlurOperator op = build_operator(d, kKernelNames.at(a.kernel), spec);

  std::unique_ptr<std::ofstream> trace_file;
  TraceSink sink;
  if (!a.trace.empty()) {
    std::ostream* trace_out = &out;
    if (a.trace != "-") {
      const fs::path parent = fs::path(a.trace).parent_path();
      if (!parent.empty()) fs::create_directories(parent);
      trace_file = std::make_unique<std::ofstream>(a.trace);
      if (!*trace_file) throw Error(ErrorCode::kIoError, "cannot write trace '" + a.trace + "'");
      trace_out = trace_file.get();
    }
    sink = [trace_out](const TraceRecord& r) { *trace_out << format_trace(r) << "\n"; };
  }

  const DeblurResult r = deblur(d.blurred, op, d.occlusion, cfg, sink);
  const fs::path dir = a.out.empty() ? fs::path(a.dataset) : fs::path(a.out);
  fs::create_directories(dir);
  write_png(dir / "deblurred.png", r.image, 16);
  write_png(dir / "weights.png", r.weights.as_image(), 16);
  out << "wrote " << (dir / "deblurred.png").string() << " and "
      << (dir / "weights.png").string() << "\n";
  if (d.reference) {
    out << "psnr=" << format_number(psnr(r.image, *d.reference))
        << " ssim=" << format_number(ssim(r.image, *d.reference)) << "\n";
  }
  return kExitOk;
}

struct EvalArgs {
  std::string reference;
  std::string candidate;
  std::string mask;
};

int run_eval(const EvalArgs& a, std::ostream& out) {
  const ImageBuffer ref = read_png(a.reference);
  const ImageBuffer img = read_png(a.candidate);
  if (a.mask.empty()) {
    out << "psnr=" << format_number(psnr(ref, img)) << " ssim=" << format_number(ssim(ref, img))
        << "\n";
    return kExitOk;
  }
  const GrayImage g = read_pgm(a.mask);
  if (g.width != ref.width() || g.height != ref.height()) {
    throw Error(ErrorCode::kDimensionMismatch, "mask does not match the images");
  }
  std::vector<unsigned char> mask(g.values.size());
  std::transform(g.values.begin(), g.values.end(), mask.begin(),
                 [](std::uint16_t v) { return v != 0 ? 1 : 0; });
  out << "psnr=" << format_number(psnr_masked(ref, img, mask))
      << " ssim=" << format_number(ssim_masked(ref, img, mask)) << "\n";
  return kExitOk;
}

struct KernelDumpArgs {
  std::string dataset;
  std::vector<std::string> pixels;
  std::string out;
  std::string kernel = "homography";
  int crop = 0;
  bool raw = false;
};

ImageBuffer crop_around(const ImageBuffer& img, int cx, int cy, int radius) {
  const int side = 2 * radius + 1;
  ImageBuffer out(side, side, 1);
  for (int y = 0; y < side; ++y) {
    for (int x = 0; x < side; ++x) {
      const int sx = cx - radius + x;
      const int sy = cy - radius + y;
      if (sx >= 0 && sy >= 0 && sx < img.width() && sy < img.height()) {
        out.at(x, y) = img.at(sx, sy);
      }
    }
  }
  return out;
}

int run_kernel_dump(const KernelDumpArgs& a, std::ostream& out) {
  const Dataset d = load_dataset(a.dataset);
  const BlurOperator op = build_operator(d, kKernelNames.at(a.kernel), d.spec);
  const fs::path base(a.out);
  for (const auto& text : a.pixels) {
    const Pixel p = *parse_pixel(text);
    ImageBuffer k = kernel_image(op, p.x, p.y, !a.raw);
    if (a.crop > 0) k = crop_around(k, p.x, p.y, a.crop);
    fs::path path = base;
    if (a.pixels.size() > 1) {
      path = base.parent_path() / (base.stem().string() + "_" + std::to_string(p.x) + "_" +
                                   std::to_string(p.y) + base.extension().string());
    }
    write_image(path, k);
    out << "wrote " << path.string() << "\n";
  }
  return kExitOk;
}

}  // namespace

int cli_main(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Spatially-variant motion deblurring with homography blur kernels", "sdeblur"};
  app.require_subcommand(1);
  app.set_version_flag("--version", "sdeblur 0.1.0");

  const auto kernel_check = CLI::IsMember({"homography", "flow", "gt-flow"});
  const CLI::Validator pixel_check(
      [](std::string& s) { return parse_pixel(s) ? std::string() : "expected X,Y, got '" + s + "'"; },
      "X,Y");

  SynthArgs synth;
  auto* cmd_synth = app.add_subcommand("synth", "Render a synthetic scene into a dataset directory");
  auto* scene_opt = cmd_synth->add_option("--scene", synth.scene, "Standard suite scene name")
                        ->check(CLI::IsMember(suite_scene_names()));
  cmd_synth->add_option("--size", synth.size, "Image width and height")->check(CLI::Range(16, 4096));
  cmd_synth->add_option("--out", synth.out, "Output dataset directory")->required();
  cmd_synth->add_option("--mask-dilation", synth.mask_dilation, "Dilate the occlusion mask (px)")
      ->check(CLI::Range(0, 64));
  cmd_synth->add_option("--noise", synth.noise, "Gaussian noise sigma")->check(CLI::Range(0.0, 1.0));
  cmd_synth->add_option("--noise-seed", synth.noise_seed, "Noise seed");
  cmd_synth->add_option("--duty-cycle", synth.duty_cycle, "Exposure / frame interval")
      ->check(CLI::Range(1e-6, 1.0));
  cmd_synth->add_option("--texture", synth.texture, "Texture of a custom planar scene")
      ->check(CLI::IsMember({"checker", "noise", "glyphs"}))
      ->excludes(scene_opt);
  cmd_synth->add_option("--seed", synth.texture_seed, "Texture seed of a custom scene")
      ->excludes(scene_opt);
  cmd_synth->add_option("--rotation", synth.rotation, "Rotation vector rx,ry,rz per frame")
      ->delimiter(',')
      ->expected(3)
      ->excludes(scene_opt);
  cmd_synth->add_option("--translation", synth.translation, "Translation tx,ty,tz per frame")
      ->delimiter(',')
      ->expected(3)
      ->excludes(scene_opt);
  cmd_synth->add_option("--normal", synth.normal, "Plane n with n.X = 1 for points X on it")
      ->delimiter(',')
      ->expected(3)
      ->excludes(scene_opt);

  BlurArgs blur;
  auto* cmd_blur = app.add_subcommand("blur", "Blur a sharp image with a dataset's motion");
  cmd_blur->add_option("dataset", blur.dataset, "Dataset directory")->required();
  cmd_blur->add_option("image", blur.image, "Sharp PNG")->required();
  cmd_blur->add_option("--out", blur.out, "Output PNG or PGM")->required();
  cmd_blur->add_option("--kernel", blur.kernel, "homography, flow or gt-flow")->check(kernel_check);
  cmd_blur->add_option("--samples", blur.samples, "Quadrature samples (default: sidecar)")
      ->check(CLI::PositiveNumber);

  DeblurArgs deb;
  auto* cmd_deblur = app.add_subcommand("deblur", "Deblur a dataset");
  cmd_deblur->add_option("dataset", deb.dataset, "Dataset directory")->required();
  cmd_deblur->add_option("--out", deb.out, "Output directory (default: the dataset)");
  cmd_deblur->add_option("--kernel", deb.kernel,
                         "homography: sidecar planes; flow: flow.pfm; gt-flow: flow projected "
                         "from the sidecar")
      ->check(kernel_check);
  cmd_deblur->add_flag("--no-boundary-weights", deb.no_boundary_weights,
                       "Hold the data weights at 1");
  cmd_deblur->add_option("--trace", deb.trace, "Write the energy trace to a file ('-' for stdout)");
  cmd_deblur->add_option("--threads", deb.threads, "Worker threads (default: all cores)");
  cmd_deblur->add_option("--alpha", deb.cfg.alpha, "Prior weight");
  cmd_deblur->add_option("--k-sigma", deb.cfg.k_sigma, "Boundary weight sensitivity");
  cmd_deblur->add_option("--epsilon", deb.cfg.epsilon, "IRLS floor");
  cmd_deblur->add_option("--outer", deb.cfg.outer_iterations, "Reweighting rounds")
      ->check(CLI::NonNegativeNumber);
  cmd_deblur->add_option("--cg", deb.cfg.cg_iterations, "Conjugate-gradient steps per round")
      ->check(CLI::NonNegativeNumber);
  cmd_deblur->add_option("--samples", deb.samples, "Quadrature samples (default: sidecar)")
      ->check(CLI::PositiveNumber);

  EvalArgs ev;
  auto* cmd_eval = app.add_subcommand("eval", "Print PSNR and SSIM of an image against a reference");
  cmd_eval->add_option("reference", ev.reference, "Reference PNG")->required();
  cmd_eval->add_option("image", ev.candidate, "PNG to score")->required();
  cmd_eval->add_option("--mask", ev.mask, "PGM; score only nonzero pixels");

  KernelDumpArgs kd;
  auto* cmd_kd = app.add_subcommand("kernel-dump", "Write blur kernels of selected pixels as images");
  cmd_kd->add_option("dataset", kd.dataset, "Dataset directory")->required();
  cmd_kd->add_option("--pixel", kd.pixels, "Pixel X,Y (repeatable)")->required()->check(pixel_check);
  cmd_kd->add_option("--out", kd.out, "Output PNG or PGM")->required();
  cmd_kd->add_option("--kernel", kd.kernel, "homography, flow or gt-flow")->check(kernel_check);
  cmd_kd->add_option("--crop", kd.crop, "Crop a (2r+1)^2 window around the pixel")
      ->check(CLI::NonNegativeNumber);
  cmd_kd->add_flag("--raw", kd.raw, "Write raw weights instead of peak-normalised ones");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::CallForVersion&) {
    out << app.version() << "\n";
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "usage error: " << e.what() << "\n";
    err << "run 'sdeblur --help' for usage\n";
    return kExitUsage;
  }

  try {
    if (cmd_synth->parsed()) return run_synth(synth, out);
    if (cmd_blur->parsed()) return run_blur(blur, out);
    if (cmd_deblur->parsed()) return run_deblur(deb, out);
    if (cmd_eval->parsed()) return run_eval(ev, out);
    if (cmd_kd->parsed()) return run_kernel_dump(kd, out);
  } catch (const Error& e) {
    err << "error [" << to_string(e.code()) << "]: " << e.what() << "\n";
    return kExitFailure;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitFailure;
  }
  return kExitUsage;
}

}  // namespace sdeblur::cli

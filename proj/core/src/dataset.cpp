#include "sdeblur/dataset.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include "json.hpp"
#include "sdeblur/error.hpp"
#include "sdeblur/image_io.hpp"

namespace sdeblur {
namespace {

using nlohmann::json;

constexpr const char* kSidecarHeader = "sdv1";

template <int N>
Eigen::Matrix<double, N, 1> read_vector(const json& obj, const char* field,
                                        const std::string& where) {
  if (!obj.contains(field) || !obj[field].is_array() || obj[field].size() != N) {
    throw Error(ErrorCode::kParseError, where + ": field '" + field + "' must be an array of " +
                                            std::to_string(N) + " reals");
  }
  Eigen::Matrix<double, N, 1> v;
  for (int i = 0; i < N; ++i) {
    const json& e = obj[field][static_cast<std::size_t>(i)];
    if (!e.is_number()) {
      throw Error(ErrorCode::kParseError, where + ": field '" + field + "' has a non-numeric entry");
    }
    v(i) = e.get<double>();
  }
  return v;
}

Eigen::Matrix3d read_matrix(const json& obj, const char* field, const std::string& where) {
  const Eigen::Matrix<double, 9, 1> v = read_vector<9>(obj, field, where);
  Eigen::Matrix3d m;
  for (int r = 0; r < 3; ++r) {
    for (int c = 0; c < 3; ++c) m(r, c) = v(3 * r + c);
  }
  return m;
}

json matrix_json(const Eigen::Matrix3d& m) {
  json a = json::array();
  for (int r = 0; r < 3; ++r) {
    for (int c = 0; c < 3; ++c) a.push_back(m(r, c));
  }
  return a;
}

json vector_json(const Eigen::Vector3d& v) { return json::array({v.x(), v.y(), v.z()}); }

std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIoError, "cannot open '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void check_size(int w, int h, const Dataset& d, const std::string& what) {
  if (w != d.blurred.width() || h != d.blurred.height()) {
    throw Error(ErrorCode::kInvariantViolation,
                what + " is " + std::to_string(w) + "x" + std::to_string(h) +
                    " but blurred.png is " + std::to_string(d.blurred.width()) + "x" +
                    std::to_string(d.blurred.height()));
  }
}

}  // namespace

std::string format_sidecar(const Sidecar& sidecar) {
  json doc;
  doc["camera"] = {{"K", matrix_json(sidecar.camera.intrinsics)},
                   {"center", vector_json(sidecar.camera.center)},
                   {"duty_cycle", sidecar.spec.duty_cycle},
                   {"samples", sidecar.spec.samples}};
  json segments = json::array();
  for (const auto& p : sidecar.patches) {
    const RigidMotion m = se3_exp(p.motion, 1.0);
    segments.push_back({{"id", p.segment_id},
                        {"normal", vector_json(p.normal)},
                        {"motion",
                         {{"rotation", matrix_json(m.rotation)},
                          {"translation", vector_json(m.translation)}}}});
  }
  doc["segments"] = std::move(segments);
  return std::string(kSidecarHeader) + "\n" + doc.dump(2) + "\n";
}

Sidecar parse_sidecar(const std::string& text, const std::string& source) {
  std::istringstream in(text);
  std::string header;
  std::getline(in, header);
  if (!header.empty() && header.back() == '\r') header.pop_back();
  if (header != kSidecarHeader) {
    throw Error(ErrorCode::kParseError,
                source + ": expected header line 'sdv1', found '" + header + "'");
  }
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kParseError, source + ": " + e.what());
  }

  Sidecar out;
  if (!doc.contains("camera") || !doc["camera"].is_object()) {
    throw Error(ErrorCode::kParseError, source + ": missing object 'camera'");
  }
  const json& cam = doc["camera"];
  const std::string cam_where = source + " camera";
  out.camera.intrinsics = read_matrix(cam, "K", cam_where);
  if (cam.contains("center")) out.camera.center = read_vector<3>(cam, "center", cam_where);
  if (!cam.contains("duty_cycle") || !cam["duty_cycle"].is_number()) {
    throw Error(ErrorCode::kParseError, cam_where + ": field 'duty_cycle' must be a real");
  }
  out.spec.duty_cycle = cam["duty_cycle"].get<double>();
  if (cam.contains("samples")) {
    if (!cam["samples"].is_number_integer()) {
      throw Error(ErrorCode::kParseError, cam_where + ": field 'samples' must be an integer");
    }
    out.spec.samples = cam["samples"].get<int>();
  }
  out.spec.validate();
  validate(out.camera);

  if (!doc.contains("segments") || !doc["segments"].is_array()) {
    throw Error(ErrorCode::kParseError, source + ": missing array 'segments'");
  }
  std::set<int> seen;
  for (const json& seg : doc["segments"]) {
    if (!seg.contains("id") || !seg["id"].is_number_integer()) {
      throw Error(ErrorCode::kParseError, source + ": segment without integer 'id'");
    }
    PlanePatch p;
    p.segment_id = seg["id"].get<int>();
    const std::string where = source + " segment " + std::to_string(p.segment_id);
    if (!seen.insert(p.segment_id).second) {
      throw Error(ErrorCode::kParseError, where + ": duplicate id");
    }
    p.normal = read_vector<3>(seg, "normal", where);
    if (!seg.contains("motion") || !seg["motion"].is_object()) {
      throw Error(ErrorCode::kParseError, where + ": missing object 'motion'");
    }
    RigidMotion m;
    m.rotation = read_matrix(seg["motion"], "rotation", where + " motion");
    m.translation = read_vector<3>(seg["motion"], "translation", where + " motion");
    try {
      p.motion = se3_log(m);
    } catch (const Error& e) {
      throw Error(ErrorCode::kInvariantViolation, where + ": " + e.what());
    }
    validate(out.camera, p);
    out.patches.push_back(p);
  }
  return out;
}

Dataset load_dataset(const std::filesystem::path& dir) {
  namespace fs = std::filesystem;
  if (!fs::is_directory(dir)) {
    throw Error(ErrorCode::kIoError, "dataset directory '" + dir.string() + "' does not exist");
  }
  Dataset d;
  d.blurred = read_png(dir / kBlurredFile);
  if (fs::exists(dir / kReferenceFile)) {
    d.reference = read_png(dir / kReferenceFile);
    if (!d.reference->same_shape(d.blurred)) {
      throw Error(ErrorCode::kInvariantViolation, "reference.png does not match blurred.png");
    }
  }

  const fs::path sidecar_path = dir / kSidecarFile;
  Sidecar sc = parse_sidecar(read_text(sidecar_path), sidecar_path.string());
  d.camera = sc.camera;
  d.spec = sc.spec;
  d.patches = std::move(sc.patches);

  const GrayImage seg = read_pgm(dir / kSegmentationFile);
  check_size(seg.width, seg.height, d, kSegmentationFile);
  d.segmentation = SegmentationMap(seg.width, seg.height);
  std::set<int> known;
  for (const auto& p : d.patches) known.insert(p.segment_id);
  for (std::size_t i = 0; i < seg.values.size(); ++i) {
    const int label = seg.values[i];
    if (!known.contains(label)) {
      throw Error(ErrorCode::kMissingSegment,
                  "segmentation label " + std::to_string(label) + " has no entry in " +
                      sidecar_path.string());
    }
    d.segmentation.labels[i] = label;
  }

  d.occlusion = OcclusionMask(d.blurred.width(), d.blurred.height());
  if (fs::exists(dir / kOcclusionFile)) {
    const GrayImage occ = read_pgm(dir / kOcclusionFile);
    check_size(occ.width, occ.height, d, kOcclusionFile);
    for (std::size_t i = 0; i < occ.values.size(); ++i) {
      d.occlusion.occluded[i] = occ.values[i] != 0 ? 1 : 0;
    }
  }

  if (fs::exists(dir / kFlowFile)) {
    d.flow = read_flow_pfm(dir / kFlowFile);
    check_size(d.flow->width, d.flow->height, d, kFlowFile);
  }
  return d;
}

void save_dataset(const std::filesystem::path& dir, const Dataset& d) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  write_png(dir / kBlurredFile, d.blurred, 16);
  if (d.reference) write_png(dir / kReferenceFile, *d.reference, 16);

  GrayImage seg{d.segmentation.width, d.segmentation.height, 65535, {}};
  for (int label : d.segmentation.labels) {
    if (label < 0 || label > 65535) {
      throw Error(ErrorCode::kInvalidArgument, "segment label does not fit 16 bits");
    }
    seg.values.push_back(static_cast<std::uint16_t>(label));
  }
  write_pgm(dir / kSegmentationFile, seg);

  std::ofstream sc(dir / kSidecarFile, std::ios::binary);
  if (!sc) throw Error(ErrorCode::kIoError, "cannot write sidecar in '" + dir.string() + "'");
  sc << format_sidecar({d.camera, d.spec, d.patches});
  sc.close();

  GrayImage occ{d.occlusion.width, d.occlusion.height, 255, {}};
  for (auto v : d.occlusion.occluded) occ.values.push_back(v != 0 ? 255 : 0);
  write_pgm(dir / kOcclusionFile, occ);

  if (d.flow) write_flow_pfm(dir / kFlowFile, *d.flow);
}

Dataset make_dataset(const SceneSpec& scene, int mask_dilation) {
  const RenderedFrames frames = render_blurred(scene);
  GroundTruth gt = ground_truth_sidecar(scene, mask_dilation);
  Dataset d;
  d.blurred = frames.blurred;
  d.reference = frames.sharp_reference;
  d.segmentation = std::move(gt.segmentation);
  d.patches = std::move(gt.patches);
  d.camera = scene.camera;
  d.spec = scene.spec;
  d.occlusion = std::move(gt.occlusion);
  d.flow = std::move(gt.flow);
  return d;
}

}  // namespace sdeblur

#include "posebias/cli.hpp"

#include <CLI11.hpp>
#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <json.hpp>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>

#include "posebias/dataset.hpp"
#include "posebias/io.hpp"
#include "posebias/masking.hpp"
#include "posebias/metrics.hpp"
#include "posebias/parallel.hpp"
#include "posebias/saliency.hpp"

namespace posebias::cli {

namespace {

using nlohmann::json;
namespace fs = std::filesystem;

std::string shortest(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

std::vector<std::string> split(const std::string &s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream in(s);
  while (std::getline(in, cur, sep)) out.push_back(cur);
  if (!s.empty() && s.back() == sep) out.emplace_back();
  return out;
}

std::string trim(const std::string &s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  return s.substr(b, s.find_last_not_of(" \t\r\n") - b + 1);
}

double parse_double(const std::string &s, ErrorCode code, const std::string &where) {
  const std::string t = trim(s);
  double v = 0.0;
  const auto [end, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
  if (t.empty() || ec != std::errc{} || end != t.data() + t.size() || !std::isfinite(v))
    fail(code, where + ": invalid number '" + t + "'");
  return v;
}

void ensure_dir(const fs::path &dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) fail(ErrorCode::kIo, "cannot create directory " + dir.string() + ": " + ec.message());
}

fs::path with_suffix(const std::string &prefix, const std::string &suffix) {
  return fs::path(prefix + suffix);
}

void ensure_parent(const fs::path &p) {
  if (p.has_parent_path()) ensure_dir(p.parent_path());
}

masking::Rgb parse_fill(const std::string &s) {
  const auto parts = split(s, ',');
  if (parts.size() != 3) fail(ErrorCode::kInvalidArgument, "--fill expects r,g,b");
  std::uint8_t c[3];
  for (int i = 0; i < 3; ++i) {
    const double v = parse_double(parts[i], ErrorCode::kInvalidArgument, "--fill");
    if (v < 0 || v > 255 || v != std::floor(v))
      fail(ErrorCode::kInvalidArgument, "--fill components must be integers in [0, 255]");
    c[i] = static_cast<std::uint8_t>(v);
  }
  return {c[0], c[1], c[2]};
}

masking::BinaryMask mask_from_image(const io::ImageBuffer &img, const fs::path &source) {
  if (img.channels != 1)
    fail(ErrorCode::kInvalidArgument, source.string() + ": mask PNG must be grayscale");
  masking::BinaryMask mask(img.width, img.height);
  for (int y = 0; y < img.height; ++y) {
    for (int x = 0; x < img.width; ++x) {
      const std::uint8_t v = img.pixel(x, y)[0];
      if (v != 0 && v != 255)
        fail(ErrorCode::kInvalidArgument,
             source.string() + ": mask PNG values must be 0 or 255");
      mask.set(x, y, v == 255);
    }
  }
  return mask;
}

io::ImageBuffer mask_to_image(const masking::BinaryMask &mask) {
  auto img = io::ImageBuffer::filled(mask.width(), mask.height(), 1);
  for (int y = 0; y < mask.height(); ++y)
    for (int x = 0; x < mask.width(); ++x) img.pixel(x, y)[0] = mask.at(x, y) ? 255 : 0;
  return img;
}

json density_json(const masking::DensityMap &d) {
  std::uint32_t peak = 0;
  for (int y = 0; y < d.height(); ++y)
    for (int x = 0; x < d.width(); ++x) peak = std::max(peak, d.count(x, y));
  return {{"frames", d.frame_count()},
          {"width", d.width()},
          {"height", d.height()},
          {"max_density", d.frame_count() ? static_cast<double>(peak) / d.frame_count() : 0.0}};
}

void write_density(const masking::DensityMap &d, const std::string &prefix) {
  ensure_parent(with_suffix(prefix, ".png"));
  io::write_png(d.to_image(), with_suffix(prefix, ".png"));
  io::write_tensor(d.to_tensor(), with_suffix(prefix, io::kTensorExtension));
}

// --- mask -------------------------------------------------------------------

struct MaskArgs {
  std::string manifest, corners, geometry = "frame", out, fill = "0,0,0", save_masks, density;
  int jobs = 1;
};

int cmd_mask(const MaskArgs &a, std::ostream &out) {
  const auto geometry = masking::parse_geometry(a.geometry);
  const auto loaded = dataset::load_manifest(a.manifest);
  const auto corners = masking::load_corners(a.corners);
  masking::MaskOptions options;
  options.geometry = *geometry;
  options.fill = parse_fill(a.fill);
  options.jobs = a.jobs;
  const auto summary = masking::mask_dataset(loaded.manifest, corners, options, a.out);

  if (!a.save_masks.empty()) {
    ensure_dir(a.save_masks);
    const auto &m = loaded.manifest;
    std::vector<bool> skipped(m.frames.size(), false);
    for (const auto &s : summary.skipped)
      for (std::size_t i = 0; i < m.frames.size(); ++i)
        if (m.frames[i].frame_id == s.frame_id) skipped[i] = true;
    for (std::size_t i = 0; i < m.frames.size(); ++i) {
      if (skipped[i]) continue;
      const auto r = masking::board_mask(corners, *geometry, m.frames[i].gt, m.intrinsics);
      io::write_png(mask_to_image(r.mask), fs::path(a.save_masks) / (m.frames[i].frame_id + ".png"));
    }
  }
  if (!a.density.empty() && summary.density.frame_count() > 0)
    write_density(summary.density, a.density);

  json skipped = json::array();
  for (const auto &s : summary.skipped)
    skipped.push_back({{"frame_id", s.frame_id}, {"reason", s.reason}});
  const json report = {
      {"command", "mask"},
      {"object_id", corners.object_id},
      {"geometry", masking::geometry_name(*geometry)},
      {"fill", {options.fill.r, options.fill.g, options.fill.b}},
      {"frames", summary.frames},
      {"written", summary.written},
      {"skipped", skipped},
      {"degenerate", summary.degenerate},
      {"masked_pixels",
       {{"min", summary.masked_pixels_min},
        {"max", summary.masked_pixels_max},
        {"mean", summary.masked_pixels_mean}}},
      {"rotation_residual_max", loaded.max_rotation_residual},
  };
  io::write_text_file(fs::path(a.out) / "summary.json", report.dump(2) + "\n");
  out << report.dump() << "\n";
  return kSuccess;
}

// --- density ----------------------------------------------------------------

struct DensityArgs {
  std::string masks_dir, manifest, corners, geometry = "frame", out;
};

int cmd_density(const DensityArgs &a, std::ostream &out) {
  masking::DensityMap density;
  if (!a.masks_dir.empty()) {
    if (!a.manifest.empty() || !a.corners.empty())
      fail(ErrorCode::kInvalidArgument, "use either --masks or --manifest/--corners");
    std::vector<fs::path> files;
    for (const auto &entry : fs::directory_iterator(a.masks_dir))
      if (entry.is_regular_file() && entry.path().extension() == ".png")
        files.push_back(entry.path());
    std::sort(files.begin(), files.end());
    if (files.empty()) fail(ErrorCode::kInvalidArgument, "no mask PNGs in " + a.masks_dir);
    for (const auto &f : files) {
      const auto mask = mask_from_image(io::read_png(f), f);
      if (density.frame_count() == 0) density = masking::DensityMap(mask.width(), mask.height());
      density.add(mask);
    }
  } else {
    if (a.manifest.empty() || a.corners.empty())
      fail(ErrorCode::kInvalidArgument, "density needs --masks or --manifest with --corners");
    const auto geometry = masking::parse_geometry(a.geometry);
    const auto m = dataset::load_manifest(a.manifest).manifest;
    const auto corners = masking::load_corners(a.corners);
    if (m.frames.empty()) fail(ErrorCode::kInvalidArgument, "manifest has no frames");
    density = masking::DensityMap(m.intrinsics.width, m.intrinsics.height);
    for (const auto &f : m.frames) {
      try {
        density.add(masking::board_mask(corners, *geometry, f.gt, m.intrinsics).mask);
      } catch (const geometry::BehindCameraError &) {
        // Not visible in this frame.
      }
    }
    if (density.frame_count() == 0)
      fail(ErrorCode::kInvalidArgument, "board is behind the camera in every frame");
  }
  write_density(density, a.out);
  json report = density_json(density);
  report["command"] = "density";
  report["png"] = with_suffix(a.out, ".png").string();
  report["tensor"] = with_suffix(a.out, io::kTensorExtension).string();
  out << report.dump() << "\n";
  return kSuccess;
}

// --- eval -------------------------------------------------------------------

struct EvalArgs {
  std::string manifest, pred, metric = "auto", out, cross_with;
  double k_m = metrics::kDefaultKm;
  bool skip_missing = false;
  int jobs = 1;
};

std::map<std::string, geometry::Pose> load_predictions(const fs::path &path) {
  const auto bytes = io::read_file(path);
  std::istringstream in(std::string(bytes.begin(), bytes.end()));
  std::map<std::string, geometry::Pose> preds;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    line = trim(line);
    if (line.empty()) continue;
    const auto cols = split(line, ',');
    const std::string where = path.string() + ":" + std::to_string(line_no);
    if (line_no == 1 && trim(cols[0]) == "frame_id") continue;
    if (cols.size() != 13)
      fail(ErrorCode::kPrediction, where + ": expected 13 columns (frame_id,r11..r33,tx,ty,tz)");
    const std::string id = trim(cols[0]);
    double v[12];
    for (int i = 0; i < 12; ++i) v[i] = parse_double(cols[i + 1], ErrorCode::kPrediction, where);
    geometry::Pose pose;
    pose.rotation << v[0], v[1], v[2], v[3], v[4], v[5], v[6], v[7], v[8];
    pose.translation = geometry::Vec3(v[9], v[10], v[11]);
    const double residual = std::max(geometry::orthonormality_residual(pose.rotation),
                                     std::abs(pose.rotation.determinant() - 1.0));
    if (residual > dataset::kRotationRepairTolerance)
      fail(ErrorCode::kPrediction, where + ": predicted rotation is not a rotation matrix");
    if (!geometry::is_rotation(pose.rotation))
      pose.rotation = geometry::nearest_rotation(pose.rotation);
    if (!preds.emplace(id, pose).second)
      fail(ErrorCode::kPrediction, where + ": duplicate prediction for frame '" + id + "'");
  }
  return preds;
}

int cmd_eval(const EvalArgs &a, std::ostream &out) {
  if (!(a.k_m > 0.0)) fail(ErrorCode::kInvalidArgument, "--k-m must be positive");
  const auto m = dataset::load_manifest(a.manifest).manifest;
  if (m.frames.empty()) fail(ErrorCode::kInvalidArgument, "manifest has no frames");
  const io::MeshFile mesh = io::read_ply(m.model.path);
  const metrics::PointCloud model{mesh.vertices};

  metrics::ModelInfo info;
  info.symmetric = m.model.symmetric;
  std::string diameter_source = "manifest";
  if (m.model.diameter) {
    info.diameter = *m.model.diameter;
  } else if (mesh.declared_diameter) {
    info.diameter = *mesh.declared_diameter;
    diameter_source = "model_header";
  } else {
    info.diameter = metrics::model_diameter(model);
    diameter_source = "computed";
  }
  const metrics::MetricKind kind = a.metric == "auto"  ? metrics::metric_dispatch(info)
                                   : a.metric == "add" ? metrics::MetricKind::kAdd
                                                       : metrics::MetricKind::kAddS;

  const auto preds = load_predictions(a.pred);
  for (const auto &[id, pose] : preds) {
    const bool known = std::any_of(m.frames.begin(), m.frames.end(),
                                   [&](const dataset::Frame &f) { return f.frame_id == id; });
    if (!known) fail(ErrorCode::kPrediction, "prediction for unknown frame '" + id + "'");
  }

  const std::size_t n = m.frames.size();
  std::vector<std::optional<metrics::ErrorRecord>> slots(n);
  parallel_chunks(n, a.jobs, [&](std::size_t, std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) {
      const auto &f = m.frames[i];
      const auto it = preds.find(f.frame_id);
      if (it == preds.end()) {
        if (!a.skip_missing)
          slots[i] = metrics::ErrorRecord{f.frame_id, std::numeric_limits<double>::infinity(),
                                          kind, false};
        continue;
      }
      const double e = metrics::pose_error(kind, model, it->second, f.gt);
      slots[i] = metrics::ErrorRecord{f.frame_id, e, kind, metrics::is_correct(e, info, a.k_m)};
    }
  });
  std::vector<metrics::ErrorRecord> records;
  for (auto &s : slots)
    if (s) records.push_back(std::move(*s));
  const double accuracy = metrics::aggregate(records);
  const std::size_t correct = static_cast<std::size_t>(
      std::count_if(records.begin(), records.end(), [](const auto &r) { return r.correct; }));
  const double threshold = a.k_m * info.diameter;

  json report = {
      {"accuracy", accuracy},
      {"n_frames", records.size()},
      {"n_correct", correct},
      {"n_missing", n - std::min(n, preds.size())},
      {"metric", metrics::metric_name(kind)},
      {"k_m", a.k_m},
      {"diameter_mm", info.diameter},
      {"diameter_source", diameter_source},
      {"threshold_mm", threshold},
      {"missing_policy", a.skip_missing ? "skip" : "incorrect"},
  };
  if (!a.cross_with.empty()) {
    const auto bytes = io::read_file(a.cross_with);
    json other;
    try {
      other = json::parse(bytes.begin(), bytes.end());
    } catch (const json::exception &e) {
      fail(ErrorCode::kInvalidArgument, a.cross_with + ": " + e.what());
    }
    if (!other.is_object() || !other.contains("accuracy") || !other["accuracy"].is_number())
      fail(ErrorCode::kInvalidArgument, a.cross_with + ": report lacks a numeric 'accuracy'");
    const auto table = metrics::cross_table(accuracy, other["accuracy"].get<double>());
    report["cross_average"] = table.cross_average;
    report["cross_accuracy"] = table.accuracy_b;
  }

  if (!a.out.empty()) {
    std::ostringstream csv;
    csv << "frame_id,metric,error_mm,threshold_mm,correct\n";
    for (const auto &r : records)
      csv << r.frame_id << "," << metrics::metric_name(r.metric) << "," << shortest(r.error)
          << "," << shortest(threshold) << "," << (r.correct ? "true" : "false") << "\n";
    ensure_parent(with_suffix(a.out, ".csv"));
    io::write_text_file(with_suffix(a.out, ".csv"), csv.str());
    io::write_text_file(with_suffix(a.out, ".json"), report.dump(2) + "\n");
  }
  out << report.dump() << "\n";
  return kSuccess;
}

// --- saliency ---------------------------------------------------------------

struct SaliencyArgs {
  std::string mode, grad, activations, candidates, confidences, size, out, overlay;
  std::string export_dir, frame;
  std::vector<std::string> features, grads, grads_rx, grads_ry, grads_rz;
};

saliency::LayerTriple read_triple(const std::vector<std::string> &paths, const char *flag) {
  if (paths.size() != 3)
    fail(ErrorCode::kInvalidArgument, std::string(flag) + " expects exactly three tensor files");
  return {io::read_tensor(paths[0]), io::read_tensor(paths[1]), io::read_tensor(paths[2])};
}

std::pair<int, int> parse_size(const std::string &s) {
  const auto x = s.find('x');
  if (x == std::string::npos) fail(ErrorCode::kInvalidArgument, "--size expects WxH");
  const double w = parse_double(s.substr(0, x), ErrorCode::kInvalidArgument, "--size");
  const double h = parse_double(s.substr(x + 1), ErrorCode::kInvalidArgument, "--size");
  if (w < 1 || h < 1 || w != std::floor(w) || h != std::floor(h) || w > 1e5 || h > 1e5)
    fail(ErrorCode::kInvalidArgument, "--size dimensions must be positive integers");
  return {static_cast<int>(w), static_cast<int>(h)};
}

// Fills the tensor paths of `a` from an export directory laid out as
// `{frame}_{quantity}.f32t` plus its metadata sidecar.
dataset::ExportMetadata resolve_export(SaliencyArgs &a) {
  if (a.frame.empty()) fail(ErrorCode::kInvalidArgument, "--export-dir needs --frame");
  const bool explicit_paths = !a.grad.empty() || !a.activations.empty() ||
                              !a.candidates.empty() || !a.confidences.empty() ||
                              !a.features.empty() || !a.grads.empty() || !a.grads_rx.empty() ||
                              !a.grads_ry.empty() || !a.grads_rz.empty();
  if (explicit_paths)
    fail(ErrorCode::kInvalidArgument, "--export-dir cannot be combined with tensor path flags");
  const fs::path dir(a.export_dir);
  const auto meta = dataset::load_export_metadata(dir / dataset::kExportMetadataFile);
  if (std::find(meta.frames.begin(), meta.frames.end(), a.frame) == meta.frames.end())
    fail(ErrorCode::kExportMetadata, "frame '" + a.frame + "' is not listed in the export");
  const auto path = [&](std::string_view q) {
    return (dir / io::tensor_file_name(a.frame, q)).string();
  };
  const auto triple = [&](std::string_view prefix) {
    std::vector<std::string> out;
    for (int i = 1; i <= 3; ++i) out.push_back(path(dataset::quantity::layer(prefix, i)));
    return out;
  };
  namespace q = dataset::quantity;
  if (a.mode == "vanilla") {
    a.grad = path(q::kInputGrad);
    if (fs::exists(path(q::kCandidates)) || fs::exists(path(q::kConfidences))) {
      a.candidates = path(q::kCandidates);
      a.confidences = path(q::kConfidences);
    }
  } else if (a.mode == "gradcam-reg") {
    a.features = triple("feat");
    if (meta.scalarization == dataset::Scalarization::kPerComponent) {
      a.grads_rx = triple("grad_rx");
      a.grads_ry = triple("grad_ry");
      a.grads_rz = triple("grad_rz");
    } else {
      a.grads = triple("grad");
    }
  } else {
    a.activations = path(q::kActivations);
    a.grad = path(q::kScoreGrad);
  }
  return meta;
}

int cmd_saliency(SaliencyArgs a, std::ostream &out) {
  std::optional<dataset::ExportMetadata> exported;
  if (!a.export_dir.empty()) exported = resolve_export(a);
  std::optional<io::ImageBuffer> background;
  if (!a.overlay.empty()) background = io::read_png(a.overlay);

  json meta;
  meta["mode"] = a.mode;
  if (exported) {
    meta["frame"] = a.frame;
    meta["taps"] = exported->taps;
  }
  std::vector<std::pair<std::string, saliency::RawMap>> extra_maps;
  saliency::SaliencyMap final_map;
  std::optional<std::pair<int, int>> size;
  if (!a.size.empty()) size = parse_size(a.size);
  if (!size && background) size = std::make_pair(background->width, background->height);

  if (a.mode == "vanilla") {
    if (a.grad.empty()) fail(ErrorCode::kInvalidArgument, "vanilla mode needs --grad");
    const Tensor grad = io::read_tensor(a.grad);
    if (grad.rank() != 3 || grad.dim(2) != 3)
      fail(ErrorCode::kShapeMismatch, "vanilla gradient must be H x W x 3");
    if (size && (size->first != static_cast<int>(grad.dim(1)) ||
                 size->second != static_cast<int>(grad.dim(0)))) {
      final_map = saliency::finalize_map(saliency::channel_mean(grad), size->first, size->second);
    } else {
      final_map = saliency::vanilla_map(grad);
    }
    meta["components"] = json::array({"input_gradient"});
    if (!a.candidates.empty() || !a.confidences.empty()) {
      if (a.candidates.empty() || a.confidences.empty())
        fail(ErrorCode::kInvalidArgument, "--candidates and --confidences go together");
      const auto best = saliency::select_best_candidate(
          {io::read_tensor(a.candidates), io::read_tensor(a.confidences)});
      meta["candidate_index"] = best.index;
      meta["candidate_rotation"] = {best.rotation.x(), best.rotation.y(), best.rotation.z()};
    }
  } else if (a.mode == "gradcam-reg") {
    const auto features = read_triple(a.features, "--features");
    std::vector<saliency::LayerTriple> grads;
    const bool per_component = !a.grads_rx.empty() || !a.grads_ry.empty() || !a.grads_rz.empty();
    if (per_component == !a.grads.empty())
      fail(ErrorCode::kInvalidArgument,
           "gradcam-reg needs either --grads or all of --grads-rx/--grads-ry/--grads-rz");
    if (per_component) {
      grads.push_back(read_triple(a.grads_rx, "--grads-rx"));
      grads.push_back(read_triple(a.grads_ry, "--grads-ry"));
      grads.push_back(read_triple(a.grads_rz, "--grads-rz"));
    } else {
      grads.push_back(read_triple(a.grads, "--grads"));
    }
    auto result = saliency::gradcam_regression_layers(features, grads);
    meta["scalarization"] = per_component ? "per_component_l2" : "pre_scalarized";
    meta["components"] = per_component ? json::array({"rx", "ry", "rz"}) : json::array({"scalar"});
    const char *names[3] = {"rx", "ry", "rz"};
    for (std::size_t c = 0; c < result.components.size(); ++c)
      extra_maps.emplace_back(names[c], std::move(result.components[c]));
    const auto [w, h] = size.value_or(std::make_pair(result.combined.width, result.combined.height));
    final_map = saliency::finalize_map(result.combined, w, h);
  } else if (a.mode == "gradcam-cls") {
    if (a.activations.empty() || a.grad.empty())
      fail(ErrorCode::kInvalidArgument, "gradcam-cls needs --activations and --grad");
    const auto raw =
        saliency::gradcam_classification(io::read_tensor(a.activations), io::read_tensor(a.grad));
    const auto [w, h] = size.value_or(std::make_pair(raw.width, raw.height));
    final_map = saliency::finalize_map(raw, w, h);
    meta["components"] = json::array({"class_score"});
  }

  ensure_parent(with_suffix(a.out, ".png"));
  io::write_png(final_map.render(), with_suffix(a.out, ".png"));
  for (const auto &[name, raw] : extra_maps) {
    const auto m = saliency::finalize_map(raw, final_map.width, final_map.height);
    io::write_png(m.render(), with_suffix(a.out, "_" + name + ".png"));
  }
  if (background) io::write_png(saliency::overlay(*background, final_map), with_suffix(a.out, "_overlay.png"));

  meta["min_raw"] = final_map.min_raw;
  meta["max_raw"] = final_map.max_raw;
  meta["degenerate"] = final_map.degenerate;
  meta["width"] = final_map.width;
  meta["height"] = final_map.height;
  io::write_text_file(with_suffix(a.out, ".json"), meta.dump(2) + "\n");
  out << meta.dump() << "\n";
  return kSuccess;
}

// --- synth ------------------------------------------------------------------

struct SynthArgs {
  std::string spec, out;
};

int cmd_synth(const SynthArgs &a, std::ostream &out) {
  const auto spec = dataset::load_synthetic_spec(a.spec);
  ensure_dir(a.out);
  const auto manifest = dataset::generate_synthetic(spec, a.out);
  const json report = {{"command", "synth"},
                       {"frames", manifest.frames.size()},
                       {"seed", spec.seed},
                       {"manifest", (fs::path(a.out) / "manifest.json").string()},
                       {"corners", (fs::path(a.out) / "corners.toml").string()}};
  out << report.dump() << "\n";
  return kSuccess;
}

void report_error(std::ostream &err, std::string_view code, const std::string &message) {
  err << json{{"error", code}, {"message", message}}.dump() << "\n";
}

}  // namespace

int run(const std::vector<std::string> &args, std::ostream &out, std::ostream &err) {
  CLI::App app{"Background-bias audit toolkit for 6-DoF pose datasets", "posebias"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all", "Show help for all subcommands");

  MaskArgs mask;
  auto *mask_cmd = app.add_subcommand("mask", "Occlude the fiducial board in every frame");
  mask_cmd->add_option("--manifest", mask.manifest, "Dataset manifest JSON")->required();
  mask_cmd->add_option("--corners", mask.corners, "Board corner config")->required();
  mask_cmd->add_option("--geometry", mask.geometry, "frame | filled")
      ->check(CLI::IsMember({"frame", "filled"}));
  mask_cmd->add_option("--out", mask.out, "Output directory for masked images")->required();
  mask_cmd->add_option("--fill", mask.fill, "Occluder color r,g,b (default 0,0,0)");
  mask_cmd->add_option("--save-masks", mask.save_masks, "Also write binary mask PNGs here");
  mask_cmd->add_option("--density", mask.density, "Write the density map to this prefix");
  mask_cmd->add_option("--jobs", mask.jobs, "Worker threads")->check(CLI::PositiveNumber);

  DensityArgs density;
  auto *density_cmd = app.add_subcommand("density", "Accumulate a marker density map");
  density_cmd->add_option("--masks", density.masks_dir, "Directory of binary mask PNGs");
  density_cmd->add_option("--manifest", density.manifest, "Dataset manifest JSON");
  density_cmd->add_option("--corners", density.corners, "Board corner config");
  density_cmd->add_option("--geometry", density.geometry, "frame | filled")
      ->check(CLI::IsMember({"frame", "filled"}));
  density_cmd->add_option("--out", density.out, "Output prefix (.png and .f32t)")->required();

  EvalArgs eval;
  auto *eval_cmd = app.add_subcommand("eval", "Score pose predictions with ADD / ADD-S");
  eval_cmd->add_option("--manifest", eval.manifest, "Dataset manifest JSON")->required();
  eval_cmd->add_option("--pred", eval.pred, "Prediction CSV")->required();
  eval_cmd->add_option("--k-m", eval.k_m, "Threshold fraction of the diameter");
  eval_cmd->add_option("--metric", eval.metric, "auto | add | adds")
      ->check(CLI::IsMember({"auto", "add", "adds"}));
  eval_cmd->add_flag("--skip-missing", eval.skip_missing,
                     "Exclude frames without a prediction instead of counting them wrong");
  eval_cmd->add_option("--out", eval.out, "Report prefix (.csv and .json)");
  eval_cmd->add_option("--cross-with", eval.cross_with,
                       "Report JSON of the other test set, for the cross average");
  eval_cmd->add_option("--jobs", eval.jobs, "Worker threads")->check(CLI::PositiveNumber);

  SaliencyArgs sal;
  auto *sal_cmd = app.add_subcommand("saliency", "Saliency maps from exported tensors");
  sal_cmd->add_option("--mode", sal.mode, "vanilla | gradcam-reg | gradcam-cls")
      ->required()
      ->check(CLI::IsMember({"vanilla", "gradcam-reg", "gradcam-cls"}));
  sal_cmd->add_option("--grad", sal.grad, "Input gradient (vanilla) or class-score gradient");
  sal_cmd->add_option("--activations", sal.activations, "Feature map for gradcam-cls");
  sal_cmd->add_option("--features", sal.features, "Three tapped feature maps")->delimiter(',');
  sal_cmd->add_option("--grads", sal.grads, "Three gradients of a scalar output")->delimiter(',');
  sal_cmd->add_option("--grads-rx", sal.grads_rx, "Three gradients of r_x")->delimiter(',');
  sal_cmd->add_option("--grads-ry", sal.grads_ry, "Three gradients of r_y")->delimiter(',');
  sal_cmd->add_option("--grads-rz", sal.grads_rz, "Three gradients of r_z")->delimiter(',');
  sal_cmd->add_option("--candidates", sal.candidates, "N x 3 candidate rotations");
  sal_cmd->add_option("--confidences", sal.confidences, "N candidate confidences");
  sal_cmd->add_option("--size", sal.size, "Output size WxH");
  sal_cmd->add_option("--overlay", sal.overlay, "Input image PNG for a color overlay");
  sal_cmd->add_option("--export-dir", sal.export_dir,
                      "Directory of {frame}_{quantity}.f32t files with export.json");
  sal_cmd->add_option("--frame", sal.frame, "Frame id to read from --export-dir");
  sal_cmd->add_option("--out", sal.out, "Output prefix")->required();

  SynthArgs synth;
  auto *synth_cmd = app.add_subcommand("synth", "Generate a synthetic board dataset");
  synth_cmd->add_option("--spec", synth.spec, "Scene spec (TOML-style)")->required();
  synth_cmd->add_option("--out", synth.out, "Output directory")->required();

  std::vector<std::string> argv_rest(args.begin() + (args.empty() ? 0 : 1), args.end());
  std::reverse(argv_rest.begin(), argv_rest.end());  // CLI11 consumes from the back
  try {
    app.parse(argv_rest);
  } catch (const CLI::ParseError &e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kSuccess : kUsageError;
  }

  try {
    if (mask_cmd->parsed()) return cmd_mask(mask, out);
    if (density_cmd->parsed()) return cmd_density(density, out);
    if (eval_cmd->parsed()) return cmd_eval(eval, out);
    if (sal_cmd->parsed()) return cmd_saliency(sal, out);
    if (synth_cmd->parsed()) return cmd_synth(synth, out);
  } catch (const Error &e) {
    report_error(err, error_code_name(e.code()), e.what());
    return kDomainError;
  } catch (const std::filesystem::filesystem_error &e) {
    report_error(err, "io", e.what());
    return kDomainError;
  } catch (const std::exception &e) {
    report_error(err, "internal", e.what());
    return kDomainError;
  }
  return kUsageError;
}

}  // namespace posebias::cli

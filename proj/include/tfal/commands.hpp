#pragma once

// File-level entry points behind each CLI subcommand. Everything a command
// writes lands under its output directory; per-frame artifacts live at
// <out>/<kind>/<video_id>/<frame_id>.tfal.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <filesystem>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "tfal/affinity.hpp"
#include "tfal/error.hpp"
#include "tfal/manifest.hpp"
#include "tfal/metrics.hpp"
#include "tfal/noise.hpp"
#include "tfal/parallel.hpp"
#include "tfal/rectifier.hpp"
#include "tfal/tensor_io.hpp"

namespace tfal {

namespace fs = std::filesystem;

/// Replaces characters that cannot appear in a single path component.
inline std::string path_component(std::string s) {
  for (auto& c : s)
    if (c == '/' || c == '\\' || c == ':') c = '_';
  if (s.empty() || s == "." || s == "..") s = "_" + s;
  return s;
}

inline fs::path frame_artifact(const fs::path& out, std::string_view kind, const std::string& video_id,
                               const std::string& frame_id, std::string_view suffix = ".tfal") {
  return out / kind / path_component(video_id) / (path_component(frame_id) + std::string(suffix));
}

inline void write_json(const fs::path& path, const nlohmann::json& j) {
  fs::create_directories(path.parent_path());
  write_text(path, j.dump(2) + "\n");
}

inline nlohmann::json read_json(const fs::path& path) {
  const auto bytes = read_file(path);
  try {
    return nlohmann::json::parse(bytes.begin(), bytes.end());
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(ErrorCode::kParseError, path.string() + ": " + e.what());
  }
}

inline void save_artifact(const Tensor& t, const fs::path& path) {
  fs::create_directories(path.parent_path());
  save_tensor(t, path);
}

// ---------------------------------------------------------------------------
// affinity

struct FrameAffinityRecord {
  std::string video_id;
  std::string frame_id;
  std::string adjacent_frame_id;
  std::optional<ImageStats> stats;
};

inline nlohmann::json to_json(const FrameAffinityRecord& r) {
  nlohmann::json j = {{"video_id", r.video_id}, {"frame_id", r.frame_id}, {"adjacent_frame_id", r.adjacent_frame_id}};
  j["stats"] = r.stats ? to_json(*r.stats) : nlohmann::json(nullptr);
  return j;
}

/// Writes a_p, a_n (float32) and their defined masks (uint8) for every frame,
/// a JSON sidecar per frame, and <out>/affinity_stats.json.
inline nlohmann::json cmd_affinity(const DatasetManifest& manifest, const fs::path& out, std::size_t threads = 1) {
  require(manifest.frame_count() > 0, ErrorCode::kEmptyDataset, "manifest has no frames");
  const auto refs = all_frames(manifest);
  std::vector<AffinityPair> pairs(refs.size());
  std::vector<FrameAffinityRecord> records(refs.size());
  parallel_for(refs.size(), threads, [&](std::size_t k) {
    pairs[k] = compute_frame_affinity(refs[k], manifest);
    const auto& video = manifest.videos[refs[k].video];
    auto& rec = records[k];
    rec.video_id = video.video_id;
    rec.frame_id = video.frames[refs[k].frame].frame_id;
    rec.adjacent_frame_id = video.frames[adjacent_frame(manifest, refs[k]).frame].frame_id;
    try {
      rec.stats = image_stats(pairs[k]);
    } catch (const Error& e) {
      if (e.code() != ErrorCode::kNoDefinedEntries) throw;
    }
  });

  nlohmann::json frames = nlohmann::json::array();
  for (std::size_t k = 0; k < refs.size(); ++k) {
    const auto& r = records[k];
    save_artifact(to_tensor(pairs[k].positive), frame_artifact(out, "affinity", r.video_id, r.frame_id, ".ap.tfal"));
    save_artifact(to_tensor(pairs[k].negative), frame_artifact(out, "affinity", r.video_id, r.frame_id, ".an.tfal"));
    save_artifact(to_tensor(pairs[k].defined_positive),
                  frame_artifact(out, "affinity", r.video_id, r.frame_id, ".dp.tfal"));
    save_artifact(to_tensor(pairs[k].defined_negative),
                  frame_artifact(out, "affinity", r.video_id, r.frame_id, ".dn.tfal"));
    auto j = to_json(r);
    j["height"] = pairs[k].height();
    j["width"] = pairs[k].width();
    write_json(frame_artifact(out, "affinity", r.video_id, r.frame_id, ".json"), j);
    frames.push_back(to_json(r));
  }
  nlohmann::json summary = {{"frames", std::move(frames)}};
  write_json(out / "affinity_stats.json", summary);
  return summary;
}

// ---------------------------------------------------------------------------
// thresholds

/// Reads one or more affinity_stats.json files; frames without statistics
/// are skipped.
inline Thresholds cmd_thresholds(const std::vector<fs::path>& stats_files, const std::optional<fs::path>& out = {}) {
  std::vector<ImageStats> stats;
  for (const auto& path : stats_files) {
    const auto doc = read_json(path);
    try {
      for (const auto& f : doc.at("frames")) {
        const auto& s = f.at("stats");
        if (s.is_null()) continue;
        ImageStats st;
        st.mean_positive = s.at("mean_ap").get<double>();
        st.mean_negative = s.at("mean_an").get<double>();
        st.q = s.at("q").get<double>();
        stats.push_back(st);
      }
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorCode::kParseError, path.string() + ": " + e.what());
    }
  }
  const auto th = dataset_thresholds(stats);
  if (out) write_json(*out / "thresholds.json", {{"thresholds", to_json(th)}, {"images", stats.size()}});
  return th;
}

// ---------------------------------------------------------------------------
// rectify

/// Writes report.json plus per-frame noise masks and corrected labels.
inline RectificationReport cmd_rectify(const DatasetManifest& manifest, const RectifyConfig& config, const fs::path& out) {
  auto report = rectify_dataset(manifest, config);
  for (const auto& fr : report.frames) {
    save_artifact(to_tensor(fr.noise_mask), frame_artifact(out, "masks", fr.video_id, fr.frame_id));
    save_artifact(to_tensor(fr.corrected_labels), frame_artifact(out, "corrected", fr.video_id, fr.frame_id));
  }
  write_json(out / "report.json", to_json(report));
  return report;
}

// ---------------------------------------------------------------------------
// inject-noise

struct InjectionSummary {
  DatasetManifest manifest;  // label_path -> noisy, clean_label_path -> clean
  std::vector<std::string> selected_videos;
  std::size_t noisy_pixels = 0;
  std::size_t total_pixels = 0;
};

inline std::string relative_to(const fs::path& target, const fs::path& base) {
  const auto abs_target = fs::absolute(target).lexically_normal();
  const auto rel = abs_target.lexically_relative(fs::absolute(base).lexically_normal());
  return rel.empty() ? abs_target.string() : rel.string();
}

/// Corrupts the clean labels of a manifest (clean_label_path when present,
/// otherwise label_path). Writes noisy labels, variance maps, manifest.json
/// and noise_report.json under `out`.
inline InjectionSummary cmd_inject_noise(const DatasetManifest& manifest, const NoiseConfig& cfg, const fs::path& out) {
  validate(cfg);
  std::vector<std::vector<LabelMap>> clean(manifest.videos.size());
  std::vector<std::string> ids;
  for (std::size_t v = 0; v < manifest.videos.size(); ++v) {
    ids.push_back(manifest.videos[v].video_id);
    for (const auto& f : manifest.videos[v].frames)
      clean[v].push_back(label_map_from(load_tensor(manifest.resolve(f.clean_label_path.value_or(f.label_path)))));
  }
  const auto noise = inject_labels(clean, ids, cfg);

  fs::create_directories(out);
  InjectionSummary summary;
  summary.manifest.base_dir = out;
  nlohmann::json videos_json = nlohmann::json::array();
  for (std::size_t v = 0; v < manifest.videos.size(); ++v) {
    const auto& video = manifest.videos[v];
    VideoEntry entry{video.video_id, {}};
    nlohmann::json frames_json = nlohmann::json::array();
    for (std::size_t f = 0; f < video.frames.size(); ++f) {
      const auto& src = video.frames[f];
      const auto label_file = frame_artifact(out, "labels", video.video_id, src.frame_id);
      const auto variance_file = frame_artifact(out, "variance", video.video_id, src.frame_id);
      save_artifact(to_tensor(noise[v].noisy[f]), label_file);
      save_artifact(to_tensor(noise[v].variance[f]), variance_file);
      FrameEntry fe;
      fe.frame_id = src.frame_id;
      fe.feature_path = relative_to(manifest.resolve(src.feature_path), out);
      fe.label_path = relative_to(label_file, out);
      fe.clean_label_path = relative_to(manifest.resolve(src.clean_label_path.value_or(src.label_path)), out);
      if (src.prediction_path) fe.prediction_path = relative_to(manifest.resolve(*src.prediction_path), out);
      entry.frames.push_back(std::move(fe));

      const auto& var = noise[v].variance[f].values;
      const auto noisy = static_cast<std::size_t>(std::count(var.begin(), var.end(), 1));
      summary.noisy_pixels += noisy;
      summary.total_pixels += var.size();
      frames_json.push_back({{"frame_id", src.frame_id},
                             {"noisy_pixels", noisy},
                             {"variance_path", relative_to(variance_file, out)}});
    }
    nlohmann::json groups_json = nlohmann::json::array();
    for (const auto& g : noise[v].groups) {
      nlohmann::json ops = nlohmann::json::array();
      for (const auto& [cls, op] : g.ops) {
        auto jo = to_json(op);
        jo["class"] = cls;
        ops.push_back(std::move(jo));
      }
      groups_json.push_back({{"begin", g.frames.begin}, {"end", g.frames.end}, {"ops", std::move(ops)}});
    }
    if (noise[v].selected) summary.selected_videos.push_back(video.video_id);
    videos_json.push_back({{"video_id", video.video_id},
                           {"selected", noise[v].selected},
                           {"groups", std::move(groups_json)},
                           {"frames", std::move(frames_json)}});
    summary.manifest.videos.push_back(std::move(entry));
  }
  save_manifest(summary.manifest, out / "manifest.json");
  write_json(out / "noise_report.json", {{"seed", cfg.seed},
                                         {"alpha", cfg.alpha},
                                         {"selected_videos", summary.selected_videos},
                                         {"noisy_pixels", summary.noisy_pixels},
                                         {"total_pixels", summary.total_pixels},
                                         {"videos", std::move(videos_json)}});
  return summary;
}

// ---------------------------------------------------------------------------
// evaluate

struct EvaluateOptions {
  std::optional<fs::path> masks_dir;     // selected noise maps, <dir>/<video>/<frame>.tfal
  std::optional<fs::path> variance_dir;  // true noise maps, same layout
  std::size_t classes = 0;               // 0 infers from the data
};

/// Predictions may be H x W labels or H x W x C probabilities (argmax).
inline LabelMap load_prediction_labels(const fs::path& path) {
  const auto t = load_tensor(path);
  if (t.rank() == 2) return label_map_from(t);
  const auto p = prediction_from(t);
  LabelMap y(p.height, p.width, p.classes);
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = p.argmax(i);
  return y;
}

/// Segmentation scores against clean labels (clean_label_path, else
/// label_path) when every frame has a prediction, and noise-detection scores
/// when both mask directories are given. Writes metrics.json and metrics.csv.
inline nlohmann::json cmd_evaluate(const DatasetManifest& manifest, const EvaluateOptions& opts, const fs::path& out) {
  require(manifest.frame_count() > 0, ErrorCode::kEmptyDataset, "manifest has no frames");
  bool have_predictions = true;
  for (const auto& v : manifest.videos)
    for (const auto& f : v.frames) have_predictions &= f.prediction_path.has_value();
  const bool detection = opts.masks_dir && opts.variance_dir;
  require(have_predictions || detection, ErrorCode::kMissingPredictions,
          "nothing to evaluate: no predictions in manifest and no mask directories given");

  nlohmann::json result = nlohmann::json::object();
  std::ostringstream csv;
  csv << "scope,class,iou,dice\n";
  auto cell = [](const std::optional<double>& v) {
    std::ostringstream s;
    if (v) s << *v;
    return s.str();
  };

  if (have_predictions) {
    std::vector<LabeledVideo> videos;
    std::size_t classes = opts.classes;
    for (const auto& v : manifest.videos) {
      LabeledVideo lv{v.video_id, {}, {}};
      for (const auto& f : v.frames) {
        lv.predictions.push_back(load_prediction_labels(manifest.resolve(*f.prediction_path)));
        lv.ground_truth.push_back(label_map_from(load_tensor(manifest.resolve(f.clean_label_path.value_or(f.label_path)))));
        if (opts.classes == 0) {
          classes = std::max({classes, lv.predictions.back().classes, lv.ground_truth.back().classes});
        }
      }
      videos.push_back(std::move(lv));
    }
    ConfusionMatrix global(classes);
    for (const auto& v : videos)
      for (std::size_t f = 0; f < v.predictions.size(); ++f)
        global = accumulate_confusion(v.predictions[f], v.ground_truth[f], global);
    const auto ious = per_class_iou(global);
    const auto dices = per_class_dice(global);
    result["miou"] = miou(global);
    result["dice"] = dice(global);
    nlohmann::json per_class = nlohmann::json::array();
    for (std::size_t c = 0; c < classes; ++c) {
      per_class.push_back({{"class", c},
                           {"iou", ious[c] ? nlohmann::json(*ious[c]) : nlohmann::json(nullptr)},
                           {"dice", dices[c] ? nlohmann::json(*dices[c]) : nlohmann::json(nullptr)}});
      csv << "all," << c << "," << cell(ious[c]) << "," << cell(dices[c]) << "\n";
    }
    csv << "all,mean," << result["miou"].get<double>() << "," << result["dice"].get<double>() << "\n";
    result["per_class"] = std::move(per_class);
    nlohmann::json per_sequence = nlohmann::json::object();
    for (const auto& [id, value] : sequence_miou(videos, classes)) {
      per_sequence[id] = value;
      csv << id << ",mean," << value << ",\n";
    }
    result["per_sequence"] = std::move(per_sequence);
  }

  if (detection) {
    std::vector<Mask> selected, variance;
    for (const auto& v : manifest.videos) {
      for (const auto& f : v.frames) {
        const auto rel = fs::path(path_component(v.video_id)) / (path_component(f.frame_id) + ".tfal");
        selected.push_back(grid_from<std::uint8_t>(load_tensor(*opts.masks_dir / rel)));
        variance.push_back(grid_from<std::uint8_t>(load_tensor(*opts.variance_dir / rel)));
      }
    }
    result["detection"] = to_json(detection_metrics(selected, variance));
  }

  write_json(out / "metrics.json", result);
  write_text(out / "metrics.csv", csv.str());
  return result;
}

}  // namespace tfal

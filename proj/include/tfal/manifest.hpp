#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "tfal/error.hpp"
#include "tfal/tensor_io.hpp"

namespace tfal {

struct FrameEntry {
  std::string frame_id;
  std::string feature_path;
  std::string label_path;
  std::optional<std::string> prediction_path;
  std::optional<std::string> clean_label_path;

  friend bool operator==(const FrameEntry&, const FrameEntry&) = default;
};

struct VideoEntry {
  std::string video_id;
  std::vector<FrameEntry> frames;  // temporal order

  friend bool operator==(const VideoEntry&, const VideoEntry&) = default;
};

/// Ordered videos and frames. Relative paths resolve against base_dir,
/// the directory holding the manifest file.
struct DatasetManifest {
  std::vector<VideoEntry> videos;
  std::filesystem::path base_dir;

  std::filesystem::path resolve(const std::string& p) const {
    std::filesystem::path path(p);
    return path.is_absolute() ? path : base_dir / path;
  }

  std::size_t frame_count() const {
    std::size_t n = 0;
    for (const auto& v : videos) n += v.frames.size();
    return n;
  }
};

/// Position of a frame within a manifest.
struct FrameRef {
  std::size_t video = 0;
  std::size_t frame = 0;

  friend bool operator==(const FrameRef&, const FrameRef&) = default;
};

inline std::vector<FrameRef> all_frames(const DatasetManifest& m) {
  std::vector<FrameRef> refs;
  refs.reserve(m.frame_count());
  for (std::size_t v = 0; v < m.videos.size(); ++v)
    for (std::size_t f = 0; f < m.videos[v].frames.size(); ++f) refs.push_back({v, f});
  return refs;
}

/// Previous frame; the next frame for a video's first frame; the frame itself
/// for single-frame videos.
inline FrameRef adjacent_frame(const DatasetManifest& m, FrameRef ref) {
  const auto n = m.videos.at(ref.video).frames.size();
  if (ref.frame > 0) return {ref.video, ref.frame - 1};
  if (n > 1) return {ref.video, 1};
  return ref;
}

inline nlohmann::json manifest_to_json(const DatasetManifest& m) {
  nlohmann::json videos = nlohmann::json::array();
  for (const auto& v : m.videos) {
    nlohmann::json frames = nlohmann::json::array();
    for (const auto& f : v.frames) {
      nlohmann::json jf = {{"frame_id", f.frame_id}, {"feature_path", f.feature_path}, {"label_path", f.label_path}};
      if (f.prediction_path) jf["prediction_path"] = *f.prediction_path;
      if (f.clean_label_path) jf["clean_label_path"] = *f.clean_label_path;
      frames.push_back(std::move(jf));
    }
    videos.push_back({{"video_id", v.video_id}, {"frames", std::move(frames)}});
  }
  return {{"videos", std::move(videos)}};
}

/// Structural checks only; file existence is checked separately.
inline DatasetManifest manifest_from_json(const nlohmann::json& doc, std::filesystem::path base_dir = {}) {
  DatasetManifest m;
  m.base_dir = std::move(base_dir);
  try {
    std::set<std::string> video_ids;
    for (const auto& jv : doc.at("videos")) {
      VideoEntry v;
      v.video_id = jv.at("video_id").get<std::string>();
      require(video_ids.insert(v.video_id).second, ErrorCode::kDuplicateId, "video_id '" + v.video_id + "'");
      std::set<std::string> frame_ids;
      for (const auto& jf : jv.at("frames")) {
        FrameEntry f;
        f.frame_id = jf.at("frame_id").get<std::string>();
        require(frame_ids.insert(f.frame_id).second, ErrorCode::kDuplicateId,
                "frame_id '" + f.frame_id + "' in video '" + v.video_id + "'");
        f.feature_path = jf.at("feature_path").get<std::string>();
        f.label_path = jf.at("label_path").get<std::string>();
        if (jf.contains("prediction_path") && !jf["prediction_path"].is_null())
          f.prediction_path = jf["prediction_path"].get<std::string>();
        if (jf.contains("clean_label_path") && !jf["clean_label_path"].is_null())
          f.clean_label_path = jf["clean_label_path"].get<std::string>();
        v.frames.push_back(std::move(f));
      }
      require(!v.frames.empty(), ErrorCode::kParseError, "video '" + v.video_id + "' has no frames");
      m.videos.push_back(std::move(v));
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kParseError, e.what());
  }
  return m;
}

inline void check_manifest_files(const DatasetManifest& m) {
  auto check = [&](const std::string& p) {
    require(std::filesystem::is_regular_file(m.resolve(p)), ErrorCode::kMissingFile, m.resolve(p).string());
  };
  for (const auto& v : m.videos) {
    for (const auto& f : v.frames) {
      check(f.feature_path);
      check(f.label_path);
      if (f.prediction_path) check(*f.prediction_path);
      if (f.clean_label_path) check(*f.clean_label_path);
    }
  }
}

inline DatasetManifest load_manifest(const std::filesystem::path& path) {
  const auto bytes = read_file(path);
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(bytes.begin(), bytes.end());
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(ErrorCode::kParseError, path.string() + ": " + e.what());
  }
  auto m = manifest_from_json(doc, path.parent_path());
  check_manifest_files(m);
  return m;
}

inline void save_manifest(const DatasetManifest& m, const std::filesystem::path& path) {
  write_text(path, manifest_to_json(m).dump(2) + "\n");
}

}  // namespace tfal

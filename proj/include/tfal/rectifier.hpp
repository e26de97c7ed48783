#pragma once

// Multi-scale supervision: dataset thresholds, noisy-pixel selection, label
// correction, image and video weights, and the staged loss.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "tfal/affinity.hpp"
#include "tfal/error.hpp"
#include "tfal/manifest.hpp"
#include "tfal/parallel.hpp"
#include "tfal/tensor.hpp"
#include "tfal/tensor_io.hpp"

namespace tfal {

inline constexpr double kProbabilityFloor = 1e-12;

struct ImageStats {
  double mean_positive = 0.0;
  double mean_negative = 0.0;
  double q = 0.0;  // mean_positive + 1 - mean_negative
  std::size_t defined_positive = 0;
  std::size_t defined_negative = 0;
};

struct Thresholds {
  double t_p = 0.0;
  double t_n = 0.0;
  double q_bar = 0.0;  // t_p + 1 - t_n
};

struct StageFlags {
  bool video = false;
  bool image = false;
  bool pixel = false;

  friend bool operator==(const StageFlags&, const StageFlags&) = default;
};

/// 1-based epochs at which each supervision level switches on.
struct StageSchedule {
  int video_epoch = 16;
  int image_epoch = 24;
  int pixel_epoch = 40;
};

enum class LossReduction { kSum, kMean };

struct LossTerms {
  double weighted_ce = 0.0;
  double corrected_ce = 0.0;
  double total = 0.0;
};

struct RectifyConfig {
  double theta_l = 0.4;
  double theta_u = 1.0;
  StageSchedule schedule;
  int epoch = 1;
  LossReduction loss_reduction = LossReduction::kSum;
  std::size_t threads = 1;
};

inline ImageStats image_stats(const AffinityPair& a) {
  double pos = 0.0, neg = 0.0;
  std::size_t np = 0, nn = 0;
  for (std::size_t i = 0; i < a.positive.size(); ++i) {
    if (a.defined_positive[i]) {
      pos += a.positive[i];
      ++np;
    }
    if (a.defined_negative[i]) {
      neg += a.negative[i];
      ++nn;
    }
  }
  require(np > 0 && nn > 0, ErrorCode::kNoDefinedEntries,
          "affinity pair has no defined " + std::string(np == 0 ? "positive" : "negative") + " entries");
  ImageStats s;
  s.mean_positive = pos / static_cast<double>(np);
  s.mean_negative = neg / static_cast<double>(nn);
  s.q = s.mean_positive + 1.0 - s.mean_negative;
  s.defined_positive = np;
  s.defined_negative = nn;
  return s;
}

inline Thresholds dataset_thresholds(std::span<const ImageStats> stats) {
  require(!stats.empty(), ErrorCode::kEmptyDataset, "no image statistics to average");
  double pos = 0.0, neg = 0.0;
  for (const auto& s : stats) {
    pos += s.mean_positive;
    neg += s.mean_negative;
  }
  Thresholds t;
  t.t_p = pos / static_cast<double>(stats.size());
  t.t_n = neg / static_cast<double>(stats.size());
  t.q_bar = t.t_p + 1.0 - t.t_n;
  return t;
}

/// 1 where a_p <= t_p and a_n >= t_n with both entries defined.
inline Mask noisy_pixel_mask(const AffinityPair& a, const Thresholds& th) {
  Mask m(a.positive.height, a.positive.width);
  for (std::size_t i = 0; i < m.size(); ++i) {
    m[i] = a.defined_positive[i] && a.defined_negative[i] && a.positive[i] <= th.t_p && a.negative[i] >= th.t_n;
  }
  return m;
}

inline LabelMap correct_labels(const Mask& mask, const LabelMap& y_noisy, const PredictionMap& p) {
  require(mask.height == y_noisy.height && mask.width == y_noisy.width && p.height == y_noisy.height &&
              p.width == y_noisy.width,
          ErrorCode::kShapeMismatch, "mask, labels and prediction differ in shape");
  LabelMap out = y_noisy;
  out.classes = std::max(out.classes, p.classes);
  for (std::size_t i = 0; i < mask.size(); ++i)
    if (mask[i]) out[i] = p.argmax(i);
  return out;
}

inline double image_weight(double q, double q_bar) { return std::exp(2.0 * (q - q_bar)); }

/// Piecewise video weight for 1-based rank k of n videos (ascending q_v).
inline double video_weight_for_rank(std::size_t k, std::size_t n, double theta_l, double theta_u) {
  if (3 * k < n) return theta_l;
  if (3 * k <= 2 * n) {
    const double frac = (3.0 * static_cast<double>(k) - static_cast<double>(n)) / static_cast<double>(n);
    return theta_l + frac * (theta_u - theta_l);
  }
  return theta_u;
}

/// Ranks by ascending q_v; ties go to the smaller id (or smaller index when
/// ids are omitted). Returns 1-based ranks in input order.
inline std::vector<std::size_t> video_ranks(std::span<const double> q_v, std::span<const std::string> ids = {}) {
  std::vector<std::size_t> order(q_v.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (q_v[a] != q_v[b]) return q_v[a] < q_v[b];
    if (!ids.empty()) return ids[a] < ids[b];
    return a < b;
  });
  std::vector<std::size_t> rank(q_v.size());
  for (std::size_t r = 0; r < order.size(); ++r) rank[order[r]] = r + 1;
  return rank;
}

inline std::vector<double> video_weights(std::span<const double> q_v, double theta_l, double theta_u,
                                         std::span<const std::string> ids = {}) {
  require(!q_v.empty(), ErrorCode::kEmptyVideoList, "no videos to weight");
  require(theta_l <= theta_u, ErrorCode::kInvalidConfig, "theta_l must not exceed theta_u");
  require(ids.empty() || ids.size() == q_v.size(), ErrorCode::kShapeMismatch, "one id per video required");
  const auto ranks = video_ranks(q_v, ids);
  std::vector<double> w(q_v.size());
  for (std::size_t v = 0; v < q_v.size(); ++v) w[v] = video_weight_for_rank(ranks[v], q_v.size(), theta_l, theta_u);
  return w;
}

/// Sum over pixels of -log p(i, y(i)), probabilities floored at 1e-12.
/// kMean divides by the pixel count.
inline double cross_entropy(const PredictionMap& p, const LabelMap& y, LossReduction reduction = LossReduction::kSum) {
  require(p.height == y.height && p.width == y.width, ErrorCode::kShapeMismatch, "prediction and labels differ");
  double loss = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    require(y[i] < p.classes, ErrorCode::kShapeMismatch, "label exceeds prediction class count");
    loss -= std::log(std::max(static_cast<double>(p.probs[i * p.classes + y[i]]), kProbabilityFloor));
  }
  if (reduction == LossReduction::kMean && y.size() > 0) loss /= static_cast<double>(y.size());
  return loss;
}

inline LossTerms total_loss(const PredictionMap& p, const LabelMap& y_noisy, const LabelMap& y_corrected,
                            double lambda_i, double lambda_v, StageFlags flags,
                            LossReduction reduction = LossReduction::kSum) {
  require(y_noisy.height == y_corrected.height && y_noisy.width == y_corrected.width, ErrorCode::kShapeMismatch,
          "noisy and corrected labels differ in shape");
  if (!flags.video) lambda_v = 1.0;
  if (!flags.image) lambda_i = 1.0;
  const double plain = cross_entropy(p, y_noisy, reduction);
  LossTerms t;
  t.weighted_ce = lambda_v * lambda_i * plain;
  t.corrected_ce = flags.pixel ? cross_entropy(p, y_corrected, reduction) : plain;
  t.total = t.weighted_ce + t.corrected_ce;
  return t;
}

inline StageFlags stage_for_epoch(int epoch, const StageSchedule& s = {}) {
  require(s.video_epoch <= s.image_epoch && s.image_epoch <= s.pixel_epoch, ErrorCode::kInvalidSchedule,
          "stage epochs must be non-decreasing in video, image, pixel order");
  return {epoch >= s.video_epoch, epoch >= s.image_epoch, epoch >= s.pixel_epoch};
}

// ---------------------------------------------------------------------------
// Dataset-level orchestration

struct FrameReport {
  std::string video_id;
  std::string frame_id;
  std::optional<ImageStats> stats;  // empty when a side had no defined entries
  double lambda_i = 1.0;
  Mask noise_mask;
  LabelMap corrected_labels;
  std::size_t noisy_pixels = 0;
  std::optional<LossTerms> losses;
};

struct VideoReport {
  std::string video_id;
  double q_v = 0.0;
  std::size_t rank = 0;
  double lambda_v = 1.0;
};

struct RectificationReport {
  int epoch = 0;
  StageFlags flags;
  RectifyConfig config;
  Thresholds thresholds;
  std::vector<VideoReport> videos;
  std::vector<FrameReport> frames;  // manifest order
  std::optional<LossTerms> losses;  // summed over frames
};

/// Two passes: affinity statistics for every frame, then thresholds and
/// video ranks; then per-frame masks, corrections, weights and losses.
inline RectificationReport rectify_dataset(const DatasetManifest& manifest, const RectifyConfig& config) {
  require(manifest.frame_count() > 0, ErrorCode::kEmptyDataset, "manifest has no frames");
  require(config.theta_l <= config.theta_u, ErrorCode::kInvalidConfig, "theta_l must not exceed theta_u");
  const StageFlags flags = stage_for_epoch(config.epoch, config.schedule);
  const auto refs = all_frames(manifest);

  bool have_predictions = true;
  for (const auto& ref : refs)
    have_predictions &= manifest.videos[ref.video].frames[ref.frame].prediction_path.has_value();
  require(have_predictions || !flags.pixel, ErrorCode::kMissingPredictions,
          "pixel-level stage requires prediction tensors for every frame");

  RectificationReport report;
  report.epoch = config.epoch;
  report.flags = flags;
  report.config = config;
  report.frames.resize(refs.size());

  // Pass 1
  parallel_for(refs.size(), config.threads, [&](std::size_t k) {
    const auto affinity = compute_frame_affinity(refs[k], manifest);
    auto& fr = report.frames[k];
    fr.video_id = manifest.videos[refs[k].video].video_id;
    fr.frame_id = manifest.videos[refs[k].video].frames[refs[k].frame].frame_id;
    try {
      fr.stats = image_stats(affinity);
    } catch (const Error& e) {
      if (e.code() != ErrorCode::kNoDefinedEntries) throw;
    }
  });

  std::vector<ImageStats> usable;
  for (const auto& fr : report.frames)
    if (fr.stats) usable.push_back(*fr.stats);
  require(!usable.empty(), ErrorCode::kNoDefinedEntries, "no frame has both positive and negative references");
  report.thresholds = dataset_thresholds(usable);

  std::vector<double> q_v;
  std::vector<std::string> ids;
  {
    std::size_t k = 0;
    for (const auto& video : manifest.videos) {
      double sum = 0.0;
      std::size_t count = 0;
      for (std::size_t f = 0; f < video.frames.size(); ++f, ++k) {
        if (report.frames[k].stats) {
          sum += report.frames[k].stats->q;
          ++count;
        }
      }
      q_v.push_back(count > 0 ? sum / static_cast<double>(count) : report.thresholds.q_bar);
      ids.push_back(video.video_id);
    }
  }
  const auto ranks = video_ranks(q_v, ids);
  const auto weights = video_weights(q_v, config.theta_l, config.theta_u, ids);
  for (std::size_t v = 0; v < manifest.videos.size(); ++v)
    report.videos.push_back({ids[v], q_v[v], ranks[v], weights[v]});

  // Pass 2
  parallel_for(refs.size(), config.threads, [&](std::size_t k) {
    const auto& entry = manifest.videos[refs[k].video].frames[refs[k].frame];
    auto& fr = report.frames[k];
    const auto y = label_map_from(load_tensor(manifest.resolve(entry.label_path)));
    fr.lambda_i = (flags.image && fr.stats) ? image_weight(fr.stats->q, report.thresholds.q_bar) : 1.0;
    fr.noise_mask = Mask(y.height, y.width);
    fr.corrected_labels = y;
    std::optional<PredictionMap> p;
    if (entry.prediction_path) p = prediction_from(load_tensor(manifest.resolve(*entry.prediction_path)));
    if (flags.pixel) {
      fr.noise_mask = noisy_pixel_mask(compute_frame_affinity(refs[k], manifest), report.thresholds);
      fr.corrected_labels = correct_labels(fr.noise_mask, y, *p);
      fr.noisy_pixels = static_cast<std::size_t>(std::count(fr.noise_mask.values.begin(), fr.noise_mask.values.end(), 1));
    }
    if (p) {
      const double lambda_v = report.videos[refs[k].video].lambda_v;
      fr.losses = total_loss(*p, y, fr.corrected_labels, fr.lambda_i, lambda_v, flags, config.loss_reduction);
    }
  });

  if (have_predictions) {
    LossTerms sum;
    for (const auto& fr : report.frames) {
      sum.weighted_ce += fr.losses->weighted_ce;
      sum.corrected_ce += fr.losses->corrected_ce;
      sum.total += fr.losses->total;
    }
    report.losses = sum;
  }
  return report;
}

// ---------------------------------------------------------------------------
// JSON

inline nlohmann::json to_json(const ImageStats& s) {
  return {{"mean_ap", s.mean_positive},
          {"mean_an", s.mean_negative},
          {"q", s.q},
          {"defined_p", s.defined_positive},
          {"defined_n", s.defined_negative}};
}

inline nlohmann::json to_json(const Thresholds& t) { return {{"t_p", t.t_p}, {"t_n", t.t_n}, {"q_bar", t.q_bar}}; }

inline nlohmann::json to_json(const LossTerms& l) {
  return {{"weighted_ce", l.weighted_ce}, {"corrected_ce", l.corrected_ce}, {"total", l.total}};
}

inline const char* to_string(LossReduction r) { return r == LossReduction::kSum ? "sum" : "mean"; }

inline nlohmann::json to_json(const RectifyConfig& c) {
  return {{"theta_l", c.theta_l},
          {"theta_u", c.theta_u},
          {"video_epoch", c.schedule.video_epoch},
          {"image_epoch", c.schedule.image_epoch},
          {"pixel_epoch", c.schedule.pixel_epoch},
          {"epoch", c.epoch},
          {"loss_reduction", to_string(c.loss_reduction)}};
}

/// Reads the keys present in `j` over the defaults in `base`.
inline RectifyConfig rectify_config_from_json(const nlohmann::json& j, RectifyConfig base = {}) {
  try {
    if (j.contains("theta_l")) base.theta_l = j.at("theta_l").get<double>();
    if (j.contains("theta_u")) base.theta_u = j.at("theta_u").get<double>();
    if (j.contains("video_epoch")) base.schedule.video_epoch = j.at("video_epoch").get<int>();
    if (j.contains("image_epoch")) base.schedule.image_epoch = j.at("image_epoch").get<int>();
    if (j.contains("pixel_epoch")) base.schedule.pixel_epoch = j.at("pixel_epoch").get<int>();
    if (j.contains("epoch")) base.epoch = j.at("epoch").get<int>();
    if (j.contains("loss_reduction")) {
      const auto r = j.at("loss_reduction").get<std::string>();
      require(r == "sum" || r == "mean", ErrorCode::kInvalidConfig, "loss_reduction must be \"sum\" or \"mean\"");
      base.loss_reduction = r == "sum" ? LossReduction::kSum : LossReduction::kMean;
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kInvalidConfig, e.what());
  }
  require(base.theta_l <= base.theta_u, ErrorCode::kInvalidConfig, "theta_l must not exceed theta_u");
  return base;
}

/// Summary without the per-pixel tensors.
inline nlohmann::json to_json(const RectificationReport& r) {
  nlohmann::json frames = nlohmann::json::array();
  for (const auto& f : r.frames) {
    nlohmann::json jf = {{"video_id", f.video_id},
                         {"frame_id", f.frame_id},
                         {"lambda_i", f.lambda_i},
                         {"noisy_pixels", f.noisy_pixels},
                         {"stats", f.stats ? to_json(*f.stats) : nlohmann::json(nullptr)},
                         {"losses", f.losses ? to_json(*f.losses) : nlohmann::json(nullptr)}};
    frames.push_back(std::move(jf));
  }
  nlohmann::json videos = nlohmann::json::array();
  for (const auto& v : r.videos) {
    videos.push_back({{"video_id", v.video_id},
                      {"q_v", v.q_v},
                      {"rank", v.rank},
                      {"lambda_v", v.lambda_v},
                      {"lambda_v_applied", r.flags.video ? v.lambda_v : 1.0}});
  }
  return {{"epoch", r.epoch},
          {"stages", {{"video", r.flags.video}, {"image", r.flags.image}, {"pixel", r.flags.pixel}}},
          {"config", to_json(r.config)},
          {"thresholds", to_json(r.thresholds)},
          {"videos", std::move(videos)},
          {"frames", std::move(frames)},
          {"losses", r.losses ? to_json(*r.losses) : nlohmann::json(nullptr)}};
}

}  // namespace tfal

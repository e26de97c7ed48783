#pragma once

// Synthetic label noise for video segmentation datasets. A fraction of the
// videos is selected; each selected video is cut into short runs of
// consecutive frames, and for every run and foreground class one corruption
// (dilation, erosion, affine move or polygon) is drawn once and applied to all
// frames of the run.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numbers>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include <json.hpp>

#include "tfal/error.hpp"
#include "tfal/rng.hpp"
#include "tfal/tensor.hpp"

namespace tfal {

struct IntRange {
  int min = 0;
  int max = 0;
};

struct AffineRange {
  double max_translate_px = 10.0;
  double max_rotate_deg = 10.0;
  double scale_min = 0.9;
  double scale_max = 1.1;
};

struct PolygonRange {
  IntRange vertices{3, 8};
  // Bounding extent of the polygon; unset means max_extent_fraction of the
  // image diagonal.
  std::optional<double> max_extent_px;
  double max_extent_fraction = 0.15;
};

struct NoiseConfig {
  double alpha = 0.5;
  int group_min = 3;
  int group_max = 6;
  std::uint64_t seed = 0;
  std::size_t num_classes = 0;  // 0 infers max label + 1 over the dataset
  IntRange dilation_radius{2, 6};
  IntRange erosion_radius{2, 6};
  AffineRange affine;
  PolygonRange polygon;
};

inline void validate(const NoiseConfig& cfg) {
  require(cfg.alpha >= 0.0 && cfg.alpha <= 1.0, ErrorCode::kInvalidConfig, "alpha must lie in [0, 1]");
  require(cfg.group_min >= 1 && cfg.group_min <= cfg.group_max, ErrorCode::kInvalidConfig,
          "group sizes must satisfy 1 <= group_min <= group_max");
  for (const auto& r : {cfg.dilation_radius, cfg.erosion_radius, cfg.polygon.vertices})
    require(r.min >= 0 && r.min <= r.max, ErrorCode::kInvalidConfig, "invalid integer range");
  require(cfg.polygon.vertices.min >= 3, ErrorCode::kInvalidConfig, "polygons need at least 3 vertices");
  require(cfg.affine.scale_min > 0.0 && cfg.affine.scale_min <= cfg.affine.scale_max, ErrorCode::kInvalidConfig,
          "invalid affine scale range");
}

// ---------------------------------------------------------------------------
// Selection and grouping

/// Uniform subset of round(alpha * n) indices (half rounds up), ascending.
inline std::vector<std::size_t> select_videos(std::size_t n, double alpha, RandomStream& rng) {
  require(alpha >= 0.0 && alpha <= 1.0, ErrorCode::kInvalidConfig, "alpha must lie in [0, 1]");
  const auto count = std::min<std::size_t>(n, static_cast<std::size_t>(std::floor(alpha * n + 0.5)));
  std::vector<std::size_t> idx(n);
  for (std::size_t i = 0; i < n; ++i) idx[i] = i;
  for (std::size_t i = 0; i < count; ++i) {
    const auto j = static_cast<std::size_t>(rng.uniform_int(static_cast<std::int64_t>(i), static_cast<std::int64_t>(n - 1)));
    std::swap(idx[i], idx[j]);
  }
  idx.resize(count);
  std::sort(idx.begin(), idx.end());
  return idx;
}

struct FrameRange {
  std::size_t begin = 0;
  std::size_t end = 0;  // exclusive

  std::size_t size() const { return end - begin; }
  friend bool operator==(const FrameRange&, const FrameRange&) = default;
};

/// Consecutive runs covering [0, n); lengths drawn uniformly from
/// [group_min, group_max], the last run truncated to what remains.
inline std::vector<FrameRange> group_frames(std::size_t n, RandomStream& rng, int group_min = 3, int group_max = 6) {
  require(group_min >= 1 && group_min <= group_max, ErrorCode::kInvalidConfig, "invalid group size range");
  std::vector<FrameRange> groups;
  std::size_t pos = 0;
  while (pos < n) {
    const auto len = static_cast<std::size_t>(rng.uniform_int(group_min, group_max));
    const std::size_t end = std::min(n, pos + len);
    groups.push_back({pos, end});
    pos = end;
  }
  return groups;
}

// ---------------------------------------------------------------------------
// Morphology with a (2r+1) x (2r+1) square element

namespace detail {

inline Mask class_mask(const LabelMap& y, std::uint16_t class_id) {
  Mask m(y.height, y.width);
  for (std::size_t i = 0; i < y.size(); ++i) m[i] = y[i] == class_id;
  return m;
}

// One separable pass. With `all` false a cell becomes 1 if any cell in its
// clipped window is 1; with `all` true only if every cell in the window is.
inline Mask window_pass(const Mask& in, int radius, bool along_rows, bool all) {
  Mask out(in.height, in.width);
  const std::size_t lines = along_rows ? in.height : in.width;
  const std::size_t len = along_rows ? in.width : in.height;
  std::vector<std::size_t> prefix(len + 1);
  for (std::size_t l = 0; l < lines; ++l) {
    auto at = [&](std::size_t k) -> std::uint8_t { return along_rows ? in.at(l, k) : in.at(k, l); };
    for (std::size_t k = 0; k < len; ++k) prefix[k + 1] = prefix[k] + (at(k) ? 1 : 0);
    for (std::size_t k = 0; k < len; ++k) {
      const std::size_t lo = k >= static_cast<std::size_t>(radius) ? k - radius : 0;
      const std::size_t hi = std::min(len, k + radius + 1);
      const std::size_t ones = prefix[hi] - prefix[lo];
      const std::uint8_t v = all ? ones == hi - lo : ones > 0;
      (along_rows ? out.at(l, k) : out.at(k, l)) = v;
    }
  }
  return out;
}

}  // namespace detail

/// Grows the class region by `radius` (Chebyshev), overwriting other classes.
inline LabelMap apply_dilation(const LabelMap& y, std::uint16_t class_id, int radius) {
  if (radius <= 0) return y;
  const auto grown = detail::window_pass(detail::window_pass(detail::class_mask(y, class_id), radius, true, false),
                                         radius, false, false);
  LabelMap out = y;
  for (std::size_t i = 0; i < y.size(); ++i)
    if (grown[i]) out[i] = class_id;
  out.classes = std::max<std::size_t>(out.classes, std::size_t{class_id} + 1);
  return out;
}

/// Shrinks the class region by `radius`; removed pixels become class 0. The
/// window is clipped at the image border, so regions touching the border do
/// not erode from it.
inline LabelMap apply_erosion(const LabelMap& y, std::uint16_t class_id, int radius) {
  if (radius <= 0) return y;
  const auto kept = detail::window_pass(detail::window_pass(detail::class_mask(y, class_id), radius, true, true),
                                        radius, false, true);
  LabelMap out = y;
  for (std::size_t i = 0; i < y.size(); ++i)
    if (y[i] == class_id && !kept[i]) out[i] = 0;
  return out;
}

// ---------------------------------------------------------------------------
// Affine move

struct AffineTransform {
  double translate_x = 0.0;  // columns
  double translate_y = 0.0;  // rows
  double rotate_deg = 0.0;
  double scale = 1.0;
};

inline AffineTransform sample_affine(const AffineRange& r, RandomStream& rng) {
  AffineTransform t;
  t.translate_x = rng.uniform(-r.max_translate_px, r.max_translate_px);
  t.translate_y = rng.uniform(-r.max_translate_px, r.max_translate_px);
  t.rotate_deg = rng.uniform(-r.max_rotate_deg, r.max_rotate_deg);
  t.scale = rng.uniform(r.scale_min, r.scale_max);
  return t;
}

/// Rotates and scales the class region about its centroid, then translates.
/// Resampling is nearest-neighbour through the inverse map; vacated pixels
/// become class 0 and destination pixels are overwritten.
inline LabelMap apply_affine(const LabelMap& y, std::uint16_t class_id, const AffineTransform& t) {
  double cx = 0.0, cy = 0.0;
  std::size_t count = 0;
  for (std::size_t r = 0; r < y.height; ++r)
    for (std::size_t c = 0; c < y.width; ++c)
      if (y.at(r, c) == class_id) {
        cx += static_cast<double>(c);
        cy += static_cast<double>(r);
        ++count;
      }
  if (count == 0) return y;
  cx /= static_cast<double>(count);
  cy /= static_cast<double>(count);

  const double theta = t.rotate_deg * std::numbers::pi / 180.0;
  const double cos_t = std::cos(theta), sin_t = std::sin(theta);
  LabelMap out = y;
  for (auto& v : out.values)
    if (v == class_id) v = 0;
  for (std::size_t r = 0; r < y.height; ++r) {
    for (std::size_t c = 0; c < y.width; ++c) {
      const double dx = static_cast<double>(c) - cx - t.translate_x;
      const double dy = static_cast<double>(r) - cy - t.translate_y;
      const double sx = cx + (cos_t * dx + sin_t * dy) / t.scale;
      const double sy = cy + (-sin_t * dx + cos_t * dy) / t.scale;
      const double rc = std::floor(sx + 0.5), rr = std::floor(sy + 0.5);
      if (rc < 0 || rr < 0 || rc >= static_cast<double>(y.width) || rr >= static_cast<double>(y.height)) continue;
      if (y.at(static_cast<std::size_t>(rr), static_cast<std::size_t>(rc)) == class_id) out.at(r, c) = class_id;
    }
  }
  return out;
}

inline LabelMap apply_affine(const LabelMap& y, std::uint16_t class_id, const AffineRange& range, RandomStream& rng) {
  return apply_affine(y, class_id, sample_affine(range, rng));
}

// ---------------------------------------------------------------------------
// Polygon noise

struct Point {
  double x = 0.0;  // column
  double y = 0.0;  // row
};

enum class PolygonMode { kAdditive, kSubtractive };

struct PolygonNoise {
  std::vector<Point> vertices;
  PolygonMode mode = PolygonMode::kAdditive;
};

/// Even-odd scanline fill sampled at integer pixel coordinates. On each row,
/// pixels x with x_k <= x < x_{k+1} are filled for each crossing pair.
inline Mask rasterize_polygon(std::span<const Point> poly, std::size_t height, std::size_t width) {
  Mask m(height, width);
  if (poly.size() < 3) return m;
  std::vector<double> xs;
  for (std::size_t r = 0; r < height; ++r) {
    const double y = static_cast<double>(r);
    xs.clear();
    for (std::size_t i = 0, j = poly.size() - 1; i < poly.size(); j = i++) {
      const auto& a = poly[i];
      const auto& b = poly[j];
      if ((a.y > y) != (b.y > y)) xs.push_back(a.x + (y - a.y) * (b.x - a.x) / (b.y - a.y));
    }
    std::sort(xs.begin(), xs.end());
    for (std::size_t k = 0; k + 1 < xs.size(); k += 2) {
      const double lo = std::max(0.0, std::ceil(xs[k]));
      const double hi = std::min(static_cast<double>(width), std::ceil(xs[k + 1]));
      for (double x = lo; x < hi; x += 1.0) m.at(r, static_cast<std::size_t>(x)) = 1;
    }
  }
  return m;
}

/// Star-shaped simple polygon around a random pixel of the class (or any
/// pixel if the class is absent) with sorted random angles and radii up to
/// half the extent.
inline PolygonNoise sample_polygon(const LabelMap& y, std::uint16_t class_id, const PolygonRange& range,
                                   RandomStream& rng) {
  PolygonNoise p;
  std::vector<std::size_t> members;
  for (std::size_t i = 0; i < y.size(); ++i)
    if (y[i] == class_id) members.push_back(i);
  std::size_t centre;
  if (!members.empty())
    centre = members[static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(members.size()) - 1))];
  else
    centre = static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(y.size()) - 1));
  const double cx = static_cast<double>(centre % y.width);
  const double cy = static_cast<double>(centre / y.width);
  const double diagonal = std::hypot(static_cast<double>(y.height), static_cast<double>(y.width));
  const double extent = range.max_extent_px.value_or(range.max_extent_fraction * diagonal);

  const auto n = static_cast<std::size_t>(rng.uniform_int(range.vertices.min, range.vertices.max));
  std::vector<double> angles(n);
  for (auto& a : angles) a = rng.uniform(0.0, 2.0 * std::numbers::pi);
  std::sort(angles.begin(), angles.end());
  for (double a : angles) {
    const double radius = rng.uniform(0.0, extent / 2.0);
    p.vertices.push_back({cx + radius * std::cos(a), cy + radius * std::sin(a)});
  }
  p.mode = rng.coin() ? PolygonMode::kAdditive : PolygonMode::kSubtractive;
  return p;
}

inline LabelMap apply_polygon(const LabelMap& y, std::uint16_t class_id, const PolygonNoise& p) {
  const auto inside = rasterize_polygon(p.vertices, y.height, y.width);
  LabelMap out = y;
  for (std::size_t i = 0; i < y.size(); ++i) {
    if (!inside[i]) continue;
    if (p.mode == PolygonMode::kAdditive) out[i] = class_id;
    else if (y[i] == class_id) out[i] = 0;
  }
  if (p.mode == PolygonMode::kAdditive) out.classes = std::max<std::size_t>(out.classes, std::size_t{class_id} + 1);
  return out;
}

inline LabelMap apply_polygon_noise(const LabelMap& y, std::uint16_t class_id, const PolygonRange& range,
                                    RandomStream& rng) {
  return apply_polygon(y, class_id, sample_polygon(y, class_id, range, rng));
}

// ---------------------------------------------------------------------------
// Sampled corruption for one (group, class)

enum class NoiseKind { kDilation = 0, kErosion = 1, kAffine = 2, kPolygon = 3 };

constexpr const char* to_string(NoiseKind k) {
  switch (k) {
    case NoiseKind::kDilation: return "dilation";
    case NoiseKind::kErosion: return "erosion";
    case NoiseKind::kAffine: return "affine";
    case NoiseKind::kPolygon: return "polygon";
  }
  return "?";
}

struct NoiseOp {
  NoiseKind kind = NoiseKind::kDilation;
  int radius = 0;
  AffineTransform affine;
  PolygonNoise polygon;
};

/// `reference` is the group's first frame containing the class; polygon
/// placement is drawn from it and reused for the rest of the group.
inline NoiseOp sample_noise_op(const LabelMap& reference, std::uint16_t class_id, const NoiseConfig& cfg,
                               RandomStream& rng) {
  NoiseOp op;
  op.kind = static_cast<NoiseKind>(rng.uniform_int(0, 3));
  switch (op.kind) {
    case NoiseKind::kDilation: op.radius = static_cast<int>(rng.uniform_int(cfg.dilation_radius.min, cfg.dilation_radius.max)); break;
    case NoiseKind::kErosion: op.radius = static_cast<int>(rng.uniform_int(cfg.erosion_radius.min, cfg.erosion_radius.max)); break;
    case NoiseKind::kAffine: op.affine = sample_affine(cfg.affine, rng); break;
    case NoiseKind::kPolygon: op.polygon = sample_polygon(reference, class_id, cfg.polygon, rng); break;
  }
  return op;
}

inline LabelMap apply_noise_op(const LabelMap& y, std::uint16_t class_id, const NoiseOp& op) {
  switch (op.kind) {
    case NoiseKind::kDilation: return apply_dilation(y, class_id, op.radius);
    case NoiseKind::kErosion: return apply_erosion(y, class_id, op.radius);
    case NoiseKind::kAffine: return apply_affine(y, class_id, op.affine);
    case NoiseKind::kPolygon: return apply_polygon(y, class_id, op.polygon);
  }
  return y;
}

inline Mask variance_map(const LabelMap& noisy, const LabelMap& clean) {
  require(noisy.height == clean.height && noisy.width == clean.width, ErrorCode::kShapeMismatch,
          "noisy and clean labels differ in shape");
  Mask m(clean.height, clean.width);
  for (std::size_t i = 0; i < m.size(); ++i) m[i] = noisy[i] != clean[i];
  return m;
}

struct GroupRecord {
  FrameRange frames;
  std::vector<std::pair<std::uint16_t, NoiseOp>> ops;  // by ascending class
};

struct VideoNoise {
  bool selected = false;
  std::vector<GroupRecord> groups;
  std::vector<LabelMap> noisy;
  std::vector<Mask> variance;
};

/// Corrupts one selected video. Groups and ops come from `rng`; class 0
/// (background) is never corrupted directly.
inline VideoNoise inject_video(std::span<const LabelMap> clean, const NoiseConfig& cfg, std::size_t classes,
                               RandomStream rng) {
  VideoNoise out;
  out.selected = true;
  out.noisy.assign(clean.begin(), clean.end());
  for (const auto& range : group_frames(clean.size(), rng, cfg.group_min, cfg.group_max)) {
    GroupRecord record{range, {}};
    for (std::size_t c = 1; c < classes; ++c) {
      const auto class_id = static_cast<std::uint16_t>(c);
      std::optional<std::size_t> reference;
      for (std::size_t f = range.begin; f < range.end && !reference; ++f)
        if (std::find(out.noisy[f].values.begin(), out.noisy[f].values.end(), class_id) != out.noisy[f].values.end())
          reference = f;
      if (!reference) continue;
      const auto op = sample_noise_op(out.noisy[*reference], class_id, cfg, rng);
      for (std::size_t f = range.begin; f < range.end; ++f) out.noisy[f] = apply_noise_op(out.noisy[f], class_id, op);
      record.ops.emplace_back(class_id, op);
    }
    out.groups.push_back(std::move(record));
  }
  for (std::size_t f = 0; f < clean.size(); ++f) out.variance.push_back(variance_map(out.noisy[f], clean[f]));
  return out;
}

/// Dataset-level injection over in-memory clean labels, one inner vector per
/// video. Stream derivation: root(seed).split("select") picks videos, and
/// root(seed).split("video:" + id) drives each selected video.
inline std::vector<VideoNoise> inject_labels(std::span<const std::vector<LabelMap>> clean,
                                             std::span<const std::string> video_ids, const NoiseConfig& cfg) {
  validate(cfg);
  require(clean.size() == video_ids.size(), ErrorCode::kShapeMismatch, "one id per video required");
  std::size_t classes = cfg.num_classes;
  if (classes == 0) {
    for (const auto& video : clean)
      for (const auto& y : video)
        for (auto v : y.values) classes = std::max<std::size_t>(classes, std::size_t{v} + 1);
  }
  const RandomStream root(cfg.seed);
  auto selector = root.split("select");
  const auto selected = select_videos(clean.size(), cfg.alpha, selector);

  std::vector<VideoNoise> out(clean.size());
  for (std::size_t v = 0; v < clean.size(); ++v) {
    if (std::binary_search(selected.begin(), selected.end(), v)) {
      out[v] = inject_video(clean[v], cfg, classes, root.split("video:" + video_ids[v]));
    } else {
      out[v].noisy = clean[v];
      for (const auto& y : clean[v]) out[v].variance.emplace_back(y.height, y.width);
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// JSON

inline NoiseConfig noise_config_from_json(const nlohmann::json& j, NoiseConfig base = {}) {
  auto range = [](const nlohmann::json& v) {
    require(v.is_array() && v.size() == 2, ErrorCode::kInvalidConfig, "ranges are two-element arrays");
    return IntRange{v[0].get<int>(), v[1].get<int>()};
  };
  try {
    if (j.contains("alpha")) base.alpha = j.at("alpha").get<double>();
    if (j.contains("group_min")) base.group_min = j.at("group_min").get<int>();
    if (j.contains("group_max")) base.group_max = j.at("group_max").get<int>();
    if (j.contains("seed")) base.seed = j.at("seed").get<std::uint64_t>();
    if (j.contains("num_classes")) base.num_classes = j.at("num_classes").get<std::size_t>();
    if (j.contains("dilation_radius")) base.dilation_radius = range(j.at("dilation_radius"));
    if (j.contains("erosion_radius")) base.erosion_radius = range(j.at("erosion_radius"));
    if (j.contains("affine")) {
      const auto& a = j.at("affine");
      if (a.contains("max_translate_px")) base.affine.max_translate_px = a.at("max_translate_px").get<double>();
      if (a.contains("max_rotate_deg")) base.affine.max_rotate_deg = a.at("max_rotate_deg").get<double>();
      if (a.contains("scale_range")) {
        const auto& s = a.at("scale_range");
        require(s.is_array() && s.size() == 2, ErrorCode::kInvalidConfig, "scale_range is a two-element array");
        base.affine.scale_min = s[0].get<double>();
        base.affine.scale_max = s[1].get<double>();
      }
    }
    if (j.contains("polygon")) {
      const auto& p = j.at("polygon");
      if (p.contains("vertex_range")) base.polygon.vertices = range(p.at("vertex_range"));
      if (p.contains("max_extent_px") && !p.at("max_extent_px").is_null())
        base.polygon.max_extent_px = p.at("max_extent_px").get<double>();
      if (p.contains("max_extent_fraction")) base.polygon.max_extent_fraction = p.at("max_extent_fraction").get<double>();
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kInvalidConfig, e.what());
  }
  validate(base);
  return base;
}

inline nlohmann::json to_json(const NoiseOp& op) {
  nlohmann::json j = {{"type", to_string(op.kind)}};
  switch (op.kind) {
    case NoiseKind::kDilation:
    case NoiseKind::kErosion: j["radius"] = op.radius; break;
    case NoiseKind::kAffine:
      j["translate_x"] = op.affine.translate_x;
      j["translate_y"] = op.affine.translate_y;
      j["rotate_deg"] = op.affine.rotate_deg;
      j["scale"] = op.affine.scale;
      break;
    case NoiseKind::kPolygon: {
      nlohmann::json verts = nlohmann::json::array();
      for (const auto& p : op.polygon.vertices) verts.push_back({p.x, p.y});
      j["vertices"] = std::move(verts);
      j["mode"] = op.polygon.mode == PolygonMode::kAdditive ? "additive" : "subtractive";
      break;
    }
  }
  return j;
}

}  // namespace tfal

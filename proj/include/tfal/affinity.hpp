#pragma once

// Temporal feature affinity between a frame and its adjacent frame.
//
// For pixel i of the current frame with label c, the positive affinity is the
// mean cosine similarity between f_t(i) and every adjacent-frame pixel labeled
// c; the negative affinity averages over adjacent-frame pixels labeled
// anything else. Pixels whose reference set is empty are undefined and carry
// a sentinel (+1 positive, -1 negative) with their defined bit cleared.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "tfal/error.hpp"
#include "tfal/manifest.hpp"
#include "tfal/tensor.hpp"
#include "tfal/tensor_io.hpp"

namespace tfal {

inline constexpr double kNormEpsilon = 1e-12;
inline constexpr float kPositiveSentinel = 1.0f;
inline constexpr float kNegativeSentinel = -1.0f;

struct AffinityPair {
  FloatMap positive;
  FloatMap negative;
  Mask defined_positive;
  Mask defined_negative;

  std::size_t height() const { return positive.height; }
  std::size_t width() const { return positive.width; }
};

/// hw x hw indicator matrices; row i is the current-frame pixel.
struct ClassMatchMasks {
  std::size_t pixels = 0;
  std::vector<std::uint8_t> positive;
  std::vector<std::uint8_t> negative;

  std::uint8_t p(std::size_t i, std::size_t j) const { return positive[i * pixels + j]; }
  std::uint8_t n(std::size_t i, std::size_t j) const { return negative[i * pixels + j]; }
};

struct SimilarityMatrix {
  std::size_t pixels = 0;
  std::vector<float> values;

  float operator()(std::size_t i, std::size_t j) const { return values[i * pixels + j]; }
};

// Nearest-neighbour index map shared by down- and up-sampling:
// destination index d reads source index floor(d * src / dst).
constexpr std::size_t nearest_source_index(std::size_t dst, std::size_t dst_size, std::size_t src_size) {
  return dst * src_size / dst_size;
}

inline LabelMap downsample_labels(const LabelMap& y, std::size_t h, std::size_t w) {
  require(h > 0 && w > 0 && h <= y.height && w <= y.width, ErrorCode::kInvalidTargetSize,
          "cannot downsample " + std::to_string(y.height) + "x" + std::to_string(y.width) + " to " +
              std::to_string(h) + "x" + std::to_string(w));
  LabelMap out(h, w, y.classes);
  for (std::size_t r = 0; r < h; ++r) {
    const std::size_t sr = nearest_source_index(r, h, y.height);
    for (std::size_t c = 0; c < w; ++c) out.at(r, c) = y.at(sr, nearest_source_index(c, w, y.width));
  }
  return out;
}

template <class T>
Grid<T> upsample_nearest(const Grid<T>& g, std::size_t height, std::size_t width) {
  require(height > 0 && width > 0 && height >= g.height && width >= g.width, ErrorCode::kInvalidTargetSize,
          "cannot upsample " + std::to_string(g.height) + "x" + std::to_string(g.width) + " to " +
              std::to_string(height) + "x" + std::to_string(width));
  Grid<T> out(height, width);
  for (std::size_t r = 0; r < height; ++r) {
    const std::size_t sr = nearest_source_index(r, height, g.height);
    for (std::size_t c = 0; c < width; ++c) out.at(r, c) = g.at(sr, nearest_source_index(c, width, g.width));
  }
  return out;
}

inline FloatMap upsample_affinity(const FloatMap& a, std::size_t height, std::size_t width) {
  return upsample_nearest(a, height, width);
}

inline AffinityPair upsample_affinity(const AffinityPair& a, std::size_t height, std::size_t width) {
  return {upsample_nearest(a.positive, height, width), upsample_nearest(a.negative, height, width),
          upsample_nearest(a.defined_positive, height, width), upsample_nearest(a.defined_negative, height, width)};
}

namespace detail {

// Unit vector in double precision; vectors with norm <= kNormEpsilon map to zero.
inline void unit_vector(std::span<const float> v, std::span<double> out) {
  double sq = 0.0;
  for (float x : v) sq += static_cast<double>(x) * x;
  const double norm = std::sqrt(sq);
  const double scale = norm > kNormEpsilon ? 1.0 / norm : 0.0;
  for (std::size_t k = 0; k < v.size(); ++k) out[k] = v[k] * scale;
}

inline void check_pair_shapes(const FeatureMap& f_t, const FeatureMap& f_prev, const LabelMap& y_t,
                              const LabelMap& y_prev) {
  require(f_t.height == f_prev.height && f_t.width == f_prev.width && f_t.channels == f_prev.channels,
          ErrorCode::kShapeMismatch, "feature maps differ in shape");
  require(f_t.height >= 1 && f_t.width >= 1 && f_t.channels >= 1, ErrorCode::kShapeMismatch,
          "feature map has a zero dimension");
  require(y_t.height == f_t.height && y_t.width == f_t.width && y_prev.height == f_t.height &&
              y_prev.width == f_t.width,
          ErrorCode::kShapeMismatch, "labels do not match the feature-map grid");
}

inline std::size_t class_span(const LabelMap& a, const LabelMap& b) {
  std::size_t k = std::max(a.classes, b.classes);
  for (auto v : a.values) k = std::max<std::size_t>(k, std::size_t{v} + 1);
  for (auto v : b.values) k = std::max<std::size_t>(k, std::size_t{v} + 1);
  return k;
}

}  // namespace detail

inline FeatureMap normalize_features(const FeatureMap& f) {
  FeatureMap out(f.height, f.width, f.channels);
  std::vector<double> unit(f.channels);
  for (std::size_t i = 0; i < f.pixels(); ++i) {
    detail::unit_vector(f.pixel(i), unit);
    auto dst = out.pixel(i);
    for (std::size_t k = 0; k < f.channels; ++k) dst[k] = static_cast<float>(unit[k]);
  }
  return out;
}

inline ClassMatchMasks class_match_masks(const LabelMap& y_t, const LabelMap& y_prev) {
  require(y_t.height == y_prev.height && y_t.width == y_prev.width, ErrorCode::kShapeMismatch,
          "label maps differ in shape");
  const std::size_t n = y_t.size();
  ClassMatchMasks m{n, std::vector<std::uint8_t>(n * n), std::vector<std::uint8_t>(n * n)};
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      const bool same = y_t[i] == y_prev[j];
      m.positive[i * n + j] = same ? 1 : 0;
      m.negative[i * n + j] = same ? 0 : 1;
    }
  }
  return m;
}

/// Dense hw x hw cosine-similarity matrix. Quadratic memory; debugging and
/// verification only.
inline SimilarityMatrix similarity_matrix(const FeatureMap& f_t, const FeatureMap& f_prev) {
  require(f_t.height == f_prev.height && f_t.width == f_prev.width && f_t.channels == f_prev.channels,
          ErrorCode::kShapeMismatch, "feature maps differ in shape");
  const std::size_t n = f_t.pixels();
  const std::size_t ch = f_t.channels;
  std::vector<double> cur(n * ch), prev(n * ch);
  for (std::size_t i = 0; i < n; ++i) {
    detail::unit_vector(f_t.pixel(i), std::span<double>(cur).subspan(i * ch, ch));
    detail::unit_vector(f_prev.pixel(i), std::span<double>(prev).subspan(i * ch, ch));
  }
  SimilarityMatrix s{n, std::vector<float>(n * n)};
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      double dot = 0.0;
      for (std::size_t k = 0; k < ch; ++k) dot += cur[i * ch + k] * prev[j * ch + k];
      s.values[i * n + j] = static_cast<float>(dot);
    }
  }
  return s;
}

/// Direct evaluation through the pairwise similarity and class-match matrices.
inline AffinityPair affinity_bruteforce(const FeatureMap& f_t, const FeatureMap& f_prev, const LabelMap& y_t,
                                        const LabelMap& y_prev) {
  detail::check_pair_shapes(f_t, f_prev, y_t, y_prev);
  const auto s = similarity_matrix(f_t, f_prev);
  const auto m = class_match_masks(y_t, y_prev);
  const std::size_t n = f_t.pixels();
  AffinityPair out{FloatMap(f_t.height, f_t.width), FloatMap(f_t.height, f_t.width), Mask(f_t.height, f_t.width),
                   Mask(f_t.height, f_t.width)};
  for (std::size_t i = 0; i < n; ++i) {
    double pos_sum = 0.0, neg_sum = 0.0;
    std::size_t pos_count = 0, neg_count = 0;
    for (std::size_t j = 0; j < n; ++j) {
      pos_sum += s(i, j) * m.p(i, j);
      neg_sum += s(i, j) * m.n(i, j);
      pos_count += m.p(i, j);
      neg_count += m.n(i, j);
    }
    out.defined_positive[i] = pos_count > 0;
    out.defined_negative[i] = neg_count > 0;
    out.positive[i] = pos_count > 0 ? static_cast<float>(pos_sum / pos_count) : kPositiveSentinel;
    out.negative[i] = neg_count > 0 ? static_cast<float>(neg_sum / neg_count) : kNegativeSentinel;
  }
  return out;
}

/// Same contract as affinity_bruteforce in O(hw * C_f) time: the mean of
/// cosines against a set equals the dot product with the set's mean unit
/// vector, so only per-class sums of the adjacent frame's unit features are
/// kept.
inline AffinityPair affinity_fast(const FeatureMap& f_t, const FeatureMap& f_prev, const LabelMap& y_t,
                                  const LabelMap& y_prev) {
  detail::check_pair_shapes(f_t, f_prev, y_t, y_prev);
  const std::size_t n = f_t.pixels();
  const std::size_t ch = f_t.channels;
  const std::size_t classes = detail::class_span(y_t, y_prev);

  std::vector<double> class_sum(classes * ch, 0.0);
  std::vector<double> total_sum(ch, 0.0);
  std::vector<std::size_t> class_count(classes, 0);
  std::vector<double> unit(ch);
  for (std::size_t j = 0; j < n; ++j) {
    detail::unit_vector(f_prev.pixel(j), unit);
    const std::size_t c = y_prev[j];
    ++class_count[c];
    for (std::size_t k = 0; k < ch; ++k) {
      class_sum[c * ch + k] += unit[k];
      total_sum[k] += unit[k];
    }
  }

  AffinityPair out{FloatMap(f_t.height, f_t.width), FloatMap(f_t.height, f_t.width), Mask(f_t.height, f_t.width),
                   Mask(f_t.height, f_t.width)};
  for (std::size_t i = 0; i < n; ++i) {
    detail::unit_vector(f_t.pixel(i), unit);
    const std::size_t c = y_t[i];
    double same = 0.0, all = 0.0;
    for (std::size_t k = 0; k < ch; ++k) {
      same += unit[k] * class_sum[c * ch + k];
      all += unit[k] * total_sum[k];
    }
    const std::size_t pos_count = class_count[c];
    const std::size_t neg_count = n - pos_count;
    out.defined_positive[i] = pos_count > 0;
    out.defined_negative[i] = neg_count > 0;
    out.positive[i] = pos_count > 0 ? static_cast<float>(same / pos_count) : kPositiveSentinel;
    out.negative[i] = neg_count > 0 ? static_cast<float>((all - same) / neg_count) : kNegativeSentinel;
  }
  return out;
}

/// Full-resolution affinity for a frame pair: labels are reduced to the
/// feature grid, affinity is computed there and expanded back to the label
/// grid.
inline AffinityPair frame_affinity(const FeatureMap& f_t, const FeatureMap& f_prev, const LabelMap& y_t,
                                   const LabelMap& y_prev) {
  require(y_t.height == y_prev.height && y_t.width == y_prev.width, ErrorCode::kShapeMismatch,
          "adjacent label maps differ in shape");
  const auto small_t = downsample_labels(y_t, f_t.height, f_t.width);
  const auto small_prev = downsample_labels(y_prev, f_prev.height, f_prev.width);
  return upsample_affinity(affinity_fast(f_t, f_prev, small_t, small_prev), y_t.height, y_t.width);
}

inline AffinityPair compute_frame_affinity(FrameRef frame, const DatasetManifest& manifest) {
  const FrameRef other = adjacent_frame(manifest, frame);
  const auto& cur = manifest.videos.at(frame.video).frames.at(frame.frame);
  const auto& adj = manifest.videos.at(other.video).frames.at(other.frame);
  const auto f_t = feature_map_from(load_tensor(manifest.resolve(cur.feature_path)));
  const auto y_t = label_map_from(load_tensor(manifest.resolve(cur.label_path)));
  if (other == frame) return frame_affinity(f_t, f_t, y_t, y_t);
  const auto f_prev = feature_map_from(load_tensor(manifest.resolve(adj.feature_path)));
  const auto y_prev = label_map_from(load_tensor(manifest.resolve(adj.label_path)));
  return frame_affinity(f_t, f_prev, y_t, y_prev);
}

}  // namespace tfal

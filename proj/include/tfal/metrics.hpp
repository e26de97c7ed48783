#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "tfal/error.hpp"
#include "tfal/tensor.hpp"

namespace tfal {

/// Rows are ground-truth classes, columns predicted classes.
class ConfusionMatrix {
 public:
  explicit ConfusionMatrix(std::size_t classes = 0) : classes_(classes), counts_(classes * classes, 0) {}

  std::size_t classes() const { return classes_; }
  std::uint64_t operator()(std::size_t gt, std::size_t pred) const { return counts_[gt * classes_ + pred]; }
  std::uint64_t& operator()(std::size_t gt, std::size_t pred) { return counts_[gt * classes_ + pred]; }

  std::uint64_t total() const {
    std::uint64_t t = 0;
    for (auto c : counts_) t += c;
    return t;
  }

  std::uint64_t true_positive(std::size_t c) const { return (*this)(c, c); }
  std::uint64_t false_positive(std::size_t c) const {
    std::uint64_t s = 0;
    for (std::size_t g = 0; g < classes_; ++g) s += g == c ? 0 : (*this)(g, c);
    return s;
  }
  std::uint64_t false_negative(std::size_t c) const {
    std::uint64_t s = 0;
    for (std::size_t p = 0; p < classes_; ++p) s += p == c ? 0 : (*this)(c, p);
    return s;
  }

  ConfusionMatrix& operator+=(const ConfusionMatrix& other) {
    require(other.classes_ == classes_, ErrorCode::kShapeMismatch, "confusion matrices differ in class count");
    for (std::size_t i = 0; i < counts_.size(); ++i) counts_[i] += other.counts_[i];
    return *this;
  }

  friend bool operator==(const ConfusionMatrix&, const ConfusionMatrix&) = default;

 private:
  std::size_t classes_;
  std::vector<std::uint64_t> counts_;
};

inline ConfusionMatrix accumulate_confusion(const LabelMap& pred, const LabelMap& gt, ConfusionMatrix cm) {
  require(pred.height == gt.height && pred.width == gt.width, ErrorCode::kShapeMismatch,
          "prediction and ground truth differ in shape");
  for (std::size_t i = 0; i < gt.size(); ++i) {
    require(gt[i] < cm.classes() && pred[i] < cm.classes(), ErrorCode::kShapeMismatch,
            "label outside confusion-matrix class range");
    ++cm(gt[i], pred[i]);
  }
  return cm;
}

/// Per-class IoU; empty for classes absent from both ground truth and
/// prediction.
inline std::vector<std::optional<double>> per_class_iou(const ConfusionMatrix& cm) {
  std::vector<std::optional<double>> out(cm.classes());
  for (std::size_t c = 0; c < cm.classes(); ++c) {
    const auto tp = cm.true_positive(c);
    const auto denom = tp + cm.false_positive(c) + cm.false_negative(c);
    if (denom > 0) out[c] = static_cast<double>(tp) / static_cast<double>(denom);
  }
  return out;
}

inline std::vector<std::optional<double>> per_class_dice(const ConfusionMatrix& cm) {
  std::vector<std::optional<double>> out(cm.classes());
  for (std::size_t c = 0; c < cm.classes(); ++c) {
    const auto tp = cm.true_positive(c);
    const auto denom = 2 * tp + cm.false_positive(c) + cm.false_negative(c);
    if (denom > 0) out[c] = 2.0 * static_cast<double>(tp) / static_cast<double>(denom);
  }
  return out;
}

namespace detail {
inline double mean_included(const std::vector<std::optional<double>>& v) {
  double sum = 0.0;
  std::size_t n = 0;
  for (const auto& x : v)
    if (x) {
      sum += *x;
      ++n;
    }
  require(n > 0, ErrorCode::kNoEvaluatedClasses, "no class appears in ground truth or prediction");
  return sum / static_cast<double>(n);
}
}  // namespace detail

inline double miou(const ConfusionMatrix& cm) { return detail::mean_included(per_class_iou(cm)); }
inline double dice(const ConfusionMatrix& cm) { return detail::mean_included(per_class_dice(cm)); }

/// One (prediction, ground truth) pair per frame, grouped by video.
struct LabeledVideo {
  std::string video_id;
  std::vector<LabelMap> predictions;
  std::vector<LabelMap> ground_truth;
};

inline std::map<std::string, double> sequence_miou(std::span<const LabeledVideo> videos, std::size_t classes) {
  std::map<std::string, double> out;
  for (const auto& v : videos) {
    require(v.predictions.size() == v.ground_truth.size(), ErrorCode::kShapeMismatch,
            "video '" + v.video_id + "' has unequal prediction and ground-truth counts");
    ConfusionMatrix cm(classes);
    for (std::size_t f = 0; f < v.predictions.size(); ++f) cm = accumulate_confusion(v.predictions[f], v.ground_truth[f], cm);
    out[v.video_id] = miou(cm);
  }
  return out;
}

struct DetectionMetrics {
  double precision = 1.0;
  double recall = 1.0;
  double f1 = 1.0;
  double overlap_iou = 1.0;
  std::uint64_t selected = 0;
  std::uint64_t truth = 0;
  std::uint64_t intersection = 0;
};

/// Selected-noise maps against true noise-variance maps. Empty selections
/// have precision 1, empty truth has recall 1, and an empty union has
/// overlap 1.
inline DetectionMetrics detection_metrics(std::span<const Mask> selected, std::span<const Mask> variance) {
  require(selected.size() == variance.size(), ErrorCode::kShapeMismatch, "mask set sizes differ");
  DetectionMetrics d;
  std::uint64_t uni = 0;
  for (std::size_t k = 0; k < selected.size(); ++k) {
    require(selected[k].height == variance[k].height && selected[k].width == variance[k].width,
            ErrorCode::kShapeMismatch, "mask shapes differ");
    for (std::size_t i = 0; i < selected[k].size(); ++i) {
      const bool s = selected[k][i] != 0, t = variance[k][i] != 0;
      d.selected += s;
      d.truth += t;
      d.intersection += s && t;
      uni += s || t;
    }
  }
  d.precision = d.selected ? static_cast<double>(d.intersection) / static_cast<double>(d.selected) : 1.0;
  d.recall = d.truth ? static_cast<double>(d.intersection) / static_cast<double>(d.truth) : 1.0;
  d.f1 = d.precision + d.recall > 0 ? 2.0 * d.precision * d.recall / (d.precision + d.recall) : 0.0;
  d.overlap_iou = uni ? static_cast<double>(d.intersection) / static_cast<double>(uni) : 1.0;
  return d;
}

inline nlohmann::json to_json(const DetectionMetrics& d) {
  return {{"precision", d.precision}, {"recall", d.recall},       {"f1", d.f1},
          {"overlap_iou", d.overlap_iou}, {"selected", d.selected}, {"truth", d.truth},
          {"intersection", d.intersection}};
}

}  // namespace tfal

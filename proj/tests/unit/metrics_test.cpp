#include <vector>

#include <gtest/gtest.h>

#include "tfal/metrics.hpp"
#include "tfal/rng.hpp"

using namespace tfal;

namespace {

ErrorCode code_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "expected tfal::Error";
  return ErrorCode::kInvalidConfig;
}

LabelMap random_labels(RandomStream& rng, std::size_t n, std::size_t classes) {
  LabelMap y(1, n, classes);
  for (auto& v : y.values) v = static_cast<std::uint16_t>(rng.uniform_int(0, classes - 1));
  return y;
}

}  // namespace

TEST(Confusion, MatchesPairHistogram) {
  RandomStream rng(1);
  const auto gt = random_labels(rng, 400, 5), pred = random_labels(rng, 400, 5);
  const auto cm = accumulate_confusion(pred, gt, ConfusionMatrix(5));
  std::vector<std::uint64_t> hist(25, 0);
  for (std::size_t i = 0; i < 400; ++i) ++hist[gt[i] * 5 + pred[i]];
  for (std::size_t g = 0; g < 5; ++g)
    for (std::size_t p = 0; p < 5; ++p) EXPECT_EQ(cm(g, p), hist[g * 5 + p]);
  EXPECT_EQ(cm.total(), 400u);
  // splitting the pixels and summing gives the same matrix
  LabelMap g1(1, 200, 5, std::vector<std::uint16_t>(gt.values.begin(), gt.values.begin() + 200));
  LabelMap g2(1, 200, 5, std::vector<std::uint16_t>(gt.values.begin() + 200, gt.values.end()));
  LabelMap p1(1, 200, 5, std::vector<std::uint16_t>(pred.values.begin(), pred.values.begin() + 200));
  LabelMap p2(1, 200, 5, std::vector<std::uint16_t>(pred.values.begin() + 200, pred.values.end()));
  auto split = accumulate_confusion(p1, g1, ConfusionMatrix(5));
  split += accumulate_confusion(p2, g2, ConfusionMatrix(5));
  EXPECT_EQ(split, cm);
  EXPECT_EQ(code_of([&] { accumulate_confusion(pred, gt, ConfusionMatrix(3)); }), ErrorCode::kShapeMismatch);
}

TEST(Scores, PerfectPrediction) {
  RandomStream rng(2);
  const auto y = random_labels(rng, 100, 4);
  const auto cm = accumulate_confusion(y, y, ConfusionMatrix(4));
  EXPECT_EQ(miou(cm), 1.0);
  EXPECT_EQ(dice(cm), 1.0);
}

TEST(Scores, TwoClassHandExample) {
  const LabelMap gt(1, 4, 2, std::vector<std::uint16_t>{0, 0, 1, 1});
  const LabelMap pred(1, 4, 2);
  const auto cm = accumulate_confusion(pred, gt, ConfusionMatrix(2));
  EXPECT_EQ(*per_class_iou(cm)[0], 0.5);
  EXPECT_EQ(*per_class_iou(cm)[1], 0.0);
  EXPECT_EQ(miou(cm), 0.25);
  EXPECT_DOUBLE_EQ(dice(cm), 1.0 / 3.0);
}

TEST(Scores, AbsentClassesExcluded) {
  const LabelMap gt(1, 4, 4, std::vector<std::uint16_t>{0, 0, 1, 2});
  const LabelMap pred(1, 4, 4, std::vector<std::uint16_t>{0, 1, 1, 2});
  const auto cm = accumulate_confusion(pred, gt, ConfusionMatrix(4));
  const auto iou = per_class_iou(cm);
  EXPECT_FALSE(iou[3].has_value());
  EXPECT_DOUBLE_EQ(miou(cm), (0.5 + 0.5 + 1.0) / 3);
  EXPECT_EQ(code_of([] { miou(ConfusionMatrix(3)); }), ErrorCode::kNoEvaluatedClasses);
  EXPECT_EQ(code_of([] { dice(ConfusionMatrix(0)); }), ErrorCode::kNoEvaluatedClasses);
}

TEST(Scores, DiceNeverBelowIou) {
  RandomStream rng(3);
  for (int t = 0; t < 1000; ++t) {
    const std::size_t k = rng.uniform_int(1, 6);
    ConfusionMatrix cm(k);
    for (std::size_t g = 0; g < k; ++g)
      for (std::size_t p = 0; p < k; ++p) cm(g, p) = rng.uniform_int(0, 20);
    const auto iou = per_class_iou(cm), d = per_class_dice(cm);
    for (std::size_t c = 0; c < k; ++c) {
      ASSERT_EQ(iou[c].has_value(), d[c].has_value());
      if (iou[c]) {
        EXPECT_GE(*d[c], *iou[c]);
        EXPECT_NEAR(*d[c], 2 * *iou[c] / (1 + *iou[c]), 1e-12);
      }
    }
  }
}

TEST(Scores, SequenceMiouPerVideo) {
  const LabelMap a(1, 2, 2, std::vector<std::uint16_t>{0, 1});
  const LabelMap b(1, 2, 2, std::vector<std::uint16_t>{0, 0});
  const std::vector<LabeledVideo> videos = {{"good", {a, a}, {a, a}}, {"bad", {b}, {a}}};
  const auto s = sequence_miou(videos, 2);
  EXPECT_EQ(s.at("good"), 1.0);
  EXPECT_DOUBLE_EQ(s.at("bad"), 0.25);
}

TEST(Detection, SetCountingOracle) {
  RandomStream rng(4);
  std::vector<Mask> sel, var;
  std::uint64_t s = 0, t = 0, both = 0, either = 0;
  for (int f = 0; f < 5; ++f) {
    Mask a(3, 7), b(3, 7);
    for (std::size_t i = 0; i < 21; ++i) {
      a[i] = rng.coin();
      b[i] = rng.coin();
      s += a[i];
      t += b[i];
      both += a[i] & b[i];
      either += a[i] | b[i];
    }
    sel.push_back(a);
    var.push_back(b);
  }
  const auto d = detection_metrics(sel, var);
  EXPECT_EQ(d.intersection, both);
  EXPECT_DOUBLE_EQ(d.precision, double(both) / s);
  EXPECT_DOUBLE_EQ(d.recall, double(both) / t);
  EXPECT_DOUBLE_EQ(d.overlap_iou, double(both) / either);
  EXPECT_NEAR(d.f1, 2.0 * both / (s + t), 1e-12);
}

TEST(Detection, EmptyConventions) {
  const std::vector<Mask> empty = {Mask(2, 2)};
  const auto d = detection_metrics(empty, empty);
  EXPECT_EQ(d.precision, 1.0);
  EXPECT_EQ(d.recall, 1.0);
  EXPECT_EQ(d.overlap_iou, 1.0);
  const std::vector<Mask> full = {Mask(2, 2, std::uint8_t{1})};
  const auto miss = detection_metrics(empty, full);
  EXPECT_EQ(miss.precision, 1.0);
  EXPECT_EQ(miss.recall, 0.0);
  EXPECT_EQ(detection_metrics(full, empty).precision, 0.0);
  EXPECT_EQ(detection_metrics(full, empty).f1, 0.0);
}

// Acceptance gate: one PASS/FAIL line per criterion, nonzero exit on any
// failure.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <map>
#include <numbers>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "prototype_dataset.hpp"
#include "tfal/tfal.hpp"

namespace fs = std::filesystem;
using namespace tfal;

namespace {

struct Outcome {
  bool pass = true;
  std::string detail;
};

class Check {
 public:
  void expect(bool cond, const std::string& what) {
    if (!cond && out_.pass) {
      out_.pass = false;
      out_.detail = what;
    }
  }
  void note(const std::string& s) {
    if (out_.pass) out_.detail = s;
  }
  Outcome result() const { return out_; }

 private:
  Outcome out_;
};

std::string fmt(double v, int prec = 6) {
  std::ostringstream s;
  s.precision(prec);
  s << v;
  return s.str();
}

fs::path scratch(const std::string& name) {
  auto dir = fs::temp_directory_path() / "tfal_acceptance" / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::map<std::string, std::vector<std::uint8_t>> snapshot(const fs::path& root) {
  std::map<std::string, std::vector<std::uint8_t>> files;
  for (const auto& e : fs::recursive_directory_iterator(root))
    if (e.is_regular_file()) files[fs::relative(e.path(), root).string()] = read_file(e.path());
  return files;
}

FeatureMap random_features(RandomStream& rng, std::size_t h, std::size_t w, std::size_t ch) {
  FeatureMap f(h, w, ch);
  for (auto& v : f.values) v = static_cast<float>(rng.normal());
  return f;
}

LabelMap random_labels(RandomStream& rng, std::size_t h, std::size_t w, std::size_t classes) {
  LabelMap y(h, w, classes);
  for (auto& v : y.values) v = static_cast<std::uint16_t>(rng.uniform_int(0, static_cast<std::int64_t>(classes) - 1));
  return y;
}

// ---------------------------------------------------------------------------

Outcome a1_oracle_equivalence() {
  Check ck;
  RandomStream rng(2024);
  int degenerate = 0;
  double worst = 0.0;
  const int instances = 250;
  for (int t = 0; t < instances; ++t) {
    const std::size_t h = rng.uniform_int(1, 16), w = rng.uniform_int(1, 16), ch = rng.uniform_int(1, 8);
    const std::size_t classes = (t % 10 == 0) ? 1 : rng.uniform_int(1, 5);
    const auto ft = random_features(rng, h, w, ch), fp = random_features(rng, h, w, ch);
    const auto yt = random_labels(rng, h, w, classes), yp = random_labels(rng, h, w, classes);
    degenerate += classes == 1;
    const auto fast = affinity_fast(ft, fp, yt, yp);
    const auto slow = affinity_bruteforce(ft, fp, yt, yp);
    ck.expect(fast.defined_positive == slow.defined_positive && fast.defined_negative == slow.defined_negative,
              "defined masks differ in instance " + std::to_string(t));
    for (std::size_t i = 0; i < h * w; ++i) {
      if (slow.defined_positive[i]) worst = std::max(worst, double(std::abs(fast.positive[i] - slow.positive[i])));
      if (slow.defined_negative[i]) worst = std::max(worst, double(std::abs(fast.negative[i] - slow.negative[i])));
    }
  }
  ck.expect(degenerate > 0, "no single-class instance generated");
  ck.expect(worst <= 1e-5, "max |fast - brute| = " + fmt(worst));
  ck.note(std::to_string(instances) + " instances (" + std::to_string(degenerate) + " single-class), max |diff| " +
          fmt(worst, 3));
  return ck.result();
}

Outcome a2_exact_noise_detection() {
  // Two classes with orthonormal prototypes. Each query frame has 10% of its
  // labels flipped and is paired with its clean reference frame.
  Check ck;
  RandomStream rng(7);
  const std::size_t h = 24, w = 24, ch = 4, frames = 6;
  std::vector<AffinityPair> pairs;
  std::vector<Mask> truth;
  std::vector<ImageStats> stats;
  for (std::size_t f = 0; f < frames; ++f) {
    LabelMap clean(h, w, 2);
    for (std::size_t r = 0; r < h; ++r)
      for (std::size_t c = 0; c < w; ++c) clean.at(r, c) = (c + f) % w >= w / 2 ? 1 : 0;
    FeatureMap feat(h, w, ch);
    for (std::size_t i = 0; i < clean.size(); ++i) feat.pixel(i)[clean[i]] = 1.0f;
    std::vector<std::size_t> idx(clean.size());
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    const std::size_t flips = clean.size() / 10;
    for (std::size_t i = 0; i < flips; ++i) std::swap(idx[i], idx[rng.uniform_int(i, idx.size() - 1)]);
    LabelMap noisy = clean;
    Mask flipped(h, w);
    for (std::size_t i = 0; i < flips; ++i) {
      noisy[idx[i]] = 1 - noisy[idx[i]];
      flipped[idx[i]] = 1;
    }
    const auto brute = affinity_bruteforce(feat, feat, noisy, clean);
    for (std::size_t i = 0; i < clean.size(); ++i) {
      if (flipped[i]) {
        ck.expect(brute.positive[i] == 0.0f && brute.negative[i] == 1.0f, "flipped pixel not at (0, 1)");
      } else {
        ck.expect(brute.positive[i] == 1.0f, "clean pixel a_p != 1");
      }
    }
    pairs.push_back(affinity_fast(feat, feat, noisy, clean));
    truth.push_back(flipped);
    stats.push_back(image_stats(pairs.back()));
  }
  const auto th = dataset_thresholds(stats);
  std::vector<Mask> selected;
  for (const auto& p : pairs) selected.push_back(noisy_pixel_mask(p, th));
  const auto d = detection_metrics(selected, truth);
  ck.expect(d.precision == 1.0 && d.recall == 1.0,
            "precision " + fmt(d.precision) + " recall " + fmt(d.recall));
  ck.note("precision " + fmt(d.precision) + " recall " + fmt(d.recall) + " over " + std::to_string(d.truth) +
          " flipped pixels");
  return ck.result();
}

Outcome a3_video_weights() {
  Check ck;
  const double expected[] = {0.4, 0.4, 0.7, 1.0, 1.0, 1.0};
  const std::vector<double> q = {0.5, 0.1, 0.9, 0.3, 1.2, 0.7};  // ranks 3,1,5,2,6,4
  const auto w = video_weights(q, 0.4, 1.0);
  const auto ranks = video_ranks(q);
  for (std::size_t v = 0; v < 6; ++v)
    ck.expect(std::abs(w[v] - expected[ranks[v] - 1]) <= 1e-12, "N=6 table mismatch at rank " + std::to_string(ranks[v]));
  RandomStream rng(3);
  std::size_t checked = 0;
  for (int t = 0; t < 300; ++t) {
    const std::size_t n = rng.uniform_int(1, 50);
    const double lo = rng.uniform(0, 1), hi = lo + rng.uniform(0, 1);
    for (std::size_t k = 1; k <= n; ++k) {
      // direct re-evaluation with the rank fraction k/N
      const double x = double(k) / double(n);
      double want;
      if (3 * k < n) want = lo;
      else if (3 * k <= 2 * n) want = lo + (3 * x - 1) * (hi - lo);
      else want = hi;
      ck.expect(std::abs(video_weight_for_rank(k, n, lo, hi) - want) <= 1e-12,
                "formula mismatch k=" + std::to_string(k) + " N=" + std::to_string(n));
      ++checked;
    }
  }
  ck.note("N=6 table exact; " + std::to_string(checked) + " random ranks match");
  return ck.result();
}

Outcome a4_image_weight() {
  Check ck;
  const double qbar = 1.37;
  ck.expect(image_weight(qbar, qbar) == 1.0, "image_weight(q_bar) != 1");
  ck.expect(std::abs(image_weight(qbar + 0.5, qbar) - std::numbers::e) <= 1e-9, "image_weight(q_bar + 0.5) != e");
  RandomStream rng(4);
  int pairs = 0;
  while (pairs < 1000) {
    const double a = rng.uniform(-1, 3), b = rng.uniform(-1, 3);
    if (a == b) continue;
    ++pairs;
    ck.expect((a < b) == (image_weight(a, qbar) < image_weight(b, qbar)), "monotonicity violated");
  }
  ck.note("anchors exact, 1000 random pairs strictly ordered");
  return ck.result();
}

Outcome a5_schedule() {
  Check ck;
  StageFlags prev = stage_for_epoch(1);
  std::vector<int> changes;
  for (int e = 2; e <= 100; ++e) {
    const auto f = stage_for_epoch(e);
    if (f.video != prev.video) changes.push_back(e);
    if (f.image != prev.image) changes.push_back(e);
    if (f.pixel != prev.pixel) changes.push_back(e);
    prev = f;
  }
  ck.expect(stage_for_epoch(1) == StageFlags{}, "stages active at epoch 1");
  ck.expect(changes == std::vector<int>{16, 24, 40}, "flag changes at unexpected epochs");
  ck.expect(stage_for_epoch(100) == StageFlags{true, true, true}, "not all stages on at epoch 100");
  ck.note("flags switch at epochs 16, 24, 40 only");
  return ck.result();
}

struct RecoveryStats {
  double recovered = 0.0;
  double corrupted = 0.0;
  std::size_t noisy = 0;
};

RecoveryStats run_recovery(const fs::path& dir, const synth::PrototypeSpec& spec, const NoiseConfig& ncfg) {
  const auto clean = synth::write_prototype_dataset(dir / "clean", spec);
  cmd_inject_noise(clean, ncfg, dir / "noisy");
  const auto noisy = load_manifest(dir / "noisy/manifest.json");
  RectifyConfig rcfg;
  rcfg.epoch = 40;
  const auto report = cmd_rectify(noisy, rcfg, dir / "rectified");
  std::size_t noisy_px = 0, fixed = 0, clean_px = 0, broken = 0;
  for (const auto& v : noisy.videos) {
    for (const auto& f : v.frames) {
      const auto truth = label_map_from(load_tensor(noisy.resolve(*f.clean_label_path)));
      const auto given = label_map_from(load_tensor(noisy.resolve(f.label_path)));
      const auto out = label_map_from(load_tensor(frame_artifact(dir / "rectified", "corrected", v.video_id, f.frame_id)));
      for (std::size_t i = 0; i < truth.size(); ++i) {
        if (given[i] != truth[i]) {
          ++noisy_px;
          fixed += out[i] == truth[i];
        } else {
          ++clean_px;
          broken += out[i] != truth[i];
        }
      }
    }
  }
  (void)report;
  return {noisy_px ? double(fixed) / noisy_px : 1.0, clean_px ? double(broken) / clean_px : 0.0, noisy_px};
}

// Noise magnitudes for 32x40 labels: radii and translation scaled from the
// 256-pixel defaults by 1/8, polygon extent already relative to the image.
NoiseConfig small_image_noise(std::uint64_t seed) {
  NoiseConfig n;
  n.seed = seed;
  n.alpha = 2.0 / 3.0;
  n.dilation_radius = {1, 1};
  n.erosion_radius = {1, 1};
  n.affine.max_translate_px = 1.25;
  return n;
}

Outcome a6_end_to_end() {
  Check ck;
  synth::PrototypeSpec spec;  // 3 videos x 8 frames x 32x40, sigma 0.1, one-hot clean predictions
  spec.classes = 2;
  spec.seed = 1;
  const auto r = run_recovery(scratch("a6"), spec, small_image_noise(1));
  ck.expect(r.noisy > 0, "no noise injected");
  ck.expect(r.recovered >= 0.95, "recovered " + fmt(r.recovered, 4) + " < 0.95");
  ck.expect(r.corrupted <= 0.01, "corrupted " + fmt(r.corrupted, 4) + " > 0.01");
  ck.note("recovered " + fmt(100 * r.recovered, 4) + "% of " + std::to_string(r.noisy) + " noisy pixels, corrupted " +
          fmt(100 * r.corrupted, 4) + "% of clean pixels");
  return ck.result();
}

Outcome a7_injector_statistics() {
  Check ck;
  const auto dir = scratch("a7");
  synth::PrototypeSpec spec;
  spec.videos = 10;
  spec.frames = 20;
  spec.height = 24;
  spec.width = 30;
  const auto clean = synth::write_prototype_dataset(dir / "clean", spec);
  NoiseConfig cfg;
  cfg.alpha = 0.5;
  cfg.seed = 11;
  const auto s = cmd_inject_noise(clean, cfg, dir / "run1");
  cmd_inject_noise(clean, cfg, dir / "run2");
  cfg.seed = 12;
  cmd_inject_noise(clean, cfg, dir / "run3");

  ck.expect(s.selected_videos.size() == 5, std::to_string(s.selected_videos.size()) + " videos selected");
  const auto report = read_json(dir / "run1/noise_report.json");
  std::size_t groups = 0;
  for (const auto& v : report["videos"]) {
    const auto& g = v["groups"];
    if (!v["selected"].get<bool>()) {
      ck.expect(g.empty(), "unselected video has groups");
      continue;
    }
    std::size_t covered = 0;
    for (std::size_t k = 0; k < g.size(); ++k) {
      const auto len = g[k]["end"].get<std::size_t>() - g[k]["begin"].get<std::size_t>();
      covered += len;
      if (k + 1 < g.size()) ck.expect(len >= 3 && len <= 6, "group size " + std::to_string(len));
      ++groups;
    }
    ck.expect(covered == spec.frames, "groups do not cover the video");
  }
  const std::set<std::string> chosen(s.selected_videos.begin(), s.selected_videos.end());
  for (const auto& v : s.manifest.videos) {
    if (chosen.count(v.video_id)) continue;
    for (const auto& f : v.frames) {
      const auto var = grid_from<std::uint8_t>(load_tensor(dir / "run1/variance" / v.video_id / (f.frame_id + ".tfal")));
      for (auto x : var.values) ck.expect(x == 0, "variance nonzero in unselected video " + v.video_id);
    }
  }
  ck.expect(snapshot(dir / "run1") == snapshot(dir / "run2"), "same seed produced different bytes");
  ck.expect(snapshot(dir / "run1") != snapshot(dir / "run3"), "different seeds produced identical output");
  ck.note("5/10 selected, " + std::to_string(groups) + " groups checked, reruns byte-identical");
  return ck.result();
}

Outcome a8_metrics() {
  Check ck;
  RandomStream rng(8);
  const auto y = random_labels(rng, 10, 10, 4);
  const auto perfect = accumulate_confusion(y, y, ConfusionMatrix(4));
  ck.expect(miou(perfect) == 1.0 && dice(perfect) == 1.0, "perfect prediction not 1.0");
  const LabelMap gt(1, 4, 2, std::vector<std::uint16_t>{0, 0, 1, 1});
  const auto cm = accumulate_confusion(LabelMap(1, 4, 2), gt, ConfusionMatrix(2));
  ck.expect(miou(cm) == 0.25, "2-class mIoU " + fmt(miou(cm), 17));
  ck.expect(dice(cm) == 1.0 / 3.0, "2-class Dice " + fmt(dice(cm), 17));
  for (int t = 0; t < 1000; ++t) {
    const std::size_t k = rng.uniform_int(1, 6);
    ConfusionMatrix m(k);
    for (std::size_t g = 0; g < k; ++g)
      for (std::size_t p = 0; p < k; ++p) m(g, p) = rng.uniform_int(0, 30);
    const auto iou = per_class_iou(m), d = per_class_dice(m);
    for (std::size_t c = 0; c < k; ++c)
      if (iou[c]) ck.expect(*d[c] >= *iou[c], "Dice below IoU");
  }
  ck.note("anchors exact, Dice >= IoU on 1000 random matrices");
  return ck.result();
}

Outcome a9_losses() {
  // Uniform probabilities are stored as float32, so the anchor is exact only
  // when 1/C is representable; other C are checked against the stored value.
  Check ck;
  RandomStream rng(9);
  const std::size_t H = 12, W = 9;
  double worst = 0.0;
  for (std::size_t C : {2u, 4u, 8u, 5u, 7u}) {
    const auto y = random_labels(rng, H, W, C);
    ck.expect(cross_entropy(one_hot(y, C), y) == 0.0, "one-hot CE != 0");
    const float u = 1.0f / static_cast<float>(C);
    const PredictionMap uniform(H, W, C, std::vector<float>(H * W * C, u));
    const double ce = cross_entropy(uniform, y);
    const bool exact = static_cast<double>(u) * C == 1.0;
    const double want = exact ? H * W * std::log(double(C)) : -double(H * W) * std::log(double(u));
    worst = std::max(worst, std::abs(ce - want));
    ck.expect(std::abs(ce - want) <= 1e-6, "uniform CE " + fmt(ce, 12) + " for C=" + std::to_string(C));
    const auto off = total_loss(uniform, y, random_labels(rng, H, W, C), 2.5, 0.4, StageFlags{});
    ck.expect(std::abs(off.total - 2 * ce) <= 1e-9, "all-off total " + fmt(off.total, 12));
  }
  ck.note("CE(one-hot)=0, CE(uniform)=HW ln C (max err " + fmt(worst, 3) + "), all-off total = 2 CE");
  return ck.result();
}

}  // namespace

int main() {
  struct Criterion {
    const char* id;
    const char* name;
    std::function<Outcome()> run;
    double budget_s;
  };
  const std::vector<Criterion> criteria = {
      {"A1", "fast affinity equals brute force", a1_oracle_equivalence, 10},
      {"A2", "exact noise detection on prototypes", a2_exact_noise_detection, 5},
      {"A3", "video weight table and formula", a3_video_weights, 0},
      {"A4", "image weight anchors and monotonicity", a4_image_weight, 0},
      {"A5", "stage schedule", a5_schedule, 0},
      {"A6", "end-to-end rectification", a6_end_to_end, 60},
      {"A7", "injector statistics", a7_injector_statistics, 0},
      {"A8", "metric anchors", a8_metrics, 0},
      {"A9", "loss anchors", a9_losses, 0},
  };
  int failures = 0;
  for (const auto& c : criteria) {
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (c.budget_s > 0 && secs >= c.budget_s) {
      o.pass = false;
      o.detail += "; took " + fmt(secs, 3) + " s, budget " + fmt(c.budget_s) + " s";
    }
    failures += !o.pass;
    std::printf("%s %s: %s (%s) [%.2f s]\n", o.pass ? "PASS" : "FAIL", c.id, c.name, o.detail.c_str(), secs);
  }
  // Not a criterion: the same pipeline on a background + 3 object scene.
  // Negative affinity averages over every other class, so noise on a small
  // object among several others is detected less reliably.
  {
    synth::PrototypeSpec spec;
    double lo = 1.0, sum = 0.0;
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
      spec.seed = seed;
      const auto r = run_recovery(scratch("a6_multiclass"), spec, small_image_noise(seed));
      lo = std::min(lo, r.recovered);
      sum += r.recovered;
    }
    std::printf("INFO A6 with 4 classes, seeds 1-5: mean recovery %.4f, worst %.4f\n", sum / 5, lo);
  }
  std::printf("%d of %zu criteria passed\n", static_cast<int>(criteria.size()) - failures, criteria.size());
  return failures == 0 ? 0 : 1;
}

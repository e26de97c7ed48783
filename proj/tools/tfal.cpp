// tfal: temporal-affinity label rectification from the command line.
//
//   tfal affinity     --manifest M --out DIR
//   tfal thresholds   --stats DIR/affinity_stats.json [...] --out DIR
//   tfal rectify      --manifest M [--config C] --epoch E --out DIR
//   tfal inject-noise --manifest M [--config C] --seed S --out DIR
//   tfal evaluate     --manifest M [--masks DIR --variance DIR] --out DIR

#include <cstdint>
#include <filesystem>
#include <iomanip>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "tfal/tfal.hpp"

namespace fs = std::filesystem;

namespace {

enum class LogLevel { kError = 0, kWarn = 1, kInfo = 2, kDebug = 3 };

struct GlobalOptions {
  std::string manifest;
  std::string config;
  std::string out = ".";
  std::optional<std::uint64_t> seed;
  std::size_t threads = 1;
  std::optional<int> epoch;
  LogLevel log_level = LogLevel::kInfo;
};

void log(const GlobalOptions& g, LogLevel level, const std::string& msg) {
  if (level <= g.log_level) std::cerr << "[tfal] " << msg << "\n";
}

nlohmann::json load_config(const GlobalOptions& g) {
  if (g.config.empty()) return nlohmann::json::object();
  return tfal::read_json(g.config);
}

tfal::DatasetManifest require_manifest(const GlobalOptions& g) {
  if (g.manifest.empty()) throw tfal::Error(tfal::ErrorCode::kInvalidConfig, "--manifest is required");
  return tfal::load_manifest(g.manifest);
}

int run_affinity(const GlobalOptions& g) {
  const auto manifest = require_manifest(g);
  const auto summary = tfal::cmd_affinity(manifest, g.out, g.threads);
  std::cout << std::left << std::setw(16) << "video" << std::setw(16) << "frame" << std::right << std::setw(10)
            << "mean_ap" << std::setw(10) << "mean_an" << std::setw(10) << "q" << "\n";
  std::cout << std::fixed << std::setprecision(4);
  for (const auto& f : summary.at("frames")) {
    std::cout << std::left << std::setw(16) << f.at("video_id").get<std::string>() << std::setw(16)
              << f.at("frame_id").get<std::string>() << std::right;
    if (f.at("stats").is_null()) {
      std::cout << std::setw(30) << "(undefined)" << "\n";
      continue;
    }
    const auto& s = f.at("stats");
    std::cout << std::setw(10) << s.at("mean_ap").get<double>() << std::setw(10) << s.at("mean_an").get<double>()
              << std::setw(10) << s.at("q").get<double>() << "\n";
  }
  log(g, LogLevel::kInfo, "wrote " + (fs::path(g.out) / "affinity_stats.json").string());
  return 0;
}

int run_thresholds(const GlobalOptions& g, const std::vector<std::string>& stats) {
  std::vector<fs::path> files(stats.begin(), stats.end());
  if (files.empty()) throw tfal::Error(tfal::ErrorCode::kInvalidConfig, "--stats requires at least one file");
  const auto th = tfal::cmd_thresholds(files, fs::path(g.out));
  std::cout << std::fixed << std::setprecision(6) << "t_p   " << th.t_p << "\nt_n   " << th.t_n << "\nq_bar "
            << th.q_bar << "\n";
  return 0;
}

int run_rectify(const GlobalOptions& g) {
  const auto manifest = require_manifest(g);
  auto cfg = tfal::rectify_config_from_json(load_config(g));
  if (g.epoch) cfg.epoch = *g.epoch;
  cfg.threads = g.threads;
  const auto report = tfal::cmd_rectify(manifest, cfg, g.out);
  std::cout << "epoch " << report.epoch << "  stages video=" << report.flags.video << " image=" << report.flags.image
            << " pixel=" << report.flags.pixel << "\n";
  std::cout << std::fixed << std::setprecision(4) << "t_p " << report.thresholds.t_p << "  t_n "
            << report.thresholds.t_n << "  q_bar " << report.thresholds.q_bar << "\n";
  std::cout << std::left << std::setw(16) << "video" << std::right << std::setw(10) << "q_v" << std::setw(6) << "rank"
            << std::setw(10) << "lambda_v" << "\n";
  for (const auto& v : report.videos)
    std::cout << std::left << std::setw(16) << v.video_id << std::right << std::setw(10) << v.q_v << std::setw(6)
              << v.rank << std::setw(10) << (report.flags.video ? v.lambda_v : 1.0) << "\n";
  std::size_t flagged = 0;
  for (const auto& f : report.frames) flagged += f.noisy_pixels;
  std::cout << "flagged pixels " << flagged << "\n";
  if (report.losses) std::cout << "total loss " << report.losses->total << "\n";
  log(g, LogLevel::kInfo, "wrote " + (fs::path(g.out) / "report.json").string());
  return 0;
}

int run_inject(const GlobalOptions& g) {
  const auto manifest = require_manifest(g);
  auto cfg = tfal::noise_config_from_json(load_config(g));
  if (g.seed) cfg.seed = *g.seed;
  const auto summary = tfal::cmd_inject_noise(manifest, cfg, g.out);
  std::cout << "selected " << summary.selected_videos.size() << " of " << manifest.videos.size() << " videos:";
  for (const auto& id : summary.selected_videos) std::cout << " " << id;
  std::cout << "\nnoisy pixels " << summary.noisy_pixels << " / " << summary.total_pixels << "\n";
  log(g, LogLevel::kInfo, "wrote " + (fs::path(g.out) / "manifest.json").string());
  return 0;
}

int run_evaluate(const GlobalOptions& g, const std::string& masks, const std::string& variance, std::size_t classes) {
  const auto manifest = require_manifest(g);
  tfal::EvaluateOptions opts;
  if (!masks.empty()) opts.masks_dir = masks;
  if (!variance.empty()) opts.variance_dir = variance;
  opts.classes = classes;
  const auto m = tfal::cmd_evaluate(manifest, opts, g.out);
  std::cout << std::fixed << std::setprecision(2);
  if (m.contains("miou")) {
    std::cout << "mIoU " << 100.0 * m.at("miou").get<double>() << "%  Dice " << 100.0 * m.at("dice").get<double>()
              << "%\n";
    for (const auto& [id, v] : m.at("per_sequence").items())
      std::cout << "  " << std::left << std::setw(16) << id << std::right << 100.0 * v.get<double>() << "%\n";
  }
  if (m.contains("detection")) {
    const auto& d = m.at("detection");
    std::cout << std::setprecision(4) << "detection precision " << d.at("precision").get<double>() << "  recall "
              << d.at("recall").get<double>() << "  f1 " << d.at("f1").get<double>() << "  overlap "
              << d.at("overlap_iou").get<double>() << "\n";
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Temporal feature affinity label rectification"};
  app.require_subcommand(1);
  GlobalOptions g;
  std::string log_level = "info";

  app.add_option("--manifest", g.manifest, "Dataset manifest (JSON)");
  app.add_option("--config", g.config, "Rectify or noise configuration (JSON)");
  app.add_option("--out", g.out, "Output directory");
  app.add_option("--seed", g.seed, "Master seed for all random streams");
  app.add_option("--threads", g.threads, "Worker threads over frames")->check(CLI::PositiveNumber);
  app.add_option("--epoch", g.epoch, "1-based training epoch (selects active stages)");
  app.add_option("--log-level", log_level, "error, warn, info or debug")
      ->check(CLI::IsMember({"error", "warn", "info", "debug"}));

  auto* affinity = app.add_subcommand("affinity", "Per-frame positive/negative affinity maps and statistics");
  auto* thresholds = app.add_subcommand("thresholds", "Dataset thresholds from affinity statistics");
  std::vector<std::string> stats_files;
  thresholds->add_option("--stats", stats_files, "affinity_stats.json files")->required();
  auto* rectify = app.add_subcommand("rectify", "Noise masks, corrected labels, weights and losses");
  auto* inject = app.add_subcommand("inject-noise", "Synthetic label noise on a clean dataset");
  auto* evaluate = app.add_subcommand("evaluate", "mIoU, Dice and noise-detection scores");
  std::string masks_dir, variance_dir;
  std::size_t classes = 0;
  evaluate->add_option("--masks", masks_dir, "Directory of selected noise masks (rectify output masks/)");
  evaluate->add_option("--variance", variance_dir, "Directory of true noise maps (inject-noise output variance/)");
  evaluate->add_option("--classes", classes, "Class count (default: inferred)");
  for (auto* sub : {affinity, thresholds, rectify, inject, evaluate}) sub->fallthrough();

  CLI11_PARSE(app, argc, argv);
  g.log_level = log_level == "error" ? LogLevel::kError
                : log_level == "warn" ? LogLevel::kWarn
                : log_level == "debug" ? LogLevel::kDebug
                                       : LogLevel::kInfo;

  try {
    fs::create_directories(g.out);
    if (*affinity) return run_affinity(g);
    if (*thresholds) return run_thresholds(g, stats_files);
    if (*rectify) return run_rectify(g);
    if (*inject) return run_inject(g);
    if (*evaluate) return run_evaluate(g, masks_dir, variance_dir, classes);
  } catch (const tfal::Error& e) {
    std::cerr << "tfal: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "tfal: " << e.what() << "\n";
    return 3;
  }
  return 1;
}

#pragma once

// Command implementations behind the robogrid CLI. Each returns a process
// exit code: 0 success, 1 fatal, 2 completed with warnings.

#include <algorithm>
#include <atomic>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <mutex>
#include <optional>
#include <random>
#include <set>
#include <string>
#include <thread>
#include <vector>

#include <nlohmann/json.hpp>

#include "robogrid/episode_ingest.hpp"
#include "robogrid/error.hpp"
#include "robogrid/feature_file.hpp"
#include "robogrid/grid_codec.hpp"
#include "robogrid/lora.hpp"
#include "robogrid/metrics.hpp"
#include "robogrid/png_io.hpp"
#include "robogrid/supervision.hpp"
#include "robogrid/trajectory_overlay.hpp"

namespace robogrid::pipeline {

namespace fs = std::filesystem;
using nlohmann::json;

inline constexpr int kExitOk = 0;
inline constexpr int kExitFatal = 1;
inline constexpr int kExitWarnings = 2;

enum class Branch { Text, Trajectory, Both };

inline const char* to_string(Branch b) {
  switch (b) {
    case Branch::Text: return "text";
    case Branch::Trajectory: return "trajectory";
    case Branch::Both: return "both";
  }
  return "text";
}

inline Branch branch_from_string(std::string_view s) {
  if (s == "text") return Branch::Text;
  if (s == "trajectory") return Branch::Trajectory;
  if (s == "both") return Branch::Both;
  throw InvalidInput("branch must be text, trajectory or both; got '" + std::string(s) + "'");
}

struct MetricToggles {
  bool fvd = true;
  bool ssim = true;
  bool mse = true;
  bool success = true;
};

struct RunConfig {
  fs::path dataset_root;
  fs::path output_root;
  Branch branch = Branch::Text;
  SamplingSpec sampling;
  ColorRamp ramp;
  std::string prompt_template{kDefaultPromptTemplate};
  MetricToggles metrics;
  std::uint64_t seed = 0;
};

inline json config_to_json(const RunConfig& c) {
  json j;
  j["dataset_root"] = c.dataset_root.string();
  j["output_root"] = c.output_root.string();
  j["branch"] = to_string(c.branch);
  j["sampling"]["target_count"] = c.sampling.target_count;
  j["sampling"]["resize_to"] =
      c.sampling.resize_to ? json::array({c.sampling.resize_to->height, c.sampling.resize_to->width}) : json(nullptr);
  j["ramp"]["start"] = to_hex(c.ramp.start);
  j["ramp"]["end"] = to_hex(c.ramp.end);
  j["ramp"]["stroke_width"] = c.ramp.stroke_width;
  j["prompt_template"] = c.prompt_template;
  j["metrics"] = {{"fvd", c.metrics.fvd}, {"ssim", c.metrics.ssim}, {"mse", c.metrics.mse},
                  {"success", c.metrics.success}};
  j["seed"] = c.seed;
  return j;
}

// Missing keys keep their defaults.
inline RunConfig config_from_json(const json& j) {
  if (!j.is_object()) throw InvalidInput("config must be a JSON object");
  RunConfig c;
  try {
    if (j.contains("dataset_root")) c.dataset_root = j["dataset_root"].get<std::string>();
    if (j.contains("output_root")) c.output_root = j["output_root"].get<std::string>();
    if (j.contains("branch")) c.branch = branch_from_string(j["branch"].get<std::string>());
    if (j.contains("sampling")) {
      const auto& s = j["sampling"];
      if (s.contains("target_count")) c.sampling.target_count = s["target_count"].get<int>();
      if (s.contains("resize_to") && !s["resize_to"].is_null()) {
        const auto& r = s["resize_to"];
        if (!r.is_array() || r.size() != 2) throw InvalidInput("sampling.resize_to must be [height, width]");
        c.sampling.resize_to = Size{r[0].get<int>(), r[1].get<int>()};
      }
    }
    if (j.contains("ramp")) {
      const auto& r = j["ramp"];
      if (r.contains("start")) c.ramp.start = parse_hex_color(r["start"].get<std::string>());
      if (r.contains("end")) c.ramp.end = parse_hex_color(r["end"].get<std::string>());
      if (r.contains("stroke_width")) c.ramp.stroke_width = r["stroke_width"].get<int>();
    }
    if (j.contains("prompt_template")) c.prompt_template = j["prompt_template"].get<std::string>();
    if (j.contains("metrics")) {
      const auto& m = j["metrics"];
      if (m.contains("fvd")) c.metrics.fvd = m["fvd"].get<bool>();
      if (m.contains("ssim")) c.metrics.ssim = m["ssim"].get<bool>();
      if (m.contains("mse")) c.metrics.mse = m["mse"].get<bool>();
      if (m.contains("success")) c.metrics.success = m["success"].get<bool>();
    }
    if (j.contains("seed")) c.seed = j["seed"].get<std::uint64_t>();
  } catch (const json::exception& e) {
    throw InvalidInput(std::string("malformed config: ") + e.what());
  }
  return c;
}

inline RunConfig read_config(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read config '" + path.string() + "'");
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw IoError("cannot parse config '" + path.string() + "': " + e.what());
  }
  return config_from_json(j);
}

inline void check_run_config(const RunConfig& c) {
  if (c.sampling.target_count != kGridFrames) {
    throw InvalidInput("grid supervision needs sampling.target_count = 9, got " +
                       std::to_string(c.sampling.target_count));
  }
  if (c.sampling.resize_to && (c.sampling.resize_to->height < 1 || c.sampling.resize_to->width < 1)) {
    throw InvalidInput("sampling.resize_to must be positive");
  }
  c.ramp.validate();
  build_prompt("x", c.prompt_template);
}

// Runs task(i) for i in [0, count) on up to `jobs` threads.
inline void parallel_for(std::size_t count, int jobs, const std::function<void(std::size_t)>& task) {
  const std::size_t workers = std::min<std::size_t>(count, static_cast<std::size_t>(std::max(1, jobs)));
  if (workers <= 1) {
    for (std::size_t i = 0; i < count; ++i) task(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < count; i = next++) task(i);
    });
  }
  for (auto& t : pool) t.join();
}

inline std::string sanitize_name(std::string_view id) {
  std::string out;
  for (char c : id) {
    const bool ok = (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') || c == '-' ||
                    c == '_' || c == '.';
    out += ok ? c : '_';
  }
  if (out.empty() || out == "." || out == "..") out = "_" + out;
  return out;
}

// ---------------------------------------------------------------------------
// synthesize

struct SynthesizeResult {
  int pairs_written = 0;
  int episodes_skipped = 0;
  int exit_code = kExitOk;
};

namespace detail {

struct EpisodeJob {
  fs::path manifest_path;
  std::optional<EpisodeManifest> manifest;
  std::string load_error;
  std::string duplicate_of;
};

struct EpisodeOutput {
  std::vector<json> events;
  std::vector<json> index;
};

inline json violations_json(const std::vector<Violation>& vs) {
  json arr = json::array();
  for (const auto& v : vs) arr.push_back({{"kind", to_string(v.kind)}, {"message", v.message}});
  return arr;
}

inline EpisodeOutput synthesize_episode(const EpisodeJob& job, const RunConfig& cfg) {
  EpisodeOutput out;
  const std::string manifest_name = job.manifest_path.filename().string();
  auto skip = [&](json reason) {
    json e{{"event", "episode_skipped"}, {"manifest", manifest_name}};
    if (job.manifest) e["episode_id"] = job.manifest->episode_id;
    e.update(reason);
    out.events.push_back(std::move(e));
  };
  if (!job.manifest) {
    skip({{"reason", job.load_error}});
    return out;
  }
  if (!job.duplicate_of.empty()) {
    skip({{"reason", "episode_id already used by " + job.duplicate_of}});
    return out;
  }
  const EpisodeManifest& m = *job.manifest;
  try {
    std::optional<Size> first_size;
    if (!m.frame_paths.empty()) first_size = read_png(cfg.dataset_root / m.frame_paths.front()).size();
    const auto violations = validate_manifest(m, first_size);
    if (!violations.empty()) {
      skip({{"reason", "invalid manifest"}, {"violations", violations_json(violations)}});
      return out;
    }
    const bool want_text = cfg.branch != Branch::Trajectory;
    const bool want_traj = cfg.branch != Branch::Text;
    const bool has_text = m.instruction && !m.instruction->empty();
    const bool has_traj = m.trajectory.has_value();
    if ((!want_text || !has_text) && (!want_traj || !has_traj)) {
      skip({{"reason", std::string("missing condition for branch ") + to_string(cfg.branch)}});
      return out;
    }

    const LoadedEpisode ep = load_episode(m, cfg.dataset_root, cfg.sampling);
    std::vector<std::pair<std::string, SupervisionPair>> pairs;
    if (want_text && has_text) {
      pairs.emplace_back("text", build_text_pair(ep.frames, m.instruction, m.episode_id, cfg.prompt_template));
    }
    if (want_traj && has_traj) {
      const Trajectory traj =
          scale_trajectory(Trajectory(*m.trajectory), ep.source_size, ep.frames.front().size());
      pairs.emplace_back("trajectory", build_trajectory_pair(ep.frames, traj, cfg.ramp, m.episode_id));
    }
    for (const auto& [branch, pair] : pairs) {
      const std::string rel = "pairs/" + sanitize_name(m.episode_id) + "__" + branch;
      write_pair(pair, cfg.output_root / rel);
      out.index.push_back(
          {{"pair_dir", rel}, {"episode_id", m.episode_id}, {"source_dataset", m.source_dataset}, {"branch", branch}});
      out.events.push_back({{"event", "pair_written"},
                            {"manifest", manifest_name},
                            {"episode_id", m.episode_id},
                            {"branch", branch},
                            {"pair_dir", rel}});
    }
    if (cfg.branch == Branch::Both && (!has_text || !has_traj)) {
      out.events.push_back({{"event", "branch_skipped"},
                            {"manifest", manifest_name},
                            {"episode_id", m.episode_id},
                            {"branch", has_text ? "trajectory" : "text"},
                            {"reason", "missing condition"}});
    }
  } catch (const Error& e) {
    out.index.clear();
    out.events.clear();
    skip({{"reason", e.what()}});
  } catch (const fs::filesystem_error& e) {
    out.index.clear();
    out.events.clear();
    skip({{"reason", e.what()}});
  }
  return out;
}

inline void write_lines(const fs::path& path, const std::vector<json>& lines) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write '" + path.string() + "'");
  for (const auto& l : lines) out << l.dump() << "\n";
}

}  // namespace detail

// Builds supervision pairs for every episode under cfg.dataset_root.
// Output tree:
//   <output_root>/config.json    effective configuration
//   <output_root>/pairs/<id>__<branch>/{input.png,target.png,condition.json}
//   <output_root>/pairs.jsonl    one line per pair
//   <output_root>/events.jsonl   one line per per-episode outcome
// Results are ordered by manifest file name regardless of `jobs`.
inline SynthesizeResult cmd_synthesize(const RunConfig& cfg, int jobs, std::ostream& log) {
  SynthesizeResult result;
  std::vector<fs::path> manifests;
  try {
    check_run_config(cfg);
    manifests = list_manifests(cfg.dataset_root);
    fs::create_directories(cfg.output_root);
    fs::remove_all(cfg.output_root / "pairs");
    fs::create_directories(cfg.output_root / "pairs");
    std::ofstream(cfg.output_root / "config.json", std::ios::binary | std::ios::trunc)
        << config_to_json(cfg).dump(2) << "\n";
  } catch (const std::exception& e) {
    log << "fatal: " << e.what() << "\n";
    result.exit_code = kExitFatal;
    return result;
  }

  std::vector<detail::EpisodeJob> jobs_list(manifests.size());
  std::map<std::string, std::string> owner;  // sanitized id -> manifest
  for (std::size_t i = 0; i < manifests.size(); ++i) {
    auto& job = jobs_list[i];
    job.manifest_path = manifests[i];
    try {
      job.manifest = read_manifest(manifests[i]);
      const auto [it, fresh] = owner.emplace(sanitize_name(job.manifest->episode_id), manifests[i].filename().string());
      if (!fresh) job.duplicate_of = it->second;
    } catch (const Error& e) {
      job.load_error = e.what();
    }
  }

  std::vector<detail::EpisodeOutput> outputs(jobs_list.size());
  parallel_for(jobs_list.size(), jobs,
               [&](std::size_t i) { outputs[i] = detail::synthesize_episode(jobs_list[i], cfg); });

  std::vector<json> index, events;
  for (auto& o : outputs) {
    if (o.index.empty()) ++result.episodes_skipped;
    result.pairs_written += static_cast<int>(o.index.size());
    for (auto& l : o.index) index.push_back(std::move(l));
    for (auto& e : o.events) {
      if (e["event"] != "pair_written") log << "skip: " << e.dump() << "\n";
      events.push_back(std::move(e));
    }
  }
  try {
    detail::write_lines(cfg.output_root / "pairs.jsonl", index);
    detail::write_lines(cfg.output_root / "events.jsonl", events);
  } catch (const std::exception& e) {
    log << "fatal: " << e.what() << "\n";
    result.exit_code = kExitFatal;
    return result;
  }
  log << "wrote " << result.pairs_written << " pair(s), skipped " << result.episodes_skipped << " episode(s)\n";
  result.exit_code = result.pairs_written > 0 ? kExitOk : kExitFatal;
  return result;
}

// ---------------------------------------------------------------------------
// split

inline std::string frame_file_name(int t) { return "frame_" + std::to_string(t) + ".png"; }

inline int cmd_split(const fs::path& grid_path, const fs::path& output_dir, std::ostream& log) {
  try {
    const Frame image = read_png(grid_path);
    if (image.height() % kGridSide != 0 || image.width() % kGridSide != 0) {
      log << "fatal: grid '" << grid_path.string() << "' is " << to_string(image.size())
          << " (width x height), which is not divisible by 3 in both axes\n";
      return kExitFatal;
    }
    const auto frames = disassemble_grid(GridImage(image));
    fs::create_directories(output_dir);
    for (int t = 1; t <= kGridFrames; ++t) write_png(output_dir / frame_file_name(t), frames[t - 1]);
  } catch (const std::exception& e) {
    log << "fatal: " << e.what() << "\n";
    return kExitFatal;
  }
  return kExitOk;
}

// ---------------------------------------------------------------------------
// overlay

// Accepts a bare [[x, y], ...] array or an object with a "trajectory" array.
inline std::vector<Point> read_trajectory_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read trajectory '" + path.string() + "'");
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw IoError("cannot parse trajectory '" + path.string() + "': " + e.what());
  }
  if (j.is_object() && j.contains("trajectory")) j = j["trajectory"];
  if (!j.is_array()) throw InvalidInput("trajectory must be an array of [x, y] pairs");
  std::vector<Point> pts;
  for (const auto& p : j) {
    if (!p.is_array() || p.size() != 2 || !p[0].is_number_integer() || !p[1].is_number_integer()) {
      throw InvalidInput("trajectory entries must be [x, y] integer pairs");
    }
    pts.push_back({p[0].get<int>(), p[1].get<int>()});
  }
  if (pts.empty()) throw InvalidInput("trajectory is empty");
  return pts;
}

inline int cmd_overlay(const fs::path& frame_path, const fs::path& trajectory_path, const fs::path& out_path,
                       const ColorRamp& ramp, std::ostream& log) {
  try {
    const Frame frame = read_png(frame_path);
    const Trajectory traj(read_trajectory_json(trajectory_path));
    write_png(out_path, render_overlay(frame, traj, ramp));
  } catch (const std::exception& e) {
    log << "fatal: " << e.what() << "\n";
    return kExitFatal;
  }
  return kExitOk;
}

// ---------------------------------------------------------------------------
// evaluate

struct EvaluateOptions {
  fs::path pred_dir;
  fs::path gt_dir;
  std::optional<fs::path> real_features;
  std::optional<fs::path> gen_features;
  std::optional<fs::path> labels;
  fs::path report_path;
  std::optional<fs::path> table_path;
  bool ablation_table = false;
  std::string dataset = "unknown";
  std::string method = "unknown";
  MetricToggles metrics;
  metrics::SsimOptions ssim;
};

// Episodes in an evaluation directory: either <id>/frame_1.png..frame_9.png
// (as written by split) or a grid image <id>.png.
inline std::map<std::string, fs::path> discover_episodes(const fs::path& dir) {
  std::error_code ec;
  if (!fs::is_directory(dir, ec)) throw IoError("'" + dir.string() + "' is not a directory");
  std::map<std::string, fs::path> out;
  for (const auto& entry : fs::directory_iterator(dir)) {
    const auto& p = entry.path();
    if (entry.is_directory() && fs::exists(p / frame_file_name(1))) {
      out[p.filename().string()] = p;
    } else if (entry.is_regular_file() && ::robogrid::detail::lower_extension(p) == ".png") {
      out[p.stem().string()] = p;
    }
  }
  return out;
}

inline std::vector<Frame> load_episode_frames(const fs::path& p) {
  if (fs::is_directory(p)) {
    std::vector<Frame> frames;
    for (int t = 1; t <= kGridFrames; ++t) frames.push_back(read_png(p / frame_file_name(t)));
    return frames;
  }
  return disassemble_grid(GridImage(read_png(p)));
}

inline int cmd_evaluate(const EvaluateOptions& opt, int jobs, std::ostream& log) {
  std::vector<std::string> warnings;
  json report;
  try {
    const auto pred = discover_episodes(opt.pred_dir);
    const auto gt = discover_episodes(opt.gt_dir);
    std::vector<std::string> matched;
    json unmatched = json::array();
    for (const auto& [id, path] : pred) {
      if (gt.count(id)) {
        matched.push_back(id);
      } else {
        unmatched.push_back({{"episode_id", id}, {"missing_from", "gt"}});
      }
    }
    for (const auto& [id, path] : gt) {
      if (!pred.count(id)) unmatched.push_back({{"episode_id", id}, {"missing_from", "pred"}});
    }
    for (const auto& u : unmatched) {
      warnings.push_back("unmatched episode '" + u["episode_id"].get<std::string>() + "' (missing from " +
                         u["missing_from"].get<std::string>() + ")");
    }
    if (matched.empty()) throw InvalidInput("no episodes present in both prediction and ground-truth sets");

    std::vector<metrics::EpisodeScore> scores(matched.size());
    std::vector<std::string> errors(matched.size());
    parallel_for(matched.size(), jobs, [&](std::size_t i) {
      try {
        scores[i] = metrics::evaluate_generation(load_episode_frames(pred.at(matched[i])),
                                                 load_episode_frames(gt.at(matched[i])), opt.ssim);
      } catch (const std::exception& e) {
        errors[i] = e.what();
      }
    });
    for (std::size_t i = 0; i < matched.size(); ++i) {
      if (!errors[i].empty()) throw InvalidInput("episode '" + matched[i] + "': " + errors[i]);
    }

    metrics::MetricReport agg;
    agg.dataset = opt.dataset;
    agg.method = opt.method;
    agg.n_episodes = static_cast<int>(matched.size());
    double ssim_sum = 0.0, mse_sum = 0.0;
    for (const auto& s : scores) {
      ssim_sum += s.ssim;
      mse_sum += s.mse;
    }
    agg.ssim = ssim_sum / static_cast<double>(scores.size());
    agg.mse = mse_sum / static_cast<double>(scores.size());

    if (opt.metrics.fvd && opt.real_features && opt.gen_features) {
      const auto real = metrics::fit_gaussian(metrics::to_feature_set(read_features(*opt.real_features), "real"));
      const auto gen = metrics::fit_gaussian(metrics::to_feature_set(read_features(*opt.gen_features), "generated"));
      agg.fvd = metrics::frechet_distance(real, gen);
    } else if (opt.metrics.fvd && (opt.real_features.has_value() != opt.gen_features.has_value())) {
      warnings.push_back("FVD needs both --real-features and --gen-features; skipped");
    }

    std::map<std::string, bool> label_of;
    if (opt.metrics.success && opt.labels) {
      for (const auto& l : metrics::read_labels(*opt.labels)) label_of[l.episode_id] = l.success;
      std::vector<bool> outcomes;
      for (const auto& id : matched) {
        auto it = label_of.find(id);
        if (it == label_of.end()) {
          warnings.push_back("no success label for episode '" + id + "'");
        } else {
          outcomes.push_back(it->second);
        }
      }
      const std::set<std::string> evaluated(matched.begin(), matched.end());
      for (const auto& [id, ok] : label_of) {
        if (!evaluated.count(id)) warnings.push_back("label for unevaluated episode '" + id + "' ignored");
      }
      if (!outcomes.empty()) agg.success_rate = metrics::success_rate(outcomes);
    }

    report = metrics::to_json(agg);
    if (!opt.metrics.ssim) report["ssim"] = nullptr;
    if (!opt.metrics.mse) report["mse"] = nullptr;
    json episodes = json::array();
    for (std::size_t i = 0; i < matched.size(); ++i) {
      json e{{"episode_id", matched[i]}};
      e["ssim"] = opt.metrics.ssim ? json(scores[i].ssim) : json(nullptr);
      e["mse"] = opt.metrics.mse ? json(scores[i].mse) : json(nullptr);
      auto it = label_of.find(matched[i]);
      e["success"] = it == label_of.end() ? json(nullptr) : json(it->second);
      episodes.push_back(std::move(e));
    }
    report["episodes"] = std::move(episodes);
    report["unmatched"] = std::move(unmatched);
    report["warnings"] = warnings;

    if (!opt.report_path.parent_path().empty()) fs::create_directories(opt.report_path.parent_path());
    std::ofstream out(opt.report_path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write report '" + opt.report_path.string() + "'");
    out << report.dump(2) << "\n";
    if (opt.table_path) {
      std::ofstream table(*opt.table_path, std::ios::binary | std::ios::trunc);
      if (!table) throw IoError("cannot write table '" + opt.table_path->string() + "'");
      table << (opt.ablation_table ? metrics::format_ablation_table({agg}) : metrics::format_results_table({agg}));
    }
  } catch (const std::exception& e) {
    log << "fatal: " << e.what() << "\n";
    return kExitFatal;
  }
  for (const auto& w : warnings) log << "warning: " << w << "\n";
  return warnings.empty() ? kExitOk : kExitWarnings;
}

// ---------------------------------------------------------------------------
// validate

inline int cmd_validate(const fs::path& dataset_root, std::ostream& out, std::ostream& log) {
  std::vector<fs::path> manifests;
  try {
    manifests = list_manifests(dataset_root);
  } catch (const std::exception& e) {
    log << "fatal: " << e.what() << "\n";
    return kExitFatal;
  }
  bool any_invalid = false;
  for (const auto& path : manifests) {
    json line{{"manifest", path.filename().string()}};
    std::vector<Violation> violations;
    try {
      const EpisodeManifest m = read_manifest(path);
      line["episode_id"] = m.episode_id;
      std::optional<Size> first_size;
      if (!m.frame_paths.empty()) {
        try {
          first_size = read_png(dataset_root / m.frame_paths.front()).size();
        } catch (const IoError& e) {
          line["errors"].push_back(e.what());
        }
      }
      violations = validate_manifest(m, first_size);
    } catch (const Error& e) {
      line["errors"].push_back(e.what());
    }
    line["violations"] = detail::violations_json(violations);
    const bool valid = violations.empty() && !line.contains("errors");
    line["valid"] = valid;
    any_invalid = any_invalid || !valid;
    out << line.dump() << "\n";
  }
  return any_invalid ? kExitWarnings : kExitOk;
}

// ---------------------------------------------------------------------------
// lora-demo

struct LoraDemoOptions {
  int d_model = 64;
  int d_ff = 128;
  int rank = 4;
  double alpha = 1.0;
  int trials = 20;
  int grad_dim = 16;
  int grad_rank = 2;
  std::uint64_t seed = 0;
};

inline lora::MatrixXd random_matrix(Eigen::Index rows, Eigen::Index cols, std::mt19937_64& rng, double stddev = 1.0) {
  std::normal_distribution<double> normal(0.0, stddev);
  lora::MatrixXd m(rows, cols);
  for (Eigen::Index j = 0; j < cols; ++j) {
    for (Eigen::Index i = 0; i < rows; ++i) m(i, j) = normal(rng);
  }
  return m;
}

// Parameter budget of the toy block's adapters, merged-vs-unmerged deviation,
// and analytic-vs-finite-difference gradient agreement.
inline json lora_demo(const LoraDemoOptions& opt) {
  if (opt.trials < 1) throw InvalidInput("trials must be >= 1");
  std::mt19937_64 rng(opt.seed);
  json report;
  report["config"] = {{"d_model", opt.d_model}, {"d_ff", opt.d_ff},       {"rank", opt.rank},
                      {"alpha", opt.alpha},     {"trials", opt.trials},   {"grad_dim", opt.grad_dim},
                      {"grad_rank", opt.grad_rank}, {"seed", opt.seed}};

  auto block = lora::ToyAttentionBlock::random(opt.d_model, opt.d_ff, opt.seed);
  json counts = json::object();
  for (std::string_view name : lora::ToyAttentionBlock::kAdaptable) {
    const auto& layer = block.layer(name);
    const auto trainable = lora::param_count(layer.d_out(), layer.d_in(), opt.rank);
    const auto frozen = static_cast<std::int64_t>(layer.weight.size());
    counts[std::string(name)] = {{"d_out", layer.d_out()},
                                 {"d_in", layer.d_in()},
                                 {"trainable", trainable},
                                 {"frozen", frozen},
                                 {"ratio", static_cast<double>(trainable) / static_cast<double>(frozen)}};
    lora::LoraAdapter a = lora::init_adapter(layer.d_out(), layer.d_in(), opt.rank, rng());
    a.b = random_matrix(layer.d_in(), opt.rank, rng, 0.02);
    a.alpha = opt.alpha;
    block.attach_adapter(name, std::move(a));
  }
  report["param_counts"] = counts;
  report["trainable_parameters"] = block.trainable_parameters();
  report["frozen_parameters"] = block.frozen_parameters();

  double layer_dev = 0.0;
  for (int t = 0; t < opt.trials; ++t) {
    lora::DenseLayer layer{random_matrix(opt.d_model, opt.d_model, rng), random_matrix(opt.d_model, 1, rng).col(0)};
    lora::LoraAdapter a{random_matrix(opt.d_model, opt.rank, rng), random_matrix(opt.d_model, opt.rank, rng),
                        opt.alpha};
    const lora::VectorXd x = random_matrix(opt.d_model, 1, rng).col(0);
    const lora::VectorXd y0 = lora::lora_forward(layer, a, x);
    const lora::VectorXd y1 = lora::merge_adapter(layer, a).forward(x);
    layer_dev = std::max(layer_dev, (y0 - y1).cwiseAbs().maxCoeff());
  }
  const lora::MatrixXd tokens = random_matrix(8, opt.d_model, rng);
  const double block_dev = (block.forward(tokens) - block.merged().forward(tokens)).cwiseAbs().maxCoeff();
  report["merge_max_abs_deviation"] = {{"layer", layer_dev}, {"block", block_dev}};

  double err_a = 0.0, err_b = 0.0;
  for (int t = 0; t < opt.trials; ++t) {
    lora::DenseLayer layer{random_matrix(opt.grad_dim, opt.grad_dim, rng), std::nullopt};
    lora::LoraAdapter a{random_matrix(opt.grad_dim, opt.grad_rank, rng),
                        random_matrix(opt.grad_dim, opt.grad_rank, rng), opt.alpha};
    const lora::VectorXd x = random_matrix(opt.grad_dim, 1, rng).col(0);
    const lora::VectorXd y = random_matrix(opt.grad_dim, 1, rng).col(0);
    const auto analytic = lora::squared_error_gradients(layer, a, x, y);
    const auto numeric = lora::central_difference_gradients(layer, a, x, y);
    err_a = std::max(err_a, lora::relative_error(analytic.grad_a, numeric.grad_a));
    err_b = std::max(err_b, lora::relative_error(analytic.grad_b, numeric.grad_b));
  }
  report["gradient_check"] = {{"max_rel_error_a", err_a}, {"max_rel_error_b", err_b}};
  return report;
}

}  // namespace robogrid::pipeline

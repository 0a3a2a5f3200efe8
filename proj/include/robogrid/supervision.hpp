#pragma once

// Training records for the two conditioning branches, the text prompt, and
// the reconstruction loss.
//
// On disk a pair is a directory holding input.png, target.png and
// condition.json ({"kind": "text"|"trajectory"|"null", "prompt": string|null}).

#include <atomic>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <unistd.h>

#include <nlohmann/json.hpp>

#include "robogrid/error.hpp"
#include "robogrid/feature_file.hpp"
#include "robogrid/grid_codec.hpp"
#include "robogrid/png_io.hpp"
#include "robogrid/trajectory_overlay.hpp"

namespace robogrid {

inline constexpr std::string_view kDefaultPromptTemplate =
    "A 3x3 grid of 9 sequential frames of a robot manipulation task, top-left first, serpentine order: "
    "{instruction}";

enum class ConditionKind { Text, Trajectory, Null };

inline const char* to_string(ConditionKind k) {
  switch (k) {
    case ConditionKind::Text: return "text";
    case ConditionKind::Trajectory: return "trajectory";
    case ConditionKind::Null: return "null";
  }
  return "null";
}

inline ConditionKind condition_kind_from_string(std::string_view s) {
  if (s == "text") return ConditionKind::Text;
  if (s == "trajectory") return ConditionKind::Trajectory;
  if (s == "null") return ConditionKind::Null;
  throw InvalidInput("unknown condition kind '" + std::string(s) + "'");
}

struct Condition {
  ConditionKind kind = ConditionKind::Null;
  std::string prompt;            // Text only
  bool overlay_applied = false;  // set when the input's first tile carries a path overlay

  static Condition text(std::string prompt) {
    if (prompt.empty()) throw InvalidInput("text condition needs a non-empty prompt");
    return {ConditionKind::Text, std::move(prompt), false};
  }
  static Condition null(bool overlay_applied = false) { return {ConditionKind::Null, {}, overlay_applied}; }

  friend bool operator==(const Condition&, const Condition&) = default;
};

struct SupervisionPair {
  GridImage input_grid;
  GridImage target_grid;
  Condition condition;
  std::string episode_id;
};

// Substitutes the instruction for the template's single placeholder, which
// may be written either "{}" or "{instruction}".
inline std::string build_prompt(std::string_view instruction, std::string_view tmpl) {
  static constexpr std::string_view kTokens[] = {"{instruction}", "{}"};
  std::size_t hits = 0;
  std::size_t where = std::string_view::npos;
  std::size_t token_len = 0;
  for (std::string_view token : kTokens) {
    for (std::size_t pos = tmpl.find(token); pos != std::string_view::npos; pos = tmpl.find(token, pos + 1)) {
      ++hits;
      where = pos;
      token_len = token.size();
    }
  }
  if (hits != 1) {
    throw InvalidInput("prompt template must contain exactly one placeholder ({} or {instruction}), found " +
                       std::to_string(hits));
  }
  std::string out;
  out.reserve(tmpl.size() + instruction.size());
  out.append(tmpl.substr(0, where));
  out.append(instruction);
  out.append(tmpl.substr(where + token_len));
  if (out.empty()) throw InvalidInput("prompt is empty after substitution");
  return out;
}

inline SupervisionPair build_text_pair(std::span<const Frame> frames, const std::optional<std::string>& instruction,
                                       std::string episode_id,
                                       std::string_view prompt_template = kDefaultPromptTemplate) {
  if (!instruction || instruction->empty()) {
    throw MissingCondition("episode '" + episode_id + "' has no instruction for the text branch");
  }
  GridImage target = assemble_grid(frames);
  GridImage input = apply_mask(target, GridMask::first_frame());
  return {std::move(input), std::move(target), Condition::text(build_prompt(*instruction, prompt_template)),
          std::move(episode_id)};
}

// The overlay goes on the input only; the target stays the clean ground truth.
inline SupervisionPair build_trajectory_pair(std::span<const Frame> frames, const std::optional<Trajectory>& traj,
                                             const ColorRamp& ramp, std::string episode_id) {
  if (!traj) throw MissingCondition("episode '" + episode_id + "' has no trajectory for the trajectory branch");
  GridImage input = build_trajectory_grid_input(frames, traj, ramp);
  GridImage target = assemble_grid(frames);
  return {std::move(input), std::move(target), Condition::null(true), std::move(episode_id)};
}

// Maps a grid to the vector space the reconstruction loss is measured in.
class LatentEncoder {
 public:
  virtual ~LatentEncoder() = default;
  virtual std::vector<double> encode(const GridImage& grid) const = 0;
  virtual std::string name() const = 0;
  // Whether encode() may be called concurrently from several threads.
  virtual bool reentrant() const = 0;
};

// Pixel channels scaled to [0, 1], in row-major interleaved order.
class IdentityEncoder final : public LatentEncoder {
 public:
  std::vector<double> encode(const GridImage& grid) const override {
    const auto px = grid.image().pixels();
    std::vector<double> out(px.size());
    for (std::size_t i = 0; i < px.size(); ++i) out[i] = px[i] / 255.0;
    return out;
  }
  std::string name() const override { return "identity"; }
  bool reentrant() const override { return true; }
};

// Runs an external command per grid. The command template's {input} is
// replaced by a PNG path and {output} by the path where the command must write
// an FVDF feature file; all rows of that file are concatenated.
class ExternalProcessEncoder final : public LatentEncoder {
 public:
  explicit ExternalProcessEncoder(std::string command_template, std::string name = "external")
      : command_(std::move(command_template)), name_(std::move(name)) {
    if (command_.find("{input}") == std::string::npos || command_.find("{output}") == std::string::npos) {
      throw InvalidInput("encoder command must contain {input} and {output} placeholders");
    }
  }

  std::vector<double> encode(const GridImage& grid) const override {
    static std::atomic<unsigned long> counter{0};
    const auto dir = std::filesystem::temp_directory_path() /
                     ("robogrid-enc-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
    std::filesystem::create_directories(dir);
    const auto in_path = dir / "grid.png";
    const auto out_path = dir / "features.fvdf";
    std::vector<double> result;
    try {
      write_png(in_path, grid.image());
      std::string cmd = command_;
      replace_all(cmd, "{input}", quote(in_path.string()));
      replace_all(cmd, "{output}", quote(out_path.string()));
      if (std::system(cmd.c_str()) != 0) throw IoError("encoder command failed: " + cmd);
      const FeatureMatrix m = read_features(out_path);
      result.assign(m.values.begin(), m.values.end());
    } catch (...) {
      std::filesystem::remove_all(dir);
      throw;
    }
    std::filesystem::remove_all(dir);
    return result;
  }

  std::string name() const override { return name_; }
  bool reentrant() const override { return true; }

 private:
  static void replace_all(std::string& s, std::string_view from, const std::string& to) {
    for (std::size_t pos = s.find(from); pos != std::string::npos; pos = s.find(from, pos + to.size())) {
      s.replace(pos, from.size(), to);
    }
  }
  static std::string quote(const std::string& s) {
    std::string out = "'";
    for (char c : s) out += c == '\'' ? std::string("'\\''") : std::string(1, c);
    return out + "'";
  }

  std::string command_;
  std::string name_;
};

// Squared L2 distance between the encodings of target and prediction.
inline double latent_loss(const GridImage& pred, const GridImage& target, const LatentEncoder& encoder) {
  if (pred.image().size() != target.image().size()) {
    throw InvalidInput("loss needs equal grid sizes, got " + to_string(pred.image().size()) + " and " +
                       to_string(target.image().size()));
  }
  const auto a = encoder.encode(target);
  const auto b = encoder.encode(pred);
  if (a.size() != b.size()) throw InvalidInput("encoder '" + encoder.name() + "' returned vectors of unequal length");
  double sum = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    sum += d * d;
  }
  return sum;
}

inline nlohmann::json condition_to_json(const Condition& c) {
  nlohmann::json j;
  j["kind"] = to_string(c.kind);
  j["prompt"] = c.kind == ConditionKind::Text ? nlohmann::json(c.prompt) : nlohmann::json(nullptr);
  return j;
}

inline Condition condition_from_json(const nlohmann::json& j) {
  if (!j.is_object() || !j.contains("kind") || !j["kind"].is_string()) {
    throw InvalidInput("condition.json needs a string 'kind'");
  }
  Condition c;
  c.kind = condition_kind_from_string(j["kind"].get<std::string>());
  if (c.kind == ConditionKind::Text) {
    if (!j.contains("prompt") || !j["prompt"].is_string()) throw InvalidInput("text condition needs a string prompt");
    c = Condition::text(j["prompt"].get<std::string>());
  }
  return c;
}

// Writes the pair into `dir`. Files go to a sibling temp directory first,
// which is renamed into place once complete, so `dir` never holds a partial
// pair.
inline void write_pair(const SupervisionPair& pair, const std::filesystem::path& dir) {
  namespace fs = std::filesystem;
  const fs::path tmp = dir.parent_path() / (dir.filename().string() + ".tmp");
  fs::remove_all(tmp);
  fs::create_directories(tmp);
  write_png(tmp / "input.png", pair.input_grid.image());
  write_png(tmp / "target.png", pair.target_grid.image());
  {
    std::ofstream out(tmp / "condition.json", std::ios::binary);
    if (!out) throw IoError("cannot write '" + (tmp / "condition.json").string() + "'");
    out << condition_to_json(pair.condition).dump() << "\n";
  }
  fs::remove_all(dir);
  fs::rename(tmp, dir);
}

inline SupervisionPair read_pair(const std::filesystem::path& dir, std::string episode_id = {}) {
  std::ifstream in(dir / "condition.json");
  if (!in) throw IoError("cannot read '" + (dir / "condition.json").string() + "'");
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw IoError("cannot parse '" + (dir / "condition.json").string() + "': " + e.what());
  }
  GridImage input(read_png(dir / "input.png"));
  GridImage target(read_png(dir / "target.png"));
  if (input.image().size() != target.image().size()) {
    throw InvalidInput("pair '" + dir.string() + "' has input and target of different sizes");
  }
  return {std::move(input), std::move(target), condition_from_json(j), std::move(episode_id)};
}

}  // namespace robogrid

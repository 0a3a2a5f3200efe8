#pragma once

// Episode manifests and frame sampling.
//
// A dataset root looks like
//
//   <root>/episodes/<name>.json     one manifest per episode
//   <root>/<any relative path>.png  frames referenced by the manifests
//
// Manifest fields: episode_id, frames, instruction, trajectory, source_dataset.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "robogrid/error.hpp"
#include "robogrid/image.hpp"
#include "robogrid/png_io.hpp"

namespace robogrid {

struct EpisodeManifest {
  std::string episode_id;
  std::vector<std::string> frame_paths;
  std::optional<std::string> instruction;
  std::optional<std::vector<Point>> trajectory;
  std::string source_dataset;
};

struct SamplingSpec {
  int target_count = 9;
  std::optional<Size> resize_to;
};

inline EpisodeManifest manifest_from_json(const nlohmann::json& j) {
  auto fail = [](const std::string& what) { throw InvalidInput("malformed manifest: " + what); };
  if (!j.is_object()) fail("document is not an object");
  for (const char* key : {"episode_id", "frames", "instruction", "trajectory", "source_dataset"}) {
    if (!j.contains(key)) fail(std::string("missing field '") + key + "'");
  }
  EpisodeManifest m;
  if (!j["episode_id"].is_string()) fail("'episode_id' must be a string");
  m.episode_id = j["episode_id"].get<std::string>();
  if (!j["frames"].is_array()) fail("'frames' must be an array");
  for (const auto& f : j["frames"]) {
    if (!f.is_string()) fail("'frames' entries must be strings");
    m.frame_paths.push_back(f.get<std::string>());
  }
  if (j["instruction"].is_string()) {
    m.instruction = j["instruction"].get<std::string>();
  } else if (!j["instruction"].is_null()) {
    fail("'instruction' must be a string or null");
  }
  if (j["trajectory"].is_array()) {
    std::vector<Point> pts;
    for (const auto& p : j["trajectory"]) {
      if (!p.is_array() || p.size() != 2 || !p[0].is_number_integer() || !p[1].is_number_integer()) {
        fail("'trajectory' entries must be [x, y] integer pairs");
      }
      pts.push_back({p[0].get<int>(), p[1].get<int>()});
    }
    m.trajectory = std::move(pts);
  } else if (!j["trajectory"].is_null()) {
    fail("'trajectory' must be an array or null");
  }
  if (!j["source_dataset"].is_string()) fail("'source_dataset' must be a string");
  m.source_dataset = j["source_dataset"].get<std::string>();
  return m;
}

inline nlohmann::json manifest_to_json(const EpisodeManifest& m) {
  nlohmann::json j;
  j["episode_id"] = m.episode_id;
  j["frames"] = m.frame_paths;
  j["instruction"] = m.instruction ? nlohmann::json(*m.instruction) : nlohmann::json(nullptr);
  if (m.trajectory) {
    nlohmann::json pts = nlohmann::json::array();
    for (const Point& p : *m.trajectory) pts.push_back({p.x, p.y});
    j["trajectory"] = std::move(pts);
  } else {
    j["trajectory"] = nullptr;
  }
  j["source_dataset"] = m.source_dataset;
  return j;
}

inline EpisodeManifest read_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read manifest '" + path.string() + "'");
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw IoError("cannot parse manifest '" + path.string() + "': " + e.what());
  }
  try {
    return manifest_from_json(j);
  } catch (const InvalidInput& e) {
    throw InvalidInput(path.string() + ": " + e.what());
  }
}

inline void write_manifest(const std::filesystem::path& path, const EpisodeManifest& m) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write manifest '" + path.string() + "'");
  out << manifest_to_json(m).dump(2) << "\n";
}

// Manifest files under <root>/episodes, sorted by file name.
inline std::vector<std::filesystem::path> list_manifests(const std::filesystem::path& dataset_root) {
  const auto dir = dataset_root / "episodes";
  std::error_code ec;
  if (!std::filesystem::is_directory(dir, ec)) {
    throw IoError("dataset root '" + dataset_root.string() + "' has no episodes/ directory");
  }
  std::vector<std::filesystem::path> out;
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    if (entry.is_regular_file() && entry.path().extension() == ".json") out.push_back(entry.path());
  }
  std::sort(out.begin(), out.end());
  return out;
}

// Endpoint-inclusive uniform sampling: index_i = round(i * (T-1) / (K-1)),
// ties rounded up. Evaluated in integer arithmetic so it is exact for any T.
inline std::vector<std::int64_t> sample_uniform(std::int64_t episode_length, int target_count) {
  if (episode_length <= 0) {
    throw InvalidInput("episode length must be positive, got " + std::to_string(episode_length));
  }
  if (target_count <= 0) {
    throw InvalidInput("target count must be positive, got " + std::to_string(target_count));
  }
  std::vector<std::int64_t> indices(static_cast<std::size_t>(target_count), 0);
  if (target_count == 1) return indices;
  const std::int64_t span = episode_length - 1;
  const std::int64_t steps = target_count - 1;
  for (std::int64_t i = 0; i < target_count; ++i) {
    // floor(i*span/steps + 1/2) == floor((2*i*span + steps) / (2*steps))
    indices[static_cast<std::size_t>(i)] = (2 * i * span + steps) / (2 * steps);
  }
  return indices;
}

// Bilinear resampling with pixel centres at +0.5 and edge clamping; results
// rounded half-up to 8 bits.
inline Frame resize_bilinear(const Frame& src, Size target) {
  if (target.height < 1 || target.width < 1) {
    throw InvalidInput("resize target must be positive, got " + to_string(target));
  }
  if (src.size() == target) return src;
  Frame out(target.height, target.width);
  const double sy = static_cast<double>(src.height()) / target.height;
  const double sx = static_cast<double>(src.width()) / target.width;
  auto clamp_coord = [](double v, int limit) { return std::clamp(v, 0.0, static_cast<double>(limit - 1)); };
  const auto in = src.pixels();
  auto px = out.pixels();
  for (int r = 0; r < target.height; ++r) {
    const double fy = clamp_coord((r + 0.5) * sy - 0.5, src.height());
    const int y0 = static_cast<int>(fy);
    const int y1 = std::min(y0 + 1, src.height() - 1);
    const double wy = fy - y0;
    for (int c = 0; c < target.width; ++c) {
      const double fx = clamp_coord((c + 0.5) * sx - 0.5, src.width());
      const int x0 = static_cast<int>(fx);
      const int x1 = std::min(x0 + 1, src.width() - 1);
      const double wx = fx - x0;
      for (int ch = 0; ch < kChannels; ++ch) {
        auto sample = [&](int y, int x) {
          return static_cast<double>(in[(static_cast<std::size_t>(y) * src.width() + x) * kChannels + ch]);
        };
        const double top = sample(y0, x0) * (1.0 - wx) + sample(y0, x1) * wx;
        const double bottom = sample(y1, x0) * (1.0 - wx) + sample(y1, x1) * wx;
        const double v = top * (1.0 - wy) + bottom * wy;
        px[(static_cast<std::size_t>(r) * target.width + c) * kChannels + ch] =
            static_cast<std::uint8_t>(std::clamp(std::floor(v + 0.5), 0.0, 255.0));
      }
    }
  }
  return out;
}

struct LoadedEpisode {
  std::vector<Frame> frames;
  // Size of the episode's first frame before any resize; trajectories are
  // expressed in this coordinate system.
  Size source_size;
};

inline LoadedEpisode load_episode(const EpisodeManifest& manifest, const std::filesystem::path& dataset_root,
                                  const SamplingSpec& spec) {
  if (manifest.frame_paths.empty()) {
    throw InvalidInput("episode '" + manifest.episode_id + "' has no frames");
  }
  const auto indices = sample_uniform(static_cast<std::int64_t>(manifest.frame_paths.size()), spec.target_count);

  LoadedEpisode out;
  out.source_size = read_png(dataset_root / manifest.frame_paths.front()).size();
  out.frames.reserve(indices.size());
  for (std::size_t i = 0; i < indices.size(); ++i) {
    // Repeated indices (short episodes) reuse the previous decode.
    if (i > 0 && indices[i] == indices[i - 1]) {
      out.frames.push_back(out.frames.back());
      continue;
    }
    const auto path = dataset_root / manifest.frame_paths[static_cast<std::size_t>(indices[i])];
    Frame f = read_png(path);
    if (spec.resize_to) {
      f = resize_bilinear(f, *spec.resize_to);
    } else if (!out.frames.empty() && f.size() != out.frames.front().size()) {
      throw InvalidInput("episode '" + manifest.episode_id + "': frame '" + path.string() + "' is " +
                         to_string(f.size()) + " but earlier frames are " + to_string(out.frames.front().size()) +
                         "; set resize_to to normalize");
    }
    out.frames.push_back(std::move(f));
  }
  return out;
}

enum class ViolationKind { EmptyEpisode, MissingEpisodeId, DuplicatePath, TrajectoryTooShort, TrajectoryOutOfBounds };

inline const char* to_string(ViolationKind k) {
  switch (k) {
    case ViolationKind::EmptyEpisode: return "empty_episode";
    case ViolationKind::MissingEpisodeId: return "missing_episode_id";
    case ViolationKind::DuplicatePath: return "duplicate_path";
    case ViolationKind::TrajectoryTooShort: return "trajectory_too_short";
    case ViolationKind::TrajectoryOutOfBounds: return "trajectory_out_of_bounds";
  }
  return "unknown";
}

struct Violation {
  ViolationKind kind;
  std::string message;
};

// Reports every invariant breach of a manifest. Bounds checks on trajectory
// points need the first frame's size; without it only negative coordinates
// are flagged.
inline std::vector<Violation> validate_manifest(const EpisodeManifest& m,
                                                std::optional<Size> first_frame_size = std::nullopt) {
  std::vector<Violation> out;
  if (m.episode_id.empty()) out.push_back({ViolationKind::MissingEpisodeId, "episode_id is empty"});
  if (m.frame_paths.empty()) out.push_back({ViolationKind::EmptyEpisode, "episode has no frames"});
  std::set<std::string> seen;
  for (const auto& p : m.frame_paths) {
    if (!seen.insert(p).second) out.push_back({ViolationKind::DuplicatePath, "frame path listed twice: " + p});
  }
  if (m.trajectory) {
    if (m.trajectory->size() < 2) {
      out.push_back({ViolationKind::TrajectoryTooShort,
                     "trajectory has " + std::to_string(m.trajectory->size()) + " point(s), need at least 2"});
    }
    for (std::size_t i = 0; i < m.trajectory->size(); ++i) {
      const Point p = (*m.trajectory)[i];
      bool bad = p.x < 0 || p.y < 0;
      if (first_frame_size) bad = bad || p.x >= first_frame_size->width || p.y >= first_frame_size->height;
      if (bad) {
        std::string msg = "trajectory point " + std::to_string(i) + " (" + std::to_string(p.x) + ", " +
                          std::to_string(p.y) + ") is outside the first frame";
        if (first_frame_size) msg += " of size " + to_string(*first_frame_size);
        out.push_back({ViolationKind::TrajectoryOutOfBounds, std::move(msg)});
      }
    }
  }
  return out;
}

}  // namespace robogrid

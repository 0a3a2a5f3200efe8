#pragma once

// Synthetic on-disk dataset used by the pipeline and acceptance suites.
// Frame t of episode e is a flat background with a bright square whose
// position moves with t, so every sampled frame is distinct and known.

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "robogrid/episode_ingest.hpp"
#include "robogrid/feature_file.hpp"
#include "robogrid/png_io.hpp"

namespace robogrid::testing {

inline Frame fixture_frame(int episode, int t, Size size) {
  const auto shade = static_cast<std::uint8_t>(20 + 30 * episode);
  Frame f(size.height, size.width, Rgb{shade, static_cast<std::uint8_t>(100 - 10 * episode), 60});
  const int side = std::max(2, size.width / 5);
  const int x0 = (t * 3) % std::max(1, size.width - side);
  const int y0 = (t * 2 + episode) % std::max(1, size.height - side);
  for (int r = y0; r < y0 + side; ++r) {
    for (int c = x0; c < x0 + side; ++c) {
      f.set(r, c, Rgb{250, static_cast<std::uint8_t>(8 * t % 256), static_cast<std::uint8_t>(40 * episode % 256)});
    }
  }
  return f;
}

struct FixtureOptions {
  int episodes = 5;
  int length = 12;
  Size size{24, 24};
  bool instructions = true;
  bool trajectories = true;
};

// Writes <root>/episodes/ep_<i>.json and <root>/frames/ep_<i>/<t>.png.
inline void make_dataset(const std::filesystem::path& root, const FixtureOptions& opt = {}) {
  std::filesystem::create_directories(root / "episodes");
  for (int e = 0; e < opt.episodes; ++e) {
    const std::string id = "ep_" + std::to_string(e);
    std::filesystem::create_directories(root / "frames" / id);
    EpisodeManifest m;
    m.episode_id = id;
    m.source_dataset = "synthetic";
    const int length = opt.length + e;
    for (int t = 0; t < length; ++t) {
      const std::string rel = "frames/" + id + "/" + std::to_string(t) + ".png";
      write_png(root / rel, fixture_frame(e, t, opt.size));
      m.frame_paths.push_back(rel);
    }
    if (opt.instructions) m.instruction = "move the block to position " + std::to_string(e);
    if (opt.trajectories) {
      m.trajectory = std::vector<Point>{{1, 1}, {opt.size.width - 2, 2 + e}, {opt.size.width / 2, opt.size.height - 2}};
    }
    write_manifest(root / "episodes" / (id + ".json"), m);
  }
}

// Deterministic feature rows for FVD self-comparison.
inline FeatureMatrix fixture_features(std::uint32_t rows, std::uint32_t cols) {
  FeatureMatrix m{rows, cols, {}};
  for (std::uint32_t i = 0; i < rows; ++i) {
    for (std::uint32_t j = 0; j < cols; ++j) {
      const int v = static_cast<int>((i * 7 + j * 13) % 17) - 8;
      m.values.push_back(static_cast<float>(v) / 4.0f + static_cast<float>(j));
    }
  }
  return m;
}

}  // namespace robogrid::testing

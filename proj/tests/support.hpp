#pragma once

// Test-only helpers: random inputs, temp directories, and independent
// reference implementations the library is checked against. Nothing here
// calls into the code path it is used to verify.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <random>
#include <string>
#include <vector>

#include <unistd.h>

#include "robogrid/image.hpp"

namespace robogrid::testing {

class TempDir {
 public:
  explicit TempDir(const std::string& tag = "t") {
    static int counter = 0;
    path_ = std::filesystem::temp_directory_path() /
            ("robogrid-test-" + tag + "-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& s) const { return path_ / s; }

 private:
  std::filesystem::path path_;
};

inline Frame random_frame(std::mt19937& rng, int height, int width) {
  std::uniform_int_distribution<int> byte(0, 255);
  std::vector<std::uint8_t> px(static_cast<std::size_t>(height) * width * 3);
  for (auto& v : px) v = static_cast<std::uint8_t>(byte(rng));
  return Frame(height, width, std::move(px));
}

inline std::vector<Frame> random_frames(std::mt19937& rng, int count, int height, int width) {
  std::vector<Frame> out;
  for (int i = 0; i < count; ++i) out.push_back(random_frame(rng, height, width));
  return out;
}

inline GrayImage random_gray(std::mt19937& rng, int height, int width, double lo = 0.0, double hi = 255.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  GrayImage g(height, width);
  for (auto& v : g.values) v = u(rng);
  return g;
}

inline std::string read_bytes(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return std::string((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
}

// ---------------------------------------------------------------------------
// Oracles

// Serpentine layout written out by hand: rows of temporal indices.
inline constexpr int kLayoutTable[3][3] = {{1, 2, 3}, {6, 5, 4}, {7, 8, 9}};

// For each i, the frame index j in [0, T-1] nearest to i*(T-1)/(K-1), found by
// scanning every j; ties go to the larger j.
inline std::vector<std::int64_t> nearest_linear_positions(std::int64_t T, int K) {
  std::vector<std::int64_t> out;
  for (int i = 0; i < K; ++i) {
    if (K == 1) {
      out.push_back(0);
      continue;
    }
    // Compare |j*(K-1) - i*(T-1)| in integers to avoid rounding.
    std::int64_t best = 0;
    std::int64_t best_dist = -1;
    for (std::int64_t j = 0; j < T; ++j) {
      const std::int64_t dist = std::llabs(j * (K - 1) - static_cast<std::int64_t>(i) * (T - 1));
      if (best_dist < 0 || dist <= best_dist) {
        best = j;
        best_dist = dist;
      }
    }
    out.push_back(best);
  }
  return out;
}

// Pixels of a straight line computed by parametric evaluation along the major
// axis, rounding the minor coordinate half away from the start point.
inline std::vector<Point> reference_line(Point a, Point b) {
  const int dx = b.x - a.x;
  const int dy = b.y - a.y;
  const int n = std::max(std::abs(dx), std::abs(dy));
  std::vector<Point> out;
  if (n == 0) return {a};
  auto round_from_start = [](double v) { return v >= 0 ? std::floor(v + 0.5) : -std::floor(-v + 0.5); };
  for (int i = 0; i <= n; ++i) {
    const double fx = static_cast<double>(i) * dx / n;
    const double fy = static_cast<double>(i) * dy / n;
    out.push_back({a.x + static_cast<int>(round_from_start(fx)), a.y + static_cast<int>(round_from_start(fy))});
  }
  return out;
}

// Chebyshev distance from pixel p to the continuous segment ab (ternary search
// on the convex distance profile).
inline double chebyshev_to_segment(Point p, Point a, Point b) {
  auto dist = [&](double t) {
    const double x = a.x + t * (b.x - a.x);
    const double y = a.y + t * (b.y - a.y);
    return std::max(std::abs(p.x - x), std::abs(p.y - y));
  };
  double lo = 0.0, hi = 1.0;
  for (int it = 0; it < 200; ++it) {
    const double m1 = lo + (hi - lo) / 3.0;
    const double m2 = hi - (hi - lo) / 3.0;
    if (dist(m1) <= dist(m2)) {
      hi = m2;
    } else {
      lo = m1;
    }
  }
  return std::min({dist(0.0), dist(1.0), dist(0.5 * (lo + hi))});
}

// Direct per-window SSIM: two-pass mean, then centred second moments with the
// N-1 denominator, averaged over every window position.
inline double brute_force_ssim(const GrayImage& x, const GrayImage& y, int window = 8, double k1 = 0.01,
                               double k2 = 0.03, double range = 255.0) {
  const double c1 = std::pow(k1 * range, 2);
  const double c2 = std::pow(k2 * range, 2);
  const int n = window * window;
  double total = 0.0;
  int count = 0;
  for (int r = 0; r + window <= x.height; ++r) {
    for (int c = 0; c + window <= x.width; ++c) {
      double mx = 0, my = 0;
      for (int i = 0; i < window; ++i) {
        for (int j = 0; j < window; ++j) {
          mx += x.at(r + i, c + j);
          my += y.at(r + i, c + j);
        }
      }
      mx /= n;
      my /= n;
      double vx = 0, vy = 0, cxy = 0;
      for (int i = 0; i < window; ++i) {
        for (int j = 0; j < window; ++j) {
          const double a = x.at(r + i, c + j) - mx;
          const double b = y.at(r + i, c + j) - my;
          vx += a * a;
          vy += b * b;
          cxy += a * b;
        }
      }
      vx /= (n - 1);
      vy /= (n - 1);
      cxy /= (n - 1);
      total += ((2 * mx * my + c1) * (2 * cxy + c2)) / ((mx * mx + my * my + c1) * (vx + vy + c2));
      ++count;
    }
  }
  return total / count;
}

// Rec. 601 luma computed channel by channel from a frame.
inline GrayImage reference_luma(const Frame& f) {
  GrayImage g(f.height(), f.width());
  for (int r = 0; r < f.height(); ++r) {
    for (int c = 0; c < f.width(); ++c) {
      const Rgb p = f.at(r, c);
      g.at(r, c) = 0.299 * p.r + 0.587 * p.g + 0.114 * p.b;
    }
  }
  return g;
}

}  // namespace robogrid::testing

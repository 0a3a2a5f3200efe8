#pragma once

// Draws a 2D end-effector path over a frame with a per-segment color ramp.
// Segment s of S-1 gets ramp_color(s, S-1); later segments are drawn on top
// of earlier ones. Lines are integer Bresenham cores stamped with a square
// brush, no anti-aliasing, and pixels are replaced rather than blended.

#include <algorithm>
#include <cctype>
#include <cstdint>
#include <cstdlib>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "robogrid/error.hpp"
#include "robogrid/grid_codec.hpp"
#include "robogrid/image.hpp"

namespace robogrid {

class Trajectory {
 public:
  explicit Trajectory(std::vector<Point> points) : points_(std::move(points)) {
    if (points_.size() < 2) {
      throw InvalidInput("trajectory needs at least 2 points, got " + std::to_string(points_.size()));
    }
  }

  const std::vector<Point>& points() const { return points_; }
  std::size_t segment_count() const { return points_.size() - 1; }

  // Indices of points outside a frame of the given size.
  std::vector<std::size_t> out_of_bounds(Size frame) const {
    std::vector<std::size_t> bad;
    for (std::size_t i = 0; i < points_.size(); ++i) {
      const Point p = points_[i];
      if (p.x < 0 || p.y < 0 || p.x >= frame.width || p.y >= frame.height) bad.push_back(i);
    }
    return bad;
  }

 private:
  std::vector<Point> points_;
};

struct ColorRamp {
  Rgb start{0, 0, 255};
  Rgb end{255, 0, 0};
  int stroke_width = 3;

  void validate() const {
    if (stroke_width < 1) throw InvalidInput("stroke width must be >= 1, got " + std::to_string(stroke_width));
  }
};

// Accepts "#rrggbb" or "rrggbb".
inline Rgb parse_hex_color(std::string_view text) {
  std::string_view s = text;
  if (!s.empty() && s.front() == '#') s.remove_prefix(1);
  if (s.size() != 6 || !std::all_of(s.begin(), s.end(), [](unsigned char c) { return std::isxdigit(c) != 0; })) {
    throw InvalidInput("expected a hex RGB color like #0000ff, got '" + std::string(text) + "'");
  }
  auto byte = [&](std::size_t i) {
    return static_cast<std::uint8_t>(std::strtoul(std::string(s.substr(i, 2)).c_str(), nullptr, 16));
  };
  return {byte(0), byte(2), byte(4)};
}

inline std::string to_hex(Rgb c) {
  static constexpr char kDigits[] = "0123456789abcdef";
  std::string out = "#";
  for (std::uint8_t v : {c.r, c.g, c.b}) {
    out += kDigits[v >> 4];
    out += kDigits[v & 0xf];
  }
  return out;
}

// Linear ramp between start and end, rounded half-up per channel.
inline Rgb ramp_color(int segment, int segment_count, const ColorRamp& ramp) {
  if (segment_count < 1) {
    throw InvalidInput("segment count must be >= 1, got " + std::to_string(segment_count));
  }
  if (segment < 0 || segment >= segment_count) {
    throw InvalidInput("segment index " + std::to_string(segment) + " out of range [0, " +
                       std::to_string(segment_count) + ")");
  }
  if (segment_count == 1) return ramp.start;
  const long den = segment_count - 1;
  auto lerp = [&](int a, int b) {
    // a*(den-s) + b*s is non-negative, so integer division is a floor.
    const long num = static_cast<long>(a) * (den - segment) + static_cast<long>(b) * segment;
    return static_cast<std::uint8_t>((2 * num + den) / (2 * den));
  };
  return {lerp(ramp.start.r, ramp.end.r), lerp(ramp.start.g, ramp.end.g), lerp(ramp.start.b, ramp.end.b)};
}

// Integer Bresenham line from a to b, both endpoints included.
inline std::vector<Point> bresenham_line(Point a, Point b) {
  std::vector<Point> out;
  const int dx = std::abs(b.x - a.x);
  const int dy = std::abs(b.y - a.y);
  const int sx = a.x < b.x ? 1 : -1;
  const int sy = a.y < b.y ? 1 : -1;
  const bool x_major = dx >= dy;
  const int major = x_major ? dx : dy;
  const int minor = x_major ? dy : dx;
  out.reserve(static_cast<std::size_t>(major) + 1);
  // err tracks 2*(i*minor) - (2*m - 1)*major for the current minor offset m,
  // stepping the minor axis once the exact position reaches the half-pixel.
  int err = 2 * minor - major;
  Point p = a;
  for (int i = 0; i <= major; ++i) {
    out.push_back(p);
    if (err >= 0 && i < major) {
      (x_major ? p.y : p.x) += x_major ? sy : sx;
      err -= 2 * major;
    }
    (x_major ? p.x : p.y) += x_major ? sx : sy;
    err += 2 * minor;
  }
  return out;
}

namespace detail {

// Square brush of side stroke_width. Even widths are one pixel longer on one
// side; `lean_x` / `lean_y` put the long side toward negative offsets.
inline void stamp(Frame& frame, Point center, int stroke_width, Rgb color, bool lean_x = false,
                  bool lean_y = false) {
  const int lo = -(stroke_width - 1) / 2;
  const int hi = stroke_width / 2;
  const int y0 = std::max(0, center.y + (lean_y ? -hi : lo));
  const int y1 = std::min(frame.height() - 1, center.y + (lean_y ? -lo : hi));
  const int x0 = std::max(0, center.x + (lean_x ? -hi : lo));
  const int x1 = std::min(frame.width() - 1, center.x + (lean_x ? -lo : hi));
  for (int y = y0; y <= y1; ++y) {
    for (int x = x0; x <= x1; ++x) frame.set(y, x, color);
  }
}

// Stamps every pixel of the Bresenham line a-b. For even widths the brush
// leans toward the side of the ideal line the pixel was rounded away from, so
// no painted pixel is farther than stroke_width/2 (Chebyshev) from the segment.
inline void stamp_segment(Frame& frame, Point a, Point b, int stroke_width, Rgb color) {
  const auto line = bresenham_line(a, b);
  const int dx = b.x - a.x;
  const int dy = b.y - a.y;
  const bool x_major = std::abs(dx) >= std::abs(dy);
  const long n = std::max(std::abs(dx), std::abs(dy));
  for (std::size_t i = 0; i < line.size(); ++i) {
    const Point p = line[i];
    // Sign of (ideal minor coordinate - pixel minor coordinate), scaled by n.
    const long off = x_major ? static_cast<long>(a.y - p.y) * n + static_cast<long>(i) * dy
                             : static_cast<long>(a.x - p.x) * n + static_cast<long>(i) * dx;
    const bool lean = off < 0;
    stamp(frame, p, stroke_width, color, !x_major && lean, x_major && lean);
  }
}

}  // namespace detail

inline void check_in_bounds(const Trajectory& traj, Size frame) {
  const auto bad = traj.out_of_bounds(frame);
  if (bad.empty()) return;
  std::string msg = "trajectory points outside " + to_string(frame) + " frame:";
  for (std::size_t i : bad) {
    const Point p = traj.points()[i];
    msg += " #" + std::to_string(i) + "=(" + std::to_string(p.x) + "," + std::to_string(p.y) + ")";
  }
  throw InvalidInput(msg);
}

inline Frame render_overlay(const Frame& frame, const Trajectory& traj, const ColorRamp& ramp) {
  ramp.validate();
  check_in_bounds(traj, frame.size());
  Frame out = frame;
  const auto& pts = traj.points();
  const int segments = static_cast<int>(traj.segment_count());
  for (int s = 0; s < segments; ++s) {
    const Rgb color = ramp_color(s, segments, ramp);
    detail::stamp_segment(out, pts[s], pts[s + 1], ramp.stroke_width, color);
  }
  // Path endpoints keep the exact ramp endpoint colors even where a later
  // segment passes back over the start point.
  out.set(pts.front().y, pts.front().x, ramp_color(0, segments, ramp));
  out.set(pts.back().y, pts.back().x, ramp_color(segments - 1, segments, ramp));
  return out;
}

// Maps first-frame pixel coordinates onto a resized frame (pixel centres are
// scaled, then floored).
inline Trajectory scale_trajectory(const Trajectory& traj, Size from, Size to) {
  if (from == to) return traj;
  std::vector<Point> pts;
  pts.reserve(traj.points().size());
  for (Point p : traj.points()) {
    const int x = static_cast<int>((2L * p.x + 1) * to.width / (2L * from.width));
    const int y = static_cast<int>((2L * p.y + 1) * to.height / (2L * from.height));
    pts.push_back({std::clamp(x, 0, to.width - 1), std::clamp(y, 0, to.height - 1)});
  }
  return Trajectory(std::move(pts));
}

// Masked conditioning grid for the trajectory branch: the overlaid first frame
// in the top-left cell, every other cell black.
inline GridImage build_trajectory_grid_input(std::span<const Frame> frames, const std::optional<Trajectory>& traj,
                                             const ColorRamp& ramp) {
  if (!traj) throw MissingCondition("trajectory-conditioned input requested but the episode has no trajectory");
  if (frames.size() != kGridFrames) {
    throw InvalidInput("grid assembly needs exactly 9 frames, got " + std::to_string(frames.size()));
  }
  std::vector<Frame> staged(frames.begin(), frames.end());
  staged.front() = render_overlay(staged.front(), *traj, ramp);
  return apply_mask(assemble_grid(staged), GridMask::first_frame());
}

}  // namespace robogrid

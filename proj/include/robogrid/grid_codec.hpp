#pragma once

// 3x3 grid codec: nine temporally ordered frames <-> one grid image.
//
// Tiles are placed in serpentine (boustrophedon) order:
//
//   t1 t2 t3
//   t6 t5 t4
//   t7 t8 t9
//
// so that consecutive frames always share an edge on the grid.

#include <algorithm>
#include <array>
#include <bitset>
#include <cstring>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

#include "robogrid/error.hpp"
#include "robogrid/image.hpp"

namespace robogrid {

inline constexpr int kGridSide = 3;
inline constexpr int kGridFrames = kGridSide * kGridSide;

struct Cell {
  int row = 0;
  int col = 0;

  friend bool operator==(const Cell&, const Cell&) = default;
};

inline std::string to_string(Cell c) {
  return "(" + std::to_string(c.row) + "," + std::to_string(c.col) + ")";
}

// Grid cell of temporal index t (1-based).
inline Cell serpentine_cell(int t) {
  if (t < 1 || t > kGridFrames) {
    throw InvalidInput("temporal index must be in 1..9, got " + std::to_string(t));
  }
  const int row = (t - 1) / kGridSide;
  const int pos = (t - 1) % kGridSide;
  return {row, row % 2 == 0 ? pos : kGridSide - 1 - pos};
}

// Bijection between temporal indices 1..9 and grid cells.
class GridLayout {
 public:
  explicit GridLayout(const std::array<Cell, kGridFrames>& cells) : cells_(cells) {
    std::bitset<kGridFrames> seen;
    for (const Cell& c : cells_) {
      if (c.row < 0 || c.row >= kGridSide || c.col < 0 || c.col >= kGridSide) {
        throw InvalidInput("layout cell " + to_string(c) + " is outside the 3x3 grid");
      }
      const int flat = c.row * kGridSide + c.col;
      if (seen.test(flat)) throw InvalidInput("layout assigns cell " + to_string(c) + " twice");
      seen.set(flat);
    }
  }

  static GridLayout serpentine() {
    std::array<Cell, kGridFrames> cells{};
    for (int t = 1; t <= kGridFrames; ++t) cells[t - 1] = serpentine_cell(t);
    return GridLayout(cells);
  }

  Cell cell_of_frame(int t) const {
    if (t < 1 || t > kGridFrames) {
      throw InvalidInput("temporal index must be in 1..9, got " + std::to_string(t));
    }
    return cells_[t - 1];
  }

  // Inverse map: temporal index (1-based) stored at a cell.
  int frame_at(Cell c) const {
    for (int t = 1; t <= kGridFrames; ++t) {
      if (cells_[t - 1] == c) return t;
    }
    throw InvalidInput("cell " + to_string(c) + " is outside the 3x3 grid");
  }

 private:
  std::array<Cell, kGridFrames> cells_;
};

// A 3H x 3W image made of nine H x W tiles.
class GridImage {
 public:
  explicit GridImage(Frame image) : image_(std::move(image)) {
    if (image_.height() % kGridSide != 0 || image_.width() % kGridSide != 0) {
      throw InvalidInput("grid size " + robogrid::to_string(image_.size()) +
                         " is not divisible by 3 in both axes");
    }
  }

  int tile_height() const { return image_.height() / kGridSide; }
  int tile_width() const { return image_.width() / kGridSide; }
  Size tile_size() const { return {tile_height(), tile_width()}; }

  const Frame& image() const { return image_; }
  Frame& image() { return image_; }

  Frame tile(Cell c) const {
    Frame out(tile_height(), tile_width());
    const std::size_t row_bytes = static_cast<std::size_t>(tile_width()) * kChannels;
    for (int r = 0; r < tile_height(); ++r) {
      auto src = image_.row(c.row * tile_height() + r)
                     .subspan(static_cast<std::size_t>(c.col) * row_bytes, row_bytes);
      std::memcpy(out.row(r).data(), src.data(), row_bytes);
    }
    return out;
  }

  void set_tile(Cell c, const Frame& tile) {
    if (tile.size() != tile_size()) {
      throw InvalidInput("tile size " + robogrid::to_string(tile.size()) + " does not match grid tile size " +
                         robogrid::to_string(tile_size()));
    }
    const std::size_t row_bytes = static_cast<std::size_t>(tile_width()) * kChannels;
    for (int r = 0; r < tile_height(); ++r) {
      auto dst = image_.row(c.row * tile_height() + r)
                     .subspan(static_cast<std::size_t>(c.col) * row_bytes, row_bytes);
      std::memcpy(dst.data(), tile.row(r).data(), row_bytes);
    }
  }

  friend bool operator==(const GridImage&, const GridImage&) = default;

 private:
  Frame image_;
};

// Set of visible grid cells; everything else is zeroed by apply_mask.
class GridMask {
 public:
  GridMask() = default;
  GridMask(std::initializer_list<Cell> cells) {
    for (Cell c : cells) show(c);
  }

  // Only the top-left tile (the first observed frame) stays visible.
  static GridMask first_frame() { return GridMask{{0, 0}}; }

  static GridMask all() {
    GridMask m;
    m.visible_.set();
    return m;
  }

  void show(Cell c) {
    if (c.row < 0 || c.row >= kGridSide || c.col < 0 || c.col >= kGridSide) {
      throw InvalidInput("mask cell " + to_string(c) + " is outside the 3x3 grid");
    }
    visible_.set(c.row * kGridSide + c.col);
  }

  bool visible(Cell c) const { return visible_.test(c.row * kGridSide + c.col); }
  std::size_t count() const { return visible_.count(); }

 private:
  std::bitset<kGridFrames> visible_;
};

inline GridImage assemble_grid(std::span<const Frame> frames,
                               const GridLayout& layout = GridLayout::serpentine()) {
  if (frames.size() != kGridFrames) {
    throw InvalidInput("grid assembly needs exactly 9 frames, got " + std::to_string(frames.size()));
  }
  const Size tile = frames.front().size();
  for (std::size_t i = 1; i < frames.size(); ++i) {
    if (frames[i].size() != tile) {
      throw InvalidInput("frame " + std::to_string(i + 1) + " is " + robogrid::to_string(frames[i].size()) +
                         " but frame 1 is " + robogrid::to_string(tile));
    }
  }
  GridImage grid(Frame(tile.height * kGridSide, tile.width * kGridSide));
  for (int t = 1; t <= kGridFrames; ++t) grid.set_tile(layout.cell_of_frame(t), frames[t - 1]);
  return grid;
}

inline std::vector<Frame> disassemble_grid(const GridImage& grid,
                                           const GridLayout& layout = GridLayout::serpentine()) {
  std::vector<Frame> frames;
  frames.reserve(kGridFrames);
  for (int t = 1; t <= kGridFrames; ++t) frames.push_back(grid.tile(layout.cell_of_frame(t)));
  return frames;
}

inline GridImage apply_mask(const GridImage& grid, const GridMask& mask) {
  GridImage out = grid;
  const Frame black(grid.tile_height(), grid.tile_width());
  for (int r = 0; r < kGridSide; ++r) {
    for (int c = 0; c < kGridSide; ++c) {
      if (!mask.visible({r, c})) out.set_tile({r, c}, black);
    }
  }
  return out;
}

}  // namespace robogrid

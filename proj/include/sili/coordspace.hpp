#pragma once

#include <array>
#include <cstdint>

#include "sili/tensor.hpp"

namespace sili::coordspace {

/// Number of values emitted by encode_position: 2 offset axes x 6 frequency
/// bands x (sin, cos).
inline constexpr int kPeDim = 24;
inline constexpr int kPeBands = 6;

/// A discrete H x W grid laid over the continuous normalized space S.
struct GridSpec {
  int64_t height_cells = 0;
  int64_t width_cells = 0;

  GridSpec() = default;
  GridSpec(int64_t h, int64_t w) : height_cells(h), width_cells(w) {
    detail::require(h >= 1 && w >= 1, "GridSpec: grid must have at least one cell per axis");
  }
  bool operator==(const GridSpec&) const = default;
};

/// A point (u, v) in S = [0,1] x [0,1]. u runs along the height axis.
struct ContinuousCoord {
  double u = 0.0;
  double v = 0.0;
};

/// Cell position inside a GridSpec, row-major.
struct CellIndex {
  int64_t row = 0;
  int64_t col = 0;
  bool operator==(const CellIndex&) const = default;
};

/// Offset between a query coordinate and a matched cell center, as fractions
/// of S.
struct RelativeOffset {
  double du = 0.0;
  double dv = 0.0;
};

/// Sinusoidal embedding of a RelativeOffset, length kPeDim. Layout: for each
/// axis (du then dv), bands k = 0..5 each emit [sin(2^k * pi * d),
/// cos(2^k * pi * d)].
struct PositionalEncoding {
  std::array<double, kPeDim> values{};
};

/// Normalized height and width of one grid cell: (1/H, 1/W).
struct CellScale {
  double sh = 0.0;
  double sw = 0.0;
};

/// Center of cell (h, w) in S: (1/(2H) + h/H, 1/(2W) + w/W).
ContinuousCoord cell_center(const GridSpec& grid, const CellIndex& index);

/// Index of the target-grid cell nearest to the center of hr_index in
/// hr_grid: h* = round((H_t / H_hr) * (1/2 + h) - 1/2) per axis, with
/// round-half-away-from-zero ties and the result clamped into the target
/// grid. Evaluated in exact integer arithmetic so ties are bit-reproducible.
CellIndex match_index(const GridSpec& hr_grid, const GridSpec& target_grid,
                      const CellIndex& hr_index);

/// query - matched_center, componentwise.
RelativeOffset relative_offset(const ContinuousCoord& query, const ContinuousCoord& matched_center);

/// Deterministic 24-dim sinusoidal encoding of an offset.
PositionalEncoding encode_position(const RelativeOffset& offset);

CellScale cell_scale(const GridSpec& grid);

}  // namespace sili::coordspace

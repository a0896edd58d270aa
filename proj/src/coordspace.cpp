#include "sili/coordspace.hpp"

#include <algorithm>
#include <cmath>

namespace sili::coordspace {

namespace {

constexpr double kPi = 3.141592653589793238462643383279502884;

void check_index(const GridSpec& grid, const CellIndex& index) {
  detail::require(index.row >= 0 && index.row < grid.height_cells && index.col >= 0 &&
                      index.col < grid.width_cells,
                  "cell index out of range for grid");
}

// round(num / den) with den > 0, halves away from zero, in exact integers.
int64_t round_half_away(int64_t num, int64_t den) {
  if (num >= 0) return (2 * num + den) / (2 * den);
  return -((2 * (-num) + den) / (2 * den));
}

// One axis of the nearest-cell match: round((Ht / Hhr) * (1/2 + h) - 1/2)
// = round((Ht * (2h + 1) - Hhr) / (2 * Hhr)), clamped into [0, Ht - 1].
int64_t match_axis(int64_t hr_cells, int64_t target_cells, int64_t h) {
  const int64_t num = target_cells * (2 * h + 1) - hr_cells;
  const int64_t den = 2 * hr_cells;
  return std::clamp<int64_t>(round_half_away(num, den), 0, target_cells - 1);
}

}  // namespace

ContinuousCoord cell_center(const GridSpec& grid, const CellIndex& index) {
  check_index(grid, index);
  return {0.5 / static_cast<double>(grid.height_cells) +
              static_cast<double>(index.row) / static_cast<double>(grid.height_cells),
          0.5 / static_cast<double>(grid.width_cells) +
              static_cast<double>(index.col) / static_cast<double>(grid.width_cells)};
}

CellIndex match_index(const GridSpec& hr_grid, const GridSpec& target_grid,
                      const CellIndex& hr_index) {
  check_index(hr_grid, hr_index);
  return {match_axis(hr_grid.height_cells, target_grid.height_cells, hr_index.row),
          match_axis(hr_grid.width_cells, target_grid.width_cells, hr_index.col)};
}

RelativeOffset relative_offset(const ContinuousCoord& query,
                               const ContinuousCoord& matched_center) {
  return {query.u - matched_center.u, query.v - matched_center.v};
}

PositionalEncoding encode_position(const RelativeOffset& offset) {
  detail::require(std::isfinite(offset.du) && std::isfinite(offset.dv),
                  "encode_position: offset must be finite");
  PositionalEncoding pe;
  const double axes[2] = {offset.du, offset.dv};
  int i = 0;
  for (double d : axes) {
    double freq = kPi;  // band k uses 2^k * pi
    for (int band = 0; band < kPeBands; ++band) {
      pe.values[static_cast<size_t>(i++)] = std::sin(freq * d);
      pe.values[static_cast<size_t>(i++)] = std::cos(freq * d);
      freq *= 2.0;
    }
  }
  return pe;
}

CellScale cell_scale(const GridSpec& grid) {
  return {1.0 / static_cast<double>(grid.height_cells),
          1.0 / static_cast<double>(grid.width_cells)};
}

}  // namespace sili::coordspace

#pragma once

#include <array>
#include <vector>

#include "sili/coordspace.hpp"
#include "sili/encoder.hpp"
#include "sili/image.hpp"
#include "sili/nn.hpp"

namespace sili::decoder {

/// Dense coordinate queries: the cell centers of an (H/ds) x (W/ds) grid.
struct QueryGrid {
  coordspace::GridSpec grid;
  int ds = 1;
};

/// ds must divide both HR dimensions.
QueryGrid build_query_grid(const coordspace::GridSpec& hr, int ds);

/// Precomputed per-geometry gather maps: nearest-cell index maps from the
/// query grid into every feature level and into the HR grid (for Z0), plus
/// the constant positional-encoding and cell-scale channels.
struct GatherPlan {
  QueryGrid queries;
  std::array<std::vector<int64_t>, 4> rows, cols;  // query index -> level cell
  std::array<Tensor, 4> pe;                        // [24, Hq, Wq] per level
  std::array<coordspace::CellScale, 4> cell_scales;
  std::vector<int64_t> z0_rows, z0_cols;  // query index -> HR cell
};

GatherPlan make_gather_plan(const QueryGrid& queries,
                            const std::array<coordspace::GridSpec, 4>& level_grids,
                            const coordspace::GridSpec& hr_grid);

/// One query's decoder input in its fixed layout:
/// [z0 | z_1 pe_1 cs_1 | ... | z_4 pe_4 cs_4]. Length 619 in the reference
/// configuration (3 + 4 * (128 + 24 + 2)).
struct QueryBundle {
  std::vector<double> values;
};

/// Value-level bundle gather for one sample (used directly by tests and
/// cross-checked against the in-graph assembly). z0 may be empty when edge
/// clues are disabled. Bundles come back in row-major query order.
std::vector<QueryBundle> gather(const GatherPlan& plan, const Tensor& z0,
                                const std::array<Tensor, 4>& z);

/// Pointwise three-layer MLP over bundle channels with batch normalization
/// and rectified-linear activations, widths in -> 64 -> 64 -> 2.
struct ImplicitMlp {
  nn::Conv2d l1, l2, l3;
  nn::BatchNorm bn1, bn2;

  ImplicitMlp() = default;
  ImplicitMlp(nn::ParamStore& store, const std::string& prefix, int in_channels, SplitRng& rng);
  ad::Var forward(const ad::Var& bundles, bool training) const;
};

/// Assembles bundle channels from fused features and applies the MLP,
/// producing change logits [N, 2, Hq, Wq].
class InrDecoder {
 public:
  InrDecoder() = default;
  InrDecoder(nn::ParamStore& store, bool edge_clues_enabled, SplitRng& rng);

  ad::Var decode_logits(const encoder::FusedFeatures& fused, const GatherPlan& plan,
                        bool training) const;

  /// The assembled bundle channels [N, width, Hq, Wq] the MLP consumes.
  ad::Var assemble_channels(const encoder::FusedFeatures& fused, const GatherPlan& plan) const;

  static int bundle_width(bool edge_clues_enabled) {
    return (edge_clues_enabled ? 3 : 0) +
           4 * (2 * encoder::Encoder::kFusedPerTemporal + coordspace::kPeDim + 2);
  }

 private:
  ImplicitMlp mlp_;
  bool edge_clues_enabled_ = true;
};

/// Bilinear interpolation of a [2, h, w] probability map to the target size,
/// renormalized so every pixel's 2-vector sums to one.
Tensor upsample_scores(const Tensor& scores, int out_h, int out_w);

/// Argmax over the two channels; an exact tie goes to no-change (channel 0).
Mask predict_mask(const Tensor& scores);

}  // namespace sili::decoder

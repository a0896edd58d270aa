#include "sili/decoder.hpp"

#include <cmath>

namespace sili::decoder {

using coordspace::CellIndex;
using coordspace::GridSpec;

QueryGrid build_query_grid(const GridSpec& hr, int ds) {
  detail::require(ds >= 1, "build_query_grid: ds must be >= 1");
  detail::require(hr.height_cells % ds == 0 && hr.width_cells % ds == 0,
                  "build_query_grid: ds must divide the HR size");
  return {GridSpec(hr.height_cells / ds, hr.width_cells / ds), ds};
}

GatherPlan make_gather_plan(const QueryGrid& queries,
                            const std::array<GridSpec, 4>& level_grids,
                            const GridSpec& hr_grid) {
  GatherPlan plan;
  plan.queries = queries;
  const int64_t qh = queries.grid.height_cells, qw = queries.grid.width_cells;

  for (int level = 0; level < 4; ++level) {
    const GridSpec& lg = level_grids[static_cast<size_t>(level)];
    auto& rows = plan.rows[static_cast<size_t>(level)];
    auto& cols = plan.cols[static_cast<size_t>(level)];
    rows.resize(static_cast<size_t>(qh));
    cols.resize(static_cast<size_t>(qw));
    for (int64_t h = 0; h < qh; ++h)
      rows[static_cast<size_t>(h)] = coordspace::match_index(queries.grid, lg, {h, 0}).row;
    for (int64_t w = 0; w < qw; ++w)
      cols[static_cast<size_t>(w)] = coordspace::match_index(queries.grid, lg, {0, w}).col;

    Tensor pe({coordspace::kPeDim, qh, qw});
    for (int64_t h = 0; h < qh; ++h)
      for (int64_t w = 0; w < qw; ++w) {
        const auto qc = coordspace::cell_center(queries.grid, {h, w});
        const auto mc = coordspace::cell_center(
            lg, {rows[static_cast<size_t>(h)], cols[static_cast<size_t>(w)]});
        const auto enc = coordspace::encode_position(coordspace::relative_offset(qc, mc));
        for (int k = 0; k < coordspace::kPeDim; ++k)
          pe.at(k, h, w) = enc.values[static_cast<size_t>(k)];
      }
    plan.pe[static_cast<size_t>(level)] = std::move(pe);
    plan.cell_scales[static_cast<size_t>(level)] = coordspace::cell_scale(lg);
  }

  plan.z0_rows.resize(static_cast<size_t>(qh));
  plan.z0_cols.resize(static_cast<size_t>(qw));
  for (int64_t h = 0; h < qh; ++h)
    plan.z0_rows[static_cast<size_t>(h)] = coordspace::match_index(queries.grid, hr_grid, {h, 0}).row;
  for (int64_t w = 0; w < qw; ++w)
    plan.z0_cols[static_cast<size_t>(w)] = coordspace::match_index(queries.grid, hr_grid, {0, w}).col;
  return plan;
}

std::vector<QueryBundle> gather(const GatherPlan& plan, const Tensor& z0,
                                const std::array<Tensor, 4>& z) {
  const int64_t qh = plan.queries.grid.height_cells, qw = plan.queries.grid.width_cells;
  const bool has_z0 = z0.numel() > 0;
  std::vector<QueryBundle> bundles;
  bundles.reserve(static_cast<size_t>(qh * qw));
  for (int64_t h = 0; h < qh; ++h)
    for (int64_t w = 0; w < qw; ++w) {
      QueryBundle b;
      if (has_z0) {
        const int64_t rr = plan.z0_rows[static_cast<size_t>(h)];
        const int64_t cc = plan.z0_cols[static_cast<size_t>(w)];
        for (int64_t c = 0; c < z0.dim(0); ++c) b.values.push_back(z0.at(c, rr, cc));
      }
      for (int level = 0; level < 4; ++level) {
        const Tensor& zj = z[static_cast<size_t>(level)];
        const int64_t rr = plan.rows[static_cast<size_t>(level)][static_cast<size_t>(h)];
        const int64_t cc = plan.cols[static_cast<size_t>(level)][static_cast<size_t>(w)];
        for (int64_t c = 0; c < zj.dim(0); ++c) b.values.push_back(zj.at(c, rr, cc));
        const Tensor& pe = plan.pe[static_cast<size_t>(level)];
        for (int k = 0; k < coordspace::kPeDim; ++k) b.values.push_back(pe.at(k, h, w));
        const auto cs = plan.cell_scales[static_cast<size_t>(level)];
        b.values.push_back(cs.sh);
        b.values.push_back(cs.sw);
      }
      for (double v : b.values)
        detail::require(std::isfinite(v), "gather: non-finite bundle value at query (" +
                                              std::to_string(h) + ", " + std::to_string(w) + ")");
      bundles.push_back(std::move(b));
    }
  return bundles;
}

ImplicitMlp::ImplicitMlp(nn::ParamStore& store, const std::string& prefix, int in_channels,
                         SplitRng& rng) {
  l1 = nn::Conv2d(store, prefix + ".l1", in_channels, 64, 1, 1, 0, true, rng);
  bn1 = nn::BatchNorm(store, prefix + ".bn1", 64);
  l2 = nn::Conv2d(store, prefix + ".l2", 64, 64, 1, 1, 0, true, rng);
  bn2 = nn::BatchNorm(store, prefix + ".bn2", 64);
  l3 = nn::Conv2d(store, prefix + ".l3", 64, 2, 1, 1, 0, true, rng);
}

ad::Var ImplicitMlp::forward(const ad::Var& bundles, bool training) const {
  ad::Var y = ad::relu(bn1.forward(l1.forward(bundles), training));
  y = ad::relu(bn2.forward(l2.forward(y), training));
  return l3.forward(y);
}

InrDecoder::InrDecoder(nn::ParamStore& store, bool edge_clues_enabled, SplitRng& rng)
    : edge_clues_enabled_(edge_clues_enabled) {
  mlp_ = ImplicitMlp(store, "inr", bundle_width(edge_clues_enabled), rng);
}

ad::Var InrDecoder::decode_logits(const encoder::FusedFeatures& fused, const GatherPlan& plan,
                                  bool training) const {
  ad::Var logits = mlp_.forward(assemble_channels(fused, plan), training);
  const Tensor& v = logits.value();
  const int64_t n = v.dim(0), qh = v.dim(2), qw = v.dim(3);
  for (int64_t i = 0; i < v.numel(); ++i)
    if (!std::isfinite(v[i])) {
      const int64_t q = i % (qh * qw);
      throw std::runtime_error("decode: non-finite activation at sample " +
                               std::to_string(i / (2 * qh * qw)) + ", query (" +
                               std::to_string(q / qw) + ", " + std::to_string(q % qw) + ")");
    }
  (void)n;
  return logits;
}

ad::Var InrDecoder::assemble_channels(const encoder::FusedFeatures& fused,
                                      const GatherPlan& plan) const {
  const int64_t n = fused.z[0].dim(0);
  const int64_t qh = plan.queries.grid.height_cells, qw = plan.queries.grid.width_cells;

  std::vector<ad::Var> parts;
  if (edge_clues_enabled_) {
    detail::require(fused.z0.defined(), "decode: edge features missing");
    parts.push_back(ad::gather_spatial(fused.z0, plan.z0_rows, plan.z0_cols));
  }
  for (int level = 0; level < 4; ++level) {
    parts.push_back(ad::gather_spatial(fused.z[static_cast<size_t>(level)],
                                       plan.rows[static_cast<size_t>(level)],
                                       plan.cols[static_cast<size_t>(level)]));
    // constant positional-encoding channels, tiled over the batch
    Tensor pe({n, coordspace::kPeDim, qh, qw});
    const Tensor& src = plan.pe[static_cast<size_t>(level)];
    for (int64_t i = 0; i < n; ++i)
      std::copy(src.data(), src.data() + src.numel(), pe.data() + i * src.numel());
    parts.emplace_back(std::move(pe), false);
    const auto cs = plan.cell_scales[static_cast<size_t>(level)];
    Tensor cst({n, 2, qh, qw});
    for (int64_t i = 0; i < n; ++i)
      for (int64_t q = 0; q < qh * qw; ++q) {
        cst.data()[(i * 2 + 0) * qh * qw + q] = cs.sh;
        cst.data()[(i * 2 + 1) * qh * qw + q] = cs.sw;
      }
    parts.emplace_back(std::move(cst), false);
  }
  return ad::concat(parts, 1);
}

Tensor upsample_scores(const Tensor& scores, int out_h, int out_w) {
  detail::require(scores.ndim() == 3 && scores.dim(0) == 2, "upsample_scores: expects [2,h,w]");
  if (scores.dim(1) == out_h && scores.dim(2) == out_w) return scores;
  ad::NoGradGuard guard;
  ad::Var v(scores.reshaped({1, 2, scores.dim(1), scores.dim(2)}), false);
  Tensor up = ad::upsample_bilinear(v, out_h, out_w).value().reshaped({2, out_h, out_w});
  for (int64_t i = 0; i < static_cast<int64_t>(out_h) * out_w; ++i) {
    const double a = up[i], b = up[static_cast<int64_t>(out_h) * out_w + i];
    const double s = a + b;
    if (s > 0.0) {
      up[i] = a / s;
      up[static_cast<int64_t>(out_h) * out_w + i] = b / s;
    } else {
      up[i] = 0.5;
      up[static_cast<int64_t>(out_h) * out_w + i] = 0.5;
    }
  }
  return up;
}

Mask predict_mask(const Tensor& scores) {
  detail::require(scores.ndim() == 3 && scores.dim(0) == 2, "predict_mask: expects [2,H,W]");
  const int h = static_cast<int>(scores.dim(1)), w = static_cast<int>(scores.dim(2));
  Mask mask(h, w);
  const int64_t hw = static_cast<int64_t>(h) * w;
  for (int64_t i = 0; i < hw; ++i)
    mask.values[static_cast<size_t>(i)] = scores[hw + i] > scores[i] ? 1 : 0;
  return mask;
}

}  // namespace sili::decoder

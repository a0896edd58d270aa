#include "sili/metrics.hpp"

namespace sili::metrics {

ConfusionCounts confusion(const Mask& pred, const Mask& gt) {
  detail::require(pred.height == gt.height && pred.width == gt.width,
                  "confusion: mask shapes must match");
  ConfusionCounts c;
  const size_t n = pred.values.size();
  for (size_t i = 0; i < n; ++i) {
    const bool p = pred.values[i] != 0;
    const bool g = gt.values[i] != 0;
    if (p && g)
      ++c.tp;
    else if (p && !g)
      ++c.fp;
    else if (!p && g)
      ++c.fn;
    else
      ++c.tn;
  }
  return c;
}

MetricReport report(const ConfusionCounts& c) {
  detail::require(c.total() > 0, "report: empty counts");
  MetricReport r;
  const bool no_positives = c.tp + c.fp == 0 && c.tp + c.fn == 0;
  if (no_positives) {
    r.precision = r.recall = r.f1 = r.iou = 1.0;
  } else {
    r.precision = c.tp + c.fp == 0 ? 0.0
                                   : static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fp);
    r.recall = c.tp + c.fn == 0 ? 0.0
                                : static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fn);
    r.f1 = r.precision + r.recall == 0.0
               ? 0.0
               : 2.0 * r.precision * r.recall / (r.precision + r.recall);
    r.iou = static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fn + c.fp);
  }
  r.oa = static_cast<double>(c.tp + c.tn) / static_cast<double>(c.total());
  return r;
}

MetricReport report_from_rates(double precision, double recall) {
  MetricReport r;
  r.precision = precision;
  r.recall = recall;
  r.f1 = precision + recall == 0.0 ? 0.0 : 2.0 * precision * recall / (precision + recall);
  r.iou = r.f1 == 2.0 ? 1.0 : r.f1 / (2.0 - r.f1);
  r.oa = 0.0;  // not derivable from rates alone
  return r;
}

}  // namespace sili::metrics

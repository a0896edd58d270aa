#pragma once

#include <cstdint>

#include "sili/image.hpp"

namespace sili::metrics {

/// Pixel-level confusion counts for the change class. Counts are a monoid:
/// fieldwise addition accumulates across tiles exactly.
struct ConfusionCounts {
  uint64_t tp = 0;
  uint64_t fp = 0;
  uint64_t fn = 0;
  uint64_t tn = 0;

  ConfusionCounts& operator+=(const ConfusionCounts& o) {
    tp += o.tp;
    fp += o.fp;
    fn += o.fn;
    tn += o.tn;
    return *this;
  }
  uint64_t total() const { return tp + fp + fn + tn; }
};

struct MetricReport {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  double iou = 0.0;
  double oa = 0.0;
};

/// Exact per-pixel counts; masks must have equal shape and {0,1} values.
ConfusionCounts confusion(const Mask& pred, const Mask& gt);

/// Metrics from counts. Degenerate-denominator conventions: with no
/// positives anywhere (tp+fp = tp+fn = 0) precision, recall, f1 and iou are
/// all 1; a single empty denominator with tp = 0 makes that metric 0.
MetricReport report(const ConfusionCounts& c);

/// F1 and IoU implied by a (precision, recall) pair alone:
/// f1 = 2/(recall^-1 + precision^-1), iou = f1/(2 - f1).
MetricReport report_from_rates(double precision, double recall);

}  // namespace sili::metrics

#include "doctest.h"
#include "sili/metrics.hpp"
#include "sili/rng.hpp"

using namespace sili;
using namespace sili::metrics;

namespace {

Mask random_mask(int h, int w, uint64_t seed, double p = 0.5) {
  SplitRng rng(seed);
  Mask m(h, w);
  for (auto& v : m.values) v = rng.bernoulli(p) ? 1 : 0;
  return m;
}

}  // namespace

TEST_CASE("confusion on degenerate masks") {
  Mask ones(8, 8);
  for (auto& v : ones.values) v = 1;
  ConfusionCounts c = confusion(ones, ones);
  CHECK(c.tp == 64);
  CHECK(c.fp == 0);
  CHECK(c.fn == 0);
  CHECK(c.tn == 0);

  Mask zeros(8, 8);
  ConfusionCounts comp = confusion(zeros, ones);
  CHECK(comp.tp == 0);
  CHECK(comp.tn == 0);
  CHECK(comp.fn == 64);
}

TEST_CASE("confusion matches a per-pixel tallying oracle") {
  for (uint64_t seed = 0; seed < 10; ++seed) {
    Mask pred = random_mask(64, 64, seed * 2 + 1);
    Mask gt = random_mask(64, 64, seed * 2 + 2);
    ConfusionCounts c = confusion(pred, gt);
    uint64_t tp = 0, fp = 0, fn = 0, tn = 0;
    for (int y = 0; y < 64; ++y)
      for (int x = 0; x < 64; ++x) {
        const int p = pred.at(y, x), g = gt.at(y, x);
        tp += static_cast<uint64_t>(p == 1 && g == 1);
        fp += static_cast<uint64_t>(p == 1 && g == 0);
        fn += static_cast<uint64_t>(p == 0 && g == 1);
        tn += static_cast<uint64_t>(p == 0 && g == 0);
      }
    CHECK(c.tp == tp);
    CHECK(c.fp == fp);
    CHECK(c.fn == fn);
    CHECK(c.tn == tn);
  }
}

TEST_CASE("confusion rejects shape mismatches") {
  CHECK_THROWS_AS(confusion(Mask(4, 4), Mask(4, 5)), std::invalid_argument);
}

TEST_CASE("counts accumulate additively across tiles") {
  Mask pred = random_mask(32, 32, 7), gt = random_mask(32, 32, 8);
  ConfusionCounts whole = confusion(pred, gt);
  ConfusionCounts acc;
  for (int ty = 0; ty < 2; ++ty)
    for (int tx = 0; tx < 2; ++tx) {
      Mask p(16, 16), g(16, 16);
      for (int y = 0; y < 16; ++y)
        for (int x = 0; x < 16; ++x) {
          p.at(y, x) = pred.at(ty * 16 + y, tx * 16 + x);
          g.at(y, x) = gt.at(ty * 16 + y, tx * 16 + x);
        }
      acc += confusion(p, g);
    }
  CHECK(acc.tp == whole.tp);
  CHECK(acc.fp == whole.fp);
  CHECK(acc.fn == whole.fn);
  CHECK(acc.tn == whole.tn);
}

TEST_CASE("report reproduces the published precision/recall pair") {
  MetricReport r = report_from_rates(0.9055, 0.8630);
  CHECK(r.f1 == doctest::Approx(0.8838).epsilon(0.0002 / 0.8838));
  CHECK(r.iou == doctest::Approx(0.7918).epsilon(0.0005 / 0.7918));
}

TEST_CASE("report on balanced counts") {
  ConfusionCounts c{50, 50, 50, 0};
  MetricReport r = report(c);
  CHECK(r.precision == doctest::Approx(0.5));
  CHECK(r.recall == doctest::Approx(0.5));
  CHECK(r.f1 == doctest::Approx(0.5));
  CHECK(r.iou == doctest::Approx(1.0 / 3));
}

TEST_CASE("empty-positive convention") {
  ConfusionCounts c{0, 0, 0, 100};
  MetricReport r = report(c);
  CHECK(r.precision == 1.0);
  CHECK(r.recall == 1.0);
  CHECK(r.f1 == 1.0);
  CHECK(r.iou == 1.0);
  CHECK(r.oa == 1.0);
}

TEST_CASE("single empty denominator with tp = 0") {
  // no predicted positives but ground truth has them
  MetricReport r = report({0, 0, 10, 90});
  CHECK(r.precision == 0.0);
  CHECK(r.recall == 0.0);
  CHECK(r.f1 == 0.0);
}

TEST_CASE("metric identities hold on random counts") {
  SplitRng rng(99);
  for (int i = 0; i < 200; ++i) {
    ConfusionCounts c{static_cast<uint64_t>(rng.uniform_int(1, 1000)),
                      static_cast<uint64_t>(rng.uniform_int(0, 1000)),
                      static_cast<uint64_t>(rng.uniform_int(0, 1000)),
                      static_cast<uint64_t>(rng.uniform_int(0, 1000))};
    MetricReport r = report(c);
    CHECK(r.f1 <= 2.0 * r.precision + 1e-12);
    CHECK(r.f1 <= 2.0 * r.recall + 1e-12);
    CHECK(r.iou <= r.f1 + 1e-12);
    CHECK(r.iou == doctest::Approx(r.f1 / (2.0 - r.f1)).epsilon(1e-9));
  }
}

#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "sili/checkpoint.hpp"
#include "sili/data.hpp"
#include "sili/metrics.hpp"
#include "sili/model.hpp"

namespace sili::harness {

struct TrainConfig {
  double lr0 = 0.01;
  double momentum = 0.9;
  double weight_decay = 5e-4;
  int epochs = 200;
  int batch_size = 8;
  uint64_t seed = 1;
  std::string out_dir = "runs/run";
  std::string data_root;
  double val_ratio = 0.0;  // 0 -> validate at the training r_d
  model::ModelConfig model;
  synthesis::SynthesisConfig synthesis;
  data::SweepSpec sweep;  // evaluation-time degradation
  bool verbose = true;    // per-epoch stdout lines; the JSONL log always writes
};

/// Strict parse: unknown keys are rejected so config typos cannot silently
/// fall back to defaults. SILI_OUT_DIR overrides out_dir when set.
TrainConfig load_config_file(const std::filesystem::path& path);
TrainConfig config_from_json_text(const std::string& text);
std::string config_to_json_text(const TrainConfig& cfg);

/// Canonical serialization (sorted keys) whose FNV hash identifies the run
/// configuration in checkpoints and result manifests.
std::string canonical_config(const TrainConfig& cfg);
uint64_t config_hash(const TrainConfig& cfg);

/// Mean per-pixel two-class cross entropy from unnormalized HR scores.
ad::Var loss(const ad::Var& hr_logits, const Tensor& targets);

/// Linear decay: lr0 * (1 - step / total_steps).
double lr_schedule(double lr0, int64_t step, int64_t total_steps);

/// Converts a batch of masks into the [N,H,W] class-index tensor the loss
/// consumes.
Tensor mask_targets(const std::vector<const Mask*>& labels);

struct EvalResult {
  double ratio = 1.0;
  metrics::MetricReport report;
  metrics::ConfusionCounts counts;
  int realized_h = 0;
  int realized_w = 0;
};

/// Evaluates one split at a fixed resolution-difference ratio. Equal-size
/// pairs are degraded synthetically at the ratio; pairs already stored
/// cross-resolution are prepared as-is (and degraded further only beyond
/// their intrinsic ratio).
EvalResult evaluate_ratio(model::ChangeModel& model, const data::DatasetLayout& dataset,
                          const std::string& split, double ratio, synthesis::Slot slot);

std::vector<EvalResult> evaluate_sweep(model::ChangeModel& model,
                                       const data::DatasetLayout& dataset,
                                       const std::string& split, const data::SweepSpec& spec);

/// Result CSV: `ratio,precision,recall,f1,iou,oa,n_pixels`, one row per
/// sweep point.
void write_result_csv(const std::filesystem::path& path, const std::vector<EvalResult>& rows);

/// Sidecar manifest with the config hash, seed and realized degraded sizes.
void write_result_manifest(const std::filesystem::path& path, const TrainConfig& cfg,
                           const std::vector<EvalResult>& rows);

struct TrainResult {
  std::filesystem::path best_checkpoint;
  std::filesystem::path last_checkpoint;
  double best_val_f1 = 0.0;
  int best_epoch = -1;
  std::vector<double> step_losses;
  std::vector<double> epoch_mean_losses;
  std::vector<double> epoch_val_f1;
};

/// Full training loop: per-sample synthesis and augmentation, batched
/// forward/backward, SGD with the linear schedule, per-epoch validation,
/// best/last checkpointing and JSON-lines logging. Deterministic for a
/// fixed config: sample randomness is keyed by (seed, epoch, sample index).
/// `stop_after_epoch` caps this session (inclusive epoch index) without
/// changing the configured horizon, for preemptible runs; resume later from
/// last.ckpt.
TrainResult train(const TrainConfig& cfg, const data::DatasetLayout& dataset,
                  const std::optional<std::filesystem::path>& resume_from = std::nullopt,
                  std::optional<int> stop_after_epoch = std::nullopt);

/// Builds the model described by a checkpoint's stored config and loads the
/// weights. Returns the parsed config alongside.
std::pair<std::unique_ptr<model::ChangeModel>, TrainConfig> load_model(
    const std::filesystem::path& ckpt_path);

/// F1-vs-ratio figure (SVG polylines, one per input CSV, legend in input
/// order) plus a merged CSV with a leading source column.
void plot_curve(const std::vector<std::filesystem::path>& csv_paths,
                const std::filesystem::path& out_figure,
                const std::filesystem::path& merged_csv);

/// Training-time input synthesis for one sample: augmentation, resolution
/// synthesis, and the edge input (when the model wants it).
struct PreparedSample {
  ImageTensor pre, post;
  Mask label;
  Tensor x0;  // empty when edges are unused
};
PreparedSample prepare_training_sample(const synthesis::BitemporalSample& raw,
                                       const TrainConfig& cfg, SplitRng& rng);

}  // namespace sili::harness

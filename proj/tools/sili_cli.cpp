#include <cstdio>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "sili/decoder.hpp"
#include "sili/harness.hpp"
#include "sili/png_io.hpp"

namespace fs = std::filesystem;
using namespace sili;

namespace {

int cmd_prepare(const std::string& src, const std::string& out, int tile_size, int synthetic,
                int size, uint64_t seed) {
  if (synthetic > 0) {
    data::FixtureConfig cfg;
    cfg.tiles = synthetic;
    cfg.size = size;
    cfg.seed = seed;
    data::write_fixture_dataset(out, cfg);
    std::printf("wrote %d synthetic tiles (%dx%d) to %s\n", cfg.tiles, cfg.size, cfg.size,
                out.c_str());
    return 0;
  }
  if (src.empty()) {
    std::fprintf(stderr, "prepare: either --src or --synthetic is required\n");
    return 2;
  }
  data::TileReport report = data::tile_dataset(src, out, tile_size);
  std::printf("wrote %d tiles to %s (%d undersized sources skipped)\n", report.tiles_written,
              out.c_str(), report.sources_skipped);
  return 0;
}

int cmd_train(const std::string& config_path, const std::string& resume) {
  harness::TrainConfig cfg = harness::load_config_file(config_path);
  data::DatasetLayout dataset = data::DatasetLayout::scan(cfg.data_root);
  std::optional<fs::path> resume_from;
  if (!resume.empty()) resume_from = fs::path(resume);
  harness::TrainResult result = harness::train(cfg, dataset, resume_from);
  std::printf("best val F1 %.4f at epoch %d; checkpoints in %s\n", result.best_val_f1,
              result.best_epoch, cfg.out_dir.c_str());
  return 0;
}

// the optional --config cross-check refuses checkpoints trained under a
// different configuration
harness::TrainConfig load_checked(const std::string& ckpt, const std::string& config_path,
                                  std::unique_ptr<model::ChangeModel>& model) {
  auto [m, cfg] = harness::load_model(ckpt);
  if (!config_path.empty()) {
    harness::TrainConfig provided = harness::load_config_file(config_path);
    const uint64_t stored = harness::config_hash(cfg), given = harness::config_hash(provided);
    if (stored != given)
      throw std::runtime_error("checkpoint was trained under a different config (hash " +
                               std::to_string(stored) + " vs " + std::to_string(given) +
                               "); refusing to evaluate");
  }
  model = std::move(m);
  return cfg;
}

int cmd_eval(const std::string& ckpt, const std::string& config_path, const std::string& data,
             const std::string& split, double ratio, const std::string& slot,
             const std::string& out_csv) {
  std::unique_ptr<model::ChangeModel> model;
  harness::TrainConfig cfg = load_checked(ckpt, config_path, model);
  if (!data.empty()) cfg.data_root = data;
  data::DatasetLayout dataset = data::DatasetLayout::scan(cfg.data_root);
  const synthesis::Slot s = slot == "pre" ? synthesis::Slot::pre : synthesis::Slot::post;
  harness::EvalResult r = harness::evaluate_ratio(*model, dataset, split, ratio, s);
  std::printf("ratio %.3g  precision %.4f  recall %.4f  f1 %.4f  iou %.4f  oa %.4f\n", r.ratio,
              r.report.precision, r.report.recall, r.report.f1, r.report.iou, r.report.oa);
  if (!out_csv.empty()) {
    harness::write_result_csv(out_csv, {r});
    harness::write_result_manifest(fs::path(out_csv).replace_extension(".manifest.json"), cfg,
                                   {r});
  }
  return 0;
}

int cmd_sweep(const std::string& ckpt, const std::string& config_path, const std::string& data,
              const std::string& split, const std::vector<double>& ratios,
              const std::string& slot, const std::string& out_csv, const std::string& fig) {
  std::unique_ptr<model::ChangeModel> model;
  harness::TrainConfig cfg = load_checked(ckpt, config_path, model);
  if (!data.empty()) cfg.data_root = data;
  data::DatasetLayout dataset = data::DatasetLayout::scan(cfg.data_root);
  data::SweepSpec spec;
  if (!ratios.empty()) spec.ratios = ratios;
  spec.degraded_slot = slot == "pre" ? synthesis::Slot::pre : synthesis::Slot::post;
  std::vector<harness::EvalResult> rows = harness::evaluate_sweep(*model, dataset, split, spec);
  for (const auto& r : rows)
    std::printf("ratio %.3g  f1 %.4f  iou %.4f\n", r.ratio, r.report.f1, r.report.iou);
  harness::write_result_csv(out_csv, rows);
  harness::write_result_manifest(fs::path(out_csv).replace_extension(".manifest.json"), cfg,
                                 rows);
  if (!fig.empty())
    harness::plot_curve({out_csv}, fig, fs::path(fig).replace_extension(".merged.csv"));
  return 0;
}

int cmd_infer(const std::string& ckpt, const std::string& pre_path, const std::string& post_path,
              const std::string& out_path) {
  std::unique_ptr<model::ChangeModel> model;
  load_checked(ckpt, "", model);
  synthesis::BitemporalSample sample;
  sample.pre = png_io::read_image(pre_path);
  sample.post = png_io::read_image(post_path);
  sample.label = Mask(std::max(sample.pre.height, sample.post.height),
                      std::max(sample.pre.width, sample.post.width));
  synthesis::BitemporalSample prepared = synthesis::prepare_inference_pair(sample);
  Tensor scores = model->forward_scores(prepared.pre, prepared.post);
  Mask mask = decoder::predict_mask(scores);
  png_io::write_mask(out_path, mask);
  uint64_t changed = 0;
  for (auto v : mask.values) changed += v;
  std::printf("wrote %s (%llu changed pixels of %zu)\n", out_path.c_str(),
              static_cast<unsigned long long>(changed), mask.values.size());
  return 0;
}

int cmd_plot(const std::vector<std::string>& csvs, const std::string& out_fig,
             const std::string& merged) {
  std::vector<fs::path> paths(csvs.begin(), csvs.end());
  const fs::path merged_path =
      merged.empty() ? fs::path(out_fig).replace_extension(".merged.csv") : fs::path(merged);
  harness::plot_curve(paths, out_fig, merged_path);
  std::printf("wrote %s and %s\n", out_fig.c_str(), merged_path.string().c_str());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"sili: continuous cross-resolution change detection"};
  app.require_subcommand(1);

  auto* prepare = app.add_subcommand("prepare", "tile a source dataset or generate the synthetic fixture");
  std::string prep_src, prep_out;
  int prep_tile = 256, prep_synth = 0, prep_size = 64;
  uint64_t prep_seed = 7;
  prepare->add_option("--src", prep_src, "source dataset root (A/, B/, label/, split lists)");
  prepare->add_option("--out", prep_out, "output dataset root")->required();
  prepare->add_option("--tile-size", prep_tile, "tile side in pixels")->check(CLI::PositiveNumber);
  prepare->add_option("--synthetic", prep_synth, "generate N synthetic tiles instead of tiling");
  prepare->add_option("--size", prep_size, "synthetic tile side in pixels");
  prepare->add_option("--seed", prep_seed, "synthetic generator seed");

  auto* train = app.add_subcommand("train", "train a model from a config file");
  std::string train_config, train_resume;
  train->add_option("--config", train_config, "JSON config file")->required();
  train->add_option("--resume", train_resume, "checkpoint to resume from");

  auto* eval = app.add_subcommand("eval", "evaluate a checkpoint at one ratio");
  std::string eval_ckpt, eval_config, eval_data, eval_split = "test", eval_slot = "post",
              eval_csv;
  double eval_ratio = 1.0;
  eval->add_option("--ckpt", eval_ckpt)->required();
  eval->add_option("--config", eval_config, "optional config cross-check");
  eval->add_option("--data", eval_data, "override dataset root");
  eval->add_option("--split", eval_split);
  eval->add_option("--ratio", eval_ratio)->check(CLI::Range(1.0, 64.0));
  eval->add_option("--slot", eval_slot)->check(CLI::IsMember({"pre", "post"}));
  eval->add_option("--out", eval_csv, "result CSV path");

  auto* sweep = app.add_subcommand("sweep", "evaluate a checkpoint across ratios");
  std::string sweep_ckpt, sweep_config, sweep_data, sweep_split = "test", sweep_slot = "post",
              sweep_csv, sweep_fig;
  std::vector<double> sweep_ratios;
  sweep->add_option("--ckpt", sweep_ckpt)->required();
  sweep->add_option("--config", sweep_config, "optional config cross-check");
  sweep->add_option("--data", sweep_data, "override dataset root");
  sweep->add_option("--split", sweep_split);
  sweep->add_option("--ratios", sweep_ratios, "comma-separated ratio list")->delimiter(',');
  sweep->add_option("--slot", sweep_slot)->check(CLI::IsMember({"pre", "post"}));
  sweep->add_option("--out", sweep_csv, "result CSV path")->required();
  sweep->add_option("--fig", sweep_fig, "optional SVG figure path");

  auto* infer = app.add_subcommand("infer", "predict a change mask for one image pair");
  std::string infer_ckpt, infer_pre, infer_post, infer_out;
  infer->add_option("--ckpt", infer_ckpt)->required();
  infer->add_option("--pre", infer_pre)->required();
  infer->add_option("--post", infer_post)->required();
  infer->add_option("--out", infer_out)->required();

  auto* plot = app.add_subcommand("plot", "F1-vs-ratio figure from result CSVs");
  std::vector<std::string> plot_csvs;
  std::string plot_out, plot_merged;
  plot->add_option("--csv", plot_csvs, "result CSV (repeatable)")->required();
  plot->add_option("--out", plot_out, "output SVG")->required();
  plot->add_option("--merged", plot_merged, "merged CSV path");

  CLI11_PARSE(app, argc, argv);

  try {
    if (prepare->parsed())
      return cmd_prepare(prep_src, prep_out, prep_tile, prep_synth, prep_size, prep_seed);
    if (train->parsed()) return cmd_train(train_config, train_resume);
    if (eval->parsed())
      return cmd_eval(eval_ckpt, eval_config, eval_data, eval_split, eval_ratio, eval_slot,
                      eval_csv);
    if (sweep->parsed())
      return cmd_sweep(sweep_ckpt, sweep_config, sweep_data, sweep_split, sweep_ratios,
                       sweep_slot, sweep_csv, sweep_fig);
    if (infer->parsed()) return cmd_infer(infer_ckpt, infer_pre, infer_post, infer_out);
    if (plot->parsed()) return cmd_plot(plot_csvs, plot_out, plot_merged);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}

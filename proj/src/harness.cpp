#include "sili/harness.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <map>
#include <sstream>

#include "json.hpp"
#include "sili/decoder.hpp"

namespace sili::harness {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

void reject_unknown_keys(const json& j, std::initializer_list<const char*> known,
                         const std::string& where) {
  for (const auto& [key, value] : j.items()) {
    bool ok = false;
    for (const char* k : known) ok = ok || key == k;
    if (!ok) throw std::runtime_error("config: unknown key '" + key + "' in " + where);
  }
}

synthesis::Slot slot_from_string(const std::string& s, const std::string& where) {
  if (s == "pre") return synthesis::Slot::pre;
  if (s == "post") return synthesis::Slot::post;
  throw std::runtime_error("config: bad slot '" + s + "' in " + where);
}

std::string slot_to_string(synthesis::Slot s) {
  return s == synthesis::Slot::pre ? "pre" : "post";
}

}  // namespace

TrainConfig config_from_json_text(const std::string& text) {
  const json j = json::parse(text);
  TrainConfig cfg;
  reject_unknown_keys(j,
                      {"lr0", "momentum", "weight_decay", "epochs", "batch_size", "seed",
                       "out_dir", "data_root", "val_ratio", "model", "synthesis", "sweep"},
                      "top level");
  cfg.lr0 = j.value("lr0", cfg.lr0);
  cfg.momentum = j.value("momentum", cfg.momentum);
  cfg.weight_decay = j.value("weight_decay", cfg.weight_decay);
  cfg.epochs = j.value("epochs", cfg.epochs);
  cfg.batch_size = j.value("batch_size", cfg.batch_size);
  cfg.seed = j.value("seed", cfg.seed);
  cfg.out_dir = j.value("out_dir", cfg.out_dir);
  cfg.data_root = j.value("data_root", cfg.data_root);
  cfg.val_ratio = j.value("val_ratio", cfg.val_ratio);
  detail::require(cfg.lr0 > 0 && cfg.momentum >= 0 && cfg.weight_decay >= 0 && cfg.epochs >= 1 &&
                      cfg.batch_size >= 1,
                  "config: hyperparameters out of range");

  if (j.contains("model")) {
    const json& m = j.at("model");
    reject_unknown_keys(m,
                        {"variant", "backbone", "ds", "edge_clues", "edges_see_swapped",
                         "interaction_enabled", "interaction", "canny", "backbone_weights"},
                        "model");
    const std::string variant = m.value("variant", std::string("sili"));
    if (variant == "sili")
      cfg.model.variant = model::Variant::sili;
    else if (variant == "base")
      cfg.model.variant = model::Variant::base;
    else
      throw std::runtime_error("config: unknown model variant '" + variant + "'");
    const std::string backbone = m.value("backbone", std::string("reference"));
    if (backbone == "reference")
      cfg.model.backbone = encoder::BackboneKind::reference;
    else if (backbone == "tiny")
      cfg.model.backbone = encoder::BackboneKind::tiny;
    else
      throw std::runtime_error("config: unknown backbone '" + backbone + "'");
    cfg.model.ds = m.value("ds", cfg.model.ds);
    cfg.model.edge_clues = m.value("edge_clues", cfg.model.edge_clues);
    cfg.model.edges_see_swapped = m.value("edges_see_swapped", cfg.model.edges_see_swapped);
    cfg.model.interaction_enabled = m.value("interaction_enabled", cfg.model.interaction_enabled);
    cfg.model.backbone_weights = m.value("backbone_weights", cfg.model.backbone_weights);
    if (m.contains("interaction")) {
      const json& i = m.at("interaction");
      reject_unknown_keys(i,
                          {"window_size", "levels", "n_layers", "heads", "embed_dropout",
                           "non_local", "input_size"},
                          "model.interaction");
      auto& ic = cfg.model.interaction;
      ic.window_size = i.value("window_size", ic.window_size);
      if (i.contains("levels")) ic.levels = i.at("levels").get<std::vector<int>>();
      ic.n_layers = i.value("n_layers", ic.n_layers);
      ic.heads = i.value("heads", ic.heads);
      ic.embed_dropout = i.value("embed_dropout", ic.embed_dropout);
      ic.non_local = i.value("non_local", ic.non_local);
      ic.input_size = i.value("input_size", ic.input_size);
    }
    if (m.contains("canny")) {
      const json& c = m.at("canny");
      reject_unknown_keys(
          c, {"mode", "sigma", "low_percentile", "high_percentile", "fixed_low", "fixed_high"},
          "model.canny");
      auto& cc = cfg.model.canny;
      const std::string mode = c.value("mode", std::string("percentile"));
      if (mode == "percentile")
        cc.mode = edges::CannyConfig::ThresholdMode::percentile;
      else if (mode == "fixed")
        cc.mode = edges::CannyConfig::ThresholdMode::fixed;
      else
        throw std::runtime_error("config: unknown canny mode '" + mode + "'");
      cc.gaussian_sigma = c.value("sigma", cc.gaussian_sigma);
      cc.low_percentile = c.value("low_percentile", cc.low_percentile);
      cc.high_percentile = c.value("high_percentile", cc.high_percentile);
      cc.fixed_low = c.value("fixed_low", cc.fixed_low);
      cc.fixed_high = c.value("fixed_high", cc.fixed_high);
    }
  }
  cfg.model.init_seed = cfg.seed;

  if (j.contains("synthesis")) {
    const json& s = j.at("synthesis");
    reject_unknown_keys(s,
                        {"r_d", "crop_size", "rrs_enabled", "swap_enabled", "flip_prob",
                         "blur_prob", "blur_sigma_min", "blur_sigma_max", "degraded_slot"},
                        "synthesis");
    auto& sc = cfg.synthesis;
    sc.r_d = s.value("r_d", sc.r_d);
    sc.crop_size = s.value("crop_size", sc.crop_size);
    sc.rrs_enabled = s.value("rrs_enabled", sc.rrs_enabled);
    sc.swap_enabled = s.value("swap_enabled", sc.swap_enabled);
    sc.flip_prob = s.value("flip_prob", sc.flip_prob);
    sc.blur_prob = s.value("blur_prob", sc.blur_prob);
    sc.blur_sigma_min = s.value("blur_sigma_min", sc.blur_sigma_min);
    sc.blur_sigma_max = s.value("blur_sigma_max", sc.blur_sigma_max);
    if (s.contains("degraded_slot"))
      sc.degraded_slot = slot_from_string(s.at("degraded_slot").get<std::string>(), "synthesis");
    detail::require(sc.r_d >= 1.0 && sc.flip_prob >= 0 && sc.flip_prob <= 1 &&
                        sc.blur_prob >= 0 && sc.blur_prob <= 1,
                    "config: synthesis values out of range");
  }
  cfg.synthesis.seed = cfg.seed;

  if (j.contains("sweep")) {
    const json& s = j.at("sweep");
    reject_unknown_keys(s, {"ratios", "degraded_slot"}, "sweep");
    if (s.contains("ratios")) cfg.sweep.ratios = s.at("ratios").get<std::vector<double>>();
    if (s.contains("degraded_slot"))
      cfg.sweep.degraded_slot = slot_from_string(s.at("degraded_slot").get<std::string>(), "sweep");
  }
  return cfg;
}

TrainConfig load_config_file(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("config: cannot open " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  TrainConfig cfg = config_from_json_text(ss.str());
  if (const char* override_dir = std::getenv("SILI_OUT_DIR"))
    if (*override_dir) cfg.out_dir = override_dir;
  return cfg;
}

std::string config_to_json_text(const TrainConfig& cfg) {
  json j;
  j["lr0"] = cfg.lr0;
  j["momentum"] = cfg.momentum;
  j["weight_decay"] = cfg.weight_decay;
  j["epochs"] = cfg.epochs;
  j["batch_size"] = cfg.batch_size;
  j["seed"] = cfg.seed;
  j["out_dir"] = cfg.out_dir;
  j["data_root"] = cfg.data_root;
  j["val_ratio"] = cfg.val_ratio;
  json m;
  m["variant"] = cfg.model.variant == model::Variant::sili ? "sili" : "base";
  m["backbone"] = cfg.model.backbone == encoder::BackboneKind::reference ? "reference" : "tiny";
  m["ds"] = cfg.model.ds;
  m["edge_clues"] = cfg.model.edge_clues;
  m["edges_see_swapped"] = cfg.model.edges_see_swapped;
  m["interaction_enabled"] = cfg.model.interaction_enabled;
  m["backbone_weights"] = cfg.model.backbone_weights;
  json i;
  i["window_size"] = cfg.model.interaction.window_size;
  i["levels"] = cfg.model.interaction.levels;
  i["n_layers"] = cfg.model.interaction.n_layers;
  i["heads"] = cfg.model.interaction.heads;
  i["embed_dropout"] = cfg.model.interaction.embed_dropout;
  i["non_local"] = cfg.model.interaction.non_local;
  i["input_size"] = cfg.model.interaction.input_size;
  m["interaction"] = i;
  json c;
  c["mode"] = cfg.model.canny.mode == edges::CannyConfig::ThresholdMode::percentile
                  ? "percentile"
                  : "fixed";
  c["sigma"] = cfg.model.canny.gaussian_sigma;
  c["low_percentile"] = cfg.model.canny.low_percentile;
  c["high_percentile"] = cfg.model.canny.high_percentile;
  c["fixed_low"] = cfg.model.canny.fixed_low;
  c["fixed_high"] = cfg.model.canny.fixed_high;
  m["canny"] = c;
  j["model"] = m;
  json s;
  s["r_d"] = cfg.synthesis.r_d;
  s["crop_size"] = cfg.synthesis.crop_size;
  s["rrs_enabled"] = cfg.synthesis.rrs_enabled;
  s["swap_enabled"] = cfg.synthesis.swap_enabled;
  s["flip_prob"] = cfg.synthesis.flip_prob;
  s["blur_prob"] = cfg.synthesis.blur_prob;
  s["blur_sigma_min"] = cfg.synthesis.blur_sigma_min;
  s["blur_sigma_max"] = cfg.synthesis.blur_sigma_max;
  s["degraded_slot"] = slot_to_string(cfg.synthesis.degraded_slot);
  j["synthesis"] = s;
  json w;
  w["ratios"] = cfg.sweep.ratios;
  w["degraded_slot"] = slot_to_string(cfg.sweep.degraded_slot);
  j["sweep"] = w;
  return j.dump(2);
}

std::string canonical_config(const TrainConfig& cfg) {
  return json::parse(config_to_json_text(cfg)).dump();  // sorted keys, no whitespace
}

uint64_t config_hash(const TrainConfig& cfg) {
  return checkpoint::hash_string(canonical_config(cfg));
}

ad::Var loss(const ad::Var& hr_logits, const Tensor& targets) {
  return ad::cross_entropy_logits(hr_logits, targets);
}

double lr_schedule(double lr0, int64_t step, int64_t total_steps) {
  detail::require(step >= 0 && step <= total_steps, "lr_schedule: step out of range");
  return lr0 * (1.0 - static_cast<double>(step) / static_cast<double>(total_steps));
}

Tensor mask_targets(const std::vector<const Mask*>& labels) {
  detail::require(!labels.empty(), "mask_targets: empty batch");
  const int h = labels[0]->height, w = labels[0]->width;
  Tensor t({static_cast<int64_t>(labels.size()), h, w});
  for (size_t i = 0; i < labels.size(); ++i)
    for (int64_t p = 0; p < static_cast<int64_t>(h) * w; ++p)
      t[static_cast<int64_t>(i) * h * w + p] = labels[i]->values[static_cast<size_t>(p)] ? 1.0 : 0.0;
  return t;
}

PreparedSample prepare_training_sample(const synthesis::BitemporalSample& raw,
                                       const TrainConfig& cfg, SplitRng& rng) {
  synthesis::BitemporalSample augmented = synthesis::augment(raw, cfg.synthesis, rng);
  synthesis::SynthesisOutcome outcome =
      synthesis::synthesize_training_pair(augmented, cfg.synthesis, rng);
  PreparedSample out;
  out.pre = std::move(outcome.sample.pre);
  out.post = std::move(outcome.sample.post);
  out.label = std::move(outcome.sample.label);
  if (cfg.model.variant == model::Variant::sili && cfg.model.edge_clues) {
    const bool post_is_lr = cfg.synthesis.degraded_slot == synthesis::Slot::post;
    const ImageTensor& hr_s = post_is_lr ? out.pre : out.post;
    const ImageTensor& lr_arg = cfg.model.edges_see_swapped
                                    ? (post_is_lr ? out.post : out.pre)
                                    : outcome.lr_u;
    out.x0 = edges::edge_clues(hr_s, lr_arg, cfg.model.canny);
  }
  return out;
}

EvalResult evaluate_ratio(model::ChangeModel& model, const data::DatasetLayout& dataset,
                          const std::string& split, double ratio, synthesis::Slot slot) {
  detail::require(ratio >= 1.0, "evaluate: ratio must be >= 1");
  const auto& stems = dataset.split(split);
  detail::require(!stems.empty(), "evaluate: empty split " + split);
  model.set_training(false);
  EvalResult result;
  result.ratio = ratio;
  for (const std::string& stem : stems) {
    synthesis::BitemporalSample sample = dataset.load(stem);
    const bool equal_size = sample.pre.height == sample.post.height &&
                            sample.pre.width == sample.post.width;
    if (equal_size) {
      data::SweepSample sw = data::degrade_at_ratio(sample, ratio, slot);
      if (result.realized_h == 0) {
        result.realized_h = sw.realized_h;
        result.realized_w = sw.realized_w;
      }
      sample = std::move(sw.sample);
    } else if (ratio > sample.ratio * 1.01) {
      // degrade the LR slot beyond its intrinsic ratio
      const synthesis::Slot lr_slot = sample.post.height < sample.pre.height
                                          ? synthesis::Slot::post
                                          : synthesis::Slot::pre;
      data::SweepSample sw = data::degrade_at_ratio(sample, ratio / sample.ratio, lr_slot);
      sample = std::move(sw.sample);
    }
    synthesis::BitemporalSample prepared = synthesis::prepare_inference_pair(sample);
    Tensor scores = model.forward_scores(prepared.pre, prepared.post);
    Mask predicted = decoder::predict_mask(scores);
    result.counts += metrics::confusion(predicted, prepared.label);
  }
  result.report = metrics::report(result.counts);
  return result;
}

std::vector<EvalResult> evaluate_sweep(model::ChangeModel& model,
                                       const data::DatasetLayout& dataset,
                                       const std::string& split, const data::SweepSpec& spec) {
  detail::require(!spec.ratios.empty(), "sweep: empty ratio list");
  for (size_t i = 1; i < spec.ratios.size(); ++i)
    detail::require(spec.ratios[i] > spec.ratios[i - 1], "sweep: ratios must increase");
  std::vector<EvalResult> rows;
  for (double r : spec.ratios)
    rows.push_back(evaluate_ratio(model, dataset, split, r, spec.degraded_slot));
  return rows;
}

void write_result_csv(const fs::path& path, const std::vector<EvalResult>& rows) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("csv: cannot create " + path.string());
  out << "ratio,precision,recall,f1,iou,oa,n_pixels\n";
  char buf[256];
  for (const EvalResult& r : rows) {
    std::snprintf(buf, sizeof buf, "%.10g,%.10g,%.10g,%.10g,%.10g,%.10g,%llu\n", r.ratio,
                  r.report.precision, r.report.recall, r.report.f1, r.report.iou, r.report.oa,
                  static_cast<unsigned long long>(r.counts.total()));
    out << buf;
  }
}

void write_result_manifest(const fs::path& path, const TrainConfig& cfg,
                           const std::vector<EvalResult>& rows) {
  json j;
  j["config_hash"] = config_hash(cfg);
  j["seed"] = cfg.seed;
  j["zero_denominator_convention"] =
      "no positives anywhere -> precision/recall/f1/iou = 1; single empty denominator with tp=0 -> 0";
  json ratios = json::array();
  for (const EvalResult& r : rows) {
    json e;
    e["ratio"] = r.ratio;
    e["realized_h"] = r.realized_h;
    e["realized_w"] = r.realized_w;
    ratios.push_back(e);
  }
  j["ratios"] = ratios;
  std::ofstream out(path);
  out << j.dump(2) << "\n";
}

namespace {

checkpoint::Manifest make_manifest(const TrainConfig& cfg, int epoch, double best_val_f1) {
  checkpoint::Manifest m;
  m.config_json = canonical_config(cfg);
  m.config_hash = config_hash(cfg);
  m.epoch = epoch;
  m.best_val_f1 = best_val_f1;
  return m;
}

// Startup validation: the first training tile must satisfy every geometric
// constraint of the configuration before any compute is spent.
void validate_startup(const TrainConfig& cfg, const data::DatasetLayout& dataset) {
  detail::require(!dataset.train.empty() && !dataset.val.empty(),
                  "train: dataset needs non-empty train and val splits");
  synthesis::BitemporalSample first = dataset.load(dataset.train.front());
  const int h = std::max(first.pre.height, first.post.height);
  const int w = std::max(first.pre.width, first.post.width);
  detail::require(h % 32 == 0 && w % 32 == 0, "train: tile size must divide by 32");
  detail::require(h % cfg.model.ds == 0 && w % cfg.model.ds == 0,
                  "train: ds must divide the tile size");
  if (cfg.synthesis.swap_enabled)
    detail::require(cfg.synthesis.crop_size >= 1 && cfg.synthesis.crop_size <= std::min(h, w),
                    "train: crop_size must fit the tile");
  if (cfg.model.variant == model::Variant::sili && cfg.model.interaction_enabled &&
      !cfg.model.interaction.non_local) {
    for (int level : cfg.model.interaction.levels) {
      const int side = h >> (level + 1);
      detail::require(side % cfg.model.interaction.window_size == 0,
                      "train: interaction level " + std::to_string(level) +
                          " size does not divide by the window size");
    }
  }
}

}  // namespace

TrainResult train(const TrainConfig& cfg, const data::DatasetLayout& dataset,
                  const std::optional<fs::path>& resume_from,
                  std::optional<int> stop_after_epoch) {
  validate_startup(cfg, dataset);
  fs::create_directories(cfg.out_dir);

  model::ChangeModel model(cfg.model);
  if (!cfg.model.backbone_weights.empty())
    checkpoint::load_prefix(cfg.model.backbone_weights, model.params(), "backbone.");
  nn::Sgd opt;
  opt.momentum = cfg.momentum;
  opt.weight_decay = cfg.weight_decay;

  int start_epoch = 0;
  double best_f1 = -1.0;
  int best_epoch = -1;
  if (resume_from) {
    checkpoint::Manifest m = checkpoint::load(*resume_from, model.params(), &opt);
    if (m.config_hash != config_hash(cfg))
      throw std::runtime_error("resume: checkpoint config hash does not match this config");
    start_epoch = m.epoch + 1;
    best_f1 = m.best_val_f1;
  }

  const int64_t n_train = static_cast<int64_t>(dataset.train.size());
  const int64_t steps_per_epoch = (n_train + cfg.batch_size - 1) / cfg.batch_size;
  const int64_t total_steps = static_cast<int64_t>(cfg.epochs) * steps_per_epoch;

  // Tiles are decoded once when the dataset is small enough to hold.
  std::map<std::string, synthesis::BitemporalSample> cache;
  auto load_sample = [&](const std::string& stem) -> synthesis::BitemporalSample {
    if (dataset.train.size() <= 256) {
      auto it = cache.find(stem);
      if (it == cache.end()) it = cache.emplace(stem, dataset.load(stem)).first;
      return it->second;
    }
    return dataset.load(stem);
  };

  const fs::path best_path = fs::path(cfg.out_dir) / "best.ckpt";
  const fs::path last_path = fs::path(cfg.out_dir) / "last.ckpt";
  std::ofstream log(fs::path(cfg.out_dir) / "train_log.jsonl",
                    resume_from ? std::ios::app : std::ios::trunc);

  TrainResult result;
  result.best_checkpoint = best_path;
  result.last_checkpoint = last_path;
  result.best_val_f1 = best_f1;
  result.best_epoch = best_epoch;

  const double val_ratio = cfg.val_ratio > 0 ? cfg.val_ratio : cfg.synthesis.r_d;
  for (int epoch = start_epoch; epoch < cfg.epochs; ++epoch) {
    model.set_training(true);
    const auto epoch_batches =
        data::batches(n_train, cfg.batch_size, cfg.seed, epoch);
    double loss_sum = 0.0;
    double lr = cfg.lr0;
    int64_t batch_index = 0;
    for (const auto& batch : epoch_batches) {
      std::vector<PreparedSample> prepared;
      prepared.reserve(batch.size());
      for (int64_t idx : batch) {
        SplitRng rng(cfg.seed, static_cast<uint64_t>(epoch),
                     static_cast<uint64_t>(idx) + 1);
        prepared.push_back(
            prepare_training_sample(load_sample(dataset.train[static_cast<size_t>(idx)]), cfg, rng));
      }
      std::vector<const ImageTensor*> pres, posts;
      std::vector<const Mask*> labels;
      for (const PreparedSample& p : prepared) {
        pres.push_back(&p.pre);
        posts.push_back(&p.post);
        labels.push_back(&p.label);
      }
      ad::Var pre_v(model::batch_images(pres), false);
      ad::Var post_v(model::batch_images(posts), false);
      ad::Var x0;
      if (cfg.model.variant == model::Variant::sili && cfg.model.edge_clues) {
        const int h = prepared[0].pre.height, w = prepared[0].pre.width;
        Tensor x0_batch({static_cast<int64_t>(prepared.size()), 3, h, w});
        for (size_t i = 0; i < prepared.size(); ++i)
          std::copy(prepared[i].x0.data(), prepared[i].x0.data() + prepared[i].x0.numel(),
                    x0_batch.data() + static_cast<int64_t>(i) * prepared[i].x0.numel());
        x0 = ad::Var(std::move(x0_batch), false);
      }

      ad::Var logits = model.forward_logits_hr(pre_v, post_v, x0);
      ad::Var batch_loss = loss(logits, mask_targets(labels));
      const double loss_value = batch_loss.value()[0];
      if (!std::isfinite(loss_value))
        throw std::runtime_error("train: non-finite loss at epoch " + std::to_string(epoch));
      model.params().zero_grad();
      ad::backward(batch_loss);
      const int64_t step = static_cast<int64_t>(epoch) * steps_per_epoch + batch_index;
      lr = lr_schedule(cfg.lr0, step, total_steps);
      opt.step(model.params(), lr);
      loss_sum += loss_value;
      result.step_losses.push_back(loss_value);
      ++batch_index;
    }
    const double mean_loss = loss_sum / static_cast<double>(epoch_batches.size());
    result.epoch_mean_losses.push_back(mean_loss);

    EvalResult val = evaluate_ratio(model, dataset, "val", val_ratio, cfg.sweep.degraded_slot);
    result.epoch_val_f1.push_back(val.report.f1);

    json line;
    line["epoch"] = epoch;
    line["mean_loss"] = mean_loss;
    line["lr"] = lr;
    line["val_f1"] = val.report.f1;
    line["val_precision"] = val.report.precision;
    line["val_recall"] = val.report.recall;
    line["val_iou"] = val.report.iou;
    line["val_oa"] = val.report.oa;
    log << line.dump() << "\n";
    log.flush();
    if (cfg.verbose) {
      std::printf("epoch %3d  loss %.6f  lr %.6f  val_f1 %.4f\n", epoch, mean_loss, lr,
                  val.report.f1);
      std::fflush(stdout);
    }

    if (val.report.f1 > best_f1) {
      best_f1 = val.report.f1;
      best_epoch = epoch;
      checkpoint::save(best_path, model.params(), &opt, make_manifest(cfg, epoch, best_f1));
    }
    checkpoint::save(last_path, model.params(), &opt, make_manifest(cfg, epoch, best_f1));
    if (stop_after_epoch && epoch >= *stop_after_epoch) break;
  }
  result.best_val_f1 = best_f1;
  result.best_epoch = best_epoch;
  return result;
}

std::pair<std::unique_ptr<model::ChangeModel>, TrainConfig> load_model(const fs::path& ckpt_path) {
  checkpoint::Manifest manifest = checkpoint::peek(ckpt_path);
  TrainConfig cfg = config_from_json_text(manifest.config_json);
  auto model = std::make_unique<model::ChangeModel>(cfg.model);
  checkpoint::load(ckpt_path, model->params(), nullptr);
  return {std::move(model), cfg};
}

namespace {

struct CurvePoint {
  double ratio, f1;
  std::string rest;  // remaining columns for the merged CSV
};

std::vector<CurvePoint> parse_result_csv(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("plot: cannot open " + path.string());
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error("plot: empty file " + path.string());
  if (line.rfind("ratio,", 0) != 0)
    throw std::runtime_error("plot: bad header in " + path.string() + " at row 1");
  std::vector<CurvePoint> points;
  int row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (line.empty()) continue;
    CurvePoint p;
    char* end = nullptr;
    p.ratio = std::strtod(line.c_str(), &end);
    if (end == line.c_str() || *end != ',')
      throw std::runtime_error("plot: malformed ratio in " + path.string() + " at row " +
                               std::to_string(row));
    const char* f1_start = end + 1;
    for (int skip = 0; skip < 2; ++skip) {
      f1_start = std::strchr(f1_start, ',');
      if (!f1_start)
        throw std::runtime_error("plot: missing columns in " + path.string() + " at row " +
                                 std::to_string(row));
      ++f1_start;
    }
    char* f1_end = nullptr;
    p.f1 = std::strtod(f1_start, &f1_end);
    if (f1_end == f1_start)
      throw std::runtime_error("plot: malformed f1 in " + path.string() + " at row " +
                               std::to_string(row));
    p.rest = line.substr(static_cast<size_t>(end - line.c_str()) + 1);
    points.push_back(p);
  }
  if (points.empty())
    throw std::runtime_error("plot: no data rows in " + path.string());
  return points;
}

}  // namespace

void plot_curve(const std::vector<fs::path>& csv_paths, const fs::path& out_figure,
                const fs::path& merged_csv) {
  detail::require(!csv_paths.empty(), "plot: no input CSVs");
  std::vector<std::vector<CurvePoint>> curves;
  for (const fs::path& p : csv_paths) curves.push_back(parse_result_csv(p));

  double min_ratio = 1e300, max_ratio = -1e300;
  for (const auto& curve : curves)
    for (const auto& p : curve) {
      min_ratio = std::min(min_ratio, p.ratio);
      max_ratio = std::max(max_ratio, p.ratio);
    }
  if (max_ratio <= min_ratio) max_ratio = min_ratio + 1.0;

  const int width = 640, height = 480, ml = 60, mr = 150, mt = 30, mb = 50;
  const double plot_w = width - ml - mr, plot_h = height - mt - mb;
  auto sx = [&](double ratio) {
    return ml + plot_w * (ratio - min_ratio) / (max_ratio - min_ratio);
  };
  auto sy = [&](double f1) { return mt + plot_h * (1.0 - f1); };

  static const char* palette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd",
                                  "#ff7f0e", "#8c564b", "#e377c2", "#7f7f7f"};
  std::ostringstream svg;
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\""
      << height << "\">\n";
  svg << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  svg << "<line x1=\"" << ml << "\" y1=\"" << mt + plot_h << "\" x2=\"" << ml + plot_w
      << "\" y2=\"" << mt + plot_h << "\" stroke=\"black\"/>\n";
  svg << "<line x1=\"" << ml << "\" y1=\"" << mt << "\" x2=\"" << ml << "\" y2=\"" << mt + plot_h
      << "\" stroke=\"black\"/>\n";
  for (int i = 0; i <= 5; ++i) {
    const double f1 = i / 5.0;
    svg << "<text x=\"" << ml - 8 << "\" y=\"" << sy(f1) + 4
        << "\" text-anchor=\"end\" font-size=\"11\">" << f1 << "</text>\n";
    svg << "<line x1=\"" << ml - 4 << "\" y1=\"" << sy(f1) << "\" x2=\"" << ml << "\" y2=\""
        << sy(f1) << "\" stroke=\"black\"/>\n";
  }
  for (const auto& curve : curves)
    for (const auto& p : curve) {
      svg << "<line x1=\"" << sx(p.ratio) << "\" y1=\"" << mt + plot_h << "\" x2=\"" << sx(p.ratio)
          << "\" y2=\"" << mt + plot_h + 4 << "\" stroke=\"black\"/>\n";
      svg << "<text x=\"" << sx(p.ratio) << "\" y=\"" << mt + plot_h + 18
          << "\" text-anchor=\"middle\" font-size=\"11\">" << p.ratio << "</text>\n";
    }
  svg << "<text x=\"" << ml + plot_w / 2 << "\" y=\"" << height - 12
      << "\" text-anchor=\"middle\" font-size=\"13\">resolution difference ratio</text>\n";
  svg << "<text x=\"16\" y=\"" << mt + plot_h / 2
      << "\" font-size=\"13\" transform=\"rotate(-90 16 " << mt + plot_h / 2
      << ")\" text-anchor=\"middle\">F1</text>\n";

  for (size_t k = 0; k < curves.size(); ++k) {
    const char* color = palette[k % 8];
    svg << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.5\" points=\"";
    for (const auto& p : curves[k]) svg << sx(p.ratio) << "," << sy(p.f1) << " ";
    svg << "\"/>\n";
    for (const auto& p : curves[k])
      svg << "<circle cx=\"" << sx(p.ratio) << "\" cy=\"" << sy(p.f1) << "\" r=\"2.5\" fill=\""
          << color << "\"/>\n";
    const double ly = mt + 14 + 16 * static_cast<double>(k);
    svg << "<line x1=\"" << ml + plot_w + 10 << "\" y1=\"" << ly << "\" x2=\"" << ml + plot_w + 30
        << "\" y2=\"" << ly << "\" stroke=\"" << color << "\" stroke-width=\"1.5\"/>\n";
    svg << "<text x=\"" << ml + plot_w + 34 << "\" y=\"" << ly + 4 << "\" font-size=\"11\">"
        << csv_paths[k].stem().string() << "</text>\n";
  }
  svg << "</svg>\n";

  std::ofstream fig(out_figure);
  if (!fig) throw std::runtime_error("plot: cannot create " + out_figure.string());
  fig << svg.str();

  std::ofstream merged(merged_csv);
  if (!merged) throw std::runtime_error("plot: cannot create " + merged_csv.string());
  merged << "source,ratio,precision,recall,f1,iou,oa,n_pixels\n";
  for (size_t k = 0; k < curves.size(); ++k)
    for (const auto& p : curves[k]) {
      char buf[64];
      std::snprintf(buf, sizeof buf, "%.10g", p.ratio);
      merged << csv_paths[k].stem().string() << "," << buf << "," << p.rest << "\n";
    }
}

}  // namespace sili::harness

#include "mvcl/config.hpp"

#include <fstream>
#include <sstream>

#include "json_io.hpp"
#include "mvcl/error.hpp"

namespace mvcl {

using detail::Json;

namespace {

template <typename V>
void Read(const Json& j, const char* key, V& out, const std::string& where) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<V>();
  } catch (const nlohmann::json::exception&) {
    Fail(ErrorCode::kInvalidConfig, std::string("bad type for '") + key + "' in " + where);
  }
}

void ReadRange(const Json& j, const char* key, double& lo, double& hi, const std::string& where) {
  if (!j.contains(key)) return;
  std::vector<double> v;
  Read(j, key, v, where);
  if (v.size() != 2) Fail(ErrorCode::kInvalidConfig, std::string(key) + " must be [lo, hi]");
  lo = v[0];
  hi = v[1];
}

}  // namespace

RunConfig ParseRunConfig(const std::string& json_text) {
  Json j;
  try {
    j = Json::parse(json_text);
  } catch (const nlohmann::json::exception& e) {
    Fail(ErrorCode::kInvalidConfig, std::string("config is not valid JSON: ") + e.what());
  }
  RunConfig cfg;
  detail::RequireKnownKeys(j, {"seed", "dataset", "encoder", "projection", "loss", "optim",
                               "augment", "eval"},
                           "config");
  Read(j, "seed", cfg.seed, "config");

  if (j.contains("dataset")) {
    const Json& d = j["dataset"];
    detail::RequireKnownKeys(d, {"root", "n_views", "image_size"}, "dataset");
    Read(d, "root", cfg.dataset.root, "dataset");
    Read(d, "n_views", cfg.dataset.n_views, "dataset");
    Read(d, "image_size", cfg.dataset.image_size, "dataset");
  }
  if (j.contains("encoder")) detail::FromJson(j["encoder"], cfg.encoder);
  if (j.contains("projection")) detail::FromJson(j["projection"], cfg.projection);
  if (j.contains("loss")) {
    const Json& l = j["loss"];
    detail::RequireKnownKeys(l, {"name", "temperature", "epsilon"}, "loss");
    std::string name(LossName(cfg.loss.kind));
    Read(l, "name", name, "loss");
    cfg.loss.kind = ParseLossKind(name);
    Read(l, "temperature", cfg.loss.temperature, "loss");
    Read(l, "epsilon", cfg.loss.epsilon, "loss");
  }
  if (j.contains("optim")) {
    const Json& o = j["optim"];
    detail::RequireKnownKeys(o, {"learning_rate", "weight_decay", "gamma", "epochs", "batch_size"},
                             "optim");
    Read(o, "learning_rate", cfg.optim.learning_rate, "optim");
    Read(o, "weight_decay", cfg.optim.weight_decay, "optim");
    Read(o, "gamma", cfg.optim.gamma, "optim");
    Read(o, "epochs", cfg.optim.epochs, "optim");
    Read(o, "batch_size", cfg.optim.batch_size, "optim");
  }
  if (j.contains("augment")) {
    const Json& a = j["augment"];
    detail::RequireKnownKeys(a, {"crop_scale", "crop_ratio", "flip_prob", "jitter_strength",
                                 "jitter_prob", "grayscale_prob", "normalize"},
                             "augment");
    ReadRange(a, "crop_scale", cfg.augment.crop_scale_lo, cfg.augment.crop_scale_hi, "augment");
    ReadRange(a, "crop_ratio", cfg.augment.ratio_lo, cfg.augment.ratio_hi, "augment");
    Read(a, "flip_prob", cfg.augment.flip_prob, "augment");
    Read(a, "jitter_strength", cfg.augment.jitter_strength, "augment");
    Read(a, "jitter_prob", cfg.augment.jitter_prob, "augment");
    Read(a, "grayscale_prob", cfg.augment.grayscale_prob, "augment");
    if (a.contains("normalize")) {
      const Json& n = a["normalize"];
      detail::RequireKnownKeys(n, {"mean", "std"}, "augment.normalize");
      PixelStats stats;
      Read(n, "mean", stats.mean, "augment.normalize");
      Read(n, "std", stats.std, "augment.normalize");
      cfg.normalize = stats;
    }
  }
  if (j.contains("eval")) {
    const Json& e = j["eval"];
    detail::RequireKnownKeys(e, {"k", "map_at", "level", "probe_epochs", "probe_learning_rate",
                                 "probe_batch_size"},
                             "eval");
    Read(e, "k", cfg.eval.k, "eval");
    Read(e, "map_at", cfg.eval.map_at, "eval");
    std::string level(LevelName(cfg.eval.level));
    Read(e, "level", level, "eval");
    cfg.eval.level = ParseLevel(level);
    Read(e, "probe_epochs", cfg.eval.probe.epochs, "eval");
    Read(e, "probe_learning_rate", cfg.eval.probe.learning_rate, "eval");
    Read(e, "probe_batch_size", cfg.eval.probe.batch_size, "eval");
  }
  cfg.optim.seed = cfg.seed;
  cfg.eval.probe.seed = cfg.seed;
  ValidateRunConfig(cfg);
  return cfg;
}

RunConfig LoadRunConfig(const std::string& path) {
  std::ifstream in(path);
  if (!in) Fail(ErrorCode::kInvalidConfig, "cannot open config " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ParseRunConfig(ss.str());
}

std::string RunConfigJson(const RunConfig& cfg) {
  Json augment{{"crop_scale", {cfg.augment.crop_scale_lo, cfg.augment.crop_scale_hi}},
               {"crop_ratio", {cfg.augment.ratio_lo, cfg.augment.ratio_hi}},
               {"flip_prob", cfg.augment.flip_prob},
               {"jitter_strength", cfg.augment.jitter_strength},
               {"jitter_prob", cfg.augment.jitter_prob},
               {"grayscale_prob", cfg.augment.grayscale_prob}};
  if (cfg.normalize) augment["normalize"] = {{"mean", cfg.normalize->mean}, {"std", cfg.normalize->std}};
  Json j{{"seed", cfg.seed},
         {"dataset",
          {{"root", cfg.dataset.root},
           {"n_views", cfg.dataset.n_views},
           {"image_size", cfg.dataset.image_size}}},
         {"encoder", detail::ToJson(cfg.encoder)},
         {"projection", detail::ToJson(cfg.projection)},
         {"loss",
          {{"name", std::string(LossName(cfg.loss.kind))},
           {"temperature", cfg.loss.temperature},
           {"epsilon", cfg.loss.epsilon}}},
         {"optim",
          {{"learning_rate", cfg.optim.learning_rate},
           {"weight_decay", cfg.optim.weight_decay},
           {"gamma", cfg.optim.gamma},
           {"epochs", cfg.optim.epochs},
           {"batch_size", cfg.optim.batch_size}}},
         {"augment", augment},
         {"eval",
          {{"k", cfg.eval.k},
           {"map_at", cfg.eval.map_at},
           {"level", std::string(LevelName(cfg.eval.level))},
           {"probe_epochs", cfg.eval.probe.epochs},
           {"probe_learning_rate", cfg.eval.probe.learning_rate},
           {"probe_batch_size", cfg.eval.probe.batch_size}}}};
  return j.dump(2) + "\n";
}

void ValidateRunConfig(const RunConfig& cfg) {
  if (cfg.dataset.n_views < 1 || cfg.dataset.image_size < 1) {
    Fail(ErrorCode::kInvalidConfig, "dataset n_views and image_size must be positive");
  }
  ValidateEncoderConfig(cfg.encoder);
  ValidateProjectionConfig(cfg.projection);
  ValidateLossSpec(cfg.loss);
  ValidateOptimConfig(cfg.optim);
  AugmentConfig augment = cfg.augment;
  if (cfg.normalize) {
    augment.mean = cfg.normalize->mean;
    augment.std = cfg.normalize->std;
  }
  ValidateAugmentConfig(augment);
  if (cfg.encoder.channels != 1) {
    Fail(ErrorCode::kInvalidConfig, "renders are grayscale; encoder.channels must be 1");
  }
  if (cfg.eval.k < 1 || cfg.eval.map_at < 1) Fail(ErrorCode::kInvalidConfig, "eval k and map_at must be >= 1");
  if (cfg.eval.probe.epochs < 1 || cfg.eval.probe.batch_size < 1 ||
      !(cfg.eval.probe.learning_rate > 0.0)) {
    Fail(ErrorCode::kInvalidConfig, "probe settings must be positive");
  }
}

PretrainSetup MakePretrainSetup(const RunConfig& cfg, const DatasetManifest& manifest) {
  PretrainSetup setup;
  setup.encoder = cfg.encoder;
  setup.projection = cfg.projection;
  setup.loss = cfg.loss;
  setup.optim = cfg.optim;
  setup.augment = cfg.augment;
  const PixelStats stats = cfg.normalize ? *cfg.normalize : PixelStats{manifest.mean, manifest.std};
  setup.augment.mean = stats.mean;
  setup.augment.std = stats.std;
  setup.class_names = manifest.classes;
  return setup;
}

MetricsReport EvaluateSplits(const EmbeddingMatrix& train, const EmbeddingMatrix& test,
                             const EvalConfig& eval, const std::vector<std::string>& class_names) {
  const ProbeReport probe = LinearProbe(train, test, eval.probe);
  MetricsReport report;
  report.top1 = probe.top1;
  report.top5 = probe.top5;
  report.per_class_top1 = probe.per_class_top1;
  report.class_names = class_names;
  report.knn_k = eval.k;
  report.knn_accuracy = Accuracy(KnnClassify(train, test, eval.k), test.labels);
  const RetrievalReport retrieval = EvaluateRetrieval(train, test, eval.map_at);
  report.map = retrieval.map;
  report.map_at = eval.map_at;
  report.map_at_k = retrieval.map_at_k;
  return report;
}

}  // namespace mvcl

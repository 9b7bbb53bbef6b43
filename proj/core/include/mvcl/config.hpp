#pragma once

#include <cstdint>
#include <optional>
#include <string>

#include "mvcl/data.hpp"
#include "mvcl/eval.hpp"
#include "mvcl/losses.hpp"
#include "mvcl/model.hpp"
#include "mvcl/train.hpp"

namespace mvcl {

struct DatasetConfig {
  std::string root;
  int n_views = 12;
  int image_size = 224;
};

struct EvalConfig {
  int k = 10;
  int map_at = 10;
  EmbeddingLevel level = EmbeddingLevel::kShape;
  ProbeConfig probe;
};

/// Defaults follow the published hyperparameters where they exist (batch 128,
/// 100 epochs, 224 px); configs/desk.json holds the desk-scale run.
struct RunConfig {
  std::uint64_t seed = 0;
  DatasetConfig dataset;
  EncoderConfig encoder;
  ProjectionConfig projection;
  LossSpec loss;
  OptimConfig optim{.learning_rate = 1e-4, .weight_decay = 1e-4, .gamma = 0.95, .epochs = 100,
                    .batch_size = 128, .seed = 0};
  AugmentConfig augment;
  /// Set when the config pins normalization; otherwise manifest stats apply.
  std::optional<PixelStats> normalize;
  EvalConfig eval;
};

/// Strict: unknown keys at any level raise InvalidConfig. Missing keys keep
/// their defaults.
RunConfig ParseRunConfig(const std::string& json_text);
RunConfig LoadRunConfig(const std::string& path);
std::string RunConfigJson(const RunConfig& cfg);
void ValidateRunConfig(const RunConfig& cfg);

/// Pretraining setup for a run on `manifest`: class names from the manifest,
/// normalization from the config when pinned, else from the manifest stats.
PretrainSetup MakePretrainSetup(const RunConfig& cfg, const DatasetManifest& manifest);

/// Linear probe, k-NN and retrieval of test rows against the train rows.
MetricsReport EvaluateSplits(const EmbeddingMatrix& train, const EmbeddingMatrix& test,
                             const EvalConfig& eval, const std::vector<std::string>& class_names);

}  // namespace mvcl

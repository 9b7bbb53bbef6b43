#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "mvcl/data.hpp"
#include "mvcl/losses.hpp"
#include "mvcl/model.hpp"

namespace mvcl {

struct OptimConfig {
  double learning_rate = 1e-4;
  double weight_decay = 1e-4;
  double gamma = 0.95;  // per-epoch exponential decay
  int epochs = 30;
  int batch_size = 64;
  std::uint64_t seed = 0;
};

void ValidateOptimConfig(const OptimConfig& cfg);

/// p <- p - lr * (g + wd * p); the decay term only touches entries flagged
/// for decay.
template <typename T>
void SgdStep(ParameterSet<T>& params, double lr, double weight_decay);

/// lr0 * gamma^epoch (epochs count from 0).
double LrAt(int epoch, const OptimConfig& cfg);

struct EpochRecord {
  int epoch = 0;
  double mean_loss = 0.0;
  double lr = 0.0;
  double seconds = 0.0;
};

struct TrainLog {
  std::vector<EpochRecord> epochs;
  std::string checkpoint_path;
};

/// "epoch,mean_loss,lr,seconds" header plus one line per epoch.
std::string TrainLogCsv(const TrainLog& log);

struct PretrainSetup {
  EncoderConfig encoder;
  ProjectionConfig projection;
  LossSpec loss;
  OptimConfig optim;
  AugmentConfig augment;
  std::vector<std::string> class_names;
  /// Asserts unit-norm projection rows on every step.
  bool check_invariants = false;
  std::function<void(const EpochRecord&)> on_epoch;
};

struct PretrainResult {
  Checkpoint checkpoint;
  TrainLog log;
};

/// Contrastive losses train encoder + projection on two augmented views per
/// sample; ce trains encoder + linear classifier on one view. Bit-reproducible
/// for a fixed setup and store.
PretrainResult Pretrain(const ViewStore& train, const PretrainSetup& setup);

}  // namespace mvcl

#include "mvcl/train.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "mvcl/error.hpp"
#include "mvcl/ops.hpp"

namespace mvcl {

using ad::Tensor;

void ValidateOptimConfig(const OptimConfig& cfg) {
  if (!(cfg.learning_rate >= 0.0)) Fail(ErrorCode::kInvalidConfig, "learning_rate must be >= 0");
  if (!(cfg.weight_decay >= 0.0)) Fail(ErrorCode::kInvalidConfig, "weight_decay must be >= 0");
  if (!(cfg.gamma > 0.0 && cfg.gamma <= 1.0)) Fail(ErrorCode::kInvalidConfig, "gamma must lie in (0, 1]");
  if (cfg.epochs < 1) Fail(ErrorCode::kInvalidConfig, "epochs must be >= 1");
  if (cfg.batch_size < 1) Fail(ErrorCode::kInvalidConfig, "batch_size must be >= 1");
}

template <typename T>
void SgdStep(ParameterSet<T>& params, double lr, double weight_decay) {
  for (auto& e : params.entries()) {
    auto value = e.tensor.mutable_data();
    const auto grad = e.tensor.grad();
    if (grad.size() != value.size()) Fail(ErrorCode::kShapeMismatch, "gradient size for " + e.name);
    const double wd = e.decay ? weight_decay : 0.0;
    for (std::size_t i = 0; i < value.size(); ++i) {
      value[i] = static_cast<T>(value[i] - lr * (grad[i] + wd * value[i]));
    }
  }
}

template void SgdStep(ParameterSet<float>&, double, double);
template void SgdStep(ParameterSet<double>&, double, double);

double LrAt(int epoch, const OptimConfig& cfg) {
  return cfg.learning_rate * std::pow(cfg.gamma, epoch);
}

std::string TrainLogCsv(const TrainLog& log) {
  std::ostringstream out;
  out << "epoch,mean_loss,lr,seconds\n";
  char line[160];
  for (const auto& r : log.epochs) {
    std::snprintf(line, sizeof(line), "%d,%.9g,%.9g,%.3f\n", r.epoch, r.mean_loss, r.lr, r.seconds);
    out << line;
  }
  return out.str();
}

PretrainResult Pretrain(const ViewStore& train, const PretrainSetup& setup) {
  ValidateEncoderConfig(setup.encoder);
  ValidateLossSpec(setup.loss);
  ValidateOptimConfig(setup.optim);
  ValidateAugmentConfig(setup.augment);
  if (setup.encoder.channels != 1) {
    Fail(ErrorCode::kInvalidConfig, "rendered views are single-channel; encoder channels must be 1");
  }
  const bool contrastive = IsContrastive(setup.loss.kind);
  const int num_classes = static_cast<int>(setup.class_names.size());
  if (!contrastive && num_classes < 2) {
    Fail(ErrorCode::kInvalidConfig, "ce training needs the class names of at least 2 classes");
  }
  const std::size_t batch = static_cast<std::size_t>(setup.optim.batch_size);
  if (train.size() < batch) {
    Fail(ErrorCode::kInvalidConfig, "train split has " + std::to_string(train.size()) +
                                        " samples, fewer than one batch of " + std::to_string(batch));
  }

  const std::uint64_t seed = setup.optim.seed;
  PretrainResult result;
  Checkpoint& ckpt = result.checkpoint;
  ckpt.encoder = setup.encoder;
  ckpt.projection = setup.projection;
  ckpt.has_projection = contrastive;
  ckpt.meta.loss = std::string(LossName(setup.loss.kind));
  ckpt.meta.seed = seed;
  ckpt.meta.class_names = setup.class_names;
  ckpt.meta.num_classes = contrastive ? 0 : num_classes;
  ckpt.meta.data_mean = setup.augment.mean;
  ckpt.meta.data_std = setup.augment.std;
  ParameterSet<float>& params = ckpt.params;
  InitEncoderParams(setup.encoder, seed, params);
  if (contrastive) {
    InitProjectionParams(setup.encoder.feature_dim, setup.projection, seed, params);
  } else {
    InitClassifierParams(setup.encoder.feature_dim, num_classes, seed, params);
  }

  const int h = setup.encoder.height, w = setup.encoder.width;
  const ad::Shape image_shape{batch, 1, std::size_t(h), std::size_t(w)};
  std::size_t step = 0;
  for (int epoch = 0; epoch < setup.optim.epochs; ++epoch) {
    const auto start = std::chrono::steady_clock::now();
    const double lr = LrAt(epoch, setup.optim);
    const auto batches = EpochBatches(train.labels, batch, seed, epoch);
    double loss_sum = 0.0;
    for (const auto& samples : batches) {
      const Batch b = MakeBatch(train, samples, epoch, setup.augment, seed, h, w);
      params.ZeroGrad();
      double value = 0.0;
      try {
        const auto view_a = Tensor<float>::Constant(image_shape, b.view_a);
        Tensor<float> loss;
        if (contrastive) {
          const auto view_b = Tensor<float>::Constant(image_shape, b.view_b);
          const auto images = ad::Concat<float>({view_a, view_b}, 0);
          const auto z = ProjectionForward(params, EncoderForward(params, setup.encoder, images));
          if (setup.check_invariants) {
            const auto rows = z.data();
            const std::size_t dim = z.dim(1);
            for (std::size_t r = 0; r < z.dim(0); ++r) {
              double ss = 0.0;
              for (std::size_t k = 0; k < dim; ++k) ss += double(rows[r * dim + k]) * rows[r * dim + k];
              if (std::abs(std::sqrt(ss) - 1.0) > 1e-5) {
                Fail(ErrorCode::kNonFiniteValue, "projection row " + std::to_string(r) +
                                                     " is not unit length at step " +
                                                     std::to_string(step));
              }
            }
          }
          loss = ContrastiveLoss(setup.loss, z, b.labels);
        } else {
          const auto logits = ClassifierForward(params, EncoderForward(params, setup.encoder, view_a));
          loss = CrossEntropy(logits, b.labels);
        }
        value = loss.item();
        if (!std::isfinite(value)) Fail(ErrorCode::kNonFiniteValue, "loss");
        ad::Backward(loss);
      } catch (const Error& e) {
        if (e.code() != ErrorCode::kNonFiniteValue) throw;
        Fail(ErrorCode::kNonFiniteLoss,
             "step " + std::to_string(step) + " (epoch " + std::to_string(epoch) + "): " + e.what());
      }
      SgdStep(params, lr, setup.optim.weight_decay);
      loss_sum += value;
      ++step;
    }
    EpochRecord record;
    record.epoch = epoch;
    record.mean_loss = loss_sum / static_cast<double>(batches.size());
    record.lr = lr;
    record.seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    result.log.epochs.push_back(record);
    ckpt.meta.epoch = epoch + 1;
    if (setup.on_epoch) setup.on_epoch(record);
  }
  return result;
}

}  // namespace mvcl

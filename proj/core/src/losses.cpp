#include "mvcl/losses.hpp"

#include <cstdint>

#include "mvcl/error.hpp"
#include "mvcl/ops.hpp"

namespace mvcl {

using ad::Tensor;

std::string_view LossName(LossKind kind) {
  switch (kind) {
    case LossKind::kCrossEntropy: return "ce";
    case LossKind::kInfoNce: return "infonce";
    case LossKind::kSimClr: return "simclr";
    case LossKind::kSupCon: return "supcon";
    case LossKind::kEpsSupInfoNce: return "eps_supinfonce";
    case LossKind::kSincere: return "sincere";
  }
  return "unknown";
}

LossKind ParseLossKind(std::string_view name) {
  for (auto kind : {LossKind::kCrossEntropy, LossKind::kInfoNce, LossKind::kSimClr,
                    LossKind::kSupCon, LossKind::kEpsSupInfoNce, LossKind::kSincere}) {
    if (LossName(kind) == name) return kind;
  }
  Fail(ErrorCode::kUnknownLoss, "unknown loss '" + std::string(name) + "'");
}

bool IsSupervisedContrastive(LossKind kind) {
  return kind == LossKind::kSupCon || kind == LossKind::kSincere || kind == LossKind::kEpsSupInfoNce;
}

bool IsContrastive(LossKind kind) { return kind != LossKind::kCrossEntropy; }

void ValidateLossSpec(const LossSpec& spec) {
  if (!(spec.temperature > 0.0)) Fail(ErrorCode::kInvalidConfig, "temperature must be > 0");
  if (!(spec.epsilon >= 0.0)) Fail(ErrorCode::kInvalidConfig, "epsilon must be >= 0");
}

std::vector<int> ReplicateLabels(const std::vector<int>& pair_labels) {
  std::vector<int> out = pair_labels;
  out.insert(out.end(), pair_labels.begin(), pair_labels.end());
  return out;
}

namespace {

template <typename T>
Tensor<T> Similarities(const Tensor<T>& a, const Tensor<T>& b, double temperature) {
  return ad::Scale(ad::MatMul(a, ad::Transpose(b)), static_cast<T>(1.0 / temperature));
}

template <typename T>
Tensor<T> Normalized(const Tensor<T>& z) {
  if (z.rank() != 2) Fail(ErrorCode::kShapeMismatch, "embeddings must be rank 2");
  return ad::L2Normalize(z, -1);
}

/// Per-row sum of x weighted by a constant matrix.
template <typename T>
Tensor<T> WeightedRowSum(const Tensor<T>& x, std::vector<T> weights) {
  return ad::Sum(ad::Mul(x, Tensor<T>::Constant(x.shape(), std::move(weights))), 1);
}

struct LabelMasks {
  std::vector<std::uint8_t> others;     // A(i)
  std::vector<std::uint8_t> negatives;  // N(i)
  std::vector<double> positive_weight;  // 1/|P(i)| on P(i)
};

LabelMasks BuildMasks(const std::vector<int>& labels, std::size_t rows, bool need_negatives) {
  if (labels.size() != rows) {
    Fail(ErrorCode::kShapeMismatch, "expected " + std::to_string(rows) + " labels, got " +
                                        std::to_string(labels.size()));
  }
  LabelMasks m;
  m.others.assign(rows * rows, 0);
  m.negatives.assign(rows * rows, 0);
  m.positive_weight.assign(rows * rows, 0.0);
  for (std::size_t i = 0; i < rows; ++i) {
    std::size_t positives = 0, negatives = 0;
    for (std::size_t j = 0; j < rows; ++j) {
      if (i == j) continue;
      m.others[i * rows + j] = 1;
      if (labels[i] == labels[j]) {
        ++positives;
      } else {
        m.negatives[i * rows + j] = 1;
        ++negatives;
      }
    }
    if (positives == 0) {
      Fail(ErrorCode::kAnchorWithoutPositive, "anchor " + std::to_string(i) + " (label " +
                                                  std::to_string(labels[i]) + ") has no positive");
    }
    if (need_negatives && negatives == 0) {
      Fail(ErrorCode::kAnchorWithoutNegative, "anchor " + std::to_string(i) + " has no negative");
    }
    for (std::size_t j = 0; j < rows; ++j) {
      if (i != j && labels[i] == labels[j]) m.positive_weight[i * rows + j] = 1.0 / positives;
    }
  }
  return m;
}

/// Shared body of SINCERE and eps-SupInfoNCE.
template <typename T>
Tensor<T> SincereFamily(const Tensor<T>& z, const std::vector<int>& labels, double temperature,
                        double epsilon) {
  const Tensor<T> zn = Normalized(z);
  const std::size_t rows = zn.dim(0);
  const LabelMasks masks = BuildMasks(labels, rows, true);
  const Tensor<T> logits = Similarities(zn, zn, temperature);
  // log sum over negatives of exp((s + eps) / tau)
  Tensor<T> neg_lse = ad::MaskedLogSumExp(logits, masks.negatives);
  if (epsilon != 0.0) neg_lse = ad::AddScalar(neg_lse, static_cast<T>(epsilon / temperature));
  // shifted[j][i] = logits[i][j] - neg_lse[i]; the per-pair term is
  // -log(e^l / (e^l + e^neg_lse)) = softplus(neg_lse - l).
  const Tensor<T> shifted = ad::Sub(ad::Transpose(logits), neg_lse);
  const Tensor<T> terms = ad::Softplus(ad::Scale(shifted, T(-1)));
  std::vector<T> weights(rows * rows);
  for (std::size_t i = 0; i < rows; ++i) {
    for (std::size_t j = 0; j < rows; ++j) {
      weights[j * rows + i] = static_cast<T>(masks.positive_weight[i * rows + j]);
    }
  }
  // terms is indexed [positive][anchor]; summing over axis 0 leaves one value per anchor.
  return ad::Sum(ad::Mul(terms, Tensor<T>::Constant(terms.shape(), std::move(weights))), 0);
}

}  // namespace

template <typename T>
Tensor<T> CrossEntropy(const Tensor<T>& logits, const std::vector<int>& labels) {
  if (logits.rank() != 2) Fail(ErrorCode::kShapeMismatch, "logits must be B x C");
  const std::size_t batch = logits.dim(0), classes = logits.dim(1);
  if (classes < 2) Fail(ErrorCode::kShapeMismatch, "cross entropy needs at least 2 classes");
  if (labels.size() != batch) Fail(ErrorCode::kShapeMismatch, "labels/batch size mismatch");
  std::vector<T> onehot(batch * classes, T(0));
  for (std::size_t i = 0; i < batch; ++i) {
    if (labels[i] < 0 || static_cast<std::size_t>(labels[i]) >= classes) {
      Fail(ErrorCode::kLabelOutOfRange, "label " + std::to_string(labels[i]) + " with " +
                                            std::to_string(classes) + " classes");
    }
    onehot[i * classes + labels[i]] = T(1);
  }
  const Tensor<T> lse = ad::LogSumExp(logits, 1);
  const Tensor<T> picked = WeightedRowSum(logits, std::move(onehot));
  return ad::MeanAll(ad::Sub(lse, picked));
}

template <typename T>
Tensor<T> InfoNce(const Tensor<T>& z_a, const Tensor<T>& z_b, double temperature) {
  if (z_a.shape() != z_b.shape()) Fail(ErrorCode::kShapeMismatch, "view a/b shapes differ");
  const Tensor<T> logits = Similarities(Normalized(z_a), Normalized(z_b), temperature);
  const std::size_t n = logits.dim(0);
  std::vector<T> diag(n * n, T(0));
  for (std::size_t i = 0; i < n; ++i) diag[i * n + i] = T(1);
  const Tensor<T> lse = ad::LogSumExp(logits, 1);
  return ad::MeanAll(ad::Sub(lse, WeightedRowSum(logits, std::move(diag))));
}

template <typename T>
Tensor<T> SimClrNtXent(const Tensor<T>& z, double temperature) {
  const Tensor<T> zn = Normalized(z);
  const std::size_t rows = zn.dim(0);
  if (rows < 4 || rows % 2 != 0) {
    Fail(ErrorCode::kShapeMismatch, "NT-Xent needs an even number of rows >= 4");
  }
  const std::size_t half = rows / 2;
  const Tensor<T> logits = Similarities(zn, zn, temperature);
  std::vector<std::uint8_t> others(rows * rows, 1);
  std::vector<T> pair(rows * rows, T(0));
  for (std::size_t i = 0; i < rows; ++i) {
    others[i * rows + i] = 0;
    pair[i * rows + (i + half) % rows] = T(1);
  }
  const Tensor<T> lse = ad::MaskedLogSumExp(logits, others);
  return ad::MeanAll(ad::Sub(lse, WeightedRowSum(logits, std::move(pair))));
}

template <typename T>
Tensor<T> SupConPerAnchor(const Tensor<T>& z, const std::vector<int>& labels, double temperature) {
  const Tensor<T> zn = Normalized(z);
  const std::size_t rows = zn.dim(0);
  const LabelMasks masks = BuildMasks(labels, rows, false);
  const Tensor<T> logits = Similarities(zn, zn, temperature);
  const Tensor<T> lse = ad::MaskedLogSumExp(logits, masks.others);
  std::vector<T> weights(masks.positive_weight.begin(), masks.positive_weight.end());
  return ad::Sub(lse, WeightedRowSum(logits, std::move(weights)));
}

template <typename T>
Tensor<T> SincerePerAnchor(const Tensor<T>& z, const std::vector<int>& labels, double temperature) {
  return SincereFamily(z, labels, temperature, 0.0);
}

template <typename T>
Tensor<T> EpsSupInfoNcePerAnchor(const Tensor<T>& z, const std::vector<int>& labels,
                                 double temperature, double epsilon) {
  return SincereFamily(z, labels, temperature, epsilon);
}

template <typename T>
Tensor<T> SupCon(const Tensor<T>& z, const std::vector<int>& labels, double temperature) {
  return ad::MeanAll(SupConPerAnchor(z, labels, temperature));
}

template <typename T>
Tensor<T> Sincere(const Tensor<T>& z, const std::vector<int>& labels, double temperature) {
  return ad::MeanAll(SincerePerAnchor(z, labels, temperature));
}

template <typename T>
Tensor<T> EpsSupInfoNce(const Tensor<T>& z, const std::vector<int>& labels, double temperature,
                        double epsilon) {
  return ad::MeanAll(EpsSupInfoNcePerAnchor(z, labels, temperature, epsilon));
}

template <typename T>
Tensor<T> ContrastiveLoss(const LossSpec& spec, const Tensor<T>& z,
                          const std::vector<int>& pair_labels) {
  ValidateLossSpec(spec);
  const std::size_t rows = z.dim(0);
  if (rows != 2 * pair_labels.size()) {
    Fail(ErrorCode::kShapeMismatch, "two-view batch has " + std::to_string(rows) + " rows for " +
                                        std::to_string(pair_labels.size()) + " pairs");
  }
  const std::size_t n = pair_labels.size();
  switch (spec.kind) {
    case LossKind::kInfoNce:
      return InfoNce(ad::Slice(z, 0, 0, n), ad::Slice(z, 0, n, 2 * n), spec.temperature);
    case LossKind::kSimClr:
      return SimClrNtXent(z, spec.temperature);
    case LossKind::kSupCon:
      return SupCon(z, ReplicateLabels(pair_labels), spec.temperature);
    case LossKind::kSincere:
      return Sincere(z, ReplicateLabels(pair_labels), spec.temperature);
    case LossKind::kEpsSupInfoNce:
      return EpsSupInfoNce(z, ReplicateLabels(pair_labels), spec.temperature, spec.epsilon);
    case LossKind::kCrossEntropy:
      break;
  }
  Fail(ErrorCode::kUnknownLoss, "cross entropy is not a contrastive loss");
}

#define MVCL_INSTANTIATE_LOSSES(T)                                                              \
  template Tensor<T> CrossEntropy(const Tensor<T>&, const std::vector<int>&);                   \
  template Tensor<T> InfoNce(const Tensor<T>&, const Tensor<T>&, double);                       \
  template Tensor<T> SimClrNtXent(const Tensor<T>&, double);                                    \
  template Tensor<T> SupCon(const Tensor<T>&, const std::vector<int>&, double);                 \
  template Tensor<T> Sincere(const Tensor<T>&, const std::vector<int>&, double);                \
  template Tensor<T> EpsSupInfoNce(const Tensor<T>&, const std::vector<int>&, double, double);  \
  template Tensor<T> SupConPerAnchor(const Tensor<T>&, const std::vector<int>&, double);        \
  template Tensor<T> SincerePerAnchor(const Tensor<T>&, const std::vector<int>&, double);       \
  template Tensor<T> EpsSupInfoNcePerAnchor(const Tensor<T>&, const std::vector<int>&, double,  \
                                            double);                                            \
  template Tensor<T> ContrastiveLoss(const LossSpec&, const Tensor<T>&, const std::vector<int>&);

MVCL_INSTANTIATE_LOSSES(float)
MVCL_INSTANTIATE_LOSSES(double)

}  // namespace mvcl

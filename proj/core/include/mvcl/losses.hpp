#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "mvcl/tensor.hpp"

namespace mvcl {

enum class LossKind { kCrossEntropy, kInfoNce, kSimClr, kSupCon, kEpsSupInfoNce, kSincere };

std::string_view LossName(LossKind kind);
/// Accepts ce, infonce, simclr, supcon, eps_supinfonce, sincere.
LossKind ParseLossKind(std::string_view name);
/// supcon, sincere, eps_supinfonce use labels; infonce, simclr do not.
bool IsSupervisedContrastive(LossKind kind);
bool IsContrastive(LossKind kind);

struct LossSpec {
  LossKind kind = LossKind::kSupCon;
  double temperature = 0.07;
  double epsilon = 0.25;  // eps_supinfonce only
};

void ValidateLossSpec(const LossSpec& spec);

/// Row i of view a pairs with row i + N of view b.
std::vector<int> ReplicateLabels(const std::vector<int>& pair_labels);

// Contrastive losses re-normalize their inputs, so rows need not be unit
// length on entry. Labels are per row (length 2N) for the supervised ones.

/// Mean over the batch of -log softmax(logits)[label].
template <typename T>
ad::Tensor<T> CrossEntropy(const ad::Tensor<T>& logits, const std::vector<int>& labels);

/// One-directional: anchors in view a, candidates are all of view b.
template <typename T>
ad::Tensor<T> InfoNce(const ad::Tensor<T>& z_a, const ad::Tensor<T>& z_b, double temperature);

/// NT-Xent over 2N rows; every other row is in the denominator.
template <typename T>
ad::Tensor<T> SimClrNtXent(const ad::Tensor<T>& z, double temperature);

/// Supervised contrastive loss with the positive average outside the log.
template <typename T>
ad::Tensor<T> SupCon(const ad::Tensor<T>& z, const std::vector<int>& labels, double temperature);

/// Like SupCon, but the denominator holds only the current positive and the
/// negatives.
template <typename T>
ad::Tensor<T> Sincere(const ad::Tensor<T>& z, const std::vector<int>& labels, double temperature);

/// SINCERE with an additive margin epsilon on every negative similarity.
template <typename T>
ad::Tensor<T> EpsSupInfoNce(const ad::Tensor<T>& z, const std::vector<int>& labels,
                            double temperature, double epsilon);

/// Unreduced forms: one loss value per anchor row.
template <typename T>
ad::Tensor<T> SupConPerAnchor(const ad::Tensor<T>& z, const std::vector<int>& labels,
                              double temperature);
template <typename T>
ad::Tensor<T> SincerePerAnchor(const ad::Tensor<T>& z, const std::vector<int>& labels,
                               double temperature);
template <typename T>
ad::Tensor<T> EpsSupInfoNcePerAnchor(const ad::Tensor<T>& z, const std::vector<int>& labels,
                                     double temperature, double epsilon);

/// Dispatches a contrastive loss on the stacked two-view batch z (2N x D)
/// with per-pair labels (length N).
template <typename T>
ad::Tensor<T> ContrastiveLoss(const LossSpec& spec, const ad::Tensor<T>& z,
                              const std::vector<int>& pair_labels);

}  // namespace mvcl

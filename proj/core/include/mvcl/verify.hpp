#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "mvcl/gradcheck.hpp"
#include "mvcl/losses.hpp"
#include "mvcl/model.hpp"

namespace mvcl {

struct CheckResult {
  std::string name;
  bool passed = false;
  std::string detail;
};

/// Closed forms on all-identical embeddings.
std::vector<CheckResult> CheckLossIdentities();

/// eps-SupInfoNCE at eps = 0 against SINCERE on random batches.
CheckResult CheckEpsReduction(int batches, std::uint64_t seed);

/// Small encoders used by the gradient check.
EncoderConfig GradCheckEncoder(EncoderKind kind);

/// Loss composed with an encoder (and projection or classifier head) in
/// double precision; analytic parameter gradients against central
/// differences on a sampled coordinate subset.
GradCheckResult LossGradCheck(LossKind loss, EncoderKind encoder, std::uint64_t seed);

/// Contrastive losses, k-NN, retrieval and AP against the nested-loop oracles.
std::vector<CheckResult> CheckOracleEquivalence(std::uint64_t seed, int trials);

/// Batch permutation and orthogonal rotation of the losses; rescaling
/// invariance of k-NN and retrieval.
std::vector<CheckResult> CheckInvariances(std::uint64_t seed, int trials);

/// Re-render determinism, cube and sphere symmetries, occlusion, PPM round
/// trip.
std::vector<CheckResult> CheckRenderer();

}  // namespace mvcl

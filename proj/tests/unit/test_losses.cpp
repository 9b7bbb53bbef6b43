#include <gtest/gtest.h>

#include <cmath>

#include "mvcl/error.hpp"
#include "mvcl/losses.hpp"
#include "mvcl/ops.hpp"
#include "mvcl/oracles.hpp"
#include "mvcl/rng.hpp"

namespace mvcl {
namespace {

using D = ad::Tensor<double>;
constexpr double kTau = 0.07;

template <typename F>
ErrorCode CodeOf(F&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "no error raised";
  return ErrorCode::kInvalidConfig;
}

D Identical(std::size_t rows, std::size_t dim) {
  std::vector<double> v(rows * dim, 0.0);
  for (std::size_t i = 0; i < rows; ++i) v[i * dim] = 1.0;
  return D::Constant({rows, dim}, v);
}

oracle::Matrix RandomMatrix(std::size_t rows, std::size_t dim, Rng& rng) {
  oracle::Matrix m(rows, std::vector<double>(dim));
  for (auto& r : m)
    for (double& v : r) v = rng.Normal();
  return m;
}

D ToTensor(const oracle::Matrix& m) {
  std::vector<double> v;
  for (const auto& r : m) v.insert(v.end(), r.begin(), r.end());
  return D::Constant({m.size(), m[0].size()}, v);
}

TEST(LossIdentities, AllIdenticalEmbeddings) {
  const std::vector<int> pairs{0, 0, 1, 1};
  EXPECT_NEAR(SimClrNtXent(Identical(4, 3), kTau).item(), std::log(3.0), 1e-9);
  EXPECT_NEAR(InfoNce(Identical(4, 3), Identical(4, 3), kTau).item(), std::log(4.0), 1e-9);
  EXPECT_NEAR(SupCon(Identical(4, 3), pairs, kTau).item(), std::log(3.0), 1e-9);
  EXPECT_NEAR(SupCon(Identical(4, 3), {0, 0, 0, 0}, kTau).item(), std::log(3.0), 1e-9);
  EXPECT_NEAR(Sincere(Identical(4, 3), pairs, kTau).item(), std::log(3.0), 1e-9);
}

TEST(LossIdentities, SincereDropsIntraClassRepulsion) {
  const std::vector<int> labels{0, 0, 0, 0, 1, 1};
  const D sincere = SincerePerAnchor(Identical(6, 3), labels, kTau);
  const D supcon = SupConPerAnchor(Identical(6, 3), labels, kTau);
  for (std::size_t a = 0; a < 4; ++a) {
    EXPECT_NEAR(sincere.at(a), std::log(3.0), 1e-9);
    EXPECT_NEAR(supcon.at(a), std::log(5.0), 1e-9);
  }
}

TEST(LossIdentities, EpsMarginClosedForm) {
  const long double eps = 0.25L, tau = 0.07L;
  const long double want = std::log1p(2.0L * std::exp(eps / tau));
  EXPECT_NEAR(EpsSupInfoNce(Identical(4, 3), {0, 0, 1, 1}, kTau, 0.25).item(),
              static_cast<double>(want), 1e-9);
  EXPECT_NEAR(static_cast<double>(want), 4.2786, 1e-4);
}

TEST(CrossEntropyLoss, ClosedForms) {
  EXPECT_NEAR(CrossEntropy(D::Constant({2, 10}, std::vector<double>(20, 0.3)), {1, 7}).item(),
              std::log(10.0), 1e-12);
  EXPECT_NEAR(CrossEntropy(D::Constant({1, 2}, {0.0, 0.0}), {0}).item(), std::log(2.0), 1e-12);
  double previous = INFINITY;
  for (double margin : {1.0, 10.0, 100.0}) {
    const double loss = CrossEntropy(D::Constant({1, 3}, {margin, 0.0, 0.0}), {0}).item();
    EXPECT_LT(loss, previous);
    previous = loss;
  }
  EXPECT_LT(previous, 1e-40);
}

TEST(LossOracle, RandomBatchesMatchNestedLoops) {
  Rng rng(17, 0);
  for (int trial = 0; trial < 25; ++trial) {
    const std::size_t n = 2 + rng.Below(7);  // pairs, 2N <= 16
    const std::size_t dim = 2 + rng.Below(8);
    const oracle::Matrix z = RandomMatrix(2 * n, dim, rng);
    std::vector<int> pair_labels(n);
    for (std::size_t i = 0; i < n; ++i) pair_labels[i] = static_cast<int>(i % 2 + rng.Below(2) * 2);
    pair_labels[0] = 0;
    pair_labels[1] = 1;
    const std::vector<int> labels = ReplicateLabels(pair_labels);
    const oracle::Matrix za(z.begin(), z.begin() + n), zb(z.begin() + n, z.end());
    const D t = ToTensor(z);

    EXPECT_NEAR(InfoNce(ToTensor(za), ToTensor(zb), kTau).item(), oracle::InfoNce(za, zb, kTau), 1e-6);
    EXPECT_NEAR(SimClrNtXent(t, kTau).item(), oracle::SimClr(z, kTau), 1e-6);
    EXPECT_NEAR(SupCon(t, labels, kTau).item(), oracle::SupCon(z, labels, kTau), 1e-6);
    EXPECT_NEAR(Sincere(t, labels, kTau).item(), oracle::Sincere(z, labels, kTau), 1e-6);
    EXPECT_NEAR(EpsSupInfoNce(t, labels, kTau, 0.25).item(),
                oracle::EpsSupInfoNce(z, labels, kTau, 0.25), 1e-6);

    oracle::Matrix logits = RandomMatrix(n, 5, rng);
    std::vector<int> cls(n);
    for (auto& c : cls) c = static_cast<int>(rng.Below(5));
    EXPECT_NEAR(CrossEntropy(ToTensor(logits), cls).item(), oracle::CrossEntropy(logits, cls), 1e-9);
  }
}

TEST(LossOracle, EpsZeroIsSincere) {
  Rng rng(3, 1);
  for (int trial = 0; trial < 20; ++trial) {
    const D z = ToTensor(RandomMatrix(12, 6, rng));
    const std::vector<int> labels = ReplicateLabels({0, 1, 2, 0, 1, 2});
    EXPECT_NEAR(EpsSupInfoNce(z, labels, kTau, 0.0).item(), Sincere(z, labels, kTau).item(), 1e-9);
  }
}

TEST(LossProperties, PerfectSeparationLimit) {
  // Two pairs: class 0 at +e1, class 1 at -e1, so positives sit at cosine 1
  // and negatives at -1.
  const D z = D::Constant({4, 2}, {1, 0, -1, 0, 1, 0, -1, 0});
  const std::vector<int> labels = ReplicateLabels({0, 1});
  const D za = D::Constant({2, 2}, {1, 0, -1, 0});
  EXPECT_LT(InfoNce(za, za, kTau).item(), 1e-5);
  EXPECT_LT(SimClrNtXent(z, kTau).item(), 1e-5);
  EXPECT_LT(SupCon(z, labels, kTau).item(), 1e-5);
  EXPECT_LT(Sincere(z, labels, kTau).item(), 1e-5);
  EXPECT_LT(EpsSupInfoNce(z, labels, kTau, 0.25).item(), 1e-5);
}

TEST(LossProperties, InputScaleDoesNotMatter) {
  Rng rng(5, 2);
  const oracle::Matrix m = RandomMatrix(8, 4, rng);
  oracle::Matrix scaled = m;
  for (auto& r : scaled)
    for (double& v : r) v *= 13.0;
  LossSpec spec;
  for (LossKind k : {LossKind::kInfoNce, LossKind::kSimClr, LossKind::kSupCon, LossKind::kSincere,
                     LossKind::kEpsSupInfoNce}) {
    spec.kind = k;
    EXPECT_NEAR(ContrastiveLoss(spec, ToTensor(m), {0, 1, 0, 1}).item(),
                ContrastiveLoss(spec, ToTensor(scaled), {0, 1, 0, 1}).item(), 1e-9)
        << LossName(k);
  }
}

TEST(LossDispatch, ContrastiveLossRoutesEveryKind) {
  Rng rng(9, 3);
  const oracle::Matrix m = RandomMatrix(8, 5, rng);
  const std::vector<int> pairs{0, 1, 1, 0};
  const std::vector<int> labels = ReplicateLabels(pairs);
  const oracle::Matrix za(m.begin(), m.begin() + 4), zb(m.begin() + 4, m.end());
  LossSpec spec;
  spec.kind = LossKind::kInfoNce;
  EXPECT_NEAR(ContrastiveLoss(spec, ToTensor(m), pairs).item(), oracle::InfoNce(za, zb, kTau), 1e-6);
  spec.kind = LossKind::kSimClr;
  EXPECT_NEAR(ContrastiveLoss(spec, ToTensor(m), pairs).item(), oracle::SimClr(m, kTau), 1e-6);
  spec.kind = LossKind::kSupCon;
  EXPECT_NEAR(ContrastiveLoss(spec, ToTensor(m), pairs).item(), oracle::SupCon(m, labels, kTau), 1e-6);
  spec.kind = LossKind::kSincere;
  EXPECT_NEAR(ContrastiveLoss(spec, ToTensor(m), pairs).item(), oracle::Sincere(m, labels, kTau), 1e-6);
  spec.kind = LossKind::kEpsSupInfoNce;
  EXPECT_NEAR(ContrastiveLoss(spec, ToTensor(m), pairs).item(),
              oracle::EpsSupInfoNce(m, labels, kTau, 0.25), 1e-6);
  spec.kind = LossKind::kCrossEntropy;
  EXPECT_EQ(CodeOf([&] { ContrastiveLoss(spec, ToTensor(m), pairs); }), ErrorCode::kUnknownLoss);
}

TEST(LossNames, RoundTripAndClassification) {
  for (LossKind k : {LossKind::kCrossEntropy, LossKind::kInfoNce, LossKind::kSimClr,
                     LossKind::kSupCon, LossKind::kEpsSupInfoNce, LossKind::kSincere}) {
    EXPECT_EQ(ParseLossKind(LossName(k)), k);
  }
  EXPECT_TRUE(IsSupervisedContrastive(LossKind::kSincere));
  EXPECT_FALSE(IsSupervisedContrastive(LossKind::kSimClr));
  EXPECT_FALSE(IsContrastive(LossKind::kCrossEntropy));
  EXPECT_EQ(CodeOf([] { ParseLossKind("triplet"); }), ErrorCode::kUnknownLoss);
  EXPECT_EQ(ReplicateLabels({3, 5}), (std::vector<int>{3, 5, 3, 5}));
}

TEST(LossErrors, BadInputs) {
  EXPECT_EQ(CodeOf([] { CrossEntropy(D::Zeros({2, 3}), {0, 3}); }), ErrorCode::kLabelOutOfRange);
  EXPECT_EQ(CodeOf([] { CrossEntropy(D::Zeros({2, 3}), {0, -1}); }), ErrorCode::kLabelOutOfRange);
  EXPECT_EQ(CodeOf([] { SupCon(Identical(4, 2), {0, 1, 2, 2}, kTau); }),
            ErrorCode::kAnchorWithoutPositive);
  EXPECT_EQ(CodeOf([] { Sincere(Identical(4, 2), {0, 0, 0, 0}, kTau); }),
            ErrorCode::kAnchorWithoutNegative);
  EXPECT_EQ(CodeOf([] { SupCon(Identical(4, 2), {0, 0, 1}, kTau); }), ErrorCode::kShapeMismatch);
  EXPECT_EQ(CodeOf([] { SimClrNtXent(Identical(3, 2), kTau); }), ErrorCode::kShapeMismatch);
  EXPECT_EQ(CodeOf([] { InfoNce(Identical(4, 2), Identical(3, 2), kTau); }),
            ErrorCode::kShapeMismatch);
  EXPECT_EQ(CodeOf([] { ValidateLossSpec({LossKind::kSupCon, 0.0, 0.25}); }),
            ErrorCode::kInvalidConfig);
  EXPECT_EQ(CodeOf([] { ValidateLossSpec({LossKind::kSupCon, 0.07, -1.0}); }),
            ErrorCode::kInvalidConfig);
}

}  // namespace
}  // namespace mvcl

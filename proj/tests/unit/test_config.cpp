#include <gtest/gtest.h>


#include "mvcl/config.hpp"
#include "mvcl/error.hpp"

namespace mvcl {
namespace {

ErrorCode ParseCode(const std::string& text) {
  try {
    ParseRunConfig(text);
  } catch (const Error& e) {
    return e.code();
  }
  return ErrorCode::kLocked;
}

TEST(RunConfig, EmptyObjectKeepsDefaults) {
  const RunConfig cfg = ParseRunConfig("{}");
  EXPECT_EQ(cfg.seed, 0u);
  EXPECT_EQ(cfg.optim.batch_size, 128);
  EXPECT_EQ(cfg.optim.epochs, 100);
  EXPECT_DOUBLE_EQ(cfg.optim.learning_rate, 1e-4);
  EXPECT_DOUBLE_EQ(cfg.optim.gamma, 0.95);
  EXPECT_DOUBLE_EQ(cfg.loss.temperature, 0.07);
  EXPECT_DOUBLE_EQ(cfg.loss.epsilon, 0.25);
  EXPECT_EQ(cfg.loss.kind, LossKind::kSupCon);
  EXPECT_EQ(cfg.eval.level, EmbeddingLevel::kShape);
  EXPECT_FALSE(cfg.normalize.has_value());
}

TEST(RunConfig, UnknownKeysAreRejectedAtEveryLevel) {
  EXPECT_EQ(ParseCode(R"({"sead": 1})"), ErrorCode::kInvalidConfig);
  EXPECT_EQ(ParseCode(R"({"optim": {"lr": 0.1}})"), ErrorCode::kInvalidConfig);
  EXPECT_EQ(ParseCode(R"({"encoder": {"layers": 3}})"), ErrorCode::kInvalidConfig);
  EXPECT_EQ(ParseCode(R"({"augment": {"normalize": {"mean": 0, "sd": 1}}})"),
            ErrorCode::kInvalidConfig);
  EXPECT_EQ(ParseCode(R"({"eval": {"knn": 5}})"), ErrorCode::kInvalidConfig);
}

TEST(RunConfig, MalformedValues) {
  EXPECT_EQ(ParseCode("{"), ErrorCode::kInvalidConfig);
  EXPECT_EQ(ParseCode(R"({"optim": {"epochs": "ten"}})"), ErrorCode::kInvalidConfig);
  EXPECT_EQ(ParseCode(R"({"loss": {"name": "triplet"}})"), ErrorCode::kUnknownLoss);
  EXPECT_EQ(ParseCode(R"({"loss": {"temperature": 0}})"), ErrorCode::kInvalidConfig);
  EXPECT_EQ(ParseCode(R"({"eval": {"level": "part"}})"), ErrorCode::kInvalidConfig);
}

TEST(RunConfig, SeedPropagates) {
  const RunConfig cfg = ParseRunConfig(R"({"seed": 42})");
  EXPECT_EQ(cfg.seed, 42u);
  EXPECT_EQ(cfg.optim.seed, 42u);
  EXPECT_EQ(cfg.eval.probe.seed, 42u);
}

TEST(RunConfig, ReadsNestedValues) {
  const RunConfig cfg = ParseRunConfig(R"({
    "encoder": {"kind": "mlp", "height": 16, "width": 16, "hidden": [8, 4], "feature_dim": 4},
    "loss": {"name": "eps_supinfonce", "epsilon": 0.5},
    "augment": {"crop_scale": [0.5, 0.9], "normalize": {"mean": 0.3, "std": 0.2}},
    "eval": {"k": 3, "level": "view", "probe_learning_rate": 0.1}
  })");
  EXPECT_EQ(cfg.encoder.kind, EncoderKind::kMlp);
  EXPECT_EQ(cfg.encoder.hidden, (std::vector<int>{8, 4}));
  EXPECT_EQ(cfg.loss.kind, LossKind::kEpsSupInfoNce);
  EXPECT_DOUBLE_EQ(cfg.loss.epsilon, 0.5);
  EXPECT_DOUBLE_EQ(cfg.augment.crop_scale_lo, 0.5);
  EXPECT_DOUBLE_EQ(cfg.augment.crop_scale_hi, 0.9);
  ASSERT_TRUE(cfg.normalize.has_value());
  EXPECT_DOUBLE_EQ(cfg.normalize->std, 0.2);
  EXPECT_EQ(cfg.eval.k, 3);
  EXPECT_EQ(cfg.eval.level, EmbeddingLevel::kView);
  EXPECT_DOUBLE_EQ(cfg.eval.probe.learning_rate, 0.1);
}

TEST(RunConfig, JsonRoundTrip) {
  const RunConfig a = ParseRunConfig(R"({
    "seed": 7, "encoder": {"patch_size": 16, "depth": 2},
    "loss": {"name": "sincere"}, "optim": {"learning_rate": 0.1, "epochs": 3},
    "augment": {"normalize": {"mean": 0.25, "std": 0.5}}, "eval": {"map_at": 5}
  })");
  const RunConfig b = ParseRunConfig(RunConfigJson(a));
  EXPECT_EQ(RunConfigJson(a), RunConfigJson(b));
  EXPECT_EQ(b.seed, 7u);
  EXPECT_EQ(b.encoder, a.encoder);
  EXPECT_EQ(b.loss.kind, LossKind::kSincere);
  EXPECT_EQ(b.optim.epochs, 3);
  EXPECT_EQ(b.eval.map_at, 5);
  EXPECT_DOUBLE_EQ(b.normalize->mean, 0.25);
}

TEST(RunConfig, ShippedConfigsParse) {
  for (const char* name : {"desk.json", "benchmark.json"}) {
    const std::string path = std::string(MVCL_CONFIG_DIR) + "/" + name;
    EXPECT_NO_THROW({
      const RunConfig cfg = LoadRunConfig(path);
      ValidateRunConfig(cfg);
    }) << path;
  }
}

TEST(MakePretrainSetup, NormalizationSource) {
  DatasetManifest m;
  m.classes = {"cube", "sphere"};
  m.has_stats = true;
  m.mean = 0.4;
  m.std = 0.2;
  RunConfig cfg = ParseRunConfig(R"({"seed": 5, "loss": {"name": "simclr"}})");
  PretrainSetup s = MakePretrainSetup(cfg, m);
  EXPECT_DOUBLE_EQ(s.augment.mean, 0.4);
  EXPECT_DOUBLE_EQ(s.augment.std, 0.2);
  EXPECT_EQ(s.class_names, m.classes);
  EXPECT_EQ(s.optim.seed, 5u);
  EXPECT_EQ(s.loss.kind, LossKind::kSimClr);
  cfg.normalize = PixelStats{.mean = 0.5, .std = 0.25};
  s = MakePretrainSetup(cfg, m);
  EXPECT_DOUBLE_EQ(s.augment.mean, 0.5);
  EXPECT_DOUBLE_EQ(s.augment.std, 0.25);
}

}  // namespace
}  // namespace mvcl

#include <gtest/gtest.h>

#include <cmath>

#include "mvcl/error.hpp"
#include "mvcl/eval.hpp"
#include "mvcl/oracles.hpp"
#include "mvcl/rng.hpp"

namespace mvcl {
namespace {

template <typename Fn>
ErrorCode CodeOf(Fn&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "no error raised";
  return ErrorCode::kLocked;
}

EmbeddingMatrix Rows(const std::vector<std::vector<float>>& rows, std::vector<int> labels) {
  EmbeddingMatrix e;
  e.count = rows.size();
  e.dim = rows.empty() ? 0 : rows[0].size();
  for (std::size_t i = 0; i < rows.size(); ++i) {
    e.values.insert(e.values.end(), rows[i].begin(), rows[i].end());
    e.ids.push_back("r" + std::to_string(i));
  }
  e.labels = std::move(labels);
  return e;
}

// Gaussian blobs around well separated class centers.
EmbeddingMatrix Blobs(int classes, int per_class, int dim, double spread, std::uint64_t seed) {
  Rng rng(seed, 1);
  EmbeddingMatrix e;
  e.count = std::size_t(classes) * per_class;
  e.dim = dim;
  for (int c = 0; c < classes; ++c) {
    for (int i = 0; i < per_class; ++i) {
      for (int k = 0; k < dim; ++k) {
        e.values.push_back(static_cast<float>((k == c ? 1.0 : 0.0) + spread * rng.Normal()));
      }
      e.labels.push_back(c);
      e.ids.push_back("c" + std::to_string(c) + "_" + std::to_string(i));
    }
  }
  return e;
}

oracle::Matrix ToMatrix(const EmbeddingMatrix& e) {
  oracle::Matrix m(e.count);
  for (std::size_t i = 0; i < e.count; ++i) m[i].assign(e.row(i).begin(), e.row(i).end());
  return m;
}

Checkpoint SmallCheckpoint() {
  Checkpoint ckpt;
  ckpt.encoder.kind = EncoderKind::kMlp;
  ckpt.encoder.height = 8;
  ckpt.encoder.width = 8;
  ckpt.encoder.hidden = {16};
  ckpt.encoder.feature_dim = 6;
  ckpt.meta.data_mean = 0.5;
  ckpt.meta.data_std = 0.25;
  InitEncoderParams(ckpt.encoder, 11, ckpt.params);
  return ckpt;
}

ViewStore StoreOf(const std::vector<std::vector<Image>>& shapes) {
  ViewStore s;
  s.n_views = static_cast<int>(shapes[0].size());
  s.height = shapes[0][0].height;
  s.width = shapes[0][0].width;
  for (std::size_t i = 0; i < shapes.size(); ++i) {
    s.shape_ids.push_back("shape" + std::to_string(i));
    s.shape_labels.push_back(static_cast<int>(i % 2));
    for (const Image& img : shapes[i]) {
      s.images.push_back(img);
      s.labels.push_back(static_cast<int>(i % 2));
      s.shape_index.push_back(i);
    }
  }
  return s;
}

Image Noise(int size, std::uint64_t seed) {
  Rng rng(seed, 3);
  Image img(size, size);
  for (float& v : img.pixels) v = static_cast<float>(rng.Uniform());
  return img;
}

TEST(ComputeEmbeddings, IdenticalViewsGiveTheViewEmbedding) {
  const Checkpoint ckpt = SmallCheckpoint();
  const Image a = Noise(8, 1), b = Noise(8, 2);
  const ViewStore store = StoreOf({{a, a, a}, {b, b, b}});
  const auto views = ComputeEmbeddings(ckpt, store, EmbeddingLevel::kView);
  const auto shapes = ComputeEmbeddings(ckpt, store, EmbeddingLevel::kShape);
  ASSERT_EQ(views.count, 6u);
  ASSERT_EQ(shapes.count, 2u);
  for (std::size_t s = 0; s < 2; ++s) {
    for (std::size_t k = 0; k < shapes.dim; ++k) {
      EXPECT_NEAR(shapes.row(s)[k], views.row(s * 3)[k], 1e-6);
    }
  }
  EXPECT_EQ(views.ids[4], "shape1#01");
  EXPECT_EQ(shapes.ids[1], "shape1");
  EXPECT_EQ(shapes.labels, (std::vector<int>{0, 1}));
}

TEST(ComputeEmbeddings, RowsAreUnitLengthAndBatchIndependent) {
  const Checkpoint ckpt = SmallCheckpoint();
  const ViewStore store = StoreOf({{Noise(8, 1), Noise(8, 2)}, {Noise(8, 3), Noise(8, 4)},
                                   {Noise(8, 5), Noise(8, 6)}});
  const auto whole = ComputeEmbeddings(ckpt, store, EmbeddingLevel::kView, 64);
  const auto ones = ComputeEmbeddings(ckpt, store, EmbeddingLevel::kView, 1);
  ASSERT_EQ(whole.count, store.size());
  for (std::size_t i = 0; i < whole.count; ++i) {
    double ss = 0.0;
    for (float v : whole.row(i)) ss += double(v) * v;
    EXPECT_NEAR(std::sqrt(ss), 1.0, 1e-6);
    for (std::size_t k = 0; k < whole.dim; ++k) EXPECT_NEAR(whole.row(i)[k], ones.row(i)[k], 1e-5);
  }
}

TEST(ComputeEmbeddings, RejectsForeignCheckpoint) {
  Checkpoint ckpt = SmallCheckpoint();
  ckpt.encoder.kind = EncoderKind::kVit;
  const ViewStore store = StoreOf({{Noise(8, 1)}});
  EXPECT_EQ(CodeOf([&] { ComputeEmbeddings(ckpt, store, EmbeddingLevel::kView); }),
            ErrorCode::kCheckpointMismatch);
}

TEST(LinearProbe, SeparableBlobsAreLearned) {
  const auto train = Blobs(4, 20, 8, 0.05, 1);
  const auto test = Blobs(4, 10, 8, 0.05, 2);
  const auto r = LinearProbe(train, test, {.epochs = 50, .learning_rate = 0.1});
  EXPECT_EQ(r.top1, 1.0);
  EXPECT_EQ(r.top5, 1.0);
  ASSERT_EQ(r.per_class_top1.size(), 4u);
  for (double v : r.per_class_top1) EXPECT_EQ(v, 1.0);
  EXPECT_EQ(r.predictions.size(), test.count);
}

TEST(LinearProbe, ShuffledLabelsStayNearChance) {
  auto train = Blobs(4, 40, 8, 0.05, 1);
  const auto test = Blobs(4, 40, 8, 0.05, 2);
  Rng rng(9, 9);
  for (int& l : train.labels) l = static_cast<int>(rng.Below(4));
  const auto r = LinearProbe(train, test, {.epochs = 30, .learning_rate = 0.1});
  EXPECT_LT(r.top1, 0.5);
}

TEST(LinearProbe, Deterministic) {
  const auto train = Blobs(3, 10, 6, 0.5, 1);
  const auto test = Blobs(3, 10, 6, 0.5, 2);
  const ProbeConfig cfg{.epochs = 5, .learning_rate = 0.05, .seed = 4};
  const auto a = LinearProbe(train, test, cfg);
  const auto b = LinearProbe(train, test, cfg);
  EXPECT_EQ(a.predictions, b.predictions);
  EXPECT_EQ(a.top1, b.top1);
}

TEST(LinearProbe, Errors) {
  const auto train = Blobs(2, 4, 4, 0.1, 1);
  const auto narrow = Blobs(2, 4, 3, 0.1, 1);
  EXPECT_EQ(CodeOf([&] { LinearProbe(train, narrow, {}); }), ErrorCode::kDimensionMismatch);
  EXPECT_EQ(CodeOf([&] { LinearProbe(train, train, {.epochs = 0}); }), ErrorCode::kInvalidConfig);
}

TEST(TopKHit, RanksAndTies) {
  const std::vector<double> logits{0.1, 0.5, 0.5, -1.0};
  EXPECT_TRUE(TopKHit(logits, 1, 1));
  EXPECT_FALSE(TopKHit(logits, 2, 1));
  EXPECT_TRUE(TopKHit(logits, 2, 2));
  EXPECT_FALSE(TopKHit(logits, 3, 3));
  // Fewer classes than k: always a hit.
  for (int label = 0; label < 4; ++label) EXPECT_TRUE(TopKHit(logits, label, 5));
}

TEST(Cosine, Examples) {
  const std::vector<float> a{1, 0}, b{0, 2}, c{3, 0}, d{-1, 0};
  EXPECT_DOUBLE_EQ(Cosine(a, b), 0.0);
  EXPECT_DOUBLE_EQ(Cosine(a, c), 1.0);
  EXPECT_DOUBLE_EQ(Cosine(a, d), -1.0);
  const std::vector<float> z{0, 0};
  EXPECT_EQ(CodeOf([&] { Cosine(a, z); }), ErrorCode::kNonFiniteValue);
}

TEST(Knn, MajorityVote) {
  const auto corpus = Rows({{1, 0}, {0.9f, 0.1f}, {0, 1}, {0.1f, 0.9f}, {0.2f, 0.8f}}, {0, 0, 1, 1, 1});
  const auto queries = Rows({{1, 0.05f}, {0.05f, 1}}, {0, 1});
  EXPECT_EQ(KnnClassify(corpus, queries, 1), (std::vector<int>{0, 1}));
  EXPECT_EQ(KnnClassify(corpus, queries, 3), (std::vector<int>{0, 1}));
  // k = 5 lets the three class-1 rows outvote the two class-0 rows.
  EXPECT_EQ(KnnClassify(corpus, queries, 5), (std::vector<int>{1, 1}));
}

TEST(Knn, VoteTieGoesToLargerSimilarity) {
  const auto corpus = Rows({{1, 0}, {0, 1}}, {0, 1});
  const auto queries = Rows({{0.2f, 1}, {1, 0.2f}}, {1, 0});
  EXPECT_EQ(KnnClassify(corpus, queries, 2), (std::vector<int>{1, 0}));
}

TEST(Knn, FullTieGoesToLowerClass) {
  const auto corpus = Rows({{1, 0}, {0, 1}}, {1, 0});
  const auto queries = Rows({{1, 1}}, {0});
  EXPECT_EQ(KnnClassify(corpus, queries, 2), (std::vector<int>{0}));
}

TEST(Knn, MatchesExhaustiveOracle) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto corpus = Blobs(5, 12, 6, 0.6, seed);
    const auto queries = Blobs(5, 6, 6, 0.6, seed + 100);
    for (int k : {1, 3, 7, 10}) {
      EXPECT_EQ(KnnClassify(corpus, queries, k),
                oracle::Knn(ToMatrix(corpus), corpus.labels, ToMatrix(queries), k))
          << "seed " << seed << " k " << k;
    }
  }
}

TEST(Knn, Errors) {
  const auto corpus = Blobs(2, 2, 3, 0.1, 1);
  EXPECT_EQ(CodeOf([&] { KnnClassify(corpus, corpus, 5); }), ErrorCode::kCorpusTooSmall);
  EXPECT_EQ(CodeOf([&] { KnnClassify(corpus, corpus, 0); }), ErrorCode::kInvalidConfig);
  EXPECT_EQ(CodeOf([&] { KnnClassify(corpus, Blobs(2, 2, 4, 0.1, 1), 1); }),
            ErrorCode::kDimensionMismatch);
}

TEST(Accuracy, Examples) {
  EXPECT_DOUBLE_EQ(Accuracy({0, 1, 2, 2}, {0, 1, 1, 2}), 0.75);
  EXPECT_EQ(CodeOf([] { Accuracy({0}, {0, 1}); }), ErrorCode::kDimensionMismatch);
}

TEST(Retrieve, SelfRanksFirst) {
  const auto corpus = Blobs(4, 8, 8, 0.3, 5);
  for (std::size_t i = 0; i < corpus.count; ++i) {
    const auto r = Retrieve(corpus, corpus.row(i));
    EXPECT_EQ(r.order[0], i);
    EXPECT_NEAR(r.similarity[0], 1.0, 1e-6);
  }
}

TEST(Retrieve, MatchesOracleAndIsSorted) {
  const auto corpus = Blobs(3, 10, 5, 0.8, 6);
  const auto queries = Blobs(3, 3, 5, 0.8, 7);
  for (std::size_t q = 0; q < queries.count; ++q) {
    const auto r = Retrieve(corpus, queries.row(q));
    const std::vector<double> query(queries.row(q).begin(), queries.row(q).end());
    EXPECT_EQ(r.order, oracle::Ranking(ToMatrix(corpus), query));
    for (std::size_t i = 1; i < r.similarity.size(); ++i) EXPECT_GE(r.similarity[i - 1], r.similarity[i]);
  }
}

TEST(Retrieve, EqualSimilaritiesKeepCorpusOrder) {
  const auto corpus = Rows({{0, 1}, {1, 0}, {2, 0}, {0, 3}}, {0, 0, 0, 0});
  const std::vector<float> q{1, 0};
  EXPECT_EQ(Retrieve(corpus, q).order, (std::vector<std::size_t>{1, 2, 0, 3}));
}

TEST(Retrieve, RescalingRowsChangesNothing) {
  auto corpus = Blobs(3, 6, 4, 0.5, 8);
  const auto queries = Blobs(3, 2, 4, 0.5, 9);
  const auto before = EvaluateRetrieval(corpus, queries, 5);
  for (std::size_t i = 0; i < corpus.count; ++i) {
    for (std::size_t k = 0; k < corpus.dim; ++k) corpus.values[i * corpus.dim + k] *= float(i + 2);
  }
  const auto after = EvaluateRetrieval(corpus, queries, 5);
  EXPECT_NEAR(before.map, after.map, 1e-12);
  for (std::size_t q = 0; q < queries.count; ++q) {
    EXPECT_EQ(before.rankings[q].order, after.rankings[q].order);
  }
}

TEST(Retrieve, Errors) {
  EmbeddingMatrix empty;
  empty.dim = 2;
  const std::vector<float> q{1, 0};
  EXPECT_EQ(CodeOf([&] { Retrieve(empty, q); }), ErrorCode::kEmptyCorpus);
  const auto corpus = Rows({{1, 0, 0}}, {0});
  EXPECT_EQ(CodeOf([&] { Retrieve(corpus, q); }), ErrorCode::kDimensionMismatch);
}

TEST(AveragePrecision, Examples) {
  EXPECT_NEAR(AveragePrecision({true, false, true}), (1.0 + 2.0 / 3.0) / 2.0, 1e-15);
  EXPECT_DOUBLE_EQ(AveragePrecision({true, true, false, false}), 1.0);
  EXPECT_DOUBLE_EQ(AveragePrecision({false, false, false, false, true}), 0.2);
  // Truncation at k divides by min(R, k).
  EXPECT_DOUBLE_EQ(AveragePrecision({true, false, true}, 1), 1.0);
  EXPECT_DOUBLE_EQ(AveragePrecision({false, true, true}, 1), 0.0);
  EXPECT_EQ(CodeOf([] { AveragePrecision({false, false}); }), ErrorCode::kNoRelevantItems);
}

TEST(AveragePrecision, MatchesOracle) {
  Rng rng(12, 12);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<bool> rel(1 + rng.Below(30));
    for (std::size_t i = 0; i < rel.size(); ++i) rel[i] = rng.Bernoulli(0.3);
    rel[rng.Below(rel.size())] = true;
    for (int k : {0, 1, 5, 10, 100}) {
      EXPECT_NEAR(AveragePrecision(rel, k), oracle::AveragePrecision(rel, k), 1e-12);
    }
  }
}

TEST(EvaluateRetrieval, PerfectEmbeddingsScoreOne) {
  const auto corpus = Blobs(4, 5, 6, 0.01, 1);
  const auto queries = Blobs(4, 2, 6, 0.01, 2);
  const auto r = EvaluateRetrieval(corpus, queries, 5);
  EXPECT_DOUBLE_EQ(r.map, 1.0);
  EXPECT_DOUBLE_EQ(r.map_at_k, 1.0);
  EXPECT_EQ(r.rankings.size(), queries.count);
}

TEST(EvaluateRetrieval, QueryWithoutRelevantItems) {
  const auto corpus = Rows({{1, 0}, {0, 1}}, {0, 0});
  const auto queries = Rows({{1, 1}}, {2});
  EXPECT_EQ(CodeOf([&] { EvaluateRetrieval(corpus, queries, 10); }), ErrorCode::kNoRelevantItems);
}

TEST(RankingsCsv, Format) {
  const auto corpus = Rows({{1, 0}, {0, 1}}, {0, 1});
  auto queries = Rows({{0, 1}}, {1});
  queries.ids = {"q"};
  const auto r = EvaluateRetrieval(corpus, queries, 2);
  EXPECT_EQ(RankingsCsv(r, corpus, queries),
            "query_id,rank,corpus_id,similarity,relevant\n"
            "q,1,r1,1.000000000,1\n"
            "q,2,r0,0.000000000,0\n");
}

TEST(Metrics, KeyValueOmitsUncomputedFields) {
  MetricsReport m;
  m.knn_accuracy = 0.5;
  m.knn_k = 3;
  m.map_at_k = 0.25;
  m.map_at = 7;
  EXPECT_EQ(MetricsKeyValue(m), "knn_top1@3=0.500000\nmap@7=0.250000\n");
}

TEST(Metrics, PerClassNamesAndJson) {
  MetricsReport m;
  m.top1 = 0.75;
  m.top5 = 1.0;
  m.class_names = {"cube", "torus"};
  m.per_class_top1 = {1.0, 0.5};
  EXPECT_EQ(MetricsKeyValue(m),
            "top1=0.750000\ntop5=1.000000\ntop1.cube=1.000000\ntop1.torus=0.500000\n");
  const std::string json = MetricsJson(m);
  EXPECT_NE(json.find("\"top1\""), std::string::npos);
  EXPECT_NE(json.find("\"torus\""), std::string::npos);
  EXPECT_EQ(json.find("map"), std::string::npos);
}

TEST(Metrics, TopFiveNeverBelowTopOne) {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const auto train = Blobs(8, 6, 8, 1.0, seed);
    const auto test = Blobs(8, 4, 8, 1.0, seed + 50);
    const auto r = LinearProbe(train, test, {.epochs = 5, .learning_rate = 0.05, .seed = seed});
    EXPECT_GE(r.top5, r.top1);
  }
}

}  // namespace
}  // namespace mvcl

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "mvcl/data.hpp"
#include "mvcl/model.hpp"

namespace mvcl {

/// Encoder features of every view in `store`, l2-normalized. At shape level
/// the normalized view features of each shape are averaged and normalized
/// again. No augmentation: views are resized to the encoder input.
EmbeddingMatrix ComputeEmbeddings(const Checkpoint& ckpt, const ViewStore& store,
                                  EmbeddingLevel level, std::size_t batch_size = 64);

struct ProbeConfig {
  int epochs = 50;
  double learning_rate = 1e-2;
  double weight_decay = 0.0;
  int batch_size = 16;
  std::uint64_t seed = 0;
};

struct ProbeReport {
  double top1 = 0.0;
  double top5 = 0.0;
  std::vector<double> per_class_top1;
  std::vector<int> predictions;
};

/// Trains one linear layer with cross entropy on frozen embeddings, then
/// scores the test rows.
ProbeReport LinearProbe(const EmbeddingMatrix& train, const EmbeddingMatrix& test,
                        const ProbeConfig& cfg);

/// True when `label` is among the k largest logits (ties resolved toward the
/// lower class id). k >= number of classes is always a hit.
bool TopKHit(const std::vector<double>& logits, int label, int k);

/// Cosine similarity of two raw rows.
double Cosine(std::span<const float> a, std::span<const float> b);

/// Majority vote among the k most similar corpus rows; ties go to the larger
/// summed similarity, then to the lower class id.
std::vector<int> KnnClassify(const EmbeddingMatrix& corpus, const EmbeddingMatrix& queries, int k);
double Accuracy(const std::vector<int>& predictions, const std::vector<int>& labels);

struct RetrievalRanking {
  std::string query_id;
  std::vector<std::size_t> order;   // corpus rows, best first
  std::vector<double> similarity;   // aligned with order
};

/// Full ranking by descending cosine similarity; equal similarities keep
/// corpus order.
RetrievalRanking Retrieve(const EmbeddingMatrix& corpus, std::span<const float> query,
                          std::string query_id = "");

/// relevant[r] flags the item at rank r + 1. k <= 0 means no truncation; with
/// truncation the sum runs over the first k ranks and is divided by min(R, k).
double AveragePrecision(const std::vector<bool>& relevant, int k = 0);

struct RetrievalReport {
  double map = 0.0;
  double map_at_k = 0.0;
  int k = 10;
  std::vector<RetrievalRanking> rankings;
};

/// Every query against the whole corpus; relevance is label equality.
RetrievalReport EvaluateRetrieval(const EmbeddingMatrix& corpus, const EmbeddingMatrix& queries,
                                  int k);

/// query_id,rank,corpus_id,similarity,relevant
std::string RankingsCsv(const RetrievalReport& report, const EmbeddingMatrix& corpus,
                        const EmbeddingMatrix& queries);

struct MetricsReport {
  double top1 = -1.0;
  double top5 = -1.0;
  double knn_accuracy = -1.0;
  int knn_k = 10;
  double map = -1.0;
  double map_at_k = -1.0;
  int map_at = 10;
  std::vector<std::string> class_names;
  std::vector<double> per_class_top1;
};

/// Fields left at -1 were not computed and are omitted.
std::string MetricsKeyValue(const MetricsReport& report);
std::string MetricsJson(const MetricsReport& report);

}  // namespace mvcl

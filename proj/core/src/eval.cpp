#include "mvcl/eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <numeric>
#include <sstream>

#include "json_io.hpp"
#include "mvcl/error.hpp"
#include "mvcl/losses.hpp"
#include "mvcl/ops.hpp"
#include "mvcl/rng.hpp"
#include "mvcl/train.hpp"

namespace mvcl {

using ad::Tensor;

EmbeddingMatrix ComputeEmbeddings(const Checkpoint& ckpt, const ViewStore& store,
                                  EmbeddingLevel level, std::size_t batch_size) {
  if (ckpt.encoder.channels != 1) {
    Fail(ErrorCode::kCheckpointMismatch, "checkpoint encoder expects " +
                                             std::to_string(ckpt.encoder.channels) + " channels");
  }
  if (!ckpt.params.Contains(ckpt.encoder.kind == EncoderKind::kVit ? "enc.patch.w" : "enc.fc0.w")) {
    Fail(ErrorCode::kCheckpointMismatch, "checkpoint lacks encoder parameters for " +
                                             std::string(EncoderName(ckpt.encoder.kind)));
  }
  if (store.size() == 0) Fail(ErrorCode::kEmptyDataset, "no views to embed");
  if (batch_size == 0) batch_size = 1;
  const int h = ckpt.encoder.height, w = ckpt.encoder.width;
  const std::size_t plane = std::size_t(h) * w;
  const std::size_t dim = static_cast<std::size_t>(ckpt.encoder.feature_dim);

  EmbeddingMatrix views;
  views.count = store.size();
  views.dim = dim;
  views.level = EmbeddingLevel::kView;
  views.class_names = ckpt.meta.class_names;
  views.values.resize(views.count * dim);
  ad::NoGradGuard no_grad;
  for (std::size_t begin = 0; begin < store.size(); begin += batch_size) {
    const std::size_t n = std::min(batch_size, store.size() - begin);
    std::vector<float> pixels(n * plane);
    for (std::size_t r = 0; r < n; ++r) {
      const auto x = EvalTransform(store.images[begin + r], ckpt.meta.data_mean,
                                   ckpt.meta.data_std, h, w);
      std::copy(x.begin(), x.end(), pixels.begin() + r * plane);
    }
    const auto images = Tensor<float>::Constant({n, 1, std::size_t(h), std::size_t(w)}, std::move(pixels));
    const auto features = EncoderForward(ckpt.params, ckpt.encoder, images);
    std::copy(features.data().begin(), features.data().end(), views.values.begin() + begin * dim);
  }
  for (std::size_t s = 0; s < store.size(); ++s) {
    const std::size_t shape = store.shape_index[s];
    const std::size_t view = s - shape * static_cast<std::size_t>(store.n_views);
    char suffix[16];
    std::snprintf(suffix, sizeof(suffix), "#%02zu", view);
    views.ids.push_back(store.shape_ids[shape] + suffix);
    views.labels.push_back(store.labels[s]);
  }
  NormalizeRows(views);
  if (level == EmbeddingLevel::kView) return views;

  EmbeddingMatrix shapes;
  shapes.count = store.shape_ids.size();
  shapes.dim = dim;
  shapes.level = EmbeddingLevel::kShape;
  shapes.class_names = ckpt.meta.class_names;
  shapes.ids = store.shape_ids;
  shapes.labels = store.shape_labels;
  std::vector<double> acc(shapes.count * dim, 0.0);
  std::vector<std::size_t> counts(shapes.count, 0);
  for (std::size_t s = 0; s < store.size(); ++s) {
    const std::size_t shape = store.shape_index[s];
    const auto row = views.row(s);
    for (std::size_t k = 0; k < dim; ++k) acc[shape * dim + k] += row[k];
    ++counts[shape];
  }
  shapes.values.resize(acc.size());
  for (std::size_t i = 0; i < shapes.count; ++i) {
    for (std::size_t k = 0; k < dim; ++k) {
      shapes.values[i * dim + k] = static_cast<float>(acc[i * dim + k] / counts[i]);
    }
  }
  NormalizeRows(shapes);
  return shapes;
}

bool TopKHit(const std::vector<double>& logits, int label, int k) {
  int rank = 0;
  for (int c = 0; c < static_cast<int>(logits.size()); ++c) {
    if (logits[c] > logits[label] || (logits[c] == logits[label] && c < label)) ++rank;
  }
  return rank < k;
}

namespace {

int NumClasses(const EmbeddingMatrix& a, const EmbeddingMatrix& b) {
  int c = static_cast<int>(std::max(a.class_names.size(), b.class_names.size()));
  for (int l : a.labels) c = std::max(c, l + 1);
  for (int l : b.labels) c = std::max(c, l + 1);
  return c;
}

}  // namespace

ProbeReport LinearProbe(const EmbeddingMatrix& train, const EmbeddingMatrix& test,
                        const ProbeConfig& cfg) {
  if (train.dim != test.dim) {
    Fail(ErrorCode::kDimensionMismatch, "train dim " + std::to_string(train.dim) +
                                            " vs test dim " + std::to_string(test.dim));
  }
  if (train.count == 0 || test.count == 0) Fail(ErrorCode::kEmptyDataset, "probe needs rows");
  if (cfg.epochs < 1 || cfg.batch_size < 1 || !(cfg.learning_rate > 0.0)) {
    Fail(ErrorCode::kInvalidConfig, "probe needs epochs, batch_size and learning_rate > 0");
  }
  const int classes = std::max(2, NumClasses(train, test));
  const std::size_t dim = train.dim;
  ParameterSet<double> params;
  InitClassifierParams<double>(static_cast<int>(dim), classes, cfg.seed, params);

  std::vector<std::size_t> order(train.count);
  std::iota(order.begin(), order.end(), 0);
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    Rng rng(cfg.seed, StreamId({HashName("probe-shuffle"), static_cast<std::uint64_t>(epoch)}));
    for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng.Below(i)]);
    for (std::size_t begin = 0; begin < order.size(); begin += cfg.batch_size) {
      const std::size_t n = std::min<std::size_t>(cfg.batch_size, order.size() - begin);
      std::vector<double> x(n * dim);
      std::vector<int> labels(n);
      for (std::size_t r = 0; r < n; ++r) {
        const auto row = train.row(order[begin + r]);
        std::copy(row.begin(), row.end(), x.begin() + r * dim);
        labels[r] = train.labels[order[begin + r]];
      }
      params.ZeroGrad();
      const auto logits = ClassifierForward(params, Tensor<double>::Constant({n, dim}, std::move(x)));
      ad::Backward(CrossEntropy(logits, labels));
      SgdStep(params, cfg.learning_rate, cfg.weight_decay);
    }
  }

  ProbeReport report;
  std::vector<double> x(test.values.begin(), test.values.end());
  ad::NoGradGuard no_grad;
  const auto logits = ClassifierForward(params, Tensor<double>::Constant({test.count, dim}, std::move(x)));
  std::vector<int> hits(classes, 0), totals(classes, 0);
  std::size_t top1 = 0, top5 = 0;
  for (std::size_t i = 0; i < test.count; ++i) {
    const auto row = logits.data().subspan(i * classes, classes);
    const std::vector<double> l(row.begin(), row.end());
    const int label = test.labels[i];
    const int pred = static_cast<int>(std::max_element(l.begin(), l.end()) - l.begin());
    report.predictions.push_back(pred);
    const bool hit = pred == label;
    top1 += hit;
    top5 += TopKHit(l, label, 5);
    ++totals[label];
    hits[label] += hit;
  }
  report.top1 = double(top1) / test.count;
  report.top5 = double(top5) / test.count;
  for (int c = 0; c < classes; ++c) {
    report.per_class_top1.push_back(totals[c] ? double(hits[c]) / totals[c] : 0.0);
  }
  return report;
}

double Cosine(std::span<const float> a, std::span<const float> b) {
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) {
    dot += double(a[k]) * b[k];
    na += double(a[k]) * a[k];
    nb += double(b[k]) * b[k];
  }
  if (!(na > 0.0) || !(nb > 0.0)) Fail(ErrorCode::kNonFiniteValue, "cosine of a zero vector");
  return dot / (std::sqrt(na) * std::sqrt(nb));
}

std::vector<int> KnnClassify(const EmbeddingMatrix& corpus, const EmbeddingMatrix& queries, int k) {
  if (k < 1) Fail(ErrorCode::kInvalidConfig, "k must be >= 1");
  if (corpus.count < static_cast<std::size_t>(k)) {
    Fail(ErrorCode::kCorpusTooSmall, "corpus has " + std::to_string(corpus.count) +
                                         " rows, k = " + std::to_string(k));
  }
  if (corpus.dim != queries.dim) Fail(ErrorCode::kDimensionMismatch, "corpus/query dims differ");
  std::vector<int> predictions;
  predictions.reserve(queries.count);
  for (std::size_t q = 0; q < queries.count; ++q) {
    const RetrievalRanking ranking = Retrieve(corpus, queries.row(q));
    std::map<int, std::pair<int, double>> votes;  // label -> (count, summed similarity)
    for (int r = 0; r < k; ++r) {
      auto& v = votes[corpus.labels[ranking.order[r]]];
      ++v.first;
      v.second += ranking.similarity[r];
    }
    int best = votes.begin()->first;
    for (const auto& [label, v] : votes) {
      const auto& b = votes[best];
      if (v.first > b.first || (v.first == b.first && v.second > b.second)) best = label;
    }
    predictions.push_back(best);
  }
  return predictions;
}

double Accuracy(const std::vector<int>& predictions, const std::vector<int>& labels) {
  if (predictions.size() != labels.size() || labels.empty()) {
    Fail(ErrorCode::kDimensionMismatch, "predictions and labels differ in length");
  }
  std::size_t hits = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) hits += predictions[i] == labels[i];
  return double(hits) / labels.size();
}

RetrievalRanking Retrieve(const EmbeddingMatrix& corpus, std::span<const float> query,
                          std::string query_id) {
  if (corpus.count == 0) Fail(ErrorCode::kEmptyCorpus, "retrieval corpus is empty");
  if (query.size() != corpus.dim) Fail(ErrorCode::kDimensionMismatch, "query dim differs from corpus");
  std::vector<double> sims(corpus.count);
  for (std::size_t i = 0; i < corpus.count; ++i) sims[i] = Cosine(query, corpus.row(i));
  RetrievalRanking ranking;
  ranking.query_id = std::move(query_id);
  ranking.order.resize(corpus.count);
  std::iota(ranking.order.begin(), ranking.order.end(), 0);
  std::stable_sort(ranking.order.begin(), ranking.order.end(),
                   [&](std::size_t a, std::size_t b) { return sims[a] > sims[b]; });
  for (std::size_t i : ranking.order) ranking.similarity.push_back(sims[i]);
  return ranking;
}

double AveragePrecision(const std::vector<bool>& relevant, int k) {
  const std::size_t total = static_cast<std::size_t>(std::count(relevant.begin(), relevant.end(), true));
  if (total == 0) Fail(ErrorCode::kNoRelevantItems, "no relevant items in the ranking");
  const std::size_t depth = k > 0 ? std::min<std::size_t>(k, relevant.size()) : relevant.size();
  double sum = 0.0;
  std::size_t found = 0;
  for (std::size_t r = 0; r < depth; ++r) {
    if (relevant[r]) {
      ++found;
      sum += double(found) / double(r + 1);
    }
  }
  const std::size_t denom = k > 0 ? std::min<std::size_t>(total, k) : total;
  return sum / double(denom);
}

RetrievalReport EvaluateRetrieval(const EmbeddingMatrix& corpus, const EmbeddingMatrix& queries,
                                  int k) {
  if (k < 1) Fail(ErrorCode::kInvalidConfig, "map_at must be >= 1");
  if (queries.count == 0) Fail(ErrorCode::kEmptyDataset, "no retrieval queries");
  RetrievalReport report;
  report.k = k;
  for (std::size_t q = 0; q < queries.count; ++q) {
    RetrievalRanking ranking = Retrieve(corpus, queries.row(q), queries.ids[q]);
    std::vector<bool> relevant;
    relevant.reserve(ranking.order.size());
    for (std::size_t i : ranking.order) relevant.push_back(corpus.labels[i] == queries.labels[q]);
    try {
      report.map += AveragePrecision(relevant);
      report.map_at_k += AveragePrecision(relevant, k);
    } catch (const Error& e) {
      if (e.code() != ErrorCode::kNoRelevantItems) throw;
      Fail(ErrorCode::kNoRelevantItems, "query " + queries.ids[q] + " (label " +
                                            std::to_string(queries.labels[q]) +
                                            ") has no relevant corpus item");
    }
    report.rankings.push_back(std::move(ranking));
  }
  report.map /= double(queries.count);
  report.map_at_k /= double(queries.count);
  return report;
}

std::string RankingsCsv(const RetrievalReport& report, const EmbeddingMatrix& corpus,
                        const EmbeddingMatrix& queries) {
  std::ostringstream out;
  out << "query_id,rank,corpus_id,similarity,relevant\n";
  char sim[32];
  for (std::size_t q = 0; q < report.rankings.size(); ++q) {
    const auto& r = report.rankings[q];
    for (std::size_t i = 0; i < r.order.size(); ++i) {
      std::snprintf(sim, sizeof(sim), "%.9f", r.similarity[i]);
      out << r.query_id << ',' << i + 1 << ',' << corpus.ids[r.order[i]] << ',' << sim << ','
          << (corpus.labels[r.order[i]] == queries.labels[q] ? 1 : 0) << '\n';
    }
  }
  return out.str();
}

std::string MetricsKeyValue(const MetricsReport& m) {
  std::ostringstream out;
  char buf[64];
  auto put = [&](const std::string& key, double v) {
    if (v < 0.0) return;
    std::snprintf(buf, sizeof(buf), "%.6f", v);
    out << key << '=' << buf << '\n';
  };
  put("top1", m.top1);
  put("top5", m.top5);
  put("knn_top1@" + std::to_string(m.knn_k), m.knn_accuracy);
  put("map", m.map);
  put("map@" + std::to_string(m.map_at), m.map_at_k);
  for (std::size_t c = 0; c < m.per_class_top1.size(); ++c) {
    const std::string name = c < m.class_names.size() ? m.class_names[c] : std::to_string(c);
    put("top1." + name, m.per_class_top1[c]);
  }
  return out.str();
}

std::string MetricsJson(const MetricsReport& m) {
  detail::Json j = detail::Json::object();
  if (m.top1 >= 0.0) j["top1"] = m.top1;
  if (m.top5 >= 0.0) j["top5"] = m.top5;
  if (m.knn_accuracy >= 0.0) {
    j["knn_accuracy"] = m.knn_accuracy;
    j["knn_k"] = m.knn_k;
  }
  if (m.map >= 0.0) j["map"] = m.map;
  if (m.map_at_k >= 0.0) {
    j["map_at_k"] = m.map_at_k;
    j["map_at"] = m.map_at;
  }
  if (!m.per_class_top1.empty()) {
    detail::Json per = detail::Json::object();
    for (std::size_t c = 0; c < m.per_class_top1.size(); ++c) {
      per[c < m.class_names.size() ? m.class_names[c] : std::to_string(c)] = m.per_class_top1[c];
    }
    j["per_class_top1"] = per;
  }
  return j.dump(2) + "\n";
}

}  // namespace mvcl

#include "mvcl/data.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>

#include "json_io.hpp"
#include "mvcl/error.hpp"

namespace mvcl {

namespace fs = std::filesystem;
using detail::Json;

std::string_view SplitName(Split split) { return split == Split::kTrain ? "train" : "test"; }

Split ParseSplit(std::string_view name) {
  if (name == "train") return Split::kTrain;
  if (name == "test") return Split::kTest;
  Fail(ErrorCode::kUnknownSplit, "unknown split '" + std::string(name) + "'");
}

std::vector<std::size_t> DatasetManifest::ItemsInSplit(Split split) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < items.size(); ++i) {
    if (items[i].split == split) out.push_back(i);
  }
  return out;
}

namespace {

std::vector<std::string> SortedChildren(const fs::path& dir, bool directories) {
  std::vector<std::string> names;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.is_directory() == directories) names.push_back(entry.path().filename().string());
  }
  std::sort(names.begin(), names.end());
  return names;
}

std::string ViewFileName(int index) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "view_%02d.ppm", index);
  return buf;
}

}  // namespace

DatasetManifest BuildManifest(const std::string& root) {
  if (!fs::is_directory(root)) Fail(ErrorCode::kEmptyDataset, root + " is not a directory");
  DatasetManifest m;
  m.root = root;
  m.classes = SortedChildren(root, true);
  if (m.classes.empty()) Fail(ErrorCode::kEmptyDataset, "no class directories under " + root);

  for (std::size_t c = 0; c < m.classes.size(); ++c) {
    const fs::path class_dir = fs::path(root) / m.classes[c];
    const auto splits = SortedChildren(class_dir, true);
    if (splits.empty()) Fail(ErrorCode::kEmptyDataset, "class " + m.classes[c] + " has no splits");
    for (const auto& split_name : splits) {
      const Split split = ParseSplit(split_name);
      for (const auto& shape_id : SortedChildren(class_dir / split_name, true)) {
        const fs::path shape_dir = class_dir / split_name / shape_id;
        const auto files = SortedChildren(shape_dir, false);
        std::vector<std::string> views;
        for (const auto& f : files) {
          if (f.rfind("view_", 0) == 0 && fs::path(f).extension() == ".ppm") views.push_back(f);
        }
        const int count = static_cast<int>(views.size());
        if (m.n_views == 0) m.n_views = count;
        bool contiguous = count == m.n_views && count > 0;
        for (int v = 0; contiguous && v < count; ++v) contiguous = views[v] == ViewFileName(v);
        if (!contiguous) {
          Fail(ErrorCode::kInconsistentViewCount,
               shape_dir.string() + " has " + std::to_string(count) + " views, expected view_00.." +
                   ViewFileName(m.n_views - 1));
        }
        ManifestItem item;
        item.shape_id = shape_id;
        item.class_id = static_cast<int>(c);
        item.split = split;
        for (const auto& v : views) {
          item.view_paths.push_back(
              (fs::path(m.classes[c]) / split_name / shape_id / v).generic_string());
        }
        m.items.push_back(std::move(item));
      }
    }
  }
  if (m.items.empty()) Fail(ErrorCode::kEmptyDataset, "no shapes under " + root);
  m.image_size = ReadPpm((fs::path(root) / m.items.front().view_paths.front()).string()).width;
  return m;
}

void SaveManifest(const DatasetManifest& m, const std::string& path) {
  Json items = Json::array();
  for (const auto& it : m.items) {
    items.push_back({{"shape_id", it.shape_id},
                     {"class_id", it.class_id},
                     {"split", std::string(SplitName(it.split))},
                     {"views", it.view_paths}});
  }
  Json j{{"classes", m.classes}, {"n_views", m.n_views}, {"image_size", m.image_size}};
  if (m.has_stats) j["stats"] = {{"mean", m.mean}, {"std", m.std}};
  j["items"] = items;
  detail::WriteTextFile(path, j.dump(1) + "\n");
}

DatasetManifest LoadManifestFile(const std::string& path) {
  const Json j = detail::ReadJsonFile(path, ErrorCode::kEmptyDataset);
  DatasetManifest m;
  m.root = fs::path(path).parent_path().string();
  try {
    m.classes = j.at("classes").get<std::vector<std::string>>();
    m.n_views = j.at("n_views").get<int>();
    m.image_size = j.at("image_size").get<int>();
    if (j.contains("stats")) {
      m.has_stats = true;
      m.mean = j["stats"].at("mean").get<double>();
      m.std = j["stats"].at("std").get<double>();
    }
    for (const auto& it : j.at("items")) {
      ManifestItem item;
      item.shape_id = it.at("shape_id").get<std::string>();
      item.class_id = it.at("class_id").get<int>();
      item.split = ParseSplit(it.at("split").get<std::string>());
      item.view_paths = it.at("views").get<std::vector<std::string>>();
      if (static_cast<int>(item.view_paths.size()) != m.n_views) {
        Fail(ErrorCode::kInconsistentViewCount, "manifest item " + item.shape_id);
      }
      m.items.push_back(std::move(item));
    }
  } catch (const nlohmann::json::exception& e) {
    Fail(ErrorCode::kInvalidConfig, path + ": " + e.what());
  }
  if (m.items.empty()) Fail(ErrorCode::kEmptyDataset, path + " lists no items");
  return m;
}

DatasetManifest OpenDataset(const std::string& root) {
  const fs::path cached = fs::path(root) / "manifest.json";
  if (fs::exists(cached)) return LoadManifestFile(cached.string());
  return BuildManifest(root);
}

PixelStats ComputeStats(const DatasetManifest& m) {
  double sum = 0.0, sum_sq = 0.0;
  std::size_t n = 0;
  for (std::size_t idx : m.ItemsInSplit(Split::kTrain)) {
    for (const auto& rel : m.items[idx].view_paths) {
      const Image img = ReadPpm((fs::path(m.root) / rel).string());
      for (float v : img.pixels) {
        sum += v;
        sum_sq += double(v) * v;
      }
      n += img.pixels.size();
    }
  }
  if (n == 0) Fail(ErrorCode::kEmptyDataset, "train split is empty");
  PixelStats s;
  s.mean = sum / n;
  const double var = std::max(0.0, sum_sq / n - s.mean * s.mean);
  s.std = var > 0.0 ? std::sqrt(var) : 1.0;
  return s;
}

ViewStore LoadViews(const DatasetManifest& m, Split split) {
  ViewStore store;
  store.n_views = m.n_views;
  const auto items = m.ItemsInSplit(split);
  if (items.empty()) {
    Fail(ErrorCode::kEmptyDataset, "split " + std::string(SplitName(split)) + " is empty");
  }
  for (std::size_t rank = 0; rank < items.size(); ++rank) {
    const ManifestItem& item = m.items[items[rank]];
    store.shape_ids.push_back(item.shape_id);
    store.shape_labels.push_back(item.class_id);
    for (const auto& rel : item.view_paths) {
      Image img = ReadPpm((fs::path(m.root) / rel).string());
      if (store.images.empty()) {
        store.width = img.width;
        store.height = img.height;
      } else if (img.width != store.width || img.height != store.height) {
        Fail(ErrorCode::kDimensionMismatch, rel + " differs in size from the first view");
      }
      store.images.push_back(std::move(img));
      store.labels.push_back(item.class_id);
      store.shape_index.push_back(rank);
    }
  }
  return store;
}

std::vector<std::vector<std::size_t>> EpochBatches(const std::vector<int>& labels,
                                                   std::size_t batch_size, std::uint64_t seed,
                                                   int epoch) {
  if (batch_size == 0) Fail(ErrorCode::kInvalidConfig, "batch size must be positive");
  std::vector<std::size_t> order(labels.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  Rng rng(seed, StreamId({HashName("epoch-shuffle"), static_cast<std::uint64_t>(epoch)}));
  for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng.Below(i)]);

  std::vector<std::vector<std::size_t>> batches;
  const std::size_t full = order.size() / batch_size;
  for (std::size_t b = 0; b < full; ++b) {
    const std::size_t begin = b * batch_size, end = begin + batch_size;
    bool mixed = false;
    for (std::size_t i = begin + 1; i < end && !mixed; ++i) {
      mixed = labels[order[i]] != labels[order[begin]];
    }
    if (!mixed && batch_size > 1) {
      for (std::size_t j = end; j < order.size(); ++j) {
        if (labels[order[j]] != labels[order[begin]]) {
          std::swap(order[end - 1], order[j]);
          break;
        }
      }
    }
    batches.emplace_back(order.begin() + begin, order.begin() + end);
  }
  return batches;
}

std::string_view LevelName(EmbeddingLevel level) {
  return level == EmbeddingLevel::kView ? "view" : "shape";
}

EmbeddingLevel ParseLevel(std::string_view name) {
  if (name == "view") return EmbeddingLevel::kView;
  if (name == "shape") return EmbeddingLevel::kShape;
  Fail(ErrorCode::kInvalidConfig, "level must be view or shape, got '" + std::string(name) + "'");
}

void NormalizeRows(EmbeddingMatrix& e) {
  for (std::size_t i = 0; i < e.count; ++i) {
    float* r = e.values.data() + i * e.dim;
    double ss = 0.0;
    for (std::size_t k = 0; k < e.dim; ++k) ss += double(r[k]) * r[k];
    if (!(ss > 0.0) || !std::isfinite(ss)) {
      Fail(ErrorCode::kNonFiniteValue, "embedding row " + std::to_string(i) + " cannot be normalized");
    }
    const double inv = 1.0 / std::sqrt(ss);
    for (std::size_t k = 0; k < e.dim; ++k) r[k] = static_cast<float>(r[k] * inv);
  }
  e.normalized = true;
}

void ExportEmbeddings(const EmbeddingMatrix& e, const std::string& dir) {
  if (e.values.size() != e.count * e.dim || e.ids.size() != e.count || e.labels.size() != e.count) {
    Fail(ErrorCode::kDimensionMismatch, "embedding matrix fields disagree on count/dim");
  }
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) Fail(ErrorCode::kIoFailure, "cannot create " + dir + ": " + ec.message());
  Json meta{{"count", e.count},
            {"dim", e.dim},
            {"level", std::string(LevelName(e.level))},
            {"normalized", e.normalized},
            {"ids", e.ids},
            {"labels", e.labels},
            {"class_names", e.class_names}};
  detail::WriteF32((fs::path(dir) / "embeddings.f32").string(), e.values);
  detail::WriteTextFile((fs::path(dir) / "embeddings.meta.json").string(), meta.dump(1) + "\n");
}

EmbeddingMatrix ImportEmbeddings(const std::string& dir) {
  const Json meta = detail::ReadJsonFile((fs::path(dir) / "embeddings.meta.json").string(),
                                         ErrorCode::kMissingSidecar);
  EmbeddingMatrix e;
  try {
    e.count = meta.at("count").get<std::size_t>();
    e.dim = meta.at("dim").get<std::size_t>();
    e.level = ParseLevel(meta.at("level").get<std::string>());
    e.normalized = meta.at("normalized").get<bool>();
    e.ids = meta.at("ids").get<std::vector<std::string>>();
    e.labels = meta.at("labels").get<std::vector<int>>();
    e.class_names = meta.at("class_names").get<std::vector<std::string>>();
  } catch (const nlohmann::json::exception& ex) {
    Fail(ErrorCode::kMissingSidecar, dir + "/embeddings.meta.json: " + ex.what());
  }
  e.values = detail::ReadF32((fs::path(dir) / "embeddings.f32").string(), ErrorCode::kIoFailure,
                             ErrorCode::kDimensionMismatch);
  if (e.values.size() != e.count * e.dim) {
    Fail(ErrorCode::kDimensionMismatch, "payload holds " + std::to_string(e.values.size()) +
                                            " floats, sidecar declares " + std::to_string(e.count) +
                                            " x " + std::to_string(e.dim));
  }
  if (e.ids.size() != e.count || e.labels.size() != e.count) {
    Fail(ErrorCode::kDimensionMismatch, "sidecar ids/labels length differs from count");
  }
  return e;
}

}  // namespace mvcl

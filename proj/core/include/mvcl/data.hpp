#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "mvcl/renderer.hpp"
#include "mvcl/rng.hpp"

namespace mvcl {

enum class Split { kTrain, kTest };

std::string_view SplitName(Split split);
/// "train" or "test"; anything else raises UnknownSplit.
Split ParseSplit(std::string_view name);

struct ManifestItem {
  std::string shape_id;
  int class_id = 0;
  Split split = Split::kTrain;
  std::vector<std::string> view_paths;  // absolute or root-relative, ordered by view index
};

/// Index over root/<class>/<split>/<shape_id>/view_XX.ppm.
struct DatasetManifest {
  std::string root;
  std::vector<std::string> classes;
  std::vector<ManifestItem> items;
  int n_views = 0;
  int image_size = 0;
  bool has_stats = false;
  double mean = 0.0;
  double std = 1.0;

  std::vector<std::size_t> ItemsInSplit(Split split) const;
};

/// Walks the renderer layout. Classes, splits, shapes and views are sorted
/// byte-wise; class ids follow class order.
DatasetManifest BuildManifest(const std::string& root);
void SaveManifest(const DatasetManifest& manifest, const std::string& path);
DatasetManifest LoadManifestFile(const std::string& path);
/// root/manifest.json when present, otherwise a fresh scan.
DatasetManifest OpenDataset(const std::string& root);

struct PixelStats {
  double mean = 0.0;
  double std = 1.0;
};

/// Mean and standard deviation over every pixel of the train split.
PixelStats ComputeStats(const DatasetManifest& manifest);

/// Decoded views of one split, one entry per (shape, view) sample.
struct ViewStore {
  int n_views = 0;
  int height = 0;
  int width = 0;
  std::vector<Image> images;             // sample s = item_rank * n_views + view
  std::vector<int> labels;               // per sample
  std::vector<std::size_t> shape_index;  // per sample, rank of its shape within the split
  std::vector<std::string> shape_ids;    // per shape
  std::vector<int> shape_labels;         // per shape

  std::size_t size() const { return images.size(); }
};

ViewStore LoadViews(const DatasetManifest& manifest, Split split);

struct AugmentConfig {
  double crop_scale_lo = 0.2;
  double crop_scale_hi = 1.0;
  double ratio_lo = 3.0 / 4.0;
  double ratio_hi = 4.0 / 3.0;
  double flip_prob = 0.5;
  double jitter_strength = 0.4;
  double jitter_prob = 0.8;
  double grayscale_prob = 0.2;  // no effect on single-channel images
  double mean = 0.0;
  double std = 1.0;
};

void ValidateAugmentConfig(const AugmentConfig& cfg);

/// Stream for view slot 0 (a) or 1 (b) of sample `item` in `epoch`.
Rng AugmentStream(std::uint64_t seed, std::uint64_t item, std::uint64_t epoch, int slot);

/// Random resized crop to out_h x out_w, horizontal flip, brightness and
/// contrast jitter, then (x - mean) / std. Returns a 1 x out_h x out_w tensor
/// as flat row-major floats.
std::vector<float> Augment(const Image& image, const AugmentConfig& cfg, Rng& rng, int out_h,
                           int out_w);

/// Deterministic evaluation transform: full-frame bilinear resize, then
/// normalization.
std::vector<float> EvalTransform(const Image& image, double mean, double std, int out_h,
                                 int out_w);

/// Bilinear resample of the box [x0, x0+w) x [y0, y0+h) (half-pixel centers).
std::vector<float> ResizeCrop(const Image& image, int x0, int y0, int w, int h, int out_h,
                              int out_w);

struct Batch {
  std::size_t size = 0;
  int height = 0;
  int width = 0;
  std::vector<float> view_a;  // size x 1 x height x width
  std::vector<float> view_b;
  std::vector<int> labels;
  std::vector<std::size_t> samples;
};

/// Two independent augmentations of each referenced sample.
Batch MakeBatch(const ViewStore& store, std::span<const std::size_t> samples, int epoch,
                const AugmentConfig& cfg, std::uint64_t seed, int out_h, int out_w);

/// Seeded permutation of the samples cut into full batches (the remainder is
/// dropped). A batch whose samples all share one label gets its last entry
/// swapped with the nearest later sample of another label.
std::vector<std::vector<std::size_t>> EpochBatches(const std::vector<int>& labels,
                                                   std::size_t batch_size, std::uint64_t seed,
                                                   int epoch);

enum class EmbeddingLevel { kView, kShape };

std::string_view LevelName(EmbeddingLevel level);
EmbeddingLevel ParseLevel(std::string_view name);

struct EmbeddingMatrix {
  std::size_t count = 0;
  std::size_t dim = 0;
  std::vector<float> values;  // row-major count x dim
  std::vector<std::string> ids;
  std::vector<int> labels;
  EmbeddingLevel level = EmbeddingLevel::kShape;
  bool normalized = false;
  std::vector<std::string> class_names;

  std::span<const float> row(std::size_t i) const { return {values.data() + i * dim, dim}; }
  friend bool operator==(const EmbeddingMatrix&, const EmbeddingMatrix&) = default;
};

/// Scales every row to unit length (zero rows raise NonFiniteValue).
void NormalizeRows(EmbeddingMatrix& e);

/// embeddings.f32 (little-endian row-major) plus embeddings.meta.json.
void ExportEmbeddings(const EmbeddingMatrix& e, const std::string& dir);
EmbeddingMatrix ImportEmbeddings(const std::string& dir);

}  // namespace mvcl

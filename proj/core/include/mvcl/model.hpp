#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "mvcl/tensor.hpp"

namespace mvcl {

enum class EncoderKind { kMlp, kVit };

std::string_view EncoderName(EncoderKind kind);
EncoderKind ParseEncoderKind(std::string_view name);

struct EncoderConfig {
  EncoderKind kind = EncoderKind::kVit;
  int channels = 1;
  int height = 64;
  int width = 64;
  int feature_dim = 64;
  // vit
  int patch_size = 8;
  int depth = 4;
  int heads = 4;
  int token_dim = 64;
  int mlp_ratio = 2;
  // mlp
  std::vector<int> hidden{256};

  int tokens() const { return (height / patch_size) * (width / patch_size); }
  friend bool operator==(const EncoderConfig&, const EncoderConfig&) = default;
};

struct ProjectionConfig {
  int hidden = 128;
  int output_dim = 128;
  friend bool operator==(const ProjectionConfig&, const ProjectionConfig&) = default;
};

void ValidateEncoderConfig(const EncoderConfig& cfg);
void ValidateProjectionConfig(const ProjectionConfig& cfg);

/// Ordered named parameters. Weight decay applies to matrices only.
template <typename T>
class ParameterSet {
 public:
  struct Entry {
    std::string name;
    ad::Tensor<T> tensor;
    bool decay = false;
  };

  void Add(std::string name, ad::Shape shape, std::vector<T> values, bool decay);
  const ad::Tensor<T>& Get(const std::string& name) const;
  bool Contains(const std::string& name) const { return index_.count(name) > 0; }

  const std::vector<Entry>& entries() const { return entries_; }
  std::vector<Entry>& entries() { return entries_; }
  std::size_t TotalSize() const;
  void ZeroGrad();

  /// Flattened values in entry order.
  std::vector<T> Flatten() const;
  void Assign(std::span<const T> flat);

  /// Deep copy with fresh leaves in another precision.
  template <typename U>
  ParameterSet<U> Cast() const {
    ParameterSet<U> out;
    for (const auto& e : entries_) {
      out.Add(e.name, e.tensor.shape(), ad::CastVector<U, T>(e.tensor.data()), e.decay);
    }
    return out;
  }

 private:
  std::vector<Entry> entries_;
  std::map<std::string, std::size_t> index_;
};

/// Adds encoder parameters (prefix "enc."). Linear weights are Xavier
/// uniform, biases zero, layernorm scale one, positional embeddings N(0, 0.02).
/// Every tensor draws from its own stream keyed by (seed, name).
template <typename T>
void InitEncoderParams(const EncoderConfig& cfg, std::uint64_t seed, ParameterSet<T>& params);
/// Adds the projection head (prefix "proj.").
template <typename T>
void InitProjectionParams(int feature_dim, const ProjectionConfig& cfg, std::uint64_t seed,
                          ParameterSet<T>& params);
/// Adds a linear classifier over features (prefix "cls.").
template <typename T>
void InitClassifierParams(int feature_dim, int num_classes, std::uint64_t seed,
                          ParameterSet<T>& params);

/// Half-width of the Xavier-uniform range for a fan_in x fan_out matrix.
double XavierLimit(int fan_in, int fan_out);

/// images: B x C x H x W -> features B x feature_dim.
template <typename T>
ad::Tensor<T> EncoderForward(const ParameterSet<T>& params, const EncoderConfig& cfg,
                             const ad::Tensor<T>& images);

/// features -> unit-norm rows B x output_dim.
template <typename T>
ad::Tensor<T> ProjectionForward(const ParameterSet<T>& params, const ad::Tensor<T>& features);

/// features -> logits B x num_classes.
template <typename T>
ad::Tensor<T> ClassifierForward(const ParameterSet<T>& params, const ad::Tensor<T>& features);

struct CheckpointMeta {
  std::string loss = "supcon";
  int epoch = 0;
  std::uint64_t seed = 0;
  int num_classes = 0;  // > 0 when a classifier head is present
  std::vector<std::string> class_names;
  double data_mean = 0.0;
  double data_std = 1.0;
};

struct Checkpoint {
  EncoderConfig encoder;
  ProjectionConfig projection;
  bool has_projection = true;
  CheckpointMeta meta;
  ParameterSet<float> params;
};

/// Writes params.f32 (little-endian row-major, entry order) and
/// params.meta.json into `dir`.
void SaveCheckpoint(const Checkpoint& ckpt, const std::string& dir);
Checkpoint LoadCheckpoint(const std::string& dir);

}  // namespace mvcl

#include "mvcl/model.hpp"

#include <cmath>

#include "mvcl/error.hpp"
#include "mvcl/ops.hpp"
#include "mvcl/rng.hpp"

namespace mvcl {

using ad::Tensor;

std::string_view EncoderName(EncoderKind kind) { return kind == EncoderKind::kMlp ? "mlp" : "vit"; }

EncoderKind ParseEncoderKind(std::string_view name) {
  if (name == "mlp") return EncoderKind::kMlp;
  if (name == "vit") return EncoderKind::kVit;
  Fail(ErrorCode::kInvalidConfig, "unknown encoder kind '" + std::string(name) + "'");
}

void ValidateEncoderConfig(const EncoderConfig& cfg) {
  if (cfg.channels < 1 || cfg.height < 1 || cfg.width < 1 || cfg.feature_dim < 1) {
    Fail(ErrorCode::kInvalidConfig, "encoder input and feature dims must be positive");
  }
  if (cfg.kind == EncoderKind::kVit) {
    if (cfg.patch_size < 1 || cfg.height % cfg.patch_size != 0 || cfg.width % cfg.patch_size != 0) {
      Fail(ErrorCode::kInvalidConfig, "image size must be divisible by patch_size");
    }
    if (cfg.heads < 1 || cfg.token_dim % cfg.heads != 0) {
      Fail(ErrorCode::kInvalidConfig, "heads must divide token_dim");
    }
    if (cfg.depth < 0 || cfg.mlp_ratio < 1) Fail(ErrorCode::kInvalidConfig, "bad depth or mlp_ratio");
  } else {
    for (int h : cfg.hidden) {
      if (h < 1) Fail(ErrorCode::kInvalidConfig, "mlp hidden widths must be positive");
    }
  }
}

void ValidateProjectionConfig(const ProjectionConfig& cfg) {
  if (cfg.hidden < 1) Fail(ErrorCode::kInvalidConfig, "projection hidden width must be positive");
  if (cfg.output_dim < 2) Fail(ErrorCode::kInvalidConfig, "projection output dim must be >= 2");
}

template <typename T>
void ParameterSet<T>::Add(std::string name, ad::Shape shape, std::vector<T> values, bool decay) {
  if (index_.count(name)) Fail(ErrorCode::kInvalidConfig, "duplicate parameter " + name);
  index_[name] = entries_.size();
  entries_.push_back({std::move(name), Tensor<T>::Parameter(std::move(shape), std::move(values)), decay});
}

template <typename T>
const Tensor<T>& ParameterSet<T>::Get(const std::string& name) const {
  auto it = index_.find(name);
  if (it == index_.end()) Fail(ErrorCode::kCheckpointMismatch, "missing parameter " + name);
  return entries_[it->second].tensor;
}

template <typename T>
std::size_t ParameterSet<T>::TotalSize() const {
  std::size_t n = 0;
  for (const auto& e : entries_) n += e.tensor.size();
  return n;
}

template <typename T>
void ParameterSet<T>::ZeroGrad() {
  for (auto& e : entries_) e.tensor.ZeroGrad();
}

template <typename T>
std::vector<T> ParameterSet<T>::Flatten() const {
  std::vector<T> out;
  out.reserve(TotalSize());
  for (const auto& e : entries_) out.insert(out.end(), e.tensor.data().begin(), e.tensor.data().end());
  return out;
}

template <typename T>
void ParameterSet<T>::Assign(std::span<const T> flat) {
  if (flat.size() != TotalSize()) Fail(ErrorCode::kShapeMismatch, "flat parameter size mismatch");
  std::size_t at = 0;
  for (auto& e : entries_) {
    auto dst = e.tensor.mutable_data();
    std::copy_n(flat.begin() + at, dst.size(), dst.begin());
    at += dst.size();
  }
}

double XavierLimit(int fan_in, int fan_out) { return std::sqrt(6.0 / (fan_in + fan_out)); }

namespace {

template <typename T>
void AddLinear(ParameterSet<T>& params, const std::string& name, int in, int out, std::uint64_t seed) {
  Rng rng(seed, HashName(name + ".w"));
  const double limit = XavierLimit(in, out);
  std::vector<T> w(std::size_t(in) * out);
  for (T& v : w) v = static_cast<T>(rng.Uniform(-limit, limit));
  params.Add(name + ".w", {std::size_t(in), std::size_t(out)}, std::move(w), true);
  params.Add(name + ".b", {std::size_t(out)}, std::vector<T>(out, T(0)), false);
}

template <typename T>
void AddLayerNorm(ParameterSet<T>& params, const std::string& name, int dim) {
  params.Add(name + ".g", {std::size_t(dim)}, std::vector<T>(dim, T(1)), false);
  params.Add(name + ".b", {std::size_t(dim)}, std::vector<T>(dim, T(0)), false);
}

template <typename T>
Tensor<T> Linear(const ParameterSet<T>& params, const std::string& name, const Tensor<T>& x) {
  return ad::Add(ad::MatMul(x, params.Get(name + ".w")), params.Get(name + ".b"));
}

template <typename T>
Tensor<T> Norm(const ParameterSet<T>& params, const std::string& name, const Tensor<T>& x) {
  return ad::LayerNorm(x, params.Get(name + ".g"), params.Get(name + ".b"), -1);
}

std::string Block(int l) { return "enc.blocks." + std::to_string(l); }

template <typename T>
Tensor<T> VitForward(const ParameterSet<T>& params, const EncoderConfig& cfg, const Tensor<T>& images) {
  const std::size_t b = images.dim(0);
  const std::size_t c = cfg.channels, p = cfg.patch_size;
  const std::size_t gh = cfg.height / p, gw = cfg.width / p;
  const std::size_t tokens = gh * gw, dim = cfg.token_dim;
  const std::size_t heads = cfg.heads, head_dim = dim / heads;

  // B x C x H x W -> B x tokens x (C p p), tokens in row-major grid order
  Tensor<T> x = ad::Reshape(images, {b, c, gh, p, gw, p});
  x = ad::Permute(x, {0, 2, 4, 1, 3, 5});
  x = ad::Reshape(x, {b, tokens, c * p * p});
  x = ad::Add(Linear(params, "enc.patch", x), params.Get("enc.pos"));

  const T attn_scale = T(1) / std::sqrt(static_cast<T>(head_dim));
  for (int l = 0; l < cfg.depth; ++l) {
    const std::string name = Block(l);
    const Tensor<T> h = Norm(params, name + ".ln1", x);
    auto split_heads = [&](const Tensor<T>& t) {
      return ad::Permute(ad::Reshape(t, {b, tokens, heads, head_dim}), {0, 2, 1, 3});
    };
    const Tensor<T> q = split_heads(Linear(params, name + ".attn.q", h));
    const Tensor<T> k = split_heads(Linear(params, name + ".attn.k", h));
    const Tensor<T> v = split_heads(Linear(params, name + ".attn.v", h));
    const Tensor<T> weights = ad::Softmax(ad::Scale(ad::MatMul(q, ad::Transpose(k)), attn_scale), -1);
    Tensor<T> mixed = ad::Permute(ad::MatMul(weights, v), {0, 2, 1, 3});
    mixed = ad::Reshape(mixed, {b, tokens, dim});
    x = ad::Add(x, Linear(params, name + ".attn.out", mixed));

    const Tensor<T> h2 = Norm(params, name + ".ln2", x);
    const Tensor<T> hidden = ad::Gelu(Linear(params, name + ".mlp.fc1", h2));
    x = ad::Add(x, Linear(params, name + ".mlp.fc2", hidden));
  }
  Tensor<T> pooled = ad::Mean(x, 1);
  pooled = Norm(params, "enc.norm", pooled);
  return Linear(params, "enc.head", pooled);
}

template <typename T>
Tensor<T> MlpForward(const ParameterSet<T>& params, const EncoderConfig& cfg, const Tensor<T>& images) {
  const std::size_t b = images.dim(0);
  Tensor<T> x = ad::Reshape(images, {b, std::size_t(cfg.channels) * cfg.height * cfg.width});
  for (std::size_t i = 0; i < cfg.hidden.size(); ++i) {
    x = ad::Gelu(Linear(params, "enc.fc" + std::to_string(i), x));
  }
  return Linear(params, "enc.fc" + std::to_string(cfg.hidden.size()), x);
}

}  // namespace

template <typename T>
void InitEncoderParams(const EncoderConfig& cfg, std::uint64_t seed, ParameterSet<T>& params) {
  ValidateEncoderConfig(cfg);
  if (cfg.kind == EncoderKind::kMlp) {
    int in = cfg.channels * cfg.height * cfg.width;
    for (std::size_t i = 0; i < cfg.hidden.size(); ++i) {
      AddLinear(params, "enc.fc" + std::to_string(i), in, cfg.hidden[i], seed);
      in = cfg.hidden[i];
    }
    AddLinear(params, "enc.fc" + std::to_string(cfg.hidden.size()), in, cfg.feature_dim, seed);
    return;
  }
  const int dim = cfg.token_dim;
  AddLinear(params, "enc.patch", cfg.channels * cfg.patch_size * cfg.patch_size, dim, seed);
  {
    Rng rng(seed, HashName("enc.pos"));
    std::vector<T> pos(std::size_t(cfg.tokens()) * dim);
    for (T& v : pos) v = static_cast<T>(0.02 * rng.Normal());
    params.Add("enc.pos", {std::size_t(cfg.tokens()), std::size_t(dim)}, std::move(pos), false);
  }
  for (int l = 0; l < cfg.depth; ++l) {
    const std::string name = Block(l);
    AddLayerNorm(params, name + ".ln1", dim);
    AddLinear(params, name + ".attn.q", dim, dim, seed);
    AddLinear(params, name + ".attn.k", dim, dim, seed);
    AddLinear(params, name + ".attn.v", dim, dim, seed);
    AddLinear(params, name + ".attn.out", dim, dim, seed);
    AddLayerNorm(params, name + ".ln2", dim);
    AddLinear(params, name + ".mlp.fc1", dim, dim * cfg.mlp_ratio, seed);
    AddLinear(params, name + ".mlp.fc2", dim * cfg.mlp_ratio, dim, seed);
  }
  AddLayerNorm(params, "enc.norm", dim);
  AddLinear(params, "enc.head", dim, cfg.feature_dim, seed);
}

template <typename T>
void InitProjectionParams(int feature_dim, const ProjectionConfig& cfg, std::uint64_t seed,
                          ParameterSet<T>& params) {
  ValidateProjectionConfig(cfg);
  AddLinear(params, "proj.fc1", feature_dim, cfg.hidden, seed);
  AddLinear(params, "proj.fc2", cfg.hidden, cfg.output_dim, seed);
}

template <typename T>
void InitClassifierParams(int feature_dim, int num_classes, std::uint64_t seed,
                          ParameterSet<T>& params) {
  if (num_classes < 2) Fail(ErrorCode::kInvalidConfig, "classifier needs at least 2 classes");
  AddLinear(params, "cls", feature_dim, num_classes, seed);
}

template <typename T>
Tensor<T> EncoderForward(const ParameterSet<T>& params, const EncoderConfig& cfg,
                         const Tensor<T>& images) {
  if (images.rank() != 4 || images.dim(1) != std::size_t(cfg.channels) ||
      images.dim(2) != std::size_t(cfg.height) || images.dim(3) != std::size_t(cfg.width)) {
    Fail(ErrorCode::kShapeMismatch, "encoder expects B x " + std::to_string(cfg.channels) + " x " +
                                        std::to_string(cfg.height) + " x " +
                                        std::to_string(cfg.width) + ", got " +
                                        ad::ShapeString(images.shape()));
  }
  return cfg.kind == EncoderKind::kVit ? VitForward(params, cfg, images)
                                       : MlpForward(params, cfg, images);
}

template <typename T>
Tensor<T> ProjectionForward(const ParameterSet<T>& params, const Tensor<T>& features) {
  const Tensor<T> hidden = ad::Gelu(Linear(params, "proj.fc1", features));
  return ad::L2Normalize(Linear(params, "proj.fc2", hidden), -1);
}

template <typename T>
Tensor<T> ClassifierForward(const ParameterSet<T>& params, const Tensor<T>& features) {
  return Linear(params, "cls", features);
}

template class ParameterSet<float>;
template class ParameterSet<double>;

#define MVCL_INSTANTIATE_MODEL(T)                                                              \
  template void InitEncoderParams(const EncoderConfig&, std::uint64_t, ParameterSet<T>&);      \
  template void InitProjectionParams(int, const ProjectionConfig&, std::uint64_t,              \
                                     ParameterSet<T>&);                                        \
  template void InitClassifierParams(int, int, std::uint64_t, ParameterSet<T>&);              \
  template Tensor<T> EncoderForward(const ParameterSet<T>&, const EncoderConfig&,              \
                                    const Tensor<T>&);                                         \
  template Tensor<T> ProjectionForward(const ParameterSet<T>&, const Tensor<T>&);              \
  template Tensor<T> ClassifierForward(const ParameterSet<T>&, const Tensor<T>&);

MVCL_INSTANTIATE_MODEL(float)
MVCL_INSTANTIATE_MODEL(double)

}  // namespace mvcl

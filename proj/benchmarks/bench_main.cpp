#include <benchmark/benchmark.h>

#include <vector>

#include "mvcl/gemm.hpp"
#include "mvcl/geometry.hpp"
#include "mvcl/losses.hpp"
#include "mvcl/model.hpp"
#include "mvcl/ops.hpp"
#include "mvcl/renderer.hpp"
#include "mvcl/rng.hpp"
#include "mvcl/runtime.hpp"

namespace {

using mvcl::ad::Tensor;

std::vector<float> Normal(std::size_t n, std::uint64_t seed) {
  mvcl::Rng rng(seed, 0);
  std::vector<float> v(n);
  for (float& x : v) x = static_cast<float>(rng.Normal());
  return v;
}

void BM_Gemm(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto a = Normal(n * n, 1), b = Normal(n * n, 2);
  std::vector<float> c(n * n);
  for (auto _ : state) {
    mvcl::Gemm<float>(false, false, n, n, n, 1.0f, a.data(), n, b.data(), n, 0.0f, c.data(), n);
    benchmark::DoNotOptimize(c.data());
  }
  state.SetItemsProcessed(state.iterations() * 2 * n * n * n);
}
BENCHMARK(BM_Gemm)->Arg(64)->Arg(256);

void BM_RenderView(benchmark::State& state) {
  const auto spec = mvcl::DefaultCorpusClasses(6)[static_cast<std::size_t>(state.range(0))];
  const mvcl::Mesh mesh = mvcl::NormalizeMesh(mvcl::GenerateShape(spec, 7));
  mvcl::RenderParams params;
  params.image_size = 64;
  const mvcl::Camera cam = mvcl::MakeCamera(1, params);
  for (auto _ : state) benchmark::DoNotOptimize(mvcl::RenderView(mesh, cam, params));
  state.SetLabel(spec.class_name);
}
BENCHMARK(BM_RenderView)->DenseRange(0, 5);

// Forward and backward of the benchmark encoder plus projection head on a
// contrastive batch of 2 x 64 images.
void BM_EncoderStep(benchmark::State& state) {
  mvcl::KeepHeapResident();
  mvcl::EncoderConfig enc;
  enc.patch_size = 16;
  enc.depth = 2;
  enc.heads = 2;
  enc.token_dim = 32;
  enc.feature_dim = 32;
  const mvcl::ProjectionConfig proj{.hidden = 64, .output_dim = 32};
  mvcl::ParameterSet<float> params;
  mvcl::InitEncoderParams(enc, 0, params);
  mvcl::InitProjectionParams(enc.feature_dim, proj, 0, params);
  const std::size_t batch = 128;
  const auto images = Tensor<float>::Constant({batch, 1, 64, 64}, Normal(batch * 64 * 64, 3));
  std::vector<int> pair_labels(batch / 2);
  for (std::size_t i = 0; i < pair_labels.size(); ++i) pair_labels[i] = static_cast<int>(i % 6);
  const auto labels = mvcl::ReplicateLabels(pair_labels);
  for (auto _ : state) {
    params.ZeroGrad();
    const auto z = mvcl::ProjectionForward(params, mvcl::EncoderForward(params, enc, images));
    const auto loss = mvcl::SupCon(z, labels, 0.07);
    mvcl::ad::Backward(loss);
    benchmark::DoNotOptimize(loss.item());
  }
  state.SetItemsProcessed(state.iterations() * batch);
}
BENCHMARK(BM_EncoderStep)->Unit(benchmark::kMillisecond);

template <int Kind>
void BM_Loss(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto kind = static_cast<mvcl::LossKind>(Kind);
  std::vector<int> pair_labels(n / 2);
  for (std::size_t i = 0; i < pair_labels.size(); ++i) pair_labels[i] = static_cast<int>(i % 6);
  const auto values = Normal(n * 128, 4);
  const mvcl::LossSpec spec{.kind = kind};
  for (auto _ : state) {
    auto z = Tensor<float>::Parameter({n, 128}, values);
    const auto loss = mvcl::ContrastiveLoss(spec, z, pair_labels);
    mvcl::ad::Backward(loss);
    benchmark::DoNotOptimize(loss.item());
  }
  state.SetLabel(std::string(mvcl::LossName(kind)));
}
BENCHMARK(BM_Loss<int(mvcl::LossKind::kSimClr)>)->Arg(128)->Arg(256);
BENCHMARK(BM_Loss<int(mvcl::LossKind::kSupCon)>)->Arg(128)->Arg(256);
BENCHMARK(BM_Loss<int(mvcl::LossKind::kSincere)>)->Arg(128)->Arg(256);
BENCHMARK(BM_Loss<int(mvcl::LossKind::kEpsSupInfoNce)>)->Arg(128)->Arg(256);

}  // namespace

BENCHMARK_MAIN();

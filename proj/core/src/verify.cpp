#include "mvcl/verify.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <numeric>

#include "mvcl/data.hpp"
#include "mvcl/error.hpp"
#include "mvcl/eval.hpp"
#include "mvcl/geometry.hpp"
#include "mvcl/oracles.hpp"
#include "mvcl/ops.hpp"
#include "mvcl/renderer.hpp"
#include "mvcl/rng.hpp"

namespace mvcl {

using ad::Tensor;
using TensorD = Tensor<double>;

namespace {

std::string Fmt(const char* format, double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), format, v);
  return buf;
}

CheckResult Near(const std::string& name, double got, double want, double tol) {
  const double err = std::abs(got - want);
  return {name, err <= tol, "got " + Fmt("%.12g", got) + " want " + Fmt("%.12g", want) + " err " + Fmt("%.3g", err)};
}

std::vector<double> RandomNormal(Rng& rng, std::size_t n) {
  std::vector<double> v(n);
  for (double& x : v) x = rng.Normal();
  return v;
}

TensorD Const(std::size_t rows, std::size_t cols, std::vector<double> v) {
  return TensorD::Constant({rows, cols}, std::move(v));
}

oracle::Matrix ToMatrix(const std::vector<double>& v, std::size_t rows, std::size_t cols) {
  oracle::Matrix m(rows, std::vector<double>(cols));
  for (std::size_t i = 0; i < rows; ++i) {
    for (std::size_t k = 0; k < cols; ++k) m[i][k] = v[i * cols + k];
  }
  return m;
}

/// N pair labels with at least two distinct classes.
std::vector<int> RandomPairLabels(Rng& rng, std::size_t n, int classes) {
  std::vector<int> labels(n);
  for (auto& l : labels) l = static_cast<int>(rng.Below(classes));
  if (std::all_of(labels.begin(), labels.end(), [&](int l) { return l == labels[0]; })) {
    labels[n - 1] = (labels[0] + 1) % classes;
  }
  return labels;
}

struct LossCase {
  LossKind kind;
  const char* name;
};

constexpr LossCase kContrastive[] = {{LossKind::kInfoNce, "infonce"},
                                     {LossKind::kSimClr, "simclr"},
                                     {LossKind::kSupCon, "supcon"},
                                     {LossKind::kSincere, "sincere"},
                                     {LossKind::kEpsSupInfoNce, "eps_supinfonce"}};

double LossValue(LossKind kind, const std::vector<double>& z, std::size_t rows, std::size_t dim,
                 const std::vector<int>& pair_labels) {
  LossSpec spec;
  spec.kind = kind;
  return ContrastiveLoss(spec, Const(rows, dim, z), pair_labels).item();
}

double OracleValue(LossKind kind, const std::vector<double>& z, std::size_t rows, std::size_t dim,
                   const std::vector<int>& pair_labels) {
  const LossSpec spec;
  const auto m = ToMatrix(z, rows, dim);
  const auto labels = ReplicateLabels(pair_labels);
  switch (kind) {
    case LossKind::kInfoNce: {
      const oracle::Matrix a(m.begin(), m.begin() + rows / 2), b(m.begin() + rows / 2, m.end());
      return oracle::InfoNce(a, b, spec.temperature);
    }
    case LossKind::kSimClr: return oracle::SimClr(m, spec.temperature);
    case LossKind::kSupCon: return oracle::SupCon(m, labels, spec.temperature);
    case LossKind::kSincere: return oracle::Sincere(m, labels, spec.temperature);
    case LossKind::kEpsSupInfoNce:
      return oracle::EpsSupInfoNce(m, labels, spec.temperature, spec.epsilon);
    case LossKind::kCrossEntropy: break;
  }
  return 0.0;
}

EmbeddingMatrix RandomEmbeddings(Rng& rng, std::size_t count, std::size_t dim, int classes,
                                 const std::string& prefix) {
  EmbeddingMatrix e;
  e.count = count;
  e.dim = dim;
  for (std::size_t i = 0; i < count * dim; ++i) e.values.push_back(static_cast<float>(rng.Normal()));
  for (std::size_t i = 0; i < count; ++i) {
    e.ids.push_back(prefix + std::to_string(i));
    e.labels.push_back(static_cast<int>(rng.Below(classes)));
  }
  return e;
}

oracle::Matrix Rows(const EmbeddingMatrix& e) {
  oracle::Matrix m;
  for (std::size_t i = 0; i < e.count; ++i) {
    const auto r = e.row(i);
    m.emplace_back(r.begin(), r.end());
  }
  return m;
}

/// Q of the QR factorization of a Gaussian matrix (Gram-Schmidt, twice).
std::vector<double> RandomOrthogonal(Rng& rng, std::size_t d) {
  std::vector<double> q = RandomNormal(rng, d * d);  // rows are basis vectors
  for (int pass = 0; pass < 2; ++pass) {
    for (std::size_t i = 0; i < d; ++i) {
      for (std::size_t j = 0; j < i; ++j) {
        double dot = 0.0;
        for (std::size_t k = 0; k < d; ++k) dot += q[i * d + k] * q[j * d + k];
        for (std::size_t k = 0; k < d; ++k) q[i * d + k] -= dot * q[j * d + k];
      }
      double norm = 0.0;
      for (std::size_t k = 0; k < d; ++k) norm += q[i * d + k] * q[i * d + k];
      norm = std::sqrt(norm);
      for (std::size_t k = 0; k < d; ++k) q[i * d + k] /= norm;
    }
  }
  return q;
}

}  // namespace

std::vector<CheckResult> CheckLossIdentities() {
  std::vector<CheckResult> out;
  const double tau = 0.07;
  auto same = [](std::size_t rows, std::size_t dim) {
    std::vector<double> v(rows * dim, 0.0);
    for (std::size_t i = 0; i < rows; ++i) {
      v[i * dim] = 0.6;
      v[i * dim + 1] = 0.8;
    }
    return Const(rows, dim, v);
  };
  out.push_back(Near("ntxent N=2 identical = ln 3", SimClrNtXent(same(4, 3), tau).item(), std::log(3.0), 1e-6));
  out.push_back(Near("infonce N=4 identical = ln 4",
                     InfoNce(same(4, 3), same(4, 3), tau).item(), std::log(4.0), 1e-6));
  const std::vector<int> two_pairs{0, 0, 1, 1};
  out.push_back(Near("supcon 2N=4 identical = ln 3", SupCon(same(4, 3), two_pairs, tau).item(), std::log(3.0), 1e-6));
  out.push_back(Near("sincere 2N=4 identical = ln 3", Sincere(same(4, 3), two_pairs, tau).item(), std::log(3.0), 1e-6));
  const std::vector<int> four_two{0, 0, 0, 0, 1, 1};
  out.push_back(Near("sincere 2N=6 class-of-4 anchor = ln 3",
                     SincerePerAnchor(same(6, 3), four_two, tau).at(0), std::log(3.0), 1e-6));
  out.push_back(Near("supcon 2N=6 class-of-4 anchor = ln 5",
                     SupConPerAnchor(same(6, 3), four_two, tau).at(0), std::log(5.0), 1e-6));
  const double eps = 0.25;
  const double want = std::log1p(2.0 * std::exp(eps / tau));
  out.push_back(Near("eps_supinfonce 2N=4 identical = log(1+2e^(eps/tau))",
                     EpsSupInfoNce(same(4, 3), two_pairs, tau, eps).item(), want, 1e-6));
  out.push_back(Near("cross entropy uniform C=10 = ln 10",
                     CrossEntropy(Const(3, 10, std::vector<double>(30, 0.5)), {0, 4, 9}).item(),
                     std::log(10.0), 1e-6));
  return out;
}

CheckResult CheckEpsReduction(int batches, std::uint64_t seed) {
  Rng rng(seed, HashName("verify-eps-reduction"));
  double worst = 0.0;
  for (int b = 0; b < batches; ++b) {
    const std::size_t n = 2 + rng.Below(15);  // 2N in [4, 32]
    const std::size_t dim = 2 + rng.Below(15);
    const auto labels = ReplicateLabels(RandomPairLabels(rng, n, 2 + static_cast<int>(rng.Below(3))));
    const auto z = Const(2 * n, dim, RandomNormal(rng, 2 * n * dim));
    const double tau = 0.05 + 0.5 * rng.Uniform();
    const double a = EpsSupInfoNce(z, labels, tau, 0.0).item();
    const double s = Sincere(z, labels, tau).item();
    worst = std::max(worst, std::abs(a - s));
  }
  return {"eps_supinfonce(eps=0) == sincere on " + std::to_string(batches) + " batches",
          worst <= 1e-9, "max |diff| " + Fmt("%.3g", worst)};
}

EncoderConfig GradCheckEncoder(EncoderKind kind) {
  EncoderConfig cfg;
  cfg.kind = kind;
  cfg.channels = 1;
  cfg.height = 32;
  cfg.width = 32;
  cfg.feature_dim = 16;
  cfg.patch_size = 8;
  cfg.depth = 2;
  cfg.heads = 4;
  cfg.token_dim = 64;
  cfg.mlp_ratio = 2;
  cfg.hidden = {32};
  return cfg;
}

GradCheckResult LossGradCheck(LossKind loss, EncoderKind encoder, std::uint64_t seed) {
  const EncoderConfig cfg = GradCheckEncoder(encoder);
  const ProjectionConfig proj{.hidden = 16, .output_dim = 8};
  const bool contrastive = IsContrastive(loss);
  ParameterSet<double> params;
  InitEncoderParams(cfg, seed, params);
  if (contrastive) {
    InitProjectionParams(cfg.feature_dim, proj, seed, params);
  } else {
    InitClassifierParams(cfg.feature_dim, 3, seed, params);
  }
  const std::size_t pairs = 4;
  const std::size_t rows = contrastive ? 2 * pairs : pairs;
  Rng rng(seed, HashName("gradcheck-inputs"));
  const auto pixels = RandomNormal(rng, rows * cfg.height * cfg.width);
  const std::vector<int> pair_labels{0, 1, 0, 1};
  const std::vector<int> ce_labels{0, 1, 2, 0};
  LossSpec spec;
  spec.kind = loss;

  auto evaluate = [&]() {
    const auto images = TensorD::Constant({rows, 1, std::size_t(cfg.height), std::size_t(cfg.width)}, pixels);
    const auto features = EncoderForward(params, cfg, images);
    if (contrastive) return ContrastiveLoss(spec, ProjectionForward(params, features), pair_labels);
    return CrossEntropy(ClassifierForward(params, features), ce_labels);
  };

  params.ZeroGrad();
  ad::Backward(evaluate());
  std::vector<double> analytic;
  for (const auto& e : params.entries()) analytic.insert(analytic.end(), e.tensor.grad().begin(), e.tensor.grad().end());
  const std::vector<double> x0 = params.Flatten();

  std::vector<std::size_t> coords;
  std::size_t offset = 0;
  for (const auto& e : params.entries()) {
    for (int t = 0; t < 2; ++t) coords.push_back(offset + rng.Below(e.tensor.size()));
    offset += e.tensor.size();
  }
  const ScalarFunction f = [&](std::span<const double> x) {
    params.Assign(x);
    ad::NoGradGuard no_grad;
    return evaluate().item();
  };
  const GradCheckResult result = CompareGradients(f, x0, analytic, 1e-5, coords);
  params.Assign(x0);
  return result;
}

std::vector<CheckResult> CheckOracleEquivalence(std::uint64_t seed, int trials) {
  std::vector<CheckResult> out;
  Rng rng(seed, HashName("verify-oracles"));

  for (const auto& c : kContrastive) {
    double worst = 0.0;
    for (int t = 0; t < trials; ++t) {
      const std::size_t n = 2 + rng.Below(7);  // 2N in [4, 16]
      const std::size_t dim = 2 + rng.Below(7);
      const auto labels = RandomPairLabels(rng, n, 2 + static_cast<int>(rng.Below(2)));
      const auto z = RandomNormal(rng, 2 * n * dim);
      worst = std::max(worst, std::abs(LossValue(c.kind, z, 2 * n, dim, labels) -
                                       OracleValue(c.kind, z, 2 * n, dim, labels)));
    }
    out.push_back({std::string(c.name) + " == nested-loop oracle", worst <= 1e-6, "max |diff| " + Fmt("%.3g", worst)});
  }

  int knn_mismatch = 0, rank_mismatch = 0;
  double map_err = 0.0;
  for (int t = 0; t < trials; ++t) {
    const std::size_t n = 10 + rng.Below(55);  // corpus in [10, 64]
    const std::size_t dim = 2 + rng.Below(15);
    const int classes = 2 + static_cast<int>(rng.Below(4));
    auto corpus = RandomEmbeddings(rng, n, dim, classes, "c");
    auto queries = RandomEmbeddings(rng, 8, dim, classes, "q");
    // Make every query class present in the corpus.
    for (std::size_t q = 0; q < queries.count; ++q) queries.labels[q] = corpus.labels[rng.Below(n)];
    NormalizeRows(corpus);
    NormalizeRows(queries);
    const int k = std::vector<int>{1, 3, 5, 10}[rng.Below(4)];
    const auto got = KnnClassify(corpus, queries, k);
    const auto want = oracle::Knn(Rows(corpus), corpus.labels, Rows(queries), k);
    knn_mismatch += got != want;

    const RetrievalReport report = EvaluateRetrieval(corpus, queries, 10);
    double map = 0.0, map10 = 0.0;
    for (std::size_t q = 0; q < queries.count; ++q) {
      const auto r = queries.row(q);
      const auto order = oracle::Ranking(Rows(corpus), std::vector<double>(r.begin(), r.end()));
      rank_mismatch += order != report.rankings[q].order;
      std::vector<bool> relevant;
      for (std::size_t i : order) relevant.push_back(corpus.labels[i] == queries.labels[q]);
      map += oracle::AveragePrecision(relevant, 0);
      map10 += oracle::AveragePrecision(relevant, 10);
    }
    map /= queries.count;
    map10 /= queries.count;
    map_err = std::max({map_err, std::abs(map - report.map), std::abs(map10 - report.map_at_k)});
  }
  out.push_back({"knn == exhaustive oracle", knn_mismatch == 0, std::to_string(knn_mismatch) + " mismatching trials"});
  out.push_back({"retrieval ranking == exhaustive oracle", rank_mismatch == 0, std::to_string(rank_mismatch) + " mismatching queries"});
  out.push_back({"map and map@10 == definitional oracle", map_err <= 1e-9, "max |diff| " + Fmt("%.3g", map_err)});
  return out;
}

std::vector<CheckResult> CheckInvariances(std::uint64_t seed, int trials) {
  std::vector<CheckResult> out;
  Rng rng(seed, HashName("verify-invariance"));
  for (const auto& c : kContrastive) {
    double perm_err = 0.0, rot_err = 0.0;
    for (int t = 0; t < trials; ++t) {
      const std::size_t n = 2 + rng.Below(7);
      const std::size_t dim = 2 + rng.Below(7);
      const auto labels = RandomPairLabels(rng, n, 2 + static_cast<int>(rng.Below(2)));
      const auto z = RandomNormal(rng, 2 * n * dim);
      const double base = LossValue(c.kind, z, 2 * n, dim, labels);

      // Permute pairs, keeping row i of view a paired with row i of view b.
      std::vector<std::size_t> perm(n);
      std::iota(perm.begin(), perm.end(), 0);
      for (std::size_t i = n; i > 1; --i) std::swap(perm[i - 1], perm[rng.Below(i)]);
      std::vector<double> zp(z.size());
      std::vector<int> lp(n);
      for (std::size_t i = 0; i < n; ++i) {
        lp[i] = labels[perm[i]];
        for (std::size_t half = 0; half < 2; ++half) {
          std::copy_n(z.begin() + (half * n + perm[i]) * dim, dim, zp.begin() + (half * n + i) * dim);
        }
      }
      perm_err = std::max(perm_err, std::abs(LossValue(c.kind, zp, 2 * n, dim, lp) - base));

      const auto q = RandomOrthogonal(rng, dim);
      std::vector<double> zr(z.size(), 0.0);
      for (std::size_t r = 0; r < 2 * n; ++r) {
        for (std::size_t i = 0; i < dim; ++i) {
          for (std::size_t k = 0; k < dim; ++k) zr[r * dim + i] += q[i * dim + k] * z[r * dim + k];
        }
      }
      rot_err = std::max(rot_err, std::abs(LossValue(c.kind, zr, 2 * n, dim, labels) - base));
    }
    out.push_back({std::string(c.name) + " batch-permutation invariance", perm_err <= 1e-6, "max |diff| " + Fmt("%.3g", perm_err)});
    out.push_back({std::string(c.name) + " rotation invariance", rot_err <= 1e-5, "max |diff| " + Fmt("%.3g", rot_err)});
  }

  int changed = 0;
  for (int t = 0; t < trials; ++t) {
    const std::size_t dim = 2 + rng.Below(15);
    auto corpus = RandomEmbeddings(rng, 48, dim, 4, "c");
    auto queries = RandomEmbeddings(rng, 8, dim, 4, "q");
    auto scaled_corpus = corpus, scaled_queries = queries;
    const float factor = t == 0 ? 7.0f : static_cast<float>(0.1 + 20.0 * rng.Uniform());
    for (float& v : scaled_corpus.values) v *= factor;
    for (float& v : scaled_queries.values) v *= factor;
    for (auto* e : {&corpus, &queries, &scaled_corpus, &scaled_queries}) NormalizeRows(*e);
    changed += KnnClassify(corpus, queries, 10) != KnnClassify(scaled_corpus, scaled_queries, 10);
    const auto a = EvaluateRetrieval(corpus, queries, 10), b = EvaluateRetrieval(scaled_corpus, scaled_queries, 10);
    for (std::size_t q = 0; q < a.rankings.size(); ++q) changed += a.rankings[q].order != b.rankings[q].order;
  }
  out.push_back({"knn and retrieval invariant to positive rescaling", changed == 0,
                 std::to_string(changed) + " changed outputs"});
  return out;
}

std::vector<CheckResult> CheckRenderer() {
  std::vector<CheckResult> out;
  RenderParams params;
  const auto make = [](GeneratorKind kind) {
    ShapeClassSpec spec;
    spec.kind = kind;
    spec.class_name = std::string(GeneratorName(kind));
    return NormalizeMesh(GenerateShape(spec, 0));
  };
  const Mesh cube = make(GeneratorKind::kCube);
  const Mesh sphere = make(GeneratorKind::kSphere);
  const Mesh torus = make(GeneratorKind::kTorus);

  const ViewSet cube_views = RenderMultiview(cube, "cube", 0, params);
  const ViewSet again = RenderMultiview(cube, "cube", 0, params);
  const ViewSet torus_a = RenderMultiview(torus, "torus", 0, params);
  const ViewSet torus_b = RenderMultiview(torus, "torus", 0, params);
  out.push_back({"re-render is bit-identical", cube_views.views == again.views && torus_a.views == torus_b.views, ""});

  auto max_gray_diff = [](const Image& a, const Image& b) {
    int worst = 0;
    for (std::size_t i = 0; i < a.pixels.size(); ++i) {
      worst = std::max(worst, std::abs(int(Quantize(a.pixels[i])) - int(Quantize(b.pixels[i]))));
    }
    return worst;
  };
  int cube_worst = 0;
  for (int k = 0; k + 3 < params.n_views; ++k) {
    cube_worst = std::max(cube_worst, max_gray_diff(cube_views.views[k], cube_views.views[k + 3]));
  }
  out.push_back({"cube views k and k+3 within 1 gray level", cube_worst <= 1, "max diff " + std::to_string(cube_worst)});

  const ViewSet sphere_views = RenderMultiview(sphere, "sphere", 0, params);
  int sphere_worst = 0;
  for (int k = 1; k < params.n_views; ++k) {
    sphere_worst = std::max(sphere_worst, max_gray_diff(sphere_views.views[0], sphere_views.views[k]));
  }
  out.push_back({"sphere views agree within 1 gray level", sphere_worst <= 1, "max diff " + std::to_string(sphere_worst)});

  // A far square facing the camera behind a smaller tilted square.
  RenderParams flat = params;
  flat.elevation = 0.0;
  flat.supersample = 1;
  const Camera camera = MakeCamera(0, flat);
  const double t = std::cos(M_PI / 3.0), s = std::sin(M_PI / 3.0);
  Mesh far_quad{{{-0.8, -0.8, -0.5}, {0.8, -0.8, -0.5}, {0.8, 0.8, -0.5}, {-0.8, 0.8, -0.5}},
                {{0, 1, 2}, {0, 2, 3}}, "far"};
  Mesh near_quad{{{-0.3 * t, -0.3, 0.3 + 0.3 * s}, {0.3 * t, -0.3, 0.3 - 0.3 * s},
                  {0.3 * t, 0.3, 0.3 - 0.3 * s}, {-0.3 * t, 0.3, 0.3 + 0.3 * s}},
                 {{0, 1, 2}, {0, 2, 3}}, "near"};
  const Image near_only = RenderView(near_quad, camera, flat);
  std::size_t leaks = 0;
  for (bool near_first : {true, false}) {
    Mesh both;
    const Mesh& first = near_first ? near_quad : far_quad;
    const Mesh& second = near_first ? far_quad : near_quad;
    both.vertices = first.vertices;
    both.vertices.insert(both.vertices.end(), second.vertices.begin(), second.vertices.end());
    both.faces = first.faces;
    for (Face f : second.faces) both.faces.push_back({f[0] + 4, f[1] + 4, f[2] + 4});
    const Image combined = RenderView(both, camera, flat);
    for (std::size_t i = 0; i < near_only.pixels.size(); ++i) {
      if (near_only.pixels[i] != flat.background && combined.pixels[i] != near_only.pixels[i]) ++leaks;
    }
  }
  out.push_back({"occluded surface never leaks", leaks == 0 && ForegroundCount(near_only, flat.background) > 0,
                 std::to_string(leaks) + " leaking pixels"});

  const Image q = Quantized(torus_a.views[1]);
  bool roundtrip = DecodePnm(EncodePgm(q)) == q;
  const auto path = std::filesystem::temp_directory_path() / "mvcl_verify_roundtrip.ppm";
  WritePpm(torus_a.views[1], path.string());
  roundtrip = roundtrip && ReadPpm(path.string()) == q;
  std::filesystem::remove(path);
  out.push_back({"ppm round trip is exact", roundtrip, ""});
  return out;
}

}  // namespace mvcl

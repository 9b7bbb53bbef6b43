// mvcl: synthesize, render, pretrain and evaluate multi-view shape encoders.

#include <fcntl.h>
#include <unistd.h>

#include <CLI11.hpp>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>

#include "mvcl/config.hpp"
#include "mvcl/data.hpp"
#include "mvcl/error.hpp"
#include "mvcl/eval.hpp"
#include "mvcl/geometry.hpp"
#include "mvcl/renderer.hpp"
#include "mvcl/rng.hpp"
#include "mvcl/runtime.hpp"
#include "mvcl/train.hpp"
#include "mvcl/verify.hpp"

namespace fs = std::filesystem;
using namespace mvcl;

namespace {

class DirLock {
 public:
  explicit DirLock(const fs::path& dir) : path_(dir / ".lock") {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) Fail(ErrorCode::kIoFailure, "cannot create " + dir.string() + ": " + ec.message());
    fd_ = ::open(path_.c_str(), O_CREAT | O_EXCL | O_WRONLY, 0644);
    if (fd_ < 0) Fail(ErrorCode::kLocked, dir.string() + " is in use (remove " + path_.string() + " if stale)");
  }
  ~DirLock() {
    ::close(fd_);
    std::error_code ec;
    fs::remove(path_, ec);
  }
  DirLock(const DirLock&) = delete;
  DirLock& operator=(const DirLock&) = delete;

 private:
  fs::path path_;
  int fd_ = -1;
};

void WriteFile(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) Fail(ErrorCode::kIoFailure, "cannot write " + path.string());
  out << text;
}

void RequireDir(const std::string& path, const char* what) {
  if (!fs::is_directory(path)) Fail(ErrorCode::kInvalidConfig, std::string(what) + " " + path + " does not exist");
}

// synth

struct SynthArgs {
  std::string out;
  int classes = 6;
  int per_class = 75;
  std::uint64_t seed = 0;
  int segments = kDefaultSegments;
  double train_fraction = 0.8;
};

int RunSynth(const SynthArgs& a) {
  if (a.per_class < 2) Fail(ErrorCode::kInvalidConfig, "--per-class must be >= 2");
  const int n_train = static_cast<int>(std::lround(a.train_fraction * a.per_class));
  if (n_train < 1 || n_train >= a.per_class) Fail(ErrorCode::kInvalidConfig, "split leaves an empty side");
  for (const auto& spec : DefaultCorpusClasses(a.classes)) {
    for (int i = 0; i < a.per_class; ++i) {
      const std::uint64_t shape_seed = StreamId({a.seed, static_cast<std::uint64_t>(spec.class_id),
                                                 static_cast<std::uint64_t>(i)});
      Mesh mesh = NormalizeMesh(GenerateShape(spec, shape_seed, a.segments));
      const char* split = i < n_train ? "train" : "test";
      const fs::path dir = fs::path(a.out) / spec.class_name / split;
      fs::create_directories(dir);
      char name[64];
      std::snprintf(name, sizeof(name), "%s_%04d.off", spec.class_name.c_str(), i);
      WriteFile(dir / name, WriteOff(mesh));
    }
  }
  std::cout << "wrote " << a.classes * a.per_class << " meshes to " << a.out << "\n";
  return 0;
}

// render

int RunRender(const std::string& meshes, const std::string& out, const RenderParams& params) {
  RequireDir(meshes, "mesh directory");
  ValidateRenderParams(params);
  std::vector<fs::path> files;
  for (const auto& e : fs::recursive_directory_iterator(meshes)) {
    const auto ext = e.path().extension();
    if (e.is_regular_file() && (ext == ".off" || ext == ".obj")) files.push_back(e.path());
  }
  std::sort(files.begin(), files.end());
  if (files.empty()) Fail(ErrorCode::kEmptyDataset, "no .off or .obj files under " + meshes);
  for (const auto& file : files) {
    // <class>/<split>/<id>.off
    const fs::path rel = fs::relative(file, meshes);
    if (std::distance(rel.begin(), rel.end()) != 3) {
      Fail(ErrorCode::kInvalidConfig, rel.string() + " is not laid out as <class>/<split>/<file>");
    }
    ParseSplit(rel.parent_path().filename().string());
    const Mesh mesh = NormalizeMesh(LoadMesh(file.string()));
    const fs::path dir = fs::path(out) / rel.parent_path() / file.stem();
    fs::create_directories(dir);
    const ViewSet views = RenderMultiview(mesh, file.stem().string(), 0, params);
    for (int v = 0; v < params.n_views; ++v) {
      char name[32];
      std::snprintf(name, sizeof(name), "view_%02d.ppm", v);
      WritePpm(views.views[v], (dir / name).string());
    }
  }
  std::cout << "rendered " << files.size() << " meshes x " << params.n_views << " views to " << out << "\n";
  return 0;
}

// stats

int RunStats(const std::string& data) {
  RequireDir(data, "dataset");
  DatasetManifest m = BuildManifest(data);
  const PixelStats stats = ComputeStats(m);
  m.has_stats = true;
  m.mean = stats.mean;
  m.std = stats.std;
  SaveManifest(m, (fs::path(data) / "manifest.json").string());
  std::printf("classes=%zu\nitems=%zu\nn_views=%d\nmean=%.9g\nstd=%.9g\n", m.classes.size(),
              m.items.size(), m.n_views, m.mean, m.std);
  return 0;
}

// pretrain

DatasetManifest OpenWithStats(const std::string& data) {
  DatasetManifest m = OpenDataset(data);
  if (!m.has_stats) {
    std::cerr << "note: " << data << " has no stats; computing them (run `mvcl stats` to cache)\n";
    const PixelStats s = ComputeStats(m);
    m.has_stats = true;
    m.mean = s.mean;
    m.std = s.std;
  }
  return m;
}

int RunPretrain(const std::string& data, const std::string& config, const std::string& out) {
  RequireDir(data, "dataset");
  RunConfig cfg = LoadRunConfig(config);
  cfg.dataset.root = data;
  DirLock lock(out);
  const DatasetManifest m = OpenWithStats(data);
  const ViewStore train = LoadViews(m, Split::kTrain);

  PretrainSetup setup = MakePretrainSetup(cfg, m);
  setup.on_epoch = [&](const EpochRecord& r) {
    std::fprintf(stderr, "epoch %d/%d loss=%.6f lr=%.3g %.1fs\n", r.epoch + 1, cfg.optim.epochs,
                 r.mean_loss, r.lr, r.seconds);
  };
  WriteFile(fs::path(out) / "config.json", RunConfigJson(cfg));
  PretrainResult result = Pretrain(train, setup);
  SaveCheckpoint(result.checkpoint, out);
  result.log.checkpoint_path = out;
  WriteFile(fs::path(out) / "train_log.csv", TrainLogCsv(result.log));
  std::cout << "checkpoint=" << out << "\nfinal_loss=" << result.log.epochs.back().mean_loss << "\n";
  return 0;
}

// embed / probe

RunConfig RunDirConfig(const std::string& run_dir) {
  const fs::path path = fs::path(run_dir) / "config.json";
  return fs::exists(path) ? LoadRunConfig(path.string()) : RunConfig{};
}

int RunEmbed(const std::string& ckpt_dir, const std::string& data, const std::string& split,
             const std::string& level, const std::string& out) {
  RequireDir(data, "dataset");
  const Checkpoint ckpt = LoadCheckpoint(ckpt_dir);
  const DatasetManifest m = OpenDataset(data);
  if (!ckpt.meta.class_names.empty() && ckpt.meta.class_names != m.classes) {
    Fail(ErrorCode::kCheckpointMismatch, "checkpoint classes differ from dataset classes");
  }
  const EmbeddingMatrix e = ComputeEmbeddings(ckpt, LoadViews(m, ParseSplit(split)), ParseLevel(level));
  ExportEmbeddings(e, out);
  std::cout << "embeddings=" << out << "\ncount=" << e.count << "\ndim=" << e.dim << "\n";
  return 0;
}

int RunProbe(const std::string& ckpt_dir, const std::string& data, const std::string& level_flag) {
  RequireDir(data, "dataset");
  RunConfig cfg = RunDirConfig(ckpt_dir);
  DirLock lock(ckpt_dir);
  const Checkpoint ckpt = LoadCheckpoint(ckpt_dir);
  const DatasetManifest m = OpenDataset(data);
  if (!ckpt.meta.class_names.empty() && ckpt.meta.class_names != m.classes) {
    Fail(ErrorCode::kCheckpointMismatch, "checkpoint classes differ from dataset classes");
  }
  const EmbeddingLevel level = level_flag.empty() ? cfg.eval.level : ParseLevel(level_flag);
  const EmbeddingMatrix train = ComputeEmbeddings(ckpt, LoadViews(m, Split::kTrain), level);
  const EmbeddingMatrix test = ComputeEmbeddings(ckpt, LoadViews(m, Split::kTest), level);
  const MetricsReport report = EvaluateSplits(train, test, cfg.eval, m.classes);
  WriteFile(fs::path(ckpt_dir) / "metrics.json", MetricsJson(report));
  std::cout << "level=" << LevelName(level) << "\n" << MetricsKeyValue(report);
  return 0;
}

// knn / retrieve

int RunKnn(const std::string& corpus_dir, const std::string& query_dir, int k) {
  const EmbeddingMatrix corpus = ImportEmbeddings(corpus_dir);
  const EmbeddingMatrix queries = ImportEmbeddings(query_dir);
  const auto predictions = KnnClassify(corpus, queries, k);
  MetricsReport report;
  report.knn_k = k;
  report.knn_accuracy = Accuracy(predictions, queries.labels);
  std::cout << MetricsKeyValue(report);
  return 0;
}

int RunRetrieve(const std::string& corpus_dir, const std::string& query_dir, int map_at,
                const std::string& dump) {
  const EmbeddingMatrix corpus = ImportEmbeddings(corpus_dir);
  const EmbeddingMatrix queries = ImportEmbeddings(query_dir);
  const RetrievalReport retrieval = EvaluateRetrieval(corpus, queries, map_at);
  if (!dump.empty()) WriteFile(dump, RankingsCsv(retrieval, corpus, queries));
  MetricsReport report;
  report.map = retrieval.map;
  report.map_at = map_at;
  report.map_at_k = retrieval.map_at_k;
  std::cout << MetricsKeyValue(report);
  return 0;
}

// gradcheck / verify

int RunGradcheck(const std::string& loss, const std::string& encoder, std::uint64_t seed) {
  std::vector<LossKind> losses;
  if (loss == "all") {
    losses = {LossKind::kCrossEntropy, LossKind::kInfoNce, LossKind::kSimClr,
              LossKind::kSupCon, LossKind::kEpsSupInfoNce, LossKind::kSincere};
  } else {
    losses = {ParseLossKind(loss)};
  }
  std::vector<EncoderKind> encoders;
  if (encoder == "all") {
    encoders = {EncoderKind::kMlp, EncoderKind::kVit};
  } else {
    encoders = {ParseEncoderKind(encoder)};
  }
  bool all_pass = true;
  for (LossKind kind : losses) {
    double worst = 0.0;
    for (EncoderKind enc : encoders) worst = std::max(worst, LossGradCheck(kind, enc, seed).max_rel_err);
    const bool pass = worst < 1e-3;
    all_pass = all_pass && pass;
    std::printf("%s: %s max_rel_err=%.3e\n", std::string(LossName(kind)).c_str(), pass ? "PASS" : "FAIL", worst);
  }
  return all_pass ? 0 : 2;
}

int RunVerify(std::uint64_t seed) {
  std::vector<CheckResult> checks = CheckLossIdentities();
  checks.push_back(CheckEpsReduction(100, seed));
  for (auto& c : CheckOracleEquivalence(seed, 20)) checks.push_back(std::move(c));
  for (auto& c : CheckInvariances(seed, 20)) checks.push_back(std::move(c));
  for (auto& c : CheckRenderer()) checks.push_back(std::move(c));
  bool all_pass = true;
  for (const auto& c : checks) {
    all_pass = all_pass && c.passed;
    std::printf("%s %s%s%s\n", c.passed ? "PASS" : "FAIL", c.name.c_str(), c.detail.empty() ? "" : "  ",
                c.detail.c_str());
  }
  return all_pass ? 0 : 2;
}

}  // namespace

int main(int argc, char** argv) {
  mvcl::KeepHeapResident();
  CLI::App app{"Multi-view contrastive learning of 3D shape representations"};
  app.require_subcommand(1);

  SynthArgs synth;
  auto* synth_cmd = app.add_subcommand("synth", "Generate a labeled synthetic mesh corpus");
  synth_cmd->add_option("--out", synth.out, "Output directory")->required();
  synth_cmd->add_option("--classes", synth.classes, "Number of shape classes (2..6)");
  synth_cmd->add_option("--per-class", synth.per_class, "Shapes per class");
  synth_cmd->add_option("--seed", synth.seed, "Corpus seed");
  synth_cmd->add_option("--segments", synth.segments, "Tessellation of curved primitives");

  std::string meshes, render_out;
  RenderParams render;
  auto* render_cmd = app.add_subcommand("render", "Render every mesh into a ring of views");
  render_cmd->add_option("--meshes", meshes, "Mesh directory <class>/<split>/<id>.off")->required();
  render_cmd->add_option("--out", render_out, "Output dataset directory")->required();
  render_cmd->add_option("--views", render.n_views, "Views per mesh");
  render_cmd->add_option("--size", render.image_size, "Image side in pixels");
  render_cmd->add_option("--elevation", render.elevation, "Camera elevation in degrees");
  render_cmd->add_option("--distance", render.distance, "Camera distance");
  render_cmd->add_option("--supersample", render.supersample, "Samples per pixel side");

  std::string data;
  auto* stats_cmd = app.add_subcommand("stats", "Compute normalization stats into manifest.json");
  stats_cmd->add_option("--data", data, "Dataset directory")->required();

  std::string config, run_dir;
  auto* pretrain_cmd = app.add_subcommand("pretrain", "Train an encoder");
  pretrain_cmd->add_option("--data", data, "Dataset directory")->required();
  pretrain_cmd->add_option("--config", config, "Run config JSON")->required();
  pretrain_cmd->add_option("--out", run_dir, "Run directory")->required();

  std::string split = "train", level = "shape", emb_out;
  auto* embed_cmd = app.add_subcommand("embed", "Export frozen encoder embeddings");
  embed_cmd->add_option("--ckpt", run_dir, "Run directory")->required();
  embed_cmd->add_option("--data", data, "Dataset directory")->required();
  embed_cmd->add_option("--split", split, "train or test");
  embed_cmd->add_option("--level", level, "view or shape");
  embed_cmd->add_option("--out", emb_out, "Embedding directory")->required();

  std::string probe_level;
  auto* probe_cmd = app.add_subcommand("probe", "Linear probe, k-NN and retrieval metrics");
  probe_cmd->add_option("--ckpt", run_dir, "Run directory")->required();
  probe_cmd->add_option("--data", data, "Dataset directory")->required();
  probe_cmd->add_option("--level", probe_level, "view or shape (default from config)");

  std::string corpus, queries, dump;
  int k = 10, map_at = 10;
  auto* knn_cmd = app.add_subcommand("knn", "k-NN classification accuracy");
  knn_cmd->add_option("--corpus", corpus, "Corpus embedding directory")->required();
  knn_cmd->add_option("--queries", queries, "Query embedding directory")->required();
  knn_cmd->add_option("--k", k, "Neighbors");

  auto* retrieve_cmd = app.add_subcommand("retrieve", "Cosine retrieval mAP");
  retrieve_cmd->add_option("--corpus", corpus, "Corpus embedding directory")->required();
  retrieve_cmd->add_option("--queries", queries, "Query embedding directory")->required();
  retrieve_cmd->add_option("--map-at", map_at, "Truncation depth for mAP@k");
  retrieve_cmd->add_option("--dump-rankings", dump, "Write rankings CSV here");

  std::string grad_loss = "all", grad_encoder = "all";
  std::uint64_t seed = 0;
  auto* grad_cmd = app.add_subcommand("gradcheck", "Finite-difference gradient check of loss+encoder");
  grad_cmd->add_option("--loss", grad_loss, "all or a loss name");
  grad_cmd->add_option("--encoder", grad_encoder, "all, mlp or vit");
  grad_cmd->add_option("--seed", seed, "Seed");

  auto* verify_cmd = app.add_subcommand("verify", "Run the invariant suite");
  verify_cmd->add_option("--seed", seed, "Seed");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << e.what() << "\n\n" << app.help();
    return 1;
  }

  try {
    if (*synth_cmd) return RunSynth(synth);
    if (*render_cmd) return RunRender(meshes, render_out, render);
    if (*stats_cmd) return RunStats(data);
    if (*pretrain_cmd) return RunPretrain(data, config, run_dir);
    if (*embed_cmd) return RunEmbed(run_dir, data, split, level, emb_out);
    if (*probe_cmd) return RunProbe(run_dir, data, probe_level);
    if (*knn_cmd) return RunKnn(corpus, queries, k);
    if (*retrieve_cmd) return RunRetrieve(corpus, queries, map_at, dump);
    if (*grad_cmd) return RunGradcheck(grad_loss, grad_encoder, seed);
    if (*verify_cmd) return RunVerify(seed);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return IsValidationError(e.code()) ? 1 : 2;
  } catch (const fs::filesystem_error& e) {
    std::cerr << "error: IoFailure: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 1;
}

// Acceptance suite: one PASS/FAIL line per criterion on stdout, progress on
// stderr. Exit status 0 only when every selected criterion passes.

#include <CLI11.hpp>
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <functional>
#include <map>
#include <set>
#include <sstream>

#include "mvcl/config.hpp"
#include "mvcl/data.hpp"
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

using Clock = std::chrono::steady_clock;

double Seconds(Clock::time_point since) {
  return std::chrono::duration<double>(Clock::now() - since).count();
}

struct Verdict {
  int id = 0;
  std::string title;
  bool passed = false;
  std::string detail;
};

void Print(const Verdict& v) {
  std::printf("criterion %d: %s %s (%s)\n", v.id, v.passed ? "PASS" : "FAIL", v.title.c_str(),
              v.detail.c_str());
  std::fflush(stdout);
}

std::string Fmt(const char* format, double a, double b = 0.0) {
  char buf[160];
  std::snprintf(buf, sizeof(buf), format, a, b);
  return buf;
}

/// Folds a list of named checks into a verdict, listing the failures.
Verdict FromChecks(int id, std::string title, const std::vector<CheckResult>& checks,
                   double seconds, double budget) {
  Verdict v{id, std::move(title), true, ""};
  std::string failed;
  for (const auto& c : checks) {
    if (!c.passed) {
      v.passed = false;
      failed += (failed.empty() ? "" : "; ") + c.name + ": " + c.detail;
    }
    std::fprintf(stderr, "  [%s] %s %s\n", c.passed ? "ok" : "XX", c.name.c_str(), c.detail.c_str());
  }
  v.detail = std::to_string(checks.size()) + " checks, " + Fmt("%.2fs", seconds);
  if (budget > 0 && seconds >= budget) {
    v.passed = false;
    v.detail += Fmt(" exceeds %.0fs budget", budget);
  }
  if (!failed.empty()) v.detail += "; failed: " + failed;
  return v;
}

// Desk-scale benchmark

struct RunKey {
  std::uint64_t seed;
  LossKind loss;
  auto operator<=>(const RunKey&) const = default;
};

struct RunOutcome {
  MetricsReport metrics;
  TrainLog log;
  std::vector<float> params;
  double seconds = 0.0;
};

struct Benchmark {
  RunConfig base;
  DatasetManifest manifest;
  ViewStore train;
  ViewStore test;
};

constexpr int kCorpusClasses = 6;
constexpr int kCorpusPerClass = 75;
constexpr int kCorpusTrain = 60;

/// Generates, renders and indexes the six-class corpus exactly as
/// `mvcl synth` + `mvcl render` + `mvcl stats` would.
DatasetManifest BuildCorpus(const fs::path& root, int image_size, int n_views) {
  fs::remove_all(root);
  RenderParams params;
  params.image_size = image_size;
  params.n_views = n_views;
  for (const auto& spec : DefaultCorpusClasses(kCorpusClasses)) {
    for (int i = 0; i < kCorpusPerClass; ++i) {
      const std::uint64_t shape_seed =
          StreamId({0, static_cast<std::uint64_t>(spec.class_id), static_cast<std::uint64_t>(i)});
      const Mesh mesh = NormalizeMesh(GenerateShape(spec, shape_seed));
      char id[64];
      std::snprintf(id, sizeof(id), "%s_%04d", spec.class_name.c_str(), i);
      const fs::path dir = root / spec.class_name / (i < kCorpusTrain ? "train" : "test") / id;
      fs::create_directories(dir);
      const ViewSet views = RenderMultiview(mesh, id, spec.class_id, params);
      for (int v = 0; v < n_views; ++v) {
        char name[32];
        std::snprintf(name, sizeof(name), "view_%02d.ppm", v);
        WritePpm(views.views[v], (dir / name).string());
      }
    }
  }
  DatasetManifest m = BuildManifest(root.string());
  const PixelStats stats = ComputeStats(m);
  m.has_stats = true;
  m.mean = stats.mean;
  m.std = stats.std;
  SaveManifest(m, (root / "manifest.json").string());
  return OpenDataset(root.string());
}

RunOutcome RunOne(const Benchmark& bench, std::uint64_t seed, LossKind loss) {
  const auto start = Clock::now();
  RunConfig cfg = bench.base;
  cfg.seed = seed;
  cfg.optim.seed = seed;
  cfg.eval.probe.seed = seed;
  cfg.loss.kind = loss;
  PretrainSetup setup = MakePretrainSetup(cfg, bench.manifest);
  PretrainResult result = Pretrain(bench.train, setup);
  const EmbeddingMatrix train = ComputeEmbeddings(result.checkpoint, bench.train, cfg.eval.level);
  const EmbeddingMatrix test = ComputeEmbeddings(result.checkpoint, bench.test, cfg.eval.level);
  RunOutcome out;
  out.metrics = EvaluateSplits(train, test, cfg.eval, bench.manifest.classes);
  out.log = std::move(result.log);
  out.params = result.checkpoint.params.Flatten();
  out.seconds = Seconds(start);
  return out;
}

bool SameBits(double a, double b) { return std::memcmp(&a, &b, sizeof(double)) == 0; }

bool SameMetrics(const RunOutcome& a, const RunOutcome& b) {
  const MetricsReport &x = a.metrics, &y = b.metrics;
  if (!SameBits(x.top1, y.top1) || !SameBits(x.top5, y.top5) ||
      !SameBits(x.knn_accuracy, y.knn_accuracy) || !SameBits(x.map, y.map) ||
      !SameBits(x.map_at_k, y.map_at_k) || x.per_class_top1.size() != y.per_class_top1.size()) {
    return false;
  }
  for (std::size_t i = 0; i < x.per_class_top1.size(); ++i) {
    if (!SameBits(x.per_class_top1[i], y.per_class_top1[i])) return false;
  }
  if (a.log.epochs.size() != b.log.epochs.size()) return false;
  for (std::size_t i = 0; i < a.log.epochs.size(); ++i) {
    if (!SameBits(a.log.epochs[i].mean_loss, b.log.epochs[i].mean_loss)) return false;
  }
  return a.params == b.params;
}

std::vector<int> ParseList(const std::string& text) {
  std::vector<int> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) out.push_back(std::stoi(item));
  }
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  KeepHeapResident();
  CLI::App app{"Acceptance criteria 1-9"};
  std::string config = MVCL_BENCHMARK_CONFIG;
  std::string work = "acceptance_work";
  std::string only = "1,2,3,4,5,6,7,8,9";
  std::string seeds_text = "0,1,2";
  std::string losses_text = "supcon,sincere,eps_supinfonce,infonce,simclr";
  std::string repro = "subset";
  std::string csv;
  app.add_option("--config", config, "Benchmark run config")->check(CLI::ExistingFile);
  app.add_option("--work", work, "Scratch directory for the rendered corpus");
  app.add_option("--only", only, "Comma-separated criteria to run");
  app.add_option("--seeds", seeds_text, "Benchmark seeds");
  app.add_option("--losses", losses_text, "Benchmark losses");
  app.add_option("--repro", repro, "Criterion 9 scope: subset or full")
      ->check(CLI::IsMember({"subset", "full"}));
  app.add_option("--csv", csv, "Write per-run benchmark metrics here");
  CLI11_PARSE(app, argc, argv);

  const auto selected_list = ParseList(only);
  const std::set<int> selected(selected_list.begin(), selected_list.end());
  std::vector<Verdict> verdicts;
  auto record = [&](Verdict v) {
    Print(v);
    verdicts.push_back(std::move(v));
  };

  if (selected.count(1)) {
    const auto start = Clock::now();
    const auto checks = CheckLossIdentities();
    record(FromChecks(1, "loss identities", checks, Seconds(start), 1.0));
  }
  if (selected.count(2)) {
    const auto start = Clock::now();
    record(FromChecks(2, "eps reduction", {CheckEpsReduction(100, 0)}, Seconds(start), 0.0));
  }
  if (selected.count(3)) {
    const auto start = Clock::now();
    std::vector<CheckResult> checks;
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
      for (LossKind loss : {LossKind::kCrossEntropy, LossKind::kInfoNce, LossKind::kSimClr,
                            LossKind::kSupCon, LossKind::kSincere, LossKind::kEpsSupInfoNce}) {
        for (EncoderKind enc : {EncoderKind::kMlp, EncoderKind::kVit}) {
          const GradCheckResult r = LossGradCheck(loss, enc, seed);
          checks.push_back({std::string(LossName(loss)) + "/" + std::string(EncoderName(enc)) +
                                "/seed" + std::to_string(seed),
                            r.max_rel_err < 1e-3 && r.checked > 0,
                            Fmt("max_rel_err=%.3e", r.max_rel_err)});
        }
      }
    }
    record(FromChecks(3, "gradient checks", checks, Seconds(start), 120.0));
  }
  if (selected.count(4)) {
    const auto start = Clock::now();
    record(FromChecks(4, "oracle equivalence", CheckOracleEquivalence(0, 50), Seconds(start), 0.0));
  }
  if (selected.count(5)) {
    const auto start = Clock::now();
    record(FromChecks(5, "invariances", CheckInvariances(0, 20), Seconds(start), 0.0));
  }
  if (selected.count(6)) {
    const auto start = Clock::now();
    record(FromChecks(6, "renderer", CheckRenderer(), Seconds(start), 30.0));
  }

  const bool bench_needed = selected.count(7) || selected.count(8) || selected.count(9);
  if (bench_needed) {
    const auto start = Clock::now();
    Benchmark bench;
    bench.base = LoadRunConfig(config);
    std::vector<std::uint64_t> seeds;
    for (int s : ParseList(seeds_text)) seeds.push_back(static_cast<std::uint64_t>(s));
    std::vector<LossKind> losses;
    {
      std::stringstream ss(losses_text);
      std::string item;
      while (std::getline(ss, item, ',')) losses.push_back(ParseLossKind(item));
    }
    std::fprintf(stderr, "building corpus under %s\n", work.c_str());
    bench.manifest = BuildCorpus(fs::path(work) / "corpus", bench.base.dataset.image_size,
                                 bench.base.dataset.n_views);
    bench.train = LoadViews(bench.manifest, Split::kTrain);
    bench.test = LoadViews(bench.manifest, Split::kTest);
    std::fprintf(stderr, "corpus ready: %zu train / %zu test views, %.1fs\n", bench.train.size(),
                 bench.test.size(), Seconds(start));

    std::map<RunKey, RunOutcome> runs;
    std::FILE* csv_file = csv.empty() ? nullptr : std::fopen(csv.c_str(), "w");
    if (csv_file) std::fprintf(csv_file, "seed,loss,top1,top5,knn,map,map_at_k,first_loss,last_loss,seconds\n");
    for (std::uint64_t seed : seeds) {
      for (LossKind loss : losses) {
        RunOutcome r = RunOne(bench, seed, loss);
        const auto& m = r.metrics;
        std::fprintf(stderr,
                     "  seed %llu %-15s probe=%.4f knn=%.4f map=%.4f map@%d=%.4f loss %.4f -> %.4f "
                     "%.1fs\n",
                     static_cast<unsigned long long>(seed), std::string(LossName(loss)).c_str(),
                     m.top1, m.knn_accuracy, m.map, m.map_at, m.map_at_k,
                     r.log.epochs.front().mean_loss, r.log.epochs.back().mean_loss, r.seconds);
        if (csv_file) {
          std::fprintf(csv_file, "%llu,%s,%.9g,%.9g,%.9g,%.9g,%.9g,%.9g,%.9g,%.2f\n",
                       static_cast<unsigned long long>(seed), std::string(LossName(loss)).c_str(),
                       m.top1, m.top5, m.knn_accuracy, m.map, m.map_at_k,
                       r.log.epochs.front().mean_loss, r.log.epochs.back().mean_loss, r.seconds);
          std::fflush(csv_file);
        }
        runs[{seed, loss}] = std::move(r);
      }
    }
    if (csv_file) std::fclose(csv_file);
    const double bench_seconds = Seconds(start);

    // Best supervised and best self-supervised value of a metric for one seed.
    auto best = [&](std::uint64_t seed, bool supervised, double MetricsReport::*field) {
      double b = -1.0;
      for (LossKind loss : losses) {
        if (IsSupervisedContrastive(loss) != supervised) continue;
        b = std::max(b, runs.at({seed, loss}).metrics.*field);
      }
      return b;
    };
    auto has_both = [&] {
      bool sup = false, self = false;
      for (LossKind l : losses) (IsSupervisedContrastive(l) ? sup : self) = true;
      return sup && self;
    };

    if (selected.count(7)) {
      Verdict v{7, "desk-scale benchmark", true, ""};
      std::vector<std::string> misses;
      for (const auto& [key, r] : runs) {
        const std::string tag = "seed" + std::to_string(key.seed) + "/" + std::string(LossName(key.loss));
        const auto& m = r.metrics;
        if (IsSupervisedContrastive(key.loss)) {
          if (m.knn_accuracy < 0.85) misses.push_back(tag + Fmt(" knn %.4f < 0.85", m.knn_accuracy));
          if (m.top1 < 0.85) misses.push_back(tag + Fmt(" probe %.4f < 0.85", m.top1));
        } else if (m.knn_accuracy < 0.55) {
          misses.push_back(tag + Fmt(" knn %.4f < 0.55", m.knn_accuracy));
        }
        if (!(r.log.epochs.back().mean_loss < r.log.epochs.front().mean_loss)) {
          misses.push_back(tag + " final-epoch loss not below first");
        }
      }
      if (has_both()) {
        for (std::uint64_t seed : seeds) {
          const double sup = best(seed, true, &MetricsReport::knn_accuracy);
          const double self = best(seed, false, &MetricsReport::knn_accuracy);
          if (sup < self) {
            misses.push_back("seed" + std::to_string(seed) +
                             Fmt(" best supervised knn %.4f < self-supervised %.4f", sup, self));
          }
        }
      }
      if (bench_seconds > 1800.0) misses.push_back(Fmt("runtime %.0fs > 1800s", bench_seconds));
      v.passed = misses.empty();
      v.detail = std::to_string(runs.size()) + " runs, " + Fmt("%.0fs", bench_seconds);
      for (const auto& m : misses) v.detail += "; " + m;
      record(v);
    }

    if (selected.count(8)) {
      Verdict v{8, "retrieval trend", true, ""};
      std::vector<std::string> misses;
      if (!has_both()) misses.push_back("needs supervised and self-supervised losses");
      for (std::uint64_t seed : seeds) {
        if (!has_both()) break;
        const double sup_at = best(seed, true, &MetricsReport::map_at_k);
        const double sup = best(seed, true, &MetricsReport::map);
        const double self = best(seed, false, &MetricsReport::map);
        v.detail += (v.detail.empty() ? "" : ", ") + ("seed" + std::to_string(seed)) +
                    Fmt(" sup map@10=%.4f", sup_at) + Fmt(" map %.4f vs %.4f", sup, self);
        if (sup_at < 0.85) misses.push_back("seed" + std::to_string(seed) + Fmt(" map@10 %.4f < 0.85", sup_at));
        if (sup < self) misses.push_back("seed" + std::to_string(seed) + Fmt(" supervised map %.4f < %.4f", sup, self));
      }
      v.passed = misses.empty();
      for (const auto& m : misses) v.detail += "; " + m;
      record(v);
    }

    if (selected.count(9)) {
      // The subset repeats the first seed for one supervised and one
      // self-supervised loss; `--repro full` repeats every run.
      std::vector<RunKey> again;
      for (const auto& [key, r] : runs) {
        if (repro == "full") {
          again.push_back(key);
        } else if (key.seed == seeds.front()) {
          const bool sup = IsSupervisedContrastive(key.loss);
          const bool taken = std::any_of(again.begin(), again.end(), [&](const RunKey& k) {
            return IsSupervisedContrastive(k.loss) == sup;
          });
          if (!taken) again.push_back(key);
        }
      }
      Verdict v{9, "reproducibility", true, ""};
      for (const RunKey& key : again) {
        const RunOutcome r = RunOne(bench, key.seed, key.loss);
        const bool same = SameMetrics(r, runs.at(key));
        v.passed = v.passed && same;
        v.detail += (v.detail.empty() ? "" : ", ") + ("seed" + std::to_string(key.seed) + "/" +
                                                      std::string(LossName(key.loss))) +
                    (same ? " identical" : " DIFFERS");
      }
      if (again.empty()) {
        v.passed = false;
        v.detail = "no runs to repeat";
      }
      record(v);
    }
  }

  const bool all = std::all_of(verdicts.begin(), verdicts.end(), [](const Verdict& v) { return v.passed; });
  return all ? 0 : 1;
}

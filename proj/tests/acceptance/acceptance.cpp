// Copyright 2026 The specflow Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)
//
// Acceptance runner. Prints one PASS/FAIL line per criterion and exits nonzero
// if any criterion fails.

#include <CLI11.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iterator>
#include <numeric>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "commands.hpp"
#include "config.hpp"
#include "corpus.hpp"
#include "flowpath.hpp"
#include "manifest.hpp"
#include "masking.hpp"
#include "metrics.hpp"
#include "rng.hpp"
#include "sampler.hpp"
#include "spectral.hpp"
#include "tasks.hpp"
#include "training.hpp"
#include "vectorfield.hpp"

namespace fs = std::filesystem;
using namespace specflow;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

struct Context {
  fs::path work;
  std::string cli;
};

double MaxAbs(std::span<const double> a, std::span<const double> b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

double RelError(std::span<const double> a, std::span<const double> b) {
  double diff = 0.0, ref = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    diff += (a[i] - b[i]) * (a[i] - b[i]);
    ref += b[i] * b[i];
  }
  return std::sqrt(diff) / std::max(std::sqrt(ref), 1e-300);
}

std::string Format(const char* fmt, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof(buf), fmt, args...);
  return buf;
}

std::string ReadText(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

// 1. Flow path identities.
Outcome FlowIdentities(const Context&) {
  const FlowPathConfig cfg;  // sigma_min = 1e-4
  Rng rng(101);
  double worst_field = 0.0, worst_endpoint = 0.0;
  std::vector<double> x0(64), x1(64);
  for (int trial = 0; trial < 1000; ++trial) {
    rng.FillNormal(x0);
    rng.FillNormal(x1);
    const double t = rng.Uniform();
    const std::vector<double> x = PsiT(x0, x1, t, cfg);
    const std::vector<double> u = ConditionalVectorField(x, x1, t, cfg);
    worst_field = std::max(worst_field, RelError(u, TargetVectorField(x0, x1, cfg)));

    worst_endpoint = std::max(worst_endpoint, MaxAbs(PsiT(x0, x1, 0.0, cfg), x0));
    std::vector<double> end(x1.size());
    for (std::size_t i = 0; i < end.size(); ++i) end[i] = x1[i] + cfg.sigma_min * x0[i];
    worst_endpoint = std::max(worst_endpoint, MaxAbs(PsiT(x0, x1, 1.0, cfg), end));
  }
  return {worst_field < 1e-9 && worst_endpoint < 1e-12,
          Format("field rel err %.2e (< 1e-9), endpoint err %.2e (< 1e-12)", worst_field,
                 worst_endpoint)};
}

// 2. Euler solver on the analytic conditional field.
Outcome EulerExactness(const Context&) {
  const FlowPathConfig flow;
  const SolverConfig solver;  // dt = 0.2
  Rng rng(102);
  double worst = 0.0;
  bool five_calls = true;
  std::vector<double> x0(256), x1(256);
  for (int trial = 0; trial < 20; ++trial) {
    rng.FillNormal(x0);
    rng.FillNormal(x1);
    const std::vector<double> target = TargetVectorField(x0, x1, flow);
    int calls = 0;
    const VectorFieldFn field = [&](std::span<const double>, double) {
      ++calls;
      return target;
    };
    const std::vector<double> out = EulerSolve(field, x0, solver);
    std::vector<double> expect(x1.size());
    for (std::size_t i = 0; i < x1.size(); ++i) expect[i] = x1[i] + flow.sigma_min * x0[i];
    worst = std::max(worst, MaxAbs(out, expect));
    five_calls = five_calls && calls == 5;
  }
  return {worst < 1e-10 && five_calls,
          Format("inf-norm err %.2e (< 1e-10), %s", worst,
                 five_calls ? "5 evaluations per solve" : "evaluation count is not 5")};
}

// 3. STFT round trip, compression and packing identities.
Outcome StftFidelity(const Context&) {
  const StftParams stft{510, 128};
  const CompressionParams cp;
  Rng rng(103);
  double worst_sisdr = 1e300, worst_compress = 0.0, worst_pack = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    AudioSignal s;
    s.samples.resize(16000);
    for (double& v : s.samples) v = 0.3 * rng.Normal();
    const ComplexSpectrogram spec = Stft(s, stft);
    const AudioSignal back = Istft(spec, s.size(), s.sample_rate);
    worst_sisdr = std::min(worst_sisdr, SiSdr(back, s));

    const ComplexSpectrogram round = Decompress(Compress(spec, cp), cp);
    const ComplexSpectrogram unpacked = UnpackFeatures(PackFeatures(spec), stft);
    for (std::size_t i = 0; i < spec.data.size(); ++i) {
      const double scale = std::max(1.0, std::abs(spec.data[i]));
      worst_compress = std::max(worst_compress, std::abs(round.data[i] - spec.data[i]) / scale);
      worst_pack = std::max(worst_pack, std::abs(unpacked.data[i] - spec.data[i]));
    }
  }
  return {worst_sisdr > 50.0 && worst_compress < 1e-9 && worst_pack < 1e-9,
          Format("min round-trip SI-SDR %.1f dB (> 50), compress err %.2e, pack err %.2e "
                 "(< 1e-9)",
                 worst_sisdr, worst_compress, worst_pack)};
}

// 4. Backward pass against central finite differences, every parameter segment.
double WorstSegmentError(bool null_condition, std::string& worst_name) {
  ModelConfig cfg;
  cfg.num_layers = 2;
  cfg.model_dim = 16;
  cfg.num_heads = 2;
  cfg.time_embed_dim = 16;
  cfg.feedforward_dim = 32;
  cfg.feature_channels = 8;
  cfg.null_condition_embedding = null_condition;

  Rng rng(104);
  VectorFieldModel model(cfg);
  for (double& p : model.parameters) p = 0.3 * rng.Normal();
  const int frames = 7;
  FeatureGrid x(cfg.feature_channels, frames);
  rng.FillNormal(x.values);
  ConditionInput cond = ConditionInput::Null(cfg.feature_channels, frames);
  if (!null_condition) {
    cond.is_null = false;
    rng.FillNormal(cond.features.values);
  }
  const double t = 0.37;
  std::vector<double> w(x.size());
  rng.FillNormal(w);
  const auto objective = [&] {
    const FeatureGrid out = Forward(model, x, cond, t);
    return std::inner_product(out.values.begin(), out.values.end(), w.begin(), 0.0);
  };

  ForwardTape tape;
  Forward(model, x, cond, t, &tape);
  const std::vector<double> analytic = Backward(model, tape, w);

  const double h = 1e-5;
  double worst = 0.0;
  for (const ParameterSegment& seg : model.layout().segments()) {
    double diff = 0.0, ref = 0.0, an = 0.0;
    for (std::size_t i = seg.offset; i < seg.offset + seg.size(); ++i) {
      const double saved = model.parameters[i];
      model.parameters[i] = saved + h;
      const double up = objective();
      model.parameters[i] = saved - h;
      const double down = objective();
      model.parameters[i] = saved;
      const double fd = (up - down) / (2 * h);
      diff += (fd - analytic[i]) * (fd - analytic[i]);
      ref += fd * fd;
      an += analytic[i] * analytic[i];
    }
    const double rel = std::sqrt(diff) / std::max({std::sqrt(ref), std::sqrt(an), 1e-10});
    if (rel > worst) {
      worst = rel;
      worst_name = seg.name;
    }
  }
  return worst;
}

Outcome GradientCheck(const Context&) {
  std::string name_a, name_b;
  const double a = WorstSegmentError(false, name_a);
  const double b = WorstSegmentError(true, name_b);
  return {a < 1e-4 && b < 1e-4,
          Format("worst segment rel err %.2e (%s), with null embedding %.2e (%s) (< 1e-4)", a,
                 name_a.c_str(), b, name_b.c_str())};
}

// 5. Span mask statistics and condition dropout rate.
Outcome MaskStatistics(const Context&) {
  Rng rng(105);
  double fraction = 0.0;
  int short_runs = 0;
  for (int i = 0; i < 10000; ++i) {
    const MaskSpec mask = SampleMask(1000, 0.7, 10, rng);
    fraction += mask.MaskedFraction();
    for (int run : MaskedRuns(mask.frame_flags)) short_runs += run < 10;
  }
  fraction /= 10000;

  const ConditionInput cond{FeatureGrid(4, 3), false};
  int dropped = 0;
  for (int i = 0; i < 10000; ++i) dropped += MaybeDropCondition(cond, 0.1, rng).is_null;
  const double rate = dropped / 10000.0;
  return {fraction >= 0.68 && fraction <= 0.72 && short_runs == 0 && rate >= 0.09 &&
              rate <= 0.11,
          Format("mean fraction %.4f in [0.68, 0.72], %d spans < 10, dropout rate %.4f in "
                 "[0.09, 0.11]",
                 fraction, short_runs, rate)};
}

// 6. Toy denoising from scratch on a synthetic corpus.
constexpr int kToyClips = 500;
constexpr int kToyHeldOut = 50;
constexpr int kToySteps = 1500;
constexpr int kLossWindows = 4;  // windows over the first 80% of steps

RunConfig ToyConfig() {
  RunConfig c = RunConfig::Defaults(TrainMode::kScratch);
  c.stft = {62, 16};
  c.model.num_layers = 4;
  c.model.model_dim = 128;
  c.model.num_heads = 4;
  c.model.time_embed_dim = 128;
  c.model.feedforward_dim = 512;
  c.train.task = TaskKind::kDenoise;
  c.train.peak_lr = 1e-3;
  c.train.final_lr = 0.0;
  c.train.warmup_steps = 200;
  c.train.total_steps = kToySteps;
  c.train.batch_seconds = 1.0;
  c.train.segment_seconds = 0.25;
  c.train.seed = 17;
  c.Finalize();
  return c;
}

Outcome ToyDenoising(const Context& ctx) {
  const fs::path dir = ctx.work / "toy";
  fs::remove_all(dir);
  const std::string manifest = SynthToyCorpus(TaskKind::kDenoise, kToyClips, 2026, dir.string());
  const std::vector<ManifestRecord> records = LoadManifest(manifest).records;
  const std::vector<ManifestRecord> train(records.begin(), records.end() - kToyHeldOut);
  const std::vector<ManifestRecord> held_out(records.end() - kToyHeldOut, records.end());
  const fs::path train_manifest = dir / "train.jsonl";
  WriteManifest(train_manifest.string(), train);

  const auto start = std::chrono::steady_clock::now();
  Trainer trainer(ToyConfig(), train_manifest.string());
  std::vector<double> losses;
  trainer.Run(0, [&](const TrainLogRecord& r) {
    losses.push_back(r.loss);
    if (r.step % 100 == 0) std::printf("  toy step %d loss %.4f\n", r.step, r.loss);
    std::fflush(stdout);
  });
  const double minutes =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count() / 60.0;

  const MetricsReport report =
      EvaluateRecords(held_out, trainer.config(), &trainer.state().model, 99);

  const int span = static_cast<int>(0.8 * losses.size()) / kLossWindows;
  std::vector<double> means;
  bool decreasing = span > 0;
  for (int w = 0; w < kLossWindows && span > 0; ++w) {
    const auto first = losses.begin() + w * span;
    means.push_back(std::accumulate(first, first + span, 0.0) / span);
    if (w > 0 && !(means[w] < means[w - 1])) decreasing = false;
  }
  std::ostringstream window_text;
  for (std::size_t i = 0; i < means.size(); ++i) window_text << (i ? " > " : "") << Format("%.4f", means[i]);

  const bool pass = report.mean_si_sdr_improvement > 3.0 && report.failure_rate < 0.2 &&
                    decreasing && minutes <= 30.0;
  return {pass, Format("SI-SDRi %.2f dB (> 3), FR %.1f%% (< 20%%), train %.1f min (<= 30), "
                       "window means %s",
                       report.mean_si_sdr_improvement, 100.0 * report.failure_rate, minutes,
                       window_text.str().c_str())};
}

// 7. Prompt prepend and trim plumbing.
Outcome TsePlumbing(const Context&) {
  const TsePromptSpec prompt;  // 3 s at 16 kHz
  const StftParams stft{510, 128};
  const CompressionParams cp;
  Rng rng(107);
  int length_errors = 0, framing_errors = 0;
  double worst_roundtrip = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    const auto n = static_cast<std::size_t>(rng.UniformInt(1600, 80000));
    const auto r = static_cast<std::size_t>(rng.UniformInt(8000, 80000));
    AudioSignal mix, ref;
    mix.samples.resize(n);
    ref.samples.resize(r);
    for (double& v : mix.samples) v = 0.1 * rng.Normal();
    for (double& v : ref.samples) v = 0.1 * rng.Normal();

    const AudioSignal joined = PrependPrompt(ref, mix, prompt);
    const ConditionInput cond =
        BuildCondition(TaskKind::kTargetSpeakerExtract, mix, &ref, stft, cp, prompt);
    const std::size_t total = prompt.Samples() + n;
    framing_errors += joined.size() != total;
    framing_errors += cond.features.frames != 1 + static_cast<int>(total / 128);
    framing_errors += cond.features.channels != 512;

    const AudioSignal full =
        SynthesizeFeatures(cond.features, stft, cp, total, mix.sample_rate);
    const AudioSignal out = TrimTseOutput(full, prompt, n);
    length_errors += out.size() != n;
    if (out.size() == n) worst_roundtrip = std::max(worst_roundtrip, MaxAbs(out.samples, mix.samples));
  }
  return {length_errors == 0 && framing_errors == 0 && worst_roundtrip < 1e-9,
          Format("%d length mismatches, %d framing mismatches over 100 durations, "
                 "round-trip err %.2e",
                 length_errors, framing_errors, worst_roundtrip)};
}

// 8. Metrics against brute force and scale invariance.
Outcome MetricsOracle(const Context&) {
  Rng rng(108);
  int mismatches = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    std::vector<double> v(static_cast<std::size_t>(rng.UniformInt(1, 200)));
    for (double& x : v) x = rng.Bernoulli(0.1) ? 1.0 : 1.0 + 4.0 * rng.Normal();
    int below = 0;
    for (double x : v) {
      if (x < 1.0) ++below;
    }
    mismatches += FailureRate(v) != static_cast<double>(below) / v.size();
  }

  double worst = 0.0;
  for (int trial = 0; trial < 200; ++trial) {
    AudioSignal ref, est, scaled;
    ref.samples.resize(4000);
    est.samples.resize(4000);
    for (std::size_t i = 0; i < ref.size(); ++i) {
      ref.samples[i] = rng.Normal();
      est.samples[i] = ref.samples[i] + rng.Uniform(0.01, 2.0) * rng.Normal();
    }
    const double k = std::pow(10.0, rng.Uniform(-3.0, 3.0)) * (rng.Bernoulli(0.5) ? 1 : -1);
    scaled = est;
    for (double& x : scaled.samples) x *= k;
    worst = std::max(worst, std::abs(SiSdr(scaled, ref) - SiSdr(est, ref)));
  }
  return {mismatches == 0 && worst < 1e-9,
          Format("%d failure-rate mismatches over 1000 lists, scale drift %.2e dB (< 1e-9)",
                 mismatches, worst)};
}

// 9. Seeded CLI runs and resumed training.
const char* kTinyConfig =
    "stft.window_size = 62\n"
    "stft.hop_size = 16\n"
    "model.num_layers = 1\n"
    "model.model_dim = 16\n"
    "model.num_heads = 2\n"
    "model.time_embed_dim = 16\n"
    "model.feedforward_dim = 32\n"
    "train.batch_seconds = 0.2\n"
    "train.segment_seconds = 0.05\n"
    "train.warmup_steps = 5\n";

int RunCli(const Context& ctx, const std::string& args, const fs::path& log) {
  const std::string cmd = "\"" + ctx.cli + "\" " + args + " > \"" + log.string() + "\" 2>&1";
  return std::system(cmd.c_str());
}

Outcome Reproducibility(const Context& ctx) {
  const fs::path dir = ctx.work / "repro";
  fs::remove_all(dir);
  fs::create_directories(dir);
  std::ofstream(dir / "tiny.cfg") << kTinyConfig;
  const std::string manifest = SynthToyCorpus(TaskKind::kDenoise, 8, 9, (dir / "data").string());

  std::string failure;
  for (const char* run : {"a", "b"}) {
    const std::string args = "--seed 7 --config \"" + (dir / "tiny.cfg").string() +
                             "\" pretrain --manifest \"" + manifest + "\" --steps 50 --out \"" +
                             (dir / run).string() + ".ck\" --log \"" + (dir / run).string() +
                             ".log\"";
    if (RunCli(ctx, args, dir / (std::string(run) + ".out")) != 0) failure = "CLI run failed";
  }
  const std::string log_a = ReadText(dir / "a.log"), log_b = ReadText(dir / "b.log");
  const long lines = std::count(log_a.begin(), log_a.end(), '\n');
  const bool logs_equal = failure.empty() && lines == 50 && log_a == log_b;
  const bool checkpoints_equal = ReadText(dir / "a.ck") == ReadText(dir / "b.ck");

  RunConfig cfg = RunConfig::Defaults(TrainMode::kPretrain);
  cfg.LoadFile((dir / "tiny.cfg").string());
  cfg.train.total_steps = 10;
  cfg.train.seed = 7;
  std::vector<std::string> straight, split;
  const auto record = [](std::vector<std::string>& out) {
    return [&out](const TrainLogRecord& r) { out.push_back(FormatLogRecord(r)); };
  };
  Trainer uninterrupted(cfg, manifest);
  uninterrupted.Run(10, record(straight));
  Trainer first(cfg, manifest);
  first.Run(5, record(split));
  const std::string ck = (dir / "half.ck").string();
  first.Save(ck);
  Trainer resumed(cfg, manifest, "", ck);
  resumed.Run(10, record(split));
  const bool resume_equal = straight == split &&
                            resumed.state().model.parameters ==
                                uninterrupted.state().model.parameters &&
                            resumed.state().adam.m == uninterrupted.state().adam.m &&
                            resumed.state().adam.v == uninterrupted.state().adam.v &&
                            resumed.state().rng == uninterrupted.state().rng;

  return {logs_equal && checkpoints_equal && resume_equal,
          Format("%s%s50-step CLI logs %s (%ld lines), checkpoints %s, resume at 5 of 10 %s",
                 failure.c_str(), failure.empty() ? "" : "; ",
                 logs_equal ? "identical" : "differ", lines,
                 checkpoints_equal ? "identical" : "differ",
                 resume_equal ? "bit-exact" : "diverges")};
}

struct Criterion {
  int id;
  const char* name;
  double budget_seconds;  // 0 = no separate runtime bound
  std::function<Outcome(const Context&)> run;
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"specflow acceptance criteria"};
  Context ctx;
  std::string work = "acceptance_tmp";
  std::vector<int> only;
  app.add_option("--work", work, "Scratch directory");
  app.add_option("--cli", ctx.cli, "Path to the specflow CLI binary")->required();
  app.add_option("--only", only, "Run only these criteria");
  CLI11_PARSE(app, argc, argv);
  ctx.work = fs::absolute(work);
  fs::create_directories(ctx.work);

  const std::vector<Criterion> criteria = {
      {1, "flow path identities", 5, FlowIdentities},
      {2, "Euler oracle exactness", 1, EulerExactness},
      {3, "STFT fidelity", 30, StftFidelity},
      {4, "gradient correctness", 300, GradientCheck},
      {5, "masking statistics", 60, MaskStatistics},
      {6, "toy end-to-end denoising", 0, ToyDenoising},
      {7, "TSE plumbing", 10, TsePlumbing},
      {8, "metrics oracle equivalence", 5, MetricsOracle},
      {9, "reproducibility", 0, Reproducibility},
  };

  int failures = 0;
  for (const Criterion& c : criteria) {
    if (!only.empty() && std::find(only.begin(), only.end(), c.id) == only.end()) continue;
    const auto start = std::chrono::steady_clock::now();
    Outcome outcome;
    try {
      outcome = c.run(ctx);
    } catch (const std::exception& e) {
      outcome = {false, std::string("exception: ") + e.what()};
    }
    const double seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (c.budget_seconds > 0 && seconds >= c.budget_seconds) {
      outcome.pass = false;
      outcome.detail += Format("; over the %.0f s budget", c.budget_seconds);
    }
    std::printf("%s criterion %d (%s): %s [%.2f s]\n", outcome.pass ? "PASS" : "FAIL", c.id,
                c.name, outcome.detail.c_str(), seconds);
    std::fflush(stdout);
    failures += !outcome.pass;
  }
  return failures == 0 ? 0 : 1;
}

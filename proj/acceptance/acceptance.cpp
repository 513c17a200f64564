// Acceptance run: one PASS/FAIL line per criterion, exit status 1 when any
// criterion fails. Tolerances and budgets are pinned below.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "oracles.hpp"
#include "osmsl/cli.hpp"
#include "osmsl/error.hpp"
#include "osmsl/synth.hpp"
#include "osmsl/trainer.hpp"
#include "temp_dir.hpp"
#include "tiny.hpp"

using namespace osmsl;

namespace {

constexpr double kRoundTripBudget = 10.0;   // s
constexpr double kCrfBudget = 30.0;         // s
constexpr double kCrfTolerance = 1e-6;
constexpr double kGradBudget = 120.0;       // s
constexpr double kGradTolerance = 1e-3;
constexpr double kEndToEndBudget = 600.0;   // s
constexpr double kMicroFloor = 0.90;
constexpr double kSegFloor = 0.95;
constexpr double kNonInferiority = 0.02;

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

struct Outcome {
  bool pass = false;
  std::string detail;
};

int failures = 0;

void report(int id, const std::string& name, const std::function<Outcome()>& check) {
  const auto t0 = Clock::now();
  Outcome o;
  try {
    o = check();
  } catch (const std::exception& e) {
    o = {false, std::string("exception: ") + e.what()};
  }
  const double dt = seconds_since(t0);
  if (!o.pass) ++failures;
  std::printf("[%s] %d %s: %s (%.2f s)\n", o.pass ? "PASS" : "FAIL", id, name.c_str(), o.detail.c_str(), dt);
  std::fflush(stdout);
}

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

// ---------------------------------------------------------------- 1

Outcome round_trip() {
  const auto t0 = Clock::now();
  long checked = 0, failed = 0;
  const auto ss = LabelScheme::segmentation();
  const auto ssc = LabelScheme::classification({"A", "B", "C"});
  auto check_one = [&](const std::vector<SceneAnnotation>& p, int n, const LabelScheme& s) {
    ++checked;
    try {
      if (decode(encode(p, n, s), s) != p) ++failed;
    } catch (const Error&) {
      ++failed;
    }
  };
  for (int n = 1; n <= 8; ++n) {
    for (const auto& p : oracle::all_partitions(n, 0)) check_one(p, n, ss);
    for (const auto& p : oracle::all_partitions(n, 3)) check_one(p, n, ssc);
  }
  const long exhaustive = checked;
  std::mt19937_64 rng(2024);
  std::uniform_int_distribution<int> len(1, 200);
  std::uniform_real_distribution<double> density(0.02, 0.9);
  for (int i = 0; i < 10000; ++i) {
    const int n = len(rng);
    const bool cls = i % 2 == 1;
    check_one(oracle::random_partition(n, cls ? 3 : 0, rng, density(rng)), n, cls ? ssc : ss);
  }
  const double dt = seconds_since(t0);
  return {failed == 0 && dt < kRoundTripBudget,
          fmt("%ld exhaustive + %ld random partitions, %ld failures, %.2f s (budget %.0f s)", exhaustive,
              checked - exhaustive, failed, dt, kRoundTripBudget)};
}

// ---------------------------------------------------------------- 2

Outcome crf_oracle() {
  const auto t0 = Clock::now();
  std::mt19937_64 rng(77);
  std::normal_distribution<double> g(0.0, 1.5);
  const LabelScheme schemes[2] = {LabelScheme::segmentation(), LabelScheme::classification({"A", "B"})};
  double worst_z = 0.0, worst_v = 0.0;
  int path_mismatch = 0;
  for (int i = 0; i < 200; ++i) {
    const auto& scheme = schemes[i % 2];
    const int n = 1 + (i / 2) % 6;
    CrfParams crf = CrfParams::zeros(scheme);
    const int T = scheme.num_tags();
    for (Eigen::Index k = 0; k < crf.transitions.size(); ++k) crf.transitions.data()[k] = g(rng);
    for (int t = 0; t < T; ++t) {
      crf.start(t) = g(rng);
      crf.end(t) = g(rng);
    }
    Eigen::MatrixXd e(n, T);
    for (Eigen::Index k = 0; k < e.size(); ++k) e.data()[k] = g(rng);
    const auto brute = oracle::enumerate(e, crf);
    const auto best = viterbi(e, crf);
    worst_z = std::max(worst_z, std::abs(log_partition(e, crf) - brute.log_z));
    worst_v = std::max(worst_v, std::abs(best.score - brute.best));
    if (best.tags != brute.argmax) ++path_mismatch;
  }
  const double dt = seconds_since(t0);
  return {worst_z <= kCrfTolerance && worst_v <= kCrfTolerance && path_mismatch == 0 && dt < kCrfBudget,
          fmt("200 instances (5 and 10 tags, n<=6): max |dlogZ| %.2e, max |dviterbi| %.2e, %d path mismatches "
              "(tol %.0e, budget %.0f s)",
              worst_z, worst_v, path_mismatch, kCrfTolerance, kCrfBudget)};
}

// ---------------------------------------------------------------- 3

Outcome gradients() {
  const auto t0 = Clock::now();
  double worst = 0.0;
  std::string worst_name;
  std::mt19937_64 rng(5);
  for (int i = 0; i < 20; ++i) {
    SynthConfig sc;
    sc.seed = 1000 + i;
    sc.n_videos = 2;
    sc.min_shots = 2;
    sc.max_shots = 5;
    sc.max_scene_len = 3;
    sc.num_categories = 2;
    sc.d_vis = 3 + i % 4;
    sc.d_aud = 2 + i % 3;
    auto corpus = generate_corpus(sc);
    ModelConfig mc = tiny_model_config(corpus.videos);
    mc.diffcorr.k = 1 + i % 2;
    TrainConfig tc;
    tc.seed = i;
    auto model = init_model(mc, tc, corpus.scheme);
    randomize_params(*model, rng, 0.4);
    auto batch = batch_of(corpus.videos);
    const auto r = gradient_check(*model, batch, i % 2 == 0 ? Mode::Train : Mode::Eval);
    if (r.max_rel_error >= worst) {
      worst = r.max_rel_error;
      worst_name = r.worst_param;
    }
  }
  const double dt = seconds_since(t0);
  return {worst <= kGradTolerance && dt < kGradBudget,
          fmt("20 tiny instances, max per-tensor relative error %.2e at %s (tol %.0e, budget %.0f s)", worst,
              worst_name.c_str(), kGradTolerance, kGradBudget)};
}

// ---------------------------------------------------------------- 4

VideoSequence random_video(int n, int d_vis, int d_aud, std::mt19937_64& rng, double scale) {
  std::normal_distribution<double> g(0.0, scale);
  VideoSequence v;
  v.video_id = "random";
  for (int j = 0; j < n; ++j) {
    ShotRecord s{v.video_id, j, 1.0 * j, j + 1.0, std::vector<double>(d_vis), std::vector<double>(d_aud)};
    for (auto& x : s.vis) x = g(rng);
    for (auto& x : s.aud) x = g(rng);
    v.shots.push_back(std::move(s));
  }
  return v;
}

// Raw per-shot tags of the multitask head: N at a predicted boundary, I->I
// elsewhere, labelled with the shot's own argmax class. Needs repair.
std::vector<LinkTag> multitask_raw_tags(const MultiTaskModel::Outputs& o) {
  std::vector<LinkTag> tags;
  for (Eigen::Index j = 0; j < o.class_logits.rows(); ++j) {
    Eigen::Index c = 0;
    o.class_logits.row(j).maxCoeff(&c);
    tags.push_back({o.boundary_prob(j) >= 0.5 ? LinkKind::N : LinkKind::ItoI, static_cast<int>(c)});
  }
  return tags;
}

Outcome grammar_safety() {
  SynthConfig sc;
  sc.n_videos = 1;
  sc.min_shots = sc.max_shots = 4;
  sc.num_categories = 4;
  sc.d_vis = 4;
  sc.d_aud = 3;
  const auto corpus = generate_corpus(sc);
  const ModelConfig mc = tiny_model_config(corpus.videos);
  std::mt19937_64 rng(4242);
  std::uniform_int_distribution<int> len(1, 60);
  std::uniform_real_distribution<double> feature_scale(0.1, 10.0);
  std::uniform_real_distribution<double> param_scale(0.1, 3.0);
  long os_errors = 0, mt_errors = 0, mt_raw_illegal = 0;
  const int kModels = 10000, kMultitask = 2000;
  for (int i = 0; i < kModels + kMultitask; ++i) {
    TrainConfig tc;
    tc.seed = static_cast<std::uint64_t>(i);
    tc.head = i < kModels ? HeadKind::OsMsl : HeadKind::MultiTask;
    auto model = init_model(mc, tc, corpus.scheme);
    randomize_params(*model, rng, param_scale(rng));
    const auto video = random_video(len(rng), 4, 3, rng, feature_scale(rng));
    const int n = video.num_shots();
    if (tc.head == HeadKind::OsMsl) {
      try {
        validate_partition(model->predict(video), n);
      } catch (const Error&) {
        ++os_errors;
      }
      continue;
    }
    const auto& mt = dynamic_cast<const MultiTaskModel&>(*model);
    const auto raw = multitask_raw_tags(mt.outputs(video));
    try {
      decode(raw, corpus.scheme);
    } catch (const GrammarError&) {
      ++mt_raw_illegal;
    }
    try {
      validate_partition(decode(repair(raw, corpus.scheme), corpus.scheme), n);
      validate_partition(model->predict(video), n);
    } catch (const Error&) {
      ++mt_errors;
    }
  }
  return {os_errors == 0 && mt_errors == 0,
          fmt("%d random OS-MSL models: %ld decode errors; %d multitask models: %ld raw sequences ungrammatical, "
              "%ld errors after repair",
              kModels, os_errors, kMultitask, mt_raw_illegal, mt_errors)};
}

// ---------------------------------------------------------------- 5

Outcome metrics_oracle() {
  std::mt19937_64 rng(555);
  std::uniform_int_distribution<int> len(1, 60), cats(1, 5);
  std::uniform_real_distribution<double> density(0.05, 0.8);
  long mismatches = 0;
  for (int i = 0; i < 1000; ++i) {
    const int n = len(rng), C = cats(rng);
    const auto pred = oracle::random_partition(n, C, rng, density(rng));
    const auto gt = oracle::random_partition(n, C, rng, density(rng));
    const auto want = oracle::match_counts(pred, gt);
    const auto seg = eval_seg(pred, gt);
    const auto cls = eval_seg_cls(pred, gt, C);
    if (seg.tp != want.tp_seg || seg.fp != static_cast<long>(pred.size()) - want.tp_seg ||
        seg.fn != static_cast<long>(gt.size()) - want.tp_seg || cls.micro.tp != want.tp_seg_cls) {
      ++mismatches;
    }
    for (const auto& [c, prf] : cls.per_category) {
      if (prf.tp != oracle::match_count_category(pred, gt, c)) ++mismatches;
    }
  }
  // gt = {A:[0,1], B:[2,3]}, pred = {A:[0,1], A:[2,3]}
  const std::vector<SceneAnnotation> gt{{0, 1, 0}, {2, 3, 1}}, pred{{0, 1, 0}, {2, 3, 0}};
  const auto h = eval_seg_cls(pred, gt, 2);
  const bool hand = h.micro.tp == 1 && h.micro.precision == 0.5 && h.micro.recall == 0.5 &&
                    h.per_category.at(0).precision == 0.5 && h.per_category.at(0).recall == 1.0 &&
                    h.per_category.at(1).precision == 0.0 && h.per_category.at(1).recall == 0.0 &&
                    h.macro.precision == 0.25 && h.macro.recall == 0.5;
  return {mismatches == 0 && hand,
          fmt("1000 random pairs: %ld count mismatches; hand case micro P=%.4g R=%.4g, macro P=%.4g R=%.4g (%s)",
              mismatches, h.micro.precision, h.micro.recall, h.macro.precision, h.macro.recall,
              hand ? "exact" : "WRONG")};
}

// ---------------------------------------------------------------- 6 and 7

struct HeadResult {
  std::string name;
  EvalReport test;
  EvalReport val;
  CurveLog curve;
  double seconds = 0.0;
};

EvalReport evaluate(const SceneModel& model, const std::vector<VideoSequence>& videos, const LabelScheme& scheme) {
  const auto predicted = predict(model, videos);
  Evaluator ev(scheme);
  for (std::size_t i = 0; i < videos.size(); ++i) ev.add(*predicted[i].scenes, *videos[i].scenes);
  return ev.report();
}

struct Experiment {
  SynthConfig synth;
  Corpus corpus;
  CorpusSplit parts;
};

const Experiment& experiment() {
  static const Experiment e = [] {
    Experiment x;
    x.corpus = generate_corpus(x.synth);
    x.parts = split(x.corpus.videos, {40.0 / 60, 10.0 / 60, 10.0 / 60}, x.synth.seed);
    return x;
  }();
  return e;
}

ModelConfig acceptance_model(int k) {
  ModelConfig mc = with_corpus_dims(ModelConfig{}, experiment().parts.train);
  mc.diffcorr.k = k;
  return mc;
}

HeadResult run_head(HeadKind head, int k) {
  const auto& x = experiment();
  const auto t0 = Clock::now();
  TrainConfig tc;
  tc.head = head;
  tc.epochs = 30;
  auto model = init_model(acceptance_model(k), tc, x.corpus.scheme);
  HeadResult r;
  r.name = head_name(head);
  r.curve = train(*model, x.parts.train, tc);
  r.test = evaluate(*model, x.parts.test, x.corpus.scheme);
  r.val = evaluate(*model, x.parts.val, x.corpus.scheme);
  r.seconds = seconds_since(t0);
  return r;
}

std::vector<HeadResult>& results() {
  static std::vector<HeadResult> r;
  return r;
}

Outcome end_to_end() {
  const auto& x = experiment();
  const auto t0 = Clock::now();
  results().push_back(run_head(HeadKind::OsMsl, 1));
  const double dt = seconds_since(t0);
  const auto& r = results().back();
  const bool pass = r.test.seg_cls_micro.f1 >= kMicroFloor && r.test.seg.f1 >= kSegFloor && dt <= kEndToEndBudget;
  return {pass, fmt("synth seed %llu, %zu/%zu/%zu videos, 30 epochs, k=1: test micro F1 %.4f (>= %.2f), seg F1 "
                    "%.4f (>= %.2f); val micro %.4f seg %.4f; %.1f s (budget %.0f s)",
                    static_cast<unsigned long long>(x.synth.seed), x.parts.train.size(), x.parts.val.size(),
                    x.parts.test.size(), r.test.seg_cls_micro.f1, kMicroFloor, r.test.seg.f1, kSegFloor,
                    r.val.seg_cls_micro.f1, r.val.seg.f1, dt, kEndToEndBudget)};
}

void print_table() {
  std::printf("    %-10s %8s %8s %8s %8s %8s %8s\n", "head", "seg F1", "micro P", "micro R", "micro F1", "macro F1",
              "train s");
  for (const auto& r : results()) {
    std::printf("    %-10s %8.4f %8.4f %8.4f %8.4f %8.4f %8.1f\n", r.name.c_str(), r.test.seg.f1,
                r.test.seg_cls_micro.precision, r.test.seg_cls_micro.recall, r.test.seg_cls_micro.f1,
                r.test.seg_cls_macro.f1, r.seconds);
  }
}

Outcome comparison() {
  if (results().empty()) results().push_back(run_head(HeadKind::OsMsl, 1));
  results().push_back(run_head(HeadKind::MultiTask, 1));
  results().push_back(run_head(HeadKind::TwoStage, 1));
  const auto& os = results()[0];
  const auto& mt = results()[1];
  const auto& ts = results()[2];
  print_table();

  bool curves_ok = true;
  std::string series;
  for (const char* task : {"segmentation", "classification"}) {
    const auto s = mt.curve.series(task);
    curves_ok = curves_ok && !s.empty() && s.front().normalized_loss == 1.0;
    series += fmt("%s %zu pts %.3f->%.3f; ", task, s.size(), s.empty() ? 0.0 : s.front().normalized_loss,
                  s.empty() ? 0.0 : s.back().normalized_loss);
  }
  const auto os_series = os.curve.series("osmsl");
  curves_ok = curves_ok && !os_series.empty() && os_series.front().normalized_loss == 1.0 &&
              mt.curve.tasks().size() == 2;
  series += fmt("osmsl %zu pts %.3f->%.3f", os_series.size(), os_series.front().normalized_loss,
                os_series.back().normalized_loss);

  const double a = os.test.seg_cls_micro.f1;
  const bool pass = a >= mt.test.seg_cls_micro.f1 - kNonInferiority &&
                    a >= ts.test.seg_cls_micro.f1 - kNonInferiority && curves_ok;
  return {pass, fmt("micro F1 osmsl %.4f vs multitask %.4f, twostage %.4f (margin %.2f); curves: %s", a,
                    mt.test.seg_cls_micro.f1, ts.test.seg_cls_micro.f1, kNonInferiority, series.c_str())};
}

// ---------------------------------------------------------------- 8

int cli(std::vector<std::string> args) {
  args.insert(args.begin(), "osmsl");
  std::ostringstream out, err;
  const int code = osmsl::cli::run(args, out, err);
  if (code != 0) throw Error("cli failed: " + err.str());
  return code;
}

Outcome determinism() {
  TempDir dir;
  std::string artifacts[2][3];
  for (int run = 0; run < 2; ++run) {
    const auto root = dir / ("run" + std::to_string(run));
    const auto data = (root / "data").string();
    cli({"-q", "synth", "--out", data, "--seed", "7", "--split", "0.6666666666666666,0.16666666666666666,"
                                                            "0.16666666666666669"});
    cli({"-q", "train", "--features", data + "/train/features.jsonl", "--scenes", data + "/train/scenes.json",
         "--out", (root / "model").string(), "--seed", "0", "--epochs", "30", "--k", "1"});
    cli({"-q", "predict", "--checkpoint", (root / "model" / "checkpoint.osmsl").string(), "--features",
         data + "/test/features.jsonl", "--out", (root / "predictions.json").string(), "--threads", "1"});
    cli({"-q", "eval", "--pred", (root / "predictions.json").string(), "--gt", data + "/test/scenes.json", "--out",
         (root / "report.json").string()});
    artifacts[run][0] = read_text_file(root / "model" / "checkpoint.osmsl");
    artifacts[run][1] = read_text_file(root / "predictions.json");
    artifacts[run][2] = read_text_file(root / "report.json");
  }
  const char* names[3] = {"checkpoint", "predictions", "report"};
  std::string detail;
  bool pass = true;
  for (int i = 0; i < 3; ++i) {
    const bool same = artifacts[0][i] == artifacts[1][i] && !artifacts[0][i].empty();
    pass = pass && same;
    detail += fmt("%s %zu bytes %s; ", names[i], artifacts[0][i].size(), same ? "identical" : "DIFFER");
  }
  detail += "two full synth/train/predict/eval runs, single thread";
  return {pass, detail};
}

}  // namespace

int main() {
  std::printf("OS-MSL acceptance\n");
  report(1, "encode/decode round trip", round_trip);
  report(2, "CRF oracle equivalence", crf_oracle);
  report(3, "gradient correctness", gradients);
  report(4, "grammar safety", grammar_safety);
  report(5, "metrics oracle", metrics_oracle);
  report(6, "end-to-end synthetic training", end_to_end);
  report(7, "framework comparison", comparison);
  report(8, "determinism", determinism);

  // Informational: the library default window k=2 on the same split.
  const auto info = run_head(HeadKind::OsMsl, 2);
  std::printf("[INFO] osmsl with k=2: test seg F1 %.4f, micro F1 %.4f (%.1f s)\n", info.test.seg.f1,
              info.test.seg_cls_micro.f1, info.seconds);

  std::printf("%d of 8 criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}

#include <doctest.h>

#include <random>

#include "osmsl/baselines.hpp"
#include "osmsl/error.hpp"
#include "tiny.hpp"

using namespace osmsl;

TEST_CASE("multitask decode") {
  Eigen::MatrixXd logits = Eigen::MatrixXd::Zero(4, 2);
  logits.col(1).setConstant(1.0);
  auto one = multitask_decode(Eigen::VectorXd::Constant(4, 0.1), logits);
  REQUIRE(one.size() == 1);
  CHECK(one[0] == SceneAnnotation{0, 3, 1});

  auto singles = multitask_decode(Eigen::VectorXd::Constant(4, 1.0), logits);
  CHECK(singles.size() == 4);
  for (int j = 0; j < 4; ++j) CHECK(singles[j].length() == 1);

  Eigen::MatrixXd votes(3, 2);
  votes << 2, 0, 3, 1, 0, 5;
  auto voted = multitask_decode(Eigen::VectorXd::Zero(3), votes);
  REQUIRE(voted.size() == 1);
  CHECK(*voted[0].category == 0);

  Eigen::VectorXd nan = Eigen::VectorXd::Constant(3, std::nan(""));
  CHECK_NOTHROW(validate_partition(multitask_decode(nan, votes), 3));
  CHECK_THROWS_AS(multitask_decode(Eigen::VectorXd::Zero(2), votes), ValidationError);
}

TEST_CASE("multitask decode fuzz") {
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::normal_distribution<double> g(0.0, 1.0);
  for (int trial = 0; trial < 1000; ++trial) {
    const int n = 1 + trial % 25;
    Eigen::VectorXd p(n);
    Eigen::MatrixXd l(n, 3);
    for (int j = 0; j < n; ++j) p(j) = u(rng);
    for (Eigen::Index i = 0; i < l.size(); ++i) l.data()[i] = g(rng);
    REQUIRE_NOTHROW(validate_partition(multitask_decode(p, l), n));
  }
}

TEST_CASE("multitask loss") {
  auto corpus = tiny_corpus(2);
  auto mc = tiny_model_config(corpus.videos);
  Rng rng(1);
  MultiTaskModel model(mc, corpus.scheme, rng);
  auto b = batch_of(corpus.videos);
  auto out = model.loss("multitask", b, Mode::Eval, nullptr);
  REQUIRE(out.tasks.size() == 2);
  CHECK(out.tasks[0].first == "segmentation");
  CHECK(out.tasks[1].first == "classification");
  CHECK(out.total->scalar() == doctest::Approx(out.tasks[0].second + out.tasks[1].second));

  MultiTaskModel seg_only(mc, corpus.scheme, rng, 1.0, 0.0);
  auto s = seg_only.loss("multitask", b, Mode::Eval, nullptr);
  CHECK(s.total->scalar() == doctest::Approx(s.tasks[0].second));

  CHECK_THROWS_AS(MultiTaskModel(mc, LabelScheme::segmentation(), rng), ValidationError);
}

TEST_CASE("multitask perfect logits give zero loss") {
  auto corpus = tiny_corpus(1);
  // saturated logits fed to the head's loss terms and decoder
  const auto& video = corpus.videos[0];
  const int n = video.num_shots();
  Eigen::MatrixXd boundary(n, 1), cls = Eigen::MatrixXd::Constant(n, 2, -1e4);
  std::vector<double> is_end(n, 0.0);
  std::vector<int> labels(n);
  for (const auto& s : *video.scenes) {
    is_end[s.end_shot] = 1.0;
    for (int j = s.start_shot; j <= s.end_shot; ++j) labels[j] = *s.category;
  }
  for (int j = 0; j < n; ++j) {
    boundary(j, 0) = is_end[j] > 0 ? 1e4 : -1e4;
    cls(j, labels[j]) = 1e4;
  }
  const double seg = ad::bce_with_logits(ad::constant(boundary), is_end)->scalar();
  const double c = ad::softmax_cross_entropy(ad::constant(cls), labels)->scalar();
  CHECK(seg + c == doctest::Approx(0.0));
  CHECK(multitask_decode((1.0 / (1.0 + (-boundary.array()).exp())).matrix().col(0), cls) == *video.scenes);
}

TEST_CASE("multitask curves have two normalized series") {
  auto corpus = tiny_corpus(4);
  auto mc = tiny_model_config(corpus.videos);
  TrainConfig tc;
  tc.head = HeadKind::MultiTask;
  tc.epochs = 50;
  tc.batch_size = 2;
  tc.lr = 3e-3;
  auto model = init_model(mc, tc, corpus.scheme);
  auto curve = train(*model, corpus.videos, tc);
  auto tasks = curve.tasks();
  REQUIRE(tasks.size() == 2);
  for (const auto& t : tasks) {
    auto s = curve.series(t);
    REQUIRE(s.size() == 100);
    CHECK(s.front().normalized_loss == 1.0);
    CHECK(s.back().normalized_loss < 1.0);
  }
}

TEST_CASE("two-stage") {
  auto corpus = tiny_corpus(4);
  auto mc = tiny_model_config(corpus.videos);
  Rng rng(5);
  TwoStageModel model(mc, corpus.scheme, rng, 16);
  CHECK(model.phases() == std::vector<std::string>{"stage1", "stage2"});
  CHECK(model.optimizes("stage2", "twostage.stage2.w1"));
  CHECK_FALSE(model.optimizes("stage2", "twostage.stage1.emission.w"));
  CHECK_FALSE(model.optimizes("stage1", "twostage.stage2.w1"));
  CHECK(model.stage1().scheme() == LabelScheme::segmentation());

  // one label per segment: merging two scenes of different labels loses one
  const auto& video = corpus.videos[0];
  std::vector<SceneAnnotation> merged{{0, video.num_shots() - 1, std::nullopt}};
  auto labeled = model.classify(video, merged);
  REQUIRE(labeled.size() == 1);
  CHECK(labeled[0].category.has_value());

  for (const auto& v : corpus.videos) CHECK_NOTHROW(validate_partition(model.predict(v), v.num_shots()));
}

TEST_CASE("two-stage with gold segments tracks segmentation quality") {
  // Noiseless, separable data: stage 2 alone should label gold segments
  // correctly after a short fit.
  SynthConfig c;
  c.n_videos = 8;
  c.min_shots = 6;
  c.max_shots = 10;
  c.max_scene_len = 4;
  c.num_categories = 2;
  c.d_vis = 4;
  c.d_aud = 3;
  c.center_scale = 1.0;
  c.sigma_scene = 0.0;
  c.sigma_shot = 0.0;
  auto corpus = generate_corpus(c);
  auto mc = tiny_model_config(corpus.videos);
  TrainConfig tc;
  tc.head = HeadKind::TwoStage;
  tc.epochs = 40;
  tc.lr = 1e-2;
  tc.stage2_hidden = 16;
  auto model = init_model(mc, tc, corpus.scheme);
  train(*model, corpus.videos, tc);
  auto& two = dynamic_cast<TwoStageModel&>(*model);
  Evaluator gold_seg(corpus.scheme);
  for (const auto& v : corpus.videos) {
    auto segments = *v.scenes;
    for (auto& s : segments) s.category.reset();
    gold_seg.add(two.classify(v, segments), *v.scenes);
  }
  auto r = gold_seg.report();
  CHECK(r.seg.f1 == 1.0);
  CHECK(r.seg_cls_micro.f1 >= r.seg.f1 - 0.05);
}

TEST_CASE("random-weight baselines emit valid partitions") {
  auto corpus = tiny_corpus(6, 9, 1, 20);
  auto mc = tiny_model_config(corpus.videos);
  std::mt19937_64 rng(6);
  for (auto head : {HeadKind::MultiTask, HeadKind::TwoStage}) {
    for (int trial = 0; trial < 20; ++trial) {
      TrainConfig tc;
      tc.head = head;
      tc.seed = trial;
      auto model = init_model(mc, tc, corpus.scheme);
      randomize_params(*model, rng, 2.0);
      for (const auto& v : corpus.videos) {
        auto scenes = model->predict(v);
        REQUIRE_NOTHROW(validate_partition(scenes, v.num_shots()));
        for (const auto& s : scenes) CHECK(s.category.has_value());
      }
    }
  }
}

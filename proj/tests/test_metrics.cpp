#include <doctest.h>

#include <json.hpp>
#include <random>

#include "oracles.hpp"
#include "osmsl/error.hpp"
#include "osmsl/metrics.hpp"

using namespace osmsl;

namespace {

using Scenes = std::vector<SceneAnnotation>;

Scenes from_ends(const std::vector<int>& ends) {
  Scenes s;
  int start = 0;
  for (int e : ends) {
    s.push_back({start, e, std::nullopt});
    start = e + 1;
  }
  return s;
}

}  // namespace

TEST_CASE("seg points") {
  CHECK(seg_points({{0, 2, {}}, {3, 4, {}}}) == std::vector<int>{2, 4});
  CHECK(seg_points({{0, 6, {}}}) == std::vector<int>{6});
  CHECK_THROWS_AS(seg_points({{0, 2, {}}, {4, 4, {}}}), ValidationError);
}

TEST_CASE("seg matching") {
  auto gt = from_ends({1, 3, 6});
  auto perfect = eval_seg(gt, gt);
  CHECK(perfect.precision == 1.0);
  CHECK(perfect.recall == 1.0);
  CHECK(perfect.f1 == 1.0);

  auto one = eval_seg(from_ends({6}), gt);
  CHECK(one.tp == 1);
  CHECK(one.precision == 1.0);
  CHECK(one.recall == doctest::Approx(1.0 / 3));

  auto r = eval_seg(from_ends({2, 4, 6}), from_ends({3, 4, 6}));
  CHECK(r.tp == 2);
  CHECK(r.precision == doctest::Approx(2.0 / 3));
  CHECK(r.recall == doctest::Approx(2.0 / 3));
  CHECK(r.f1 == doctest::Approx(2.0 / 3));

  CHECK_THROWS_AS(eval_seg(from_ends({3}), from_ends({4})), ValidationError);
}

TEST_CASE("seg and cls matching") {
  Scenes gt{{0, 1, 0}, {2, 3, 1}};
  auto same = eval_seg_cls(gt, gt, 2);
  CHECK(same.micro.f1 == 1.0);
  CHECK(same.macro.f1 == 1.0);

  Scenes wrong{{0, 1, 1}, {2, 3, 0}};
  auto w = eval_seg_cls(wrong, gt, 2);
  CHECK(w.micro.tp == 0);
  CHECK(w.micro.precision == 0.0);
  CHECK(w.micro.recall == 0.0);

  Scenes pred{{0, 1, 0}, {2, 3, 0}};
  auto h = eval_seg_cls(pred, gt, 2);
  CHECK(h.micro.tp == 1);
  CHECK(h.micro.precision == 0.5);
  CHECK(h.micro.recall == 0.5);
  CHECK(h.per_category.at(0).precision == 0.5);
  CHECK(h.per_category.at(0).recall == 1.0);
  CHECK(h.per_category.at(1).precision == 0.0);
  CHECK(h.per_category.at(1).recall == 0.0);
  CHECK(h.macro.precision == 0.25);
  CHECK(h.macro.recall == 0.5);
  // macro F1 averages the per-category F1 values
  CHECK(h.macro.f1 == doctest::Approx((2.0 * 0.5 / 1.5 + 0.0) / 2));

  // pinned macro categories change the divisor
  auto pinned = eval_seg_cls(pred, gt, 3, std::vector<int>{0, 1, 2});
  CHECK(pinned.macro.precision == doctest::Approx(0.5 / 3));
}

TEST_CASE("evaluator pools counts") {
  auto scheme = LabelScheme::classification({"A", "B"});
  Evaluator ev(scheme);
  ev.add({{0, 1, 0}, {2, 3, 0}}, {{0, 1, 0}, {2, 3, 1}});
  ev.add({{0, 4, 1}}, {{0, 4, 1}});
  auto r = ev.report();
  CHECK(r.seg.tp == 3);
  CHECK(r.seg_cls_micro.tp == 2);
  CHECK(r.seg_cls_micro.precision == doctest::Approx(2.0 / 3));
  long sum = 0;
  for (const auto& [name, prf] : r.per_category) sum += prf.tp;
  CHECK(sum == r.seg_cls_micro.tp);
  CHECK(r.per_category.at("B").recall == 0.5);

  auto j = nlohmann::json::parse(report_to_json(r));
  CHECK(j["seg"]["f1"].get<double>() == 1.0);
  CHECK(report_table(r).find("seg&cls micro") != std::string::npos);
}

TEST_CASE("random pairs against the double loop") {
  std::mt19937_64 rng(12);
  for (int trial = 0; trial < 500; ++trial) {
    const int n = 1 + trial % 40;
    const int C = 1 + trial % 4;
    auto pred = oracle::random_partition(n, C, rng, 0.4);
    auto gt = oracle::random_partition(n, C, rng, 0.3);
    auto counts = oracle::match_counts(pred, gt);
    auto seg = eval_seg(pred, gt);
    REQUIRE(seg.tp == counts.tp_seg);
    CHECK(seg.tp == eval_seg(gt, pred).tp);
    auto cls = eval_seg_cls(pred, gt, C);
    REQUIRE(cls.micro.tp == counts.tp_seg_cls);
    CHECK(cls.micro.tp <= seg.tp);
    for (const auto& [c, prf] : cls.per_category) CHECK(prf.tp == oracle::match_count_category(pred, gt, c));
  }
}

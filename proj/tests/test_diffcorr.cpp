#include <doctest.h>

#include <cmath>
#include <random>

#include "fd.hpp"
#include "osmsl/diffcorr.hpp"

using namespace osmsl;

namespace {

Eigen::MatrixXd random_matrix(int r, int c, Rng& rng, double scale = 1.0) {
  std::normal_distribution<double> n(0.0, scale);
  Eigen::MatrixXd m(r, c);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = n(rng);
  return m;
}

// Fills every parameter, biases included, with random values so no ReLU sits
// exactly on its kink.
void randomize(ParamStore& store, Rng& rng, double scale = 0.5) {
  for (auto& e : store.entries()) e.var->value = random_matrix(e.var->rows(), e.var->cols(), rng, scale);
}

struct Fixture {
  ParamStore store;
  Rng rng{17};
  DiffCorrNet net;
  Fixture(int d_in, DiffCorrConfig config = {}) : net(store, "dc", d_in, config, rng) {}
};

}  // namespace

TEST_CASE("windows") {
  auto w = window(0, 10, 2);
  CHECK(w.former == std::vector<int>{0, 0});
  CHECK(w.latter == std::vector<int>{1, 2});
  CHECK(w.neighbors == std::vector<int>{0, 1, 2});

  w = window(5, 10, 2);
  CHECK(w.former == std::vector<int>{4, 5});
  CHECK(w.latter == std::vector<int>{6, 7});
  CHECK(w.neighbors == std::vector<int>{4, 6, 7});

  w = window(9, 10, 3);
  CHECK(w.latter == std::vector<int>{9, 9, 9});
  CHECK(w.neighbors.size() == 5);

  w = window(0, 1, 2);
  CHECK(w.former == std::vector<int>{0, 0});
  CHECK(w.latter == std::vector<int>{0, 0});
  CHECK(w.neighbors == std::vector<int>{0, 0, 0});
}

TEST_CASE("default dims") {
  auto c = DiffCorrConfig{}.resolved(5);
  CHECK(c.k == 2);
  CHECK(c.d_e == 5);
  CHECK(c.d_a == 5);
  CHECK(c.d_g == 3);
  DiffCorrConfig bad;
  bad.k = 0;
  CHECK_THROWS(bad.resolved(4));
}

TEST_CASE("constant sequence") {
  Fixture fx(3);
  randomize(fx.store, fx.rng);
  Eigen::MatrixXd f = Eigen::MatrixXd::Constant(6, 3, 0.7);
  const auto& w = fx.net.weights();
  for (int j = 0; j < 6; ++j) {
    auto parts = fx.net.boundary_parts(f, j);
    CHECK(parts.cosine == doctest::Approx(1.0));
    CHECK(parts.difference.norm() < 1e-12);
    Eigen::VectorXd expect = (w.proj_w->value.row(0) + w.proj_b->value.row(0)).transpose();
    CHECK((parts.g - expect).norm() < 1e-12);
    CHECK((fx.net.aggregated_feature(f, j) - f.row(j).transpose()).norm() < 1e-12);
  }
}

TEST_CASE("two-dimensional hand case") {
  DiffCorrConfig config;
  config.k = 1;
  config.d_e = 2;
  config.d_g = 3;
  Fixture fx(2, config);
  const auto& w = fx.net.weights();
  w.embed_w->value = Eigen::MatrixXd::Identity(2, 2);
  w.embed_b->value.setZero();
  w.proj_w->value = Eigen::MatrixXd::Identity(3, 3);
  w.proj_b->value.setZero();
  Eigen::MatrixXd f(2, 2);
  f << 1, 0, 0, 1;
  auto parts = fx.net.boundary_parts(f, 0);
  CHECK(parts.cosine == doctest::Approx(0.0));
  CHECK(parts.difference(0) == doctest::Approx(1.0));
  CHECK(parts.difference(1) == doctest::Approx(-1.0));
  CHECK(parts.g(0) == doctest::Approx(0.0));
  CHECK(parts.g(1) == doctest::Approx(1.0));
  CHECK(parts.g(2) == doctest::Approx(-1.0));
}

TEST_CASE("cosine is scale invariant without embed bias") {
  Fixture fx(4);
  randomize(fx.store, fx.rng);
  fx.net.weights().embed_b->value.setZero();
  Eigen::MatrixXd f = random_matrix(7, 4, fx.rng);
  for (double lambda : {0.01, 3.0, 250.0}) {
    for (int j = 0; j < 7; ++j) {
      CHECK(fx.net.boundary_parts(lambda * f, j).cosine == doctest::Approx(fx.net.boundary_parts(f, j).cosine));
    }
  }
}

TEST_CASE("attention logits") {
  Fixture fx(2);
  randomize(fx.store, fx.rng);
  const auto& w = fx.net.weights();
  Eigen::VectorXd a(2), b(2);
  a << 0.3, -1.2;
  b << 2.0, 0.5;
  // zero difference -> attn_mlp(0)
  const double at_zero =
      (w.mlp_b1->value.cwiseMax(0.0) * w.mlp_w2->value)(0, 0) + w.mlp_b2->value(0, 0);
  CHECK(fx.net.attention_weight(a, a) == doctest::Approx(at_zero));
  CHECK(fx.net.attention_weight(b, b) == doctest::Approx(at_zero));
  // neighbours with equal embeddings -> equal logits
  const Eigen::MatrixXd saved = w.embed_w->value;
  w.embed_w->value << 1.0, -0.5, 1.0, -0.5;
  Eigen::VectorXd b2(2);
  b2 << 1.5, 1.0;
  CHECK(fx.net.attention_weight(a, b) == doctest::Approx(fx.net.attention_weight(a, b2)));
  w.embed_w->value = saved;

  // manual evaluation with small fixed weights
  w.embed_w->value << 1.0, 0.5, -0.5, 2.0;
  w.embed_b->value << 0.1, -0.1;
  w.mlp_w1->value << 1.0, -1.0, 0.5, 0.25;
  w.mlp_b1->value << 0.2, 0.0;
  w.mlp_w2->value << 2.0, -3.0;
  w.mlp_b2->value << 0.5;
  // e(a) - e(b) = (a - b) W_e = (-1.7, -1.7) * W_e
  const double d0 = -1.7 * 1.0 + -1.7 * -0.5;  // -0.85
  const double d1 = -1.7 * 0.5 + -1.7 * 2.0;   // -4.25
  const double h0 = std::max(0.0, d0 * 1.0 + d1 * 0.5 + 0.2);
  const double h1 = std::max(0.0, d0 * -1.0 + d1 * 0.25 + 0.0);
  CHECK(fx.net.attention_weight(a, b) == doctest::Approx(2.0 * h0 - 3.0 * h1 + 0.5));
}

TEST_CASE("aggregation") {
  Fixture fx(3);
  randomize(fx.store, fx.rng);
  Eigen::MatrixXd f = random_matrix(6, 3, fx.rng);
  // neighbours of shot 2 (k=2) are 1, 3, 4
  f.row(3) = f.row(1);
  f.row(4) = f.row(1);
  CHECK((fx.net.aggregated_feature(f, 2) - f.row(1).transpose()).norm() < 1e-12);

  // brute-force softmax and weighted sum
  f = random_matrix(6, 3, fx.rng);
  for (int j = 0; j < 6; ++j) {
    auto win = window(j, 6, 2);
    std::vector<double> logits;
    for (int i : win.neighbors) logits.push_back(fx.net.attention_weight(f.row(j).transpose(), f.row(i).transpose()));
    double z = 0.0;
    for (double l : logits) z += std::exp(l);
    Eigen::VectorXd h = Eigen::VectorXd::Zero(3);
    for (std::size_t m = 0; m < logits.size(); ++m) h += std::exp(logits[m]) / z * f.row(win.neighbors[m]).transpose();
    CHECK((fx.net.aggregated_feature(f, j) - h).norm() < 1e-12);
    auto dist = fx.net.attention_distribution(f, j);
    CHECK(dist.sum() == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(dist.minCoeff() > 0.0);
  }
}

TEST_CASE("softmax saturation") {
  DiffCorrConfig c2;
  c2.k = 2;
  c2.d_a = 1;
  Fixture fx2(1, c2);
  const auto& w2 = fx2.net.weights();
  w2.embed_w->value << 1.0;
  w2.embed_b->value << 0.0;
  w2.mlp_w1->value << 1.0;
  w2.mlp_b1->value << 0.0;
  w2.mlp_w2->value << 1e3;
  w2.mlp_b2->value << 0.0;
  // logit = 1000 * relu(f_j - f_i): the smallest neighbour dominates
  Eigen::MatrixXd f(5, 1);
  f << 0.0, 0.4, 1.0, 0.9, 0.7;
  CHECK(fx2.net.aggregated_feature(f, 2)(0) == doctest::Approx(0.4));
}

TEST_CASE("single shot") {
  Fixture fx(3);
  randomize(fx.store, fx.rng);
  Eigen::MatrixXd f = random_matrix(1, 3, fx.rng);
  auto parts = fx.net.boundary_parts(f, 0);
  CHECK(parts.cosine == doctest::Approx(1.0));
  CHECK((fx.net.aggregated_feature(f, 0) - f.row(0).transpose()).norm() < 1e-12);
  auto out = fx.net.enhance(ad::constant(f))->value;
  CHECK(out.rows() == 1);
  CHECK(out.cols() == 3 + 2 + 3);
}

TEST_CASE("enhance composes the per-shot features") {
  for (int k : {1, 2, 3}) {
    DiffCorrConfig config;
    config.k = k;
    Fixture fx(4, config);
    randomize(fx.store, fx.rng);
    Eigen::MatrixXd f = random_matrix(9, 4, fx.rng);
    auto out = fx.net.enhance(ad::constant(f))->value;
    REQUIRE(out.cols() == fx.net.d_out());
    for (int j = 0; j < 9; ++j) {
      CHECK((out.row(j).head(4) - f.row(j)).norm() == 0.0);
      CHECK((out.row(j).segment(4, fx.net.d_g()).transpose() - fx.net.boundary_feature(f, j)).norm() < 1e-10);
      CHECK((out.row(j).tail(4).transpose() - fx.net.aggregated_feature(f, j)).norm() < 1e-10);
    }
  }
}

TEST_CASE("locality") {
  Fixture fx(3);
  randomize(fx.store, fx.rng);
  Eigen::MatrixXd f = random_matrix(12, 3, fx.rng);
  auto base = fx.net.enhance(ad::constant(f))->value;
  Eigen::MatrixXd g = f;
  // perturb shots farther than k=2 from shot 6
  g.row(0) *= 5.0;
  g.row(1) += Eigen::RowVectorXd::Ones(3);
  g.row(10) *= -1.0;
  g.row(11) *= 2.0;
  auto moved = fx.net.enhance(ad::constant(g))->value;
  CHECK((base.row(6) - moved.row(6)).norm() < 1e-12);
  CHECK((base.row(5) - moved.row(5)).norm() < 1e-12);
}

TEST_CASE("finite on large inputs") {
  Fixture fx(5);
  randomize(fx.store, fx.rng);
  for (double scale : {1e3, 1e6, 1e9}) {
    auto out = fx.net.enhance(ad::constant(random_matrix(8, 5, fx.rng, scale)))->value;
    CHECK(out.allFinite());
  }
}

TEST_CASE("raw attention mode") {
  DiffCorrConfig config;
  config.attention_normalize = false;
  Fixture fx(3, config);
  randomize(fx.store, fx.rng);
  Eigen::MatrixXd f = random_matrix(5, 3, fx.rng);
  auto win = window(2, 5, 2);
  Eigen::VectorXd h = Eigen::VectorXd::Zero(3);
  for (int i : win.neighbors) h += fx.net.attention_weight(f.row(2).transpose(), f.row(i).transpose()) * f.row(i).transpose();
  CHECK((fx.net.aggregated_feature(f, 2) - h).norm() < 1e-12);
  auto out = fx.net.enhance(ad::constant(f))->value;
  CHECK((out.row(2).tail(3).transpose() - h).norm() < 1e-10);
}

TEST_CASE("enhance gradients") {
  for (int trial = 0; trial < 6; ++trial) {
    DiffCorrConfig config;
    config.k = 1 + trial % 3;
    config.split_embed = trial % 2 == 1;
    const int d_in = 2 + trial % 4;
    const int n = 1 + trial;
    Fixture fx(d_in, config);
    fx.rng.seed(100 + trial);
    randomize(fx.store, fx.rng);
    auto x = ad::parameter(random_matrix(n, d_in, fx.rng));
    Eigen::MatrixXd mix = random_matrix(n, fx.net.d_out(), fx.rng);
    std::vector<ad::Var> inputs{x};
    for (auto& e : fx.store.entries()) inputs.push_back(e.var);
    auto build = [&] { return ad::sum_all(ad::mul(fx.net.enhance(x), ad::constant(mix))); };
    CHECK(fd_relative_error(build, inputs) <= 1e-4);
  }
}

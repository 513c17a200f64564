#include <doctest.h>

#include <cmath>
#include <random>

#include "fd.hpp"
#include "oracles.hpp"
#include "osmsl/crf.hpp"
#include "osmsl/error.hpp"

using namespace osmsl;

namespace {

Eigen::MatrixXd random_matrix(Eigen::Index r, Eigen::Index c, std::mt19937_64& rng, double scale = 1.0) {
  std::normal_distribution<double> n(0.0, scale);
  Eigen::MatrixXd m(r, c);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = n(rng);
  return m;
}

CrfParams random_crf(const LabelScheme& scheme, std::mt19937_64& rng) {
  CrfParams crf = CrfParams::zeros(scheme);
  crf.transitions = random_matrix(crf.num_tags(), crf.num_tags(), rng);
  crf.start = random_matrix(1, crf.num_tags(), rng);
  crf.end = random_matrix(1, crf.num_tags(), rng);
  return crf;
}

std::vector<int> gold_path(int n, int categories, const LabelScheme& scheme, std::mt19937_64& rng) {
  return to_indices(encode(oracle::random_partition(n, categories, rng), n, scheme), scheme);
}

}  // namespace

TEST_CASE("path score") {
  std::mt19937_64 rng(1);
  auto scheme = LabelScheme::segmentation();
  auto crf = random_crf(scheme, rng);
  Eigen::MatrixXd e = random_matrix(1, 5, rng);
  const int n_tag = static_cast<int>(LinkKind::N);
  std::vector<int> one{n_tag};
  CHECK(path_score(e, crf, one) == doctest::Approx(crf.start(n_tag) + e(0, n_tag) + crf.end(n_tag)));

  auto zero = CrfParams::zeros(scheme);
  e = random_matrix(4, 5, rng);
  std::vector<int> path{0, 2, 4, 4};
  CHECK(path_score(e, zero, path) == doctest::Approx(e(0, 0) + e(1, 2) + e(2, 4) + e(3, 4)));
  CHECK(path_score(e, crf, path) == doctest::Approx(oracle::path_score(e, crf, path)));
  std::vector<int> illegal{1, 2, 4, 4};
  CHECK(std::isinf(path_score(e, crf, illegal)));
  CHECK_THROWS_AS(nll(e, crf, illegal), GrammarError);
}

TEST_CASE("log partition closed form for one shot") {
  std::mt19937_64 rng(2);
  auto scheme = LabelScheme::classification({"A", "B"});
  auto crf = random_crf(scheme, rng);
  Eigen::MatrixXd e = random_matrix(1, 10, rng);
  double acc = 0.0;
  for (int t = 0; t < 10; ++t) {
    if (crf.mask.legal_start[t] && crf.mask.legal_end[t]) acc += std::exp(crf.start(t) + e(0, t) + crf.end(t));
  }
  CHECK(log_partition(e, crf) == doctest::Approx(std::log(acc)));
}

TEST_CASE("oracle equivalence") {
  std::mt19937_64 rng(3);
  for (int C : {0, 2}) {
    auto scheme = C == 0 ? LabelScheme::segmentation() : LabelScheme::classification({"A", "B"});
    for (int n = 1; n <= (C == 0 ? 6 : 5); ++n) {
      for (int trial = 0; trial < 3; ++trial) {
        auto crf = random_crf(scheme, rng);
        Eigen::MatrixXd e = random_matrix(n, scheme.num_tags(), rng, 2.0);
        auto brute = oracle::enumerate(e, crf);
        CHECK(std::abs(log_partition(e, crf) - brute.log_z) <= 1e-6);
        auto best = viterbi(e, crf);
        CHECK(std::abs(best.score - brute.best) <= 1e-6);
        CHECK(best.tags == brute.argmax);
        CHECK(marginals(e, crf).log_z == doctest::Approx(brute.log_z));
      }
    }
  }
}

TEST_CASE("shift identity") {
  std::mt19937_64 rng(4);
  auto scheme = LabelScheme::segmentation();
  auto crf = random_crf(scheme, rng);
  Eigen::MatrixXd e = random_matrix(9, 5, rng);
  const double c = 1.75;
  Eigen::MatrixXd shifted = e.array() + c;
  CHECK(log_partition(shifted, crf) == doctest::Approx(log_partition(e, crf) + 9 * c));
}

TEST_CASE("nll bounds and saturation") {
  std::mt19937_64 rng(5);
  auto scheme = LabelScheme::classification({"A", "B", "C"});
  for (int trial = 0; trial < 2000; ++trial) {
    const int n = 1 + trial % 12;
    auto crf = random_crf(scheme, rng);
    Eigen::MatrixXd e = random_matrix(n, scheme.num_tags(), rng, 3.0);
    auto gold = gold_path(n, 3, scheme, rng);
    const double loss = nll(e, crf, gold);
    REQUIRE(loss >= -1e-9);
    const double vit = viterbi(e, crf).score;
    CHECK(path_score(e, crf, gold) <= vit + 1e-9);
    CHECK(vit <= log_partition(e, crf) + 1e-9);
  }
  auto crf = random_crf(scheme, rng);
  Eigen::MatrixXd e = random_matrix(7, scheme.num_tags(), rng);
  auto gold = gold_path(7, 3, scheme, rng);
  for (int j = 0; j < 7; ++j) e(j, gold[j]) += 1e4;
  CHECK(nll(e, crf, gold) == doctest::Approx(0.0));
  CHECK(viterbi(e, crf).tags == gold);
}

TEST_CASE("gradient equals marginals minus gold") {
  std::mt19937_64 rng(6);
  auto scheme = LabelScheme::classification({"A", "B"});
  for (int trial = 0; trial < 5; ++trial) {
    const int n = 2 + trial;
    auto crf = random_crf(scheme, rng);
    Eigen::MatrixXd e = random_matrix(n, 10, rng);
    auto gold = gold_path(n, 2, scheme, rng);
    auto grad = nll_gradient(e, crf, gold);
    auto m = marginals(e, crf);
    Eigen::MatrixXd expect = m.node;
    for (int j = 0; j < n; ++j) expect(j, gold[j]) -= 1.0;
    CHECK((grad.d_emissions - expect).norm() < 1e-10);
    CHECK(grad.nll == doctest::Approx(nll(e, crf, gold)));
    for (int j = 0; j < n; ++j) CHECK(m.node.row(j).sum() == doctest::Approx(1.0));

    // autograd node vs finite differences on all four tensors
    auto E = ad::parameter(e);
    auto Tr = ad::parameter(crf.transitions);
    auto S = ad::parameter(crf.start);
    auto En = ad::parameter(crf.end);
    auto build = [&] { return crf_nll(E, Tr, S, En, crf.mask, true, gold); };
    CHECK(fd_relative_error(build, {E, Tr, S, En}) <= 1e-4);
    for (auto& x : {E, Tr, S, En}) x->zero_grad();
    ad::backward(build());
    CHECK((E->grad - grad.d_emissions).norm() < 1e-10);
    CHECK((Tr->grad - grad.d_transitions).norm() < 1e-10);
  }
}

TEST_CASE("masked entries are never read") {
  std::mt19937_64 rng(7);
  auto scheme = LabelScheme::segmentation();
  auto crf = random_crf(scheme, rng);
  Eigen::MatrixXd e = random_matrix(6, 5, rng);
  const double z = log_partition(e, crf);
  const auto best = viterbi(e, crf).tags;
  for (int a = 0; a < 5; ++a) {
    if (!crf.mask.legal_start[a]) crf.start(a) = 1e6;
    if (!crf.mask.legal_end[a]) crf.end(a) = 1e6;
    for (int b = 0; b < 5; ++b) {
      if (!crf.mask.is_allowed(a, b)) crf.transitions(a, b) = 1e6;
    }
  }
  CHECK(log_partition(e, crf) == doctest::Approx(z));
  CHECK(viterbi(e, crf).tags == best);
}

TEST_CASE("viterbi ties and grammar safety") {
  auto scheme = LabelScheme::segmentation();
  auto crf = CrfParams::zeros(scheme);
  Eigen::MatrixXd e = Eigen::MatrixXd::Zero(6, 5);
  auto first = viterbi(e, crf);
  CHECK(first.score == 0.0);
  for (int r = 0; r < 5; ++r) CHECK(viterbi(e, crf).tags == first.tags);
  CHECK_NOTHROW(decode(from_indices(first.tags, scheme), scheme));

  std::mt19937_64 rng(8);
  auto ssc = LabelScheme::classification({"A", "B", "C", "D"});
  for (int trial = 0; trial < 10000; ++trial) {
    const int n = 1 + trial % 30;
    auto crf2 = random_crf(ssc, rng);
    Eigen::MatrixXd em = random_matrix(n, ssc.num_tags(), rng, 5.0);
    auto path = viterbi(em, crf2).tags;
    REQUIRE_NOTHROW(validate_partition(decode(from_indices(path, ssc), ssc), n));
  }
}

TEST_CASE("soft mask reads stored scores") {
  std::mt19937_64 rng(9);
  auto scheme = LabelScheme::segmentation();
  auto crf = random_crf(scheme, rng);
  crf.hard_mask = false;
  Eigen::MatrixXd e = random_matrix(3, 5, rng);
  double acc = 0.0;
  std::vector<int> t(3, 0);
  for (t[0] = 0; t[0] < 5; ++t[0])
    for (t[1] = 0; t[1] < 5; ++t[1])
      for (t[2] = 0; t[2] < 5; ++t[2])
        acc += std::exp(crf.start(t[0]) + e(0, t[0]) + crf.transitions(t[0], t[1]) + e(1, t[1]) +
                        crf.transitions(t[1], t[2]) + e(2, t[2]) + crf.end(t[2]));
  CHECK(log_partition(e, crf) == doctest::Approx(std::log(acc)));
}

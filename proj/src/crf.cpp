#include "osmsl/crf.hpp"

#include <cmath>
#include <limits>

#include "osmsl/error.hpp"

namespace osmsl {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

double log_sum_exp(const Eigen::Ref<const Eigen::VectorXd>& v) {
  const double m = v.maxCoeff();
  if (m == kNegInf) return kNegInf;
  return m + std::log((v.array() - m).exp().sum());
}

void check_emissions(const Eigen::MatrixXd& emissions, const CrfParams& crf) {
  if (emissions.rows() < 1) throw ValidationError("CRF needs at least one position");
  if (emissions.cols() != crf.num_tags()) throw ValidationError("emission width does not match tag count");
}

// alpha(j, t): log-sum of all prefixes ending in tag t at position j.
Eigen::MatrixXd forward_scores(const Eigen::MatrixXd& e, const CrfParams& crf, const Eigen::MatrixXd& trans) {
  const auto n = e.rows();
  const int T = crf.num_tags();
  Eigen::MatrixXd alpha(n, T);
  for (int t = 0; t < T; ++t) alpha(0, t) = crf.start_score(t) + e(0, t);
  Eigen::VectorXd buf(T);
  for (Eigen::Index j = 1; j < n; ++j) {
    for (int t = 0; t < T; ++t) {
      for (int i = 0; i < T; ++i) buf(i) = alpha(j - 1, i) + trans(i, t);
      alpha(j, t) = log_sum_exp(buf) + e(j, t);
    }
  }
  return alpha;
}

Eigen::MatrixXd backward_scores(const Eigen::MatrixXd& e, const CrfParams& crf, const Eigen::MatrixXd& trans) {
  const auto n = e.rows();
  const int T = crf.num_tags();
  Eigen::MatrixXd beta(n, T);
  for (int t = 0; t < T; ++t) beta(n - 1, t) = crf.end_score(t);
  Eigen::VectorXd buf(T);
  for (Eigen::Index j = n - 2; j >= 0; --j) {
    for (int i = 0; i < T; ++i) {
      for (int t = 0; t < T; ++t) buf(t) = trans(i, t) + e(j + 1, t) + beta(j + 1, t);
      beta(j, i) = log_sum_exp(buf);
    }
  }
  return beta;
}

double terminal_log_z(const Eigen::MatrixXd& alpha, const CrfParams& crf) {
  const int T = crf.num_tags();
  Eigen::VectorXd last(T);
  for (int t = 0; t < T; ++t) last(t) = alpha(alpha.rows() - 1, t) + crf.end_score(t);
  return log_sum_exp(last);
}

}  // namespace

CrfParams CrfParams::zeros(const LabelScheme& scheme, bool hard_mask) {
  CrfParams crf;
  const int T = scheme.num_tags();
  crf.transitions = Eigen::MatrixXd::Zero(T, T);
  crf.start = Eigen::RowVectorXd::Zero(T);
  crf.end = Eigen::RowVectorXd::Zero(T);
  crf.mask = transition_mask(scheme);
  crf.hard_mask = hard_mask;
  return crf;
}

double CrfParams::transition(int from, int to) const {
  if (hard_mask && !mask.is_allowed(from, to)) return kNegInf;
  return transitions(from, to);
}

double CrfParams::start_score(int tag) const {
  if (hard_mask && !mask.legal_start[tag]) return kNegInf;
  return start(tag);
}

double CrfParams::end_score(int tag) const {
  if (hard_mask && !mask.legal_end[tag]) return kNegInf;
  return end(tag);
}

Eigen::MatrixXd CrfParams::effective_transitions() const {
  const int T = num_tags();
  Eigen::MatrixXd out(T, T);
  for (int i = 0; i < T; ++i) {
    for (int j = 0; j < T; ++j) out(i, j) = transition(i, j);
  }
  return out;
}

double path_score(const Eigen::MatrixXd& emissions, const CrfParams& crf, std::span<const int> tags) {
  check_emissions(emissions, crf);
  if (static_cast<Eigen::Index>(tags.size()) != emissions.rows()) {
    throw ValidationError("path length does not match emission rows");
  }
  double score = crf.start_score(tags[0]) + crf.end_score(tags.back());
  for (std::size_t j = 0; j < tags.size(); ++j) {
    score += emissions(static_cast<Eigen::Index>(j), tags[j]);
    if (j + 1 < tags.size()) score += crf.transition(tags[j], tags[j + 1]);
  }
  return score;
}

double log_partition(const Eigen::MatrixXd& emissions, const CrfParams& crf) {
  check_emissions(emissions, crf);
  const Eigen::MatrixXd trans = crf.effective_transitions();
  return terminal_log_z(forward_scores(emissions, crf, trans), crf);
}

CrfMarginals marginals(const Eigen::MatrixXd& emissions, const CrfParams& crf) {
  check_emissions(emissions, crf);
  const Eigen::MatrixXd trans = crf.effective_transitions();
  const Eigen::MatrixXd alpha = forward_scores(emissions, crf, trans);
  const Eigen::MatrixXd beta = backward_scores(emissions, crf, trans);
  CrfMarginals out;
  out.log_z = terminal_log_z(alpha, crf);
  out.node = (alpha + beta).array() - out.log_z;
  out.node = out.node.array().exp();
  const int T = crf.num_tags();
  out.pair = Eigen::MatrixXd::Zero(T, T);
  for (Eigen::Index j = 0; j + 1 < emissions.rows(); ++j) {
    for (int i = 0; i < T; ++i) {
      if (alpha(j, i) == kNegInf) continue;
      for (int t = 0; t < T; ++t) {
        const double s = alpha(j, i) + trans(i, t) + emissions(j + 1, t) + beta(j + 1, t) - out.log_z;
        if (s != kNegInf) out.pair(i, t) += std::exp(s);
      }
    }
  }
  return out;
}

ViterbiPath viterbi(const Eigen::MatrixXd& emissions, const CrfParams& crf) {
  check_emissions(emissions, crf);
  const auto n = emissions.rows();
  const int T = crf.num_tags();
  const Eigen::MatrixXd trans = crf.effective_transitions();
  Eigen::MatrixXd delta(n, T);
  Eigen::MatrixXi back(n, T);
  for (int t = 0; t < T; ++t) delta(0, t) = crf.start_score(t) + emissions(0, t);
  for (Eigen::Index j = 1; j < n; ++j) {
    for (int t = 0; t < T; ++t) {
      double best = kNegInf;
      int arg = 0;
      for (int i = 0; i < T; ++i) {
        const double s = delta(j - 1, i) + trans(i, t);
        if (s > best) {
          best = s;
          arg = i;
        }
      }
      delta(j, t) = best + emissions(j, t);
      back(j, t) = arg;
    }
  }
  double best = kNegInf;
  int last = 0;
  for (int t = 0; t < T; ++t) {
    const double s = delta(n - 1, t) + crf.end_score(t);
    if (s > best) {
      best = s;
      last = t;
    }
  }
  ViterbiPath path;
  path.score = best;
  path.tags.resize(n);
  path.tags[n - 1] = last;
  for (Eigen::Index j = n - 1; j > 0; --j) path.tags[j - 1] = back(j, path.tags[j]);
  return path;
}

double nll(const Eigen::MatrixXd& emissions, const CrfParams& crf, std::span<const int> gold) {
  const double gold_score = path_score(emissions, crf, gold);
  if (gold_score == kNegInf) throw GrammarError("gold path violates the transition mask", 0);
  return log_partition(emissions, crf) - gold_score;
}

CrfGradient nll_gradient(const Eigen::MatrixXd& emissions, const CrfParams& crf, std::span<const int> gold) {
  const double gold_score = path_score(emissions, crf, gold);
  if (gold_score == kNegInf) throw GrammarError("gold path violates the transition mask", 0);
  const CrfMarginals m = marginals(emissions, crf);
  const auto n = emissions.rows();
  CrfGradient g;
  g.nll = m.log_z - gold_score;
  g.d_emissions = m.node;
  g.d_transitions = m.pair;
  g.d_start = m.node.row(0);
  g.d_end = m.node.row(n - 1);
  for (Eigen::Index j = 0; j < n; ++j) {
    g.d_emissions(j, gold[j]) -= 1.0;
    if (j + 1 < n) g.d_transitions(gold[j], gold[j + 1]) -= 1.0;
  }
  g.d_start(gold[0]) -= 1.0;
  g.d_end(gold[n - 1]) -= 1.0;
  return g;
}

ad::Var crf_nll(const ad::Var& emissions, const ad::Var& transitions, const ad::Var& start, const ad::Var& end,
                const TransitionMask& mask, bool hard_mask, std::span<const int> gold) {
  CrfParams crf;
  crf.transitions = transitions->value;
  crf.start = start->value.row(0);
  crf.end = end->value.row(0);
  crf.mask = mask;
  crf.hard_mask = hard_mask;
  CrfGradient g = nll_gradient(emissions->value, crf, gold);
  ad::Matrix out(1, 1);
  out(0, 0) = g.nll;
  return ad::make_node(std::move(out), {emissions, transitions, start, end}, [g = std::move(g)](ad::Node& self) {
    const double s = self.grad(0, 0);
    const auto& p = self.parents;
    if (p[0]->requires_grad) p[0]->accumulate(g.d_emissions * s);
    if (p[1]->requires_grad) p[1]->accumulate(g.d_transitions * s);
    if (p[2]->requires_grad) p[2]->accumulate(ad::Matrix(g.d_start * s));
    if (p[3]->requires_grad) p[3]->accumulate(ad::Matrix(g.d_end * s));
  });
}

}  // namespace osmsl

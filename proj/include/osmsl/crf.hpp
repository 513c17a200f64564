#pragma once

#include <span>
#include <vector>

#include "osmsl/autograd.hpp"
#include "osmsl/label_scheme.hpp"

namespace osmsl {

/// Linear-chain CRF over link tags. When hard_mask is set, transitions,
/// start and end scores outside the link grammar read as -inf regardless of
/// the stored values.
struct CrfParams {
  Eigen::MatrixXd transitions;  // from x to
  Eigen::RowVectorXd start;
  Eigen::RowVectorXd end;
  TransitionMask mask;
  bool hard_mask = true;

  static CrfParams zeros(const LabelScheme& scheme, bool hard_mask = true);

  int num_tags() const { return static_cast<int>(transitions.rows()); }
  double transition(int from, int to) const;
  double start_score(int tag) const;
  double end_score(int tag) const;
  Eigen::MatrixXd effective_transitions() const;
};

double path_score(const Eigen::MatrixXd& emissions, const CrfParams& crf, std::span<const int> tags);
double log_partition(const Eigen::MatrixXd& emissions, const CrfParams& crf);

struct CrfMarginals {
  double log_z = 0.0;
  Eigen::MatrixXd node;  // n x T, P(tag_j = t)
  Eigen::MatrixXd pair;  // T x T, expected transition counts summed over j
};

/// Forward-backward in log space.
CrfMarginals marginals(const Eigen::MatrixXd& emissions, const CrfParams& crf);

struct ViterbiPath {
  std::vector<int> tags;
  double score = 0.0;
};

/// Best path; ties go to the lower tag index at every comparison.
ViterbiPath viterbi(const Eigen::MatrixXd& emissions, const CrfParams& crf);

/// log_partition - path_score(gold). Throws GrammarError for gold paths the
/// mask forbids.
double nll(const Eigen::MatrixXd& emissions, const CrfParams& crf, std::span<const int> gold);

struct CrfGradient {
  double nll = 0.0;
  Eigen::MatrixXd d_emissions;
  Eigen::MatrixXd d_transitions;
  Eigen::RowVectorXd d_start;
  Eigen::RowVectorXd d_end;
};

CrfGradient nll_gradient(const Eigen::MatrixXd& emissions, const CrfParams& crf, std::span<const int> gold);

/// Differentiable NLL node over emissions and the three CRF score tensors.
ad::Var crf_nll(const ad::Var& emissions, const ad::Var& transitions, const ad::Var& start, const ad::Var& end,
                const TransitionMask& mask, bool hard_mask, std::span<const int> gold);

}  // namespace osmsl

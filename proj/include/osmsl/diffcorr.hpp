#pragma once

#include <string>
#include <vector>

#include "osmsl/autograd.hpp"
#include "osmsl/params.hpp"

namespace osmsl {

/// Zero dims mean "derive from the input dim": d_e = d_a = d_in, d_g = ceil(d_in / 2).
struct DiffCorrConfig {
  int k = 2;
  int d_e = 0;
  int d_a = 0;
  int d_g = 0;
  bool attention_normalize = true;
  bool split_embed = false;

  DiffCorrConfig resolved(int d_in) const;
};

/// Shot indices around shot j, clamped to [0, n-1].
struct ShotWindow {
  std::vector<int> former;     // j-(k-1) .. j
  std::vector<int> latter;     // j+1 .. j+k
  std::vector<int> neighbors;  // former and latter without j itself (2k-1 entries)
};

ShotWindow window(int j, int n, int k);

/// Difference/correlation enhancement for one modality. Each modality owns an
/// independent instance.
class DiffCorrNet {
 public:
  DiffCorrNet(ParamStore& store, const std::string& prefix, int d_in, const DiffCorrConfig& config, Rng& rng);

  int d_in() const { return d_in_; }
  int d_g() const { return config_.d_g; }
  int d_out() const { return 2 * d_in_ + config_.d_g; }
  const DiffCorrConfig& config() const { return config_; }

  /// n x d_in -> n x (d_in + d_g + d_in); row j = [f_j, g_j, h_j].
  ad::Var enhance(const ad::Var& features) const;

  // Single-shot evaluation on plain values, used for inspection and as a
  // reference for the vectorized path.
  struct BoundaryParts {
    double cosine = 0.0;
    Eigen::VectorXd difference;  // p_former - p_latter
    Eigen::VectorXd g;
  };
  BoundaryParts boundary_parts(const Eigen::MatrixXd& features, int j) const;
  Eigen::VectorXd boundary_feature(const Eigen::MatrixXd& features, int j) const;
  double attention_weight(const Eigen::VectorXd& f_j, const Eigen::VectorXd& f_i) const;
  /// Normalized (or raw) weights over window(j).neighbors.
  Eigen::VectorXd attention_distribution(const Eigen::MatrixXd& features, int j) const;
  Eigen::VectorXd aggregated_feature(const Eigen::MatrixXd& features, int j) const;

  struct Weights {
    ad::Var embed_w, embed_b;
    ad::Var attn_embed_w, attn_embed_b;  // alias embed_* unless split_embed
    ad::Var proj_w, proj_b;
    ad::Var mlp_w1, mlp_b1, mlp_w2, mlp_b2;
  };
  const Weights& weights() const { return w_; }

 private:
  Eigen::RowVectorXd embed(const Eigen::RowVectorXd& f) const;
  Eigen::RowVectorXd attn_embed(const Eigen::RowVectorXd& f) const;

  int d_in_;
  DiffCorrConfig config_;
  Weights w_;
};

}  // namespace osmsl

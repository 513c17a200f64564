#pragma once

#include <optional>
#include <string>
#include <vector>

#include "osmsl/autograd.hpp"
#include "osmsl/params.hpp"

namespace osmsl {

enum class Mode { Train, Eval };

/// Per-feature batch statistics (biased variance) of one training step.
struct BatchStats {
  Eigen::RowVectorXd mean;
  Eigen::RowVectorXd var;
  Eigen::Index count = 0;
};

class BatchNorm {
 public:
  BatchNorm(ParamStore& store, const std::string& prefix, int dim, double momentum = 0.1, double eps = 1e-5);

  int dim() const { return dim_; }
  double eps() const { return eps_; }

  /// Train mode normalizes with the statistics of x (rows pooled) and reports
  /// them through `stats`; running statistics change only in update_running().
  ad::Var forward(const ad::Var& x, Mode mode, BatchStats* stats = nullptr) const;
  void update_running(const BatchStats& stats);

  const ad::Var& gamma() const { return gamma_; }
  const ad::Var& beta() const { return beta_; }
  const ad::Var& running_mean() const { return running_mean_; }
  const ad::Var& running_var() const { return running_var_; }

 private:
  int dim_;
  double momentum_;
  double eps_;
  ad::Var gamma_, beta_, running_mean_, running_var_;
};

/// Concatenates the normalized modality blocks in the given order.
ad::Var fuse(std::span<const ad::Var> modality_features);

struct EncoderConfig {
  int n_layers = 2;
  int n_heads = 4;
  int d_model = 64;
  int d_ff = 128;
  int max_len = 512;
  int chunk_overlap = 32;
  double dropout = 0.0;
};

/// Pre-norm transformer encoder with learned positions and full
/// self-attention.
class TransformerEncoder {
 public:
  TransformerEncoder(ParamStore& store, const std::string& prefix, int d_in, const EncoderConfig& config, Rng& rng);

  const EncoderConfig& config() const { return config_; }

  /// x: n x d_in with n <= max_len. `attention`, when given, receives one
  /// n x n matrix per (layer, head). `dropout_rng` enables dropout.
  ad::Var forward(const ad::Var& x, std::vector<Eigen::MatrixXd>* attention = nullptr,
                  Rng* dropout_rng = nullptr) const;

  /// Any length: overlapping chunks of max_len, each row taken from the
  /// chunk that owns it (chunk interiors), stitched back to n rows.
  ad::Var forward_chunked(const ad::Var& x, Rng* dropout_rng = nullptr) const;

 private:
  struct Layer {
    ad::Var ln1_g, ln1_b, wq, bq, wk, bk, wv, bv, wo, bo;
    ad::Var ln2_g, ln2_b, w1, b1, w2, b2;
  };
  ad::Var dropout(const ad::Var& x, Rng* rng) const;

  EncoderConfig config_;
  ad::Var in_w_, in_b_, positions_, final_g_, final_b_;
  std::vector<Layer> layers_;
};

/// Row ranges [begin, end) owned by each chunk when splitting n rows into
/// windows of `max_len` overlapping by `overlap`; returned as (chunk_start,
/// own_begin, own_end).
struct ChunkPlan {
  int start;
  int own_begin;
  int own_end;
};
std::vector<ChunkPlan> plan_chunks(int n, int max_len, int overlap);

class EmissionLayer {
 public:
  EmissionLayer(ParamStore& store, const std::string& prefix, int d_model, int num_tags, Rng& rng);
  ad::Var forward(const ad::Var& hidden) const;
  int num_tags() const { return num_tags_; }
  const ad::Var& weight() const { return w_; }
  const ad::Var& bias() const { return b_; }

 private:
  int num_tags_;
  ad::Var w_, b_;
};

}  // namespace osmsl

#pragma once

#include <optional>
#include <vector>

#include "osmsl/model.hpp"

namespace osmsl {

/// Shared trunk with a per-shot boundary logit and per-shot class logits,
/// trained without a CRF.
class MultiTaskModel : public SceneModel {
 public:
  MultiTaskModel(const ModelConfig& config, LabelScheme scheme, Rng& rng, double lambda_seg = 1.0,
                 double lambda_cls = 1.0);

  HeadKind kind() const override { return HeadKind::MultiTask; }
  const LabelScheme& scheme() const override { return scheme_; }
  const ModelConfig& config() const override { return trunk_.config(); }
  LossOutput loss(const std::string& phase, VideoBatch batch, Mode mode, Rng* dropout_rng) override;
  void commit_statistics() override;
  std::vector<SceneAnnotation> predict(const VideoSequence& video) const override;
  nlohmann::json extra_json() const override;

  struct Outputs {
    Eigen::VectorXd boundary_prob;  // sigmoid of the boundary logit per shot
    Eigen::MatrixXd class_logits;   // n x C
  };
  Outputs outputs(const VideoSequence& video) const;

 private:
  LabelScheme scheme_;
  double lambda_seg_, lambda_cls_;
  Trunk trunk_;
  ad::Var boundary_w_, boundary_b_, class_w_, class_b_;
  std::optional<Trunk::Fused> pending_;
};

/// Threshold + majority-vote decoding of multi-task outputs. Shot j closes a
/// scene when boundary_prob(j) >= 0.5; the last shot always does.
std::vector<SceneAnnotation> multitask_decode(const Eigen::VectorXd& boundary_prob,
                                              const Eigen::MatrixXd& class_logits);

/// Stage 1: OS-MSL over the 5-tag segmentation scheme. Stage 2: classifier
/// over segment-mean fused features of the (frozen) stage-1 trunk.
class TwoStageModel : public SceneModel {
 public:
  TwoStageModel(const ModelConfig& config, LabelScheme scheme, Rng& rng, int stage2_hidden = 64);

  HeadKind kind() const override { return HeadKind::TwoStage; }
  const LabelScheme& scheme() const override { return scheme_; }
  const ModelConfig& config() const override { return stage1_.trunk().config(); }
  std::vector<std::string> phases() const override { return {"stage1", "stage2"}; }
  bool optimizes(const std::string& phase, const std::string& param_name) const override;
  LossOutput loss(const std::string& phase, VideoBatch batch, Mode mode, Rng* dropout_rng) override;
  void commit_statistics() override;
  std::vector<SceneAnnotation> predict(const VideoSequence& video) const override;
  nlohmann::json extra_json() const override;

  const OsMslNet& stage1() const { return stage1_; }
  /// Labels given segments of a video (used with gold or stage-1 segments).
  std::vector<SceneAnnotation> classify(const VideoSequence& video, std::vector<SceneAnnotation> segments) const;

 private:
  ad::Var segment_logits(const ad::Var& fused, const std::vector<SceneAnnotation>& segments) const;

  LabelScheme scheme_;
  int hidden_;
  OsMslNet stage1_;
  ad::Var w1_, b1_, w2_, b2_;
  std::optional<Trunk::Fused> pending_;
};

}  // namespace osmsl

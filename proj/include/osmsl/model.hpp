#pragma once

#include <map>
#include <memory>
#include <json.hpp>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "osmsl/crf.hpp"
#include "osmsl/diffcorr.hpp"
#include "osmsl/feature_io.hpp"
#include "osmsl/fusion_head.hpp"
#include "osmsl/label_scheme.hpp"
#include "osmsl/params.hpp"

namespace osmsl {

/// Architecture switches and dims shared by every head. The use_* flags are
/// the ablation hooks (drop a modality, DiffCorrNet, BN or the CRF).
struct ModelConfig {
  int d_vis = 0;
  int d_aud = 0;
  bool use_visual = true;
  bool use_audio = true;
  bool use_diffcorr = true;
  bool use_bn = true;
  bool use_crf = true;
  bool hard_mask = true;
  double bn_momentum = 0.1;
  DiffCorrConfig diffcorr;
  EncoderConfig encoder;
};

nlohmann::json to_json(const ModelConfig& config);
ModelConfig model_config_from_json(const nlohmann::json& j);

nlohmann::json to_json(const LabelScheme& scheme);
LabelScheme scheme_from_json(const nlohmann::json& j);

using VideoBatch = std::span<const VideoSequence* const>;

/// DiffCorrNet per modality -> BN per modality -> early fusion -> encoder.
class Trunk {
 public:
  Trunk(ParamStore& store, const std::string& prefix, const ModelConfig& config, Rng& rng);

  const ModelConfig& config() const { return config_; }
  int fused_dim() const { return fused_dim_; }
  const TransformerEncoder& encoder() const { return encoder_; }
  const DiffCorrNet* diffcorr_visual() const { return dc_vis_ ? &*dc_vis_ : nullptr; }
  const DiffCorrNet* diffcorr_audio() const { return dc_aud_ ? &*dc_aud_ : nullptr; }

  struct Fused {
    std::vector<ad::Var> per_video;            // n_v x fused_dim
    std::vector<std::pair<int, BatchStats>> stats;  // (modality, stats) in train mode
  };

  /// Batch norm pools every shot of the batch; a train-mode batch with fewer
  /// than two shots falls back to running statistics.
  Fused fuse(VideoBatch videos, Mode mode) const;
  ad::Var encode(const ad::Var& fused, Rng* dropout_rng = nullptr) const;

  /// Folds the batch statistics of a train-mode fuse() into the running ones.
  void commit(const Fused& fused);

 private:
  ad::Var enhance(int modality, const VideoSequence& video) const;

  ModelConfig config_;
  std::optional<DiffCorrNet> dc_vis_, dc_aud_;
  std::optional<BatchNorm> bn_vis_, bn_aud_;
  int fused_dim_ = 0;
  TransformerEncoder encoder_;
};

/// Trunk + per-shot tag emissions + constrained linear-chain CRF.
class OsMslNet {
 public:
  OsMslNet(ParamStore& store, const std::string& prefix, const ModelConfig& config, LabelScheme scheme, Rng& rng);

  const LabelScheme& scheme() const { return scheme_; }
  const Trunk& trunk() const { return trunk_; }
  Trunk& trunk() { return trunk_; }
  const TransitionMask& mask() const { return mask_; }

  /// Current CRF scores as plain values (masked entries still stored).
  CrfParams crf() const;

  struct Loss {
    ad::Var total;                 // mean over videos
    std::vector<double> per_video;
    Trunk::Fused fused;
  };
  Loss loss(VideoBatch batch, Mode mode, Rng* dropout_rng = nullptr) const;

  /// Eval-mode emissions for one video.
  Eigen::MatrixXd emissions(const VideoSequence& video) const;
  std::vector<LinkTag> predict_tags(const VideoSequence& video) const;
  std::vector<SceneAnnotation> predict(const VideoSequence& video) const;

  const ad::Var& transitions() const { return trans_; }

 private:
  ad::Var emissions_var(const ad::Var& hidden) const { return emission_.forward(hidden); }
  std::vector<LinkTag> decode_emissions(const Eigen::MatrixXd& emissions) const;

  LabelScheme scheme_;
  TransitionMask mask_;
  Trunk trunk_;
  EmissionLayer emission_;
  ad::Var trans_, start_, end_;
};

enum class HeadKind { OsMsl, MultiTask, TwoStage };
std::string head_name(HeadKind kind);
HeadKind parse_head(const std::string& name);

/// One loss evaluation of a training phase. `tasks` carries the raw values
/// logged to the learning curve under their task tags.
struct LossOutput {
  ad::Var total;
  std::vector<std::pair<std::string, double>> tasks;
  std::vector<double> per_video;
};

/// Common surface of OS-MSL and the baselines for training, prediction and
/// checkpointing.
class SceneModel {
 public:
  virtual ~SceneModel() = default;

  virtual HeadKind kind() const = 0;
  /// Scheme of the produced annotations.
  virtual const LabelScheme& scheme() const = 0;
  virtual const ModelConfig& config() const = 0;

  ParamStore& params() { return store_; }
  const ParamStore& params() const { return store_; }

  /// Training phases in order; each is optimized for the configured epochs.
  virtual std::vector<std::string> phases() const { return {head_name(kind())}; }
  /// Parameters optimized in a phase (default: all trainable).
  virtual bool optimizes(const std::string& phase, const std::string& param_name) const;
  virtual LossOutput loss(const std::string& phase, VideoBatch batch, Mode mode, Rng* dropout_rng) = 0;
  /// Applies running-statistic updates of the last train-mode loss() call.
  virtual void commit_statistics() = 0;

  virtual std::vector<SceneAnnotation> predict(const VideoSequence& video) const = 0;

  /// Head-specific hyper-parameters saved in checkpoints.
  virtual nlohmann::json extra_json() const { return nlohmann::json::object(); }

 protected:
  ParamStore store_;
};

class OsMslModel : public SceneModel {
 public:
  OsMslModel(const ModelConfig& config, LabelScheme scheme, Rng& rng);

  HeadKind kind() const override { return HeadKind::OsMsl; }
  const LabelScheme& scheme() const override { return net_.scheme(); }
  const ModelConfig& config() const override { return net_.trunk().config(); }
  LossOutput loss(const std::string& phase, VideoBatch batch, Mode mode, Rng* dropout_rng) override;
  void commit_statistics() override;
  std::vector<SceneAnnotation> predict(const VideoSequence& video) const override;

  const OsMslNet& net() const { return net_; }

 private:
  OsMslNet net_;
  std::optional<Trunk::Fused> pending_;
};

}  // namespace osmsl

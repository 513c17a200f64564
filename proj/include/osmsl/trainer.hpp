#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <string>
#include <vector>

#include "osmsl/baselines.hpp"
#include "osmsl/feature_io.hpp"
#include "osmsl/model.hpp"

namespace osmsl {

struct TrainConfig {
  std::uint64_t seed = 0;
  HeadKind head = HeadKind::OsMsl;
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  int epochs = 30;
  int batch_size = 4;  // videos per step
  double clip_norm = 5.0;
  double lambda_seg = 1.0;
  double lambda_cls = 1.0;
  int stage2_hidden = 64;
};

nlohmann::json to_json(const TrainConfig& config);
TrainConfig train_config_from_json(const nlohmann::json& j, TrainConfig base = {});

/// Per-iteration losses per task tag; each tag is normalized by its first
/// recorded value.
class CurveLog {
 public:
  struct Record {
    int iteration;
    std::string task;
    double raw_loss;
    double normalized_loss;
  };

  void add(int iteration, const std::string& task, double raw_loss);
  const std::vector<Record>& records() const { return records_; }
  std::vector<std::string> tasks() const;
  std::vector<Record> series(const std::string& task) const;

  /// CSV with header iteration,task,raw_loss,normalized_loss.
  std::string to_csv() const;
  static CurveLog from_csv(const std::string& text);

 private:
  std::vector<Record> records_;
  std::vector<std::pair<std::string, double>> first_;
};

/// Deterministic initialization from the config seed.
std::unique_ptr<SceneModel> init_model(const ModelConfig& model_config, const TrainConfig& train_config,
                                       const LabelScheme& scheme);

/// Model dims matching a corpus' feature widths.
ModelConfig with_corpus_dims(ModelConfig config, const std::vector<VideoSequence>& videos);

/// Loss of one batch; equivalent to model.loss() for single-phase heads.
LossOutput forward_loss(SceneModel& model, VideoBatch batch, Mode mode, const std::string& phase = "");

/// Adam with global-norm clipping over shuffled video minibatches, every
/// phase in turn. Throws on a non-finite loss.
CurveLog train(SceneModel& model, const std::vector<VideoSequence>& videos, const TrainConfig& config);

/// Eval-mode decoding; each output video carries predicted scenes. Videos are
/// decoded independently, so `threads` does not change results.
std::vector<VideoSequence> predict(const SceneModel& model, const std::vector<VideoSequence>& videos,
                                   int threads = 1);

/// Throws ValidationError when the model was trained for another scheme.
void check_scheme(const SceneModel& model, const LabelScheme& scheme);

/// Binary checkpoint: "OSMSLCK1", u64 manifest length, JSON manifest,
/// little-endian float64 tensors.
void save_checkpoint(const SceneModel& model, const std::filesystem::path& path);
std::unique_ptr<SceneModel> load_checkpoint(const std::filesystem::path& path);
std::string checkpoint_bytes(const SceneModel& model);
std::unique_ptr<SceneModel> checkpoint_from_bytes(const std::string& bytes);

struct GradCheckReport {
  double max_rel_error = 0.0;
  std::string worst_param;
  int params_checked = 0;
  int entries_checked = 0;
};

/// Compares analytic gradients of the batch loss against central finite
/// differences, per parameter tensor: ||g_a - g_fd|| / max(||g_a|| + ||g_fd||, 1e-6).
/// At most `max_entries` coordinates per tensor are probed (all when <= 0).
GradCheckReport gradient_check(SceneModel& model, VideoBatch batch, Mode mode, double step = 1e-5,
                               int max_entries = 0, const std::string& phase = "");

}  // namespace osmsl

#pragma once

#include <array>
#include <cstdint>
#include <json.hpp>
#include <vector>

#include "osmsl/feature_io.hpp"

namespace osmsl {

struct SynthConfig {
  std::uint64_t seed = 7;
  int n_videos = 60;
  int min_shots = 30;
  int max_shots = 50;
  int max_scene_len = 8;  // scene lengths ~ uniform [1, max_scene_len]
  int num_categories = 4;
  int d_vis = 16;
  int d_aud = 16;
  double center_scale = 0.3;   // std-dev of class-center coordinates
  double sigma_scene = 0.15;   // per-scene drift around the class center
  double sigma_shot = 0.03;    // per-shot noise
  double vis_weight = 1.0;     // informativeness of each modality
  double aud_weight = 1.0;
  bool generalized = false;    // rotate the drift process (unseen-program analogue)
};

nlohmann::json to_json(const SynthConfig& config);
SynthConfig synth_config_from_json(const nlohmann::json& j, SynthConfig base = {});

/// Category names used for a synthetic scheme with C classes.
std::vector<std::string> synth_category_names(int num_categories);

/// Corpus with gold scenes; entirely determined by the config.
Corpus generate_corpus(const SynthConfig& config);

struct CorpusSplit {
  std::vector<VideoSequence> train, val, test;
};

/// Video-level disjoint split. Fractions must sum to 1; a split with a
/// positive fraction must not come out empty.
CorpusSplit split(const std::vector<VideoSequence>& videos, std::array<double, 3> fractions, std::uint64_t seed);

/// Nearest-class-mean probe on raw concatenated features: fitted on even
/// videos, scored on odd ones (shot-level scene-label accuracy).
double linear_probe_accuracy(const Corpus& corpus);

}  // namespace osmsl

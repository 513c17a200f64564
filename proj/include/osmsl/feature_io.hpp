#pragma once

#include <Eigen/Dense>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "osmsl/label_scheme.hpp"
#include "osmsl/metrics.hpp"

namespace osmsl {

struct ShotRecord {
  std::string video_id;
  int shot_index = 0;
  double start_sec = 0.0;
  double end_sec = 0.0;
  std::vector<double> vis;
  std::vector<double> aud;

  friend bool operator==(const ShotRecord&, const ShotRecord&) = default;
};

struct VideoSequence {
  std::string video_id;
  std::vector<ShotRecord> shots;
  std::optional<std::vector<SceneAnnotation>> scenes;

  int num_shots() const { return static_cast<int>(shots.size()); }
  /// n x d matrices of the per-shot unimodal features.
  Eigen::MatrixXd visual() const;
  Eigen::MatrixXd audio() const;

  friend bool operator==(const VideoSequence&, const VideoSequence&) = default;
};

struct Corpus {
  std::vector<VideoSequence> videos;
  LabelScheme scheme;

  int d_vis() const;
  int d_aud() const;
};

/// Groups shots by video (videos ordered by id), sorts by shot index and
/// validates density, dims and finiteness. Scenes are left empty.
std::vector<VideoSequence> load_features(const std::filesystem::path& path);
void save_features(const std::filesystem::path& path, const std::vector<VideoSequence>& videos);

/// Packed little-endian binary variant of the feature file.
std::vector<VideoSequence> load_features_binary(const std::filesystem::path& path);
void save_features_binary(const std::filesystem::path& path, const std::vector<VideoSequence>& videos);

/// Same validation as load_features, for in-memory shot lists.
std::vector<VideoSequence> group_shots(std::vector<ShotRecord> shots);

/// Attaches scenes from a scenes.json file; every video in the file must exist
/// and every loaded video must receive a valid partition.
void load_scenes(const std::filesystem::path& path, std::vector<VideoSequence>& videos,
                 const LabelScheme& scheme);

/// Writes predictions.json / scenes.json (the schemas are identical).
void save_scenes(const std::filesystem::path& path, const std::vector<VideoSequence>& videos,
                 const LabelScheme& scheme);

/// Parses scenes.json into (video_id, scenes) pairs without cross-checking
/// against features; shot counts are inferred from the last end_shot.
std::vector<VideoSequence> load_scene_file(const std::filesystem::path& path, const LabelScheme& scheme);

/// scheme.json: {"mode": "SS"|"SSC", "categories": [...]}.
LabelScheme load_scheme(const std::filesystem::path& path);
void save_scheme(const std::filesystem::path& path, const LabelScheme& scheme);

void save_report(const std::filesystem::path& path, const EvalReport& report);

/// Whole-file helpers used for JSON outputs.
void write_text_file(const std::filesystem::path& path, const std::string& text);
std::string read_text_file(const std::filesystem::path& path);

}  // namespace osmsl

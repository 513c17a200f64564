#include "osmsl/synth.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "osmsl/error.hpp"
#include "osmsl/params.hpp"

namespace osmsl {

using nlohmann::json;

namespace {

Rng stream(std::uint64_t seed, std::uint64_t a, std::uint64_t b = 0) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(a), static_cast<std::uint32_t>(b)};
  return Rng(seq);
}

Eigen::MatrixXd gaussian(Rng& rng, Eigen::Index rows, Eigen::Index cols, double sigma) {
  std::normal_distribution<double> dist(0.0, 1.0);
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = sigma * dist(rng);
  }
  return m;
}

// Anisotropic drift: per-dimension scale falls linearly from 1.5 to 0.5, so a
// rotation of the drift process changes its distribution.
Eigen::VectorXd drift_profile(int d) {
  Eigen::VectorXd s(d);
  for (int i = 0; i < d; ++i) s(i) = d == 1 ? 1.0 : 1.5 - static_cast<double>(i) / (d - 1);
  return s;
}

Eigen::MatrixXd random_rotation(Rng& rng, int d) {
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(gaussian(rng, d, d, 1.0));
  return qr.householderQ() * Eigen::MatrixXd::Identity(d, d);
}

void validate(const SynthConfig& c) {
  if (c.n_videos < 1) throw ValidationError("n_videos must be >= 1");
  if (c.min_shots < 1 || c.max_shots < c.min_shots) throw ValidationError("invalid shots-per-video range");
  if (c.max_scene_len < 1) throw ValidationError("max_scene_len must be >= 1");
  if (c.num_categories < 1) throw ValidationError("num_categories must be >= 1");
  if (c.d_vis < 1 || c.d_aud < 1) throw ValidationError("feature dims must be >= 1");
  if (c.center_scale < 0 || c.sigma_scene < 0 || c.sigma_shot < 0) throw ValidationError("sigmas must be >= 0");
}

}  // namespace

json to_json(const SynthConfig& c) {
  return json{{"seed", c.seed},
              {"n_videos", c.n_videos},
              {"min_shots", c.min_shots},
              {"max_shots", c.max_shots},
              {"max_scene_len", c.max_scene_len},
              {"num_categories", c.num_categories},
              {"d_vis", c.d_vis},
              {"d_aud", c.d_aud},
              {"center_scale", c.center_scale},
              {"sigma_scene", c.sigma_scene},
              {"sigma_shot", c.sigma_shot},
              {"vis_weight", c.vis_weight},
              {"aud_weight", c.aud_weight},
              {"generalized", c.generalized}};
}

SynthConfig synth_config_from_json(const json& j, SynthConfig c) {
  c.seed = j.value("seed", c.seed);
  c.n_videos = j.value("n_videos", c.n_videos);
  c.min_shots = j.value("min_shots", c.min_shots);
  c.max_shots = j.value("max_shots", c.max_shots);
  c.max_scene_len = j.value("max_scene_len", c.max_scene_len);
  c.num_categories = j.value("num_categories", c.num_categories);
  c.d_vis = j.value("d_vis", c.d_vis);
  c.d_aud = j.value("d_aud", c.d_aud);
  c.center_scale = j.value("center_scale", c.center_scale);
  c.sigma_scene = j.value("sigma_scene", c.sigma_scene);
  c.sigma_shot = j.value("sigma_shot", c.sigma_shot);
  c.vis_weight = j.value("vis_weight", c.vis_weight);
  c.aud_weight = j.value("aud_weight", c.aud_weight);
  c.generalized = j.value("generalized", c.generalized);
  return c;
}

std::vector<std::string> synth_category_names(int num_categories) {
  static const char* kNames[] = {"Studio", "Meeting", "Outdoor", "Interview", "Remote", "Speech", "NewsBoard", "Others"};
  std::vector<std::string> names;
  for (int c = 0; c < num_categories; ++c) {
    names.push_back(c < 8 ? std::string(kNames[c]) : "Category" + std::to_string(c));
  }
  return names;
}

Corpus generate_corpus(const SynthConfig& config) {
  validate(config);
  Corpus corpus;
  corpus.scheme = LabelScheme::classification(synth_category_names(config.num_categories));

  const int dims[2] = {config.d_vis, config.d_aud};
  const double weights[2] = {config.vis_weight, config.aud_weight};
  Eigen::MatrixXd centers[2];
  Eigen::MatrixXd drift_map[2];  // d x d, applied to standard-normal drift draws
  {
    Rng rng = stream(config.seed, 0);
    for (int m = 0; m < 2; ++m) centers[m] = gaussian(rng, config.num_categories, dims[m], config.center_scale);
    for (int m = 0; m < 2; ++m) {
      drift_map[m] = drift_profile(dims[m]).asDiagonal();
      if (config.generalized) drift_map[m] = random_rotation(rng, dims[m]) * drift_map[m];
    }
  }

  for (int v = 0; v < config.n_videos; ++v) {
    Rng rng = stream(config.seed, 1, static_cast<std::uint64_t>(v));
    std::uniform_int_distribution<int> n_shots_dist(config.min_shots, config.max_shots);
    std::uniform_int_distribution<int> len_dist(1, config.max_scene_len);
    std::uniform_int_distribution<int> cat_dist(0, config.num_categories - 1);
    std::uniform_real_distribution<double> duration(1.0, 5.0);
    std::normal_distribution<double> normal(0.0, 1.0);

    VideoSequence video;
    char id[32];
    std::snprintf(id, sizeof id, "video_%04d", v);
    video.video_id = id;
    const int n = n_shots_dist(rng);
    std::vector<SceneAnnotation> scenes;
    double t = 0.0;
    for (int start = 0; start < n;) {
      const int end = std::min(n, start + len_dist(rng)) - 1;
      const int category = cat_dist(rng);
      scenes.push_back({start, end, category});
      Eigen::VectorXd anchor[2];
      for (int m = 0; m < 2; ++m) {
        Eigen::VectorXd z(dims[m]);
        for (auto& x : z) x = normal(rng);
        anchor[m] = centers[m].row(category).transpose() + config.sigma_scene * (drift_map[m] * z);
      }
      for (int j = start; j <= end; ++j) {
        ShotRecord shot;
        shot.video_id = video.video_id;
        shot.shot_index = j;
        shot.start_sec = t;
        t += duration(rng);
        shot.end_sec = t;
        for (int m = 0; m < 2; ++m) {
          auto& out = m == 0 ? shot.vis : shot.aud;
          out.resize(dims[m]);
          for (int d = 0; d < dims[m]; ++d) out[d] = weights[m] * anchor[m](d) + config.sigma_shot * normal(rng);
        }
        video.shots.push_back(std::move(shot));
      }
      start = end + 1;
    }
    video.scenes = std::move(scenes);
    corpus.videos.push_back(std::move(video));
  }
  return corpus;
}

CorpusSplit split(const std::vector<VideoSequence>& videos, std::array<double, 3> fractions, std::uint64_t seed) {
  const double total = fractions[0] + fractions[1] + fractions[2];
  if (std::abs(total - 1.0) > 1e-9 || std::any_of(fractions.begin(), fractions.end(), [](double f) { return f < 0; })) {
    throw ValidationError("split fractions must be non-negative and sum to 1");
  }
  std::vector<std::size_t> order(videos.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng = stream(seed, 2);
  std::shuffle(order.begin(), order.end(), rng);
  const auto n = static_cast<double>(videos.size());
  const auto n_train = static_cast<std::size_t>(std::llround(fractions[0] * n));
  const auto n_val = std::min(videos.size() - n_train, static_cast<std::size_t>(std::llround(fractions[1] * n)));
  CorpusSplit out;
  for (std::size_t i = 0; i < order.size(); ++i) {
    auto& dest = i < n_train ? out.train : (i < n_train + n_val ? out.val : out.test);
    dest.push_back(videos[order[i]]);
  }
  const std::vector<VideoSequence>* parts[3] = {&out.train, &out.val, &out.test};
  const char* names[3] = {"train", "val", "test"};
  for (int s = 0; s < 3; ++s) {
    if (fractions[s] > 0 && parts[s]->empty()) throw ValidationError(std::string("empty ") + names[s] + " split");
  }
  // Restore id order inside each split.
  for (auto* part : {&out.train, &out.val, &out.test}) {
    std::sort(part->begin(), part->end(), [](const auto& a, const auto& b) { return a.video_id < b.video_id; });
  }
  return out;
}

double linear_probe_accuracy(const Corpus& corpus) {
  const int C = corpus.scheme.num_categories();
  if (C < 1 || corpus.videos.empty()) throw ValidationError("probe needs a categorized, non-empty corpus");
  auto features = [](const VideoSequence& v) {
    Eigen::MatrixXd f(v.num_shots(), v.shots.front().vis.size() + v.shots.front().aud.size());
    f << v.visual(), v.audio();
    return f;
  };
  auto labels = [](const VideoSequence& v) {
    std::vector<int> y(v.num_shots());
    for (const auto& s : *v.scenes) {
      for (int j = s.start_shot; j <= s.end_shot; ++j) y[j] = *s.category;
    }
    return y;
  };
  const bool single = corpus.videos.size() == 1;
  const Eigen::Index d = features(corpus.videos.front()).cols();
  Eigen::MatrixXd sums = Eigen::MatrixXd::Zero(C, d);
  Eigen::VectorXd counts = Eigen::VectorXd::Zero(C);
  for (std::size_t i = 0; i < corpus.videos.size(); i += single ? 1 : 2) {
    const auto f = features(corpus.videos[i]);
    const auto y = labels(corpus.videos[i]);
    for (Eigen::Index j = 0; j < f.rows(); ++j) {
      sums.row(y[j]) += f.row(j);
      counts(y[j]) += 1;
    }
  }
  long correct = 0, total = 0;
  for (std::size_t i = single ? 0 : 1; i < corpus.videos.size(); i += single ? 1 : 2) {
    const auto f = features(corpus.videos[i]);
    const auto y = labels(corpus.videos[i]);
    for (Eigen::Index j = 0; j < f.rows(); ++j) {
      int best = -1;
      double best_dist = 0.0;
      for (int c = 0; c < C; ++c) {
        if (counts(c) == 0) continue;
        const double dist = (f.row(j) - sums.row(c) / counts(c)).squaredNorm();
        if (best < 0 || dist < best_dist) {
          best = c;
          best_dist = dist;
        }
      }
      correct += best == y[j];
      ++total;
    }
  }
  return total == 0 ? 0.0 : static_cast<double>(correct) / static_cast<double>(total);
}

}  // namespace osmsl

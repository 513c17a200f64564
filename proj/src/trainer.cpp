#include "osmsl/trainer.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>
#include <sstream>
#include <thread>

#include "osmsl/error.hpp"

namespace osmsl {

using nlohmann::json;

namespace {

constexpr char kCheckpointMagic[8] = {'O', 'S', 'M', 'S', 'L', 'C', 'K', '1'};

Rng derived_rng(std::uint64_t seed, std::uint64_t stream) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream)};
  return Rng(seq);
}

std::string first_phase(const SceneModel& model, const std::string& phase) {
  return phase.empty() ? model.phases().front() : phase;
}

void append_u64(std::string& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

std::uint64_t read_u64(const std::string& in, std::size_t at) {
  if (at + 8 > in.size()) throw IoError("truncated checkpoint");
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(static_cast<unsigned char>(in[at + i])) << (8 * i);
  return v;
}

}  // namespace

json to_json(const TrainConfig& c) {
  return json{{"seed", c.seed},
              {"head", head_name(c.head)},
              {"lr", c.lr},
              {"beta1", c.beta1},
              {"beta2", c.beta2},
              {"adam_eps", c.adam_eps},
              {"epochs", c.epochs},
              {"batch_size", c.batch_size},
              {"clip_norm", c.clip_norm},
              {"lambda_seg", c.lambda_seg},
              {"lambda_cls", c.lambda_cls},
              {"stage2_hidden", c.stage2_hidden}};
}

TrainConfig train_config_from_json(const json& j, TrainConfig c) {
  c.seed = j.value("seed", c.seed);
  if (j.contains("head")) c.head = parse_head(j["head"].get<std::string>());
  c.lr = j.value("lr", c.lr);
  c.beta1 = j.value("beta1", c.beta1);
  c.beta2 = j.value("beta2", c.beta2);
  c.adam_eps = j.value("adam_eps", c.adam_eps);
  c.epochs = j.value("epochs", c.epochs);
  c.batch_size = j.value("batch_size", c.batch_size);
  c.clip_norm = j.value("clip_norm", c.clip_norm);
  c.lambda_seg = j.value("lambda_seg", c.lambda_seg);
  c.lambda_cls = j.value("lambda_cls", c.lambda_cls);
  c.stage2_hidden = j.value("stage2_hidden", c.stage2_hidden);
  return c;
}

// ---------------------------------------------------------------- CurveLog

void CurveLog::add(int iteration, const std::string& task, double raw_loss) {
  auto it = std::find_if(first_.begin(), first_.end(), [&](const auto& p) { return p.first == task; });
  if (it == first_.end()) {
    first_.emplace_back(task, raw_loss);
    it = first_.end() - 1;
  }
  const double normalized = it->second == 0.0 ? 0.0 : raw_loss / it->second;
  records_.push_back({iteration, task, raw_loss, normalized});
}

std::vector<std::string> CurveLog::tasks() const {
  std::vector<std::string> out;
  for (const auto& [task, first] : first_) out.push_back(task);
  return out;
}

std::vector<CurveLog::Record> CurveLog::series(const std::string& task) const {
  std::vector<Record> out;
  for (const auto& r : records_) {
    if (r.task == task) out.push_back(r);
  }
  return out;
}

std::string CurveLog::to_csv() const {
  std::string out = "iteration,task,raw_loss,normalized_loss\n";
  char line[256];
  for (const auto& r : records_) {
    std::snprintf(line, sizeof line, "%d,%s,%.17g,%.17g\n", r.iteration, r.task.c_str(), r.raw_loss,
                  r.normalized_loss);
    out += line;
  }
  return out;
}

CurveLog CurveLog::from_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line) || line.rfind("iteration,task,raw_loss,normalized_loss", 0) != 0) {
    throw ValidationError("curve CSV lacks the expected header");
  }
  CurveLog log;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::istringstream row(line);
    std::string it, task, raw, norm;
    if (!std::getline(row, it, ',') || !std::getline(row, task, ',') || !std::getline(row, raw, ',') ||
        !std::getline(row, norm)) {
      throw ValidationError("malformed curve CSV line " + std::to_string(line_no));
    }
    log.add(std::stoi(it), task, std::stod(raw));
  }
  return log;
}

// ---------------------------------------------------------------- models

std::unique_ptr<SceneModel> init_model(const ModelConfig& model_config, const TrainConfig& train_config,
                                       const LabelScheme& scheme) {
  Rng rng = derived_rng(train_config.seed, 0);
  switch (train_config.head) {
    case HeadKind::OsMsl:
      return std::make_unique<OsMslModel>(model_config, scheme, rng);
    case HeadKind::MultiTask:
      return std::make_unique<MultiTaskModel>(model_config, scheme, rng, train_config.lambda_seg,
                                              train_config.lambda_cls);
    case HeadKind::TwoStage:
      return std::make_unique<TwoStageModel>(model_config, scheme, rng, train_config.stage2_hidden);
  }
  throw Error("unreachable head kind");
}

ModelConfig with_corpus_dims(ModelConfig config, const std::vector<VideoSequence>& videos) {
  if (videos.empty() || videos.front().shots.empty()) throw ValidationError("empty corpus");
  config.d_vis = static_cast<int>(videos.front().shots.front().vis.size());
  config.d_aud = static_cast<int>(videos.front().shots.front().aud.size());
  return config;
}

LossOutput forward_loss(SceneModel& model, VideoBatch batch, Mode mode, const std::string& phase) {
  return model.loss(first_phase(model, phase), batch, mode, nullptr);
}

CurveLog train(SceneModel& model, const std::vector<VideoSequence>& videos, const TrainConfig& config) {
  if (videos.empty()) throw ValidationError("training corpus is empty");
  if (config.batch_size < 1) throw ValidationError("batch_size must be >= 1");
  Rng rng = derived_rng(config.seed, 1);
  CurveLog curve;
  auto& entries = model.params().entries();

  for (const auto& phase : model.phases()) {
    std::vector<std::size_t> active;
    for (std::size_t i = 0; i < entries.size(); ++i) {
      if (entries[i].trainable && model.optimizes(phase, entries[i].name)) active.push_back(i);
    }
    std::vector<ad::Matrix> m(active.size()), v(active.size());
    for (std::size_t a = 0; a < active.size(); ++a) {
      const auto& value = entries[active[a]].var->value;
      m[a] = ad::Matrix::Zero(value.rows(), value.cols());
      v[a] = m[a];
    }
    int step = 0;
    std::vector<std::size_t> order(videos.size());
    for (int epoch = 0; epoch < config.epochs; ++epoch) {
      std::iota(order.begin(), order.end(), std::size_t{0});
      std::shuffle(order.begin(), order.end(), rng);
      for (std::size_t b = 0; b < order.size(); b += config.batch_size) {
        std::vector<const VideoSequence*> batch;
        for (std::size_t i = b; i < std::min(order.size(), b + config.batch_size); ++i) {
          batch.push_back(&videos[order[i]]);
        }
        model.params().zero_grad();
        LossOutput out = model.loss(phase, batch, Mode::Train, &rng);
        if (!std::isfinite(out.total->scalar())) {
          std::ostringstream msg;
          msg << "non-finite loss in phase " << phase << ", epoch " << epoch << ", step " << step + 1 << ", videos:";
          for (const auto* video : batch) msg << ' ' << video->video_id;
          throw Error(msg.str());
        }
        ad::backward(out.total);
        model.commit_statistics();
        ++step;

        double norm_sq = 0.0;
        for (std::size_t idx : active) norm_sq += entries[idx].var->grad_or_zero().squaredNorm();
        const double norm = std::sqrt(norm_sq);
        const double clip = (config.clip_norm > 0.0 && norm > config.clip_norm) ? config.clip_norm / norm : 1.0;
        const double bc1 = 1.0 - std::pow(config.beta1, step);
        const double bc2 = 1.0 - std::pow(config.beta2, step);
        for (std::size_t a = 0; a < active.size(); ++a) {
          auto& var = entries[active[a]].var;
          const ad::Matrix g = var->grad_or_zero() * clip;
          m[a] = config.beta1 * m[a] + (1.0 - config.beta1) * g;
          v[a] = config.beta2 * v[a] + (1.0 - config.beta2) * g.cwiseProduct(g);
          var->value.array() -=
              config.lr * (m[a].array() / bc1) / ((v[a].array() / bc2).sqrt() + config.adam_eps);
        }
        for (const auto& [task, value] : out.tasks) curve.add(step, task, value);
      }
    }
  }
  model.params().zero_grad();
  return curve;
}

std::vector<VideoSequence> predict(const SceneModel& model, const std::vector<VideoSequence>& videos, int threads) {
  std::vector<VideoSequence> out(videos.size());
  auto work = [&](std::size_t first, std::size_t stride) {
    for (std::size_t i = first; i < videos.size(); i += stride) {
      VideoSequence v;
      v.video_id = videos[i].video_id;
      v.shots = videos[i].shots;
      v.scenes = model.predict(videos[i]);
      out[i] = std::move(v);
    }
  };
  const std::size_t n_threads = std::clamp<std::size_t>(threads, 1, std::max<std::size_t>(videos.size(), 1));
  if (n_threads == 1) {
    work(0, 1);
    return out;
  }
  std::vector<std::thread> pool;
  std::vector<std::exception_ptr> errors(n_threads);
  for (std::size_t t = 0; t < n_threads; ++t) {
    pool.emplace_back([&, t] {
      try {
        work(t, n_threads);
      } catch (...) {
        errors[t] = std::current_exception();
      }
    });
  }
  for (auto& th : pool) th.join();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  return out;
}

void check_scheme(const SceneModel& model, const LabelScheme& scheme) {
  if (model.scheme().fingerprint() != scheme.fingerprint()) {
    throw ValidationError("scheme mismatch: model was trained for '" + model.scheme().fingerprint() +
                          "', data uses '" + scheme.fingerprint() + "'");
  }
}

// ---------------------------------------------------------------- checkpoints

std::string checkpoint_bytes(const SceneModel& model) {
  json manifest;
  manifest["format"] = "OSMSLCK1";
  manifest["version"] = 1;
  manifest["head"] = head_name(model.kind());
  manifest["scheme"] = to_json(model.scheme());
  manifest["scheme_fingerprint"] = model.scheme().fingerprint();
  manifest["model"] = to_json(model.config());
  manifest["extra"] = model.extra_json();
  manifest["tensors"] = json::array();
  std::uint64_t offset = 0;
  for (const auto& e : model.params().entries()) {
    const auto& value = e.var->value;
    manifest["tensors"].push_back({{"name", e.name},
                                   {"shape", {value.rows(), value.cols()}},
                                   {"dtype", "f64"},
                                   {"trainable", e.trainable},
                                   {"offset", offset}});
    offset += static_cast<std::uint64_t>(value.size()) * 8;
  }
  const std::string text = manifest.dump();
  std::string out(kCheckpointMagic, sizeof kCheckpointMagic);
  append_u64(out, text.size());
  out += text;
  for (const auto& e : model.params().entries()) {
    const auto& value = e.var->value;
    // Row-major element order.
    for (Eigen::Index r = 0; r < value.rows(); ++r) {
      for (Eigen::Index c = 0; c < value.cols(); ++c) append_u64(out, std::bit_cast<std::uint64_t>(value(r, c)));
    }
  }
  return out;
}

std::unique_ptr<SceneModel> checkpoint_from_bytes(const std::string& bytes) {
  if (bytes.size() < 8 || std::memcmp(bytes.data(), kCheckpointMagic, 8) != 0) {
    throw ValidationError("checkpoint magic/version mismatch (expected OSMSLCK1)");
  }
  const auto len = read_u64(bytes, 8);
  if (16 + len > bytes.size()) throw IoError("truncated checkpoint manifest");
  json manifest;
  try {
    manifest = json::parse(bytes.substr(16, len));
  } catch (const json::parse_error& e) {
    throw ValidationError(std::string("corrupt checkpoint manifest: ") + e.what());
  }
  if (manifest.value("version", 0) != 1) throw ValidationError("checkpoint magic/version mismatch");

  const LabelScheme scheme = scheme_from_json(manifest.at("scheme"));
  if (scheme.fingerprint() != manifest.at("scheme_fingerprint").get<std::string>()) {
    throw ValidationError("checkpoint scheme fingerprint does not match its scheme");
  }
  TrainConfig tc;
  tc.head = parse_head(manifest.at("head").get<std::string>());
  tc = train_config_from_json(manifest.value("extra", json::object()), tc);
  auto model = init_model(model_config_from_json(manifest.at("model")), tc, scheme);

  const auto& tensors = manifest.at("tensors");
  auto& entries = model->params().entries();
  if (tensors.size() != entries.size()) {
    throw ValidationError("checkpoint has " + std::to_string(tensors.size()) + " tensors, model expects " +
                          std::to_string(entries.size()));
  }
  const std::size_t data_start = 16 + len;
  for (std::size_t i = 0; i < entries.size(); ++i) {
    const auto& t = tensors[i];
    auto& value = entries[i].var->value;
    const auto shape = t.at("shape").get<std::vector<Eigen::Index>>();
    if (t.at("name").get<std::string>() != entries[i].name || shape.size() != 2 || shape[0] != value.rows() ||
        shape[1] != value.cols()) {
      throw ValidationError("checkpoint tensor '" + t.at("name").get<std::string>() + "' does not match model");
    }
    if (t.at("dtype").get<std::string>() != "f64") throw ValidationError("unsupported tensor dtype");
    std::size_t at = data_start + t.at("offset").get<std::size_t>();
    if (at + static_cast<std::size_t>(value.size()) * 8 > bytes.size()) throw IoError("truncated checkpoint data");
    for (Eigen::Index r = 0; r < value.rows(); ++r) {
      for (Eigen::Index c = 0; c < value.cols(); ++c, at += 8) value(r, c) = std::bit_cast<double>(read_u64(bytes, at));
    }
  }
  return model;
}

void save_checkpoint(const SceneModel& model, const std::filesystem::path& path) {
  write_text_file(path, checkpoint_bytes(model));
}

std::unique_ptr<SceneModel> load_checkpoint(const std::filesystem::path& path) {
  return checkpoint_from_bytes(read_text_file(path));
}

// ---------------------------------------------------------------- gradient check

GradCheckReport gradient_check(SceneModel& model, VideoBatch batch, Mode mode, double step, int max_entries,
                               const std::string& phase_arg) {
  const std::string phase = first_phase(model, phase_arg);
  auto& entries = model.params().entries();
  model.params().zero_grad();
  {
    const LossOutput out = model.loss(phase, batch, mode, nullptr);
    ad::backward(out.total);
  }
  GradCheckReport report;
  for (auto& e : entries) {
    if (!e.trainable || !model.optimizes(phase, e.name)) continue;
    const ad::Matrix analytic = e.var->grad_or_zero();
    auto& value = e.var->value;
    const Eigen::Index size = value.size();
    const Eigen::Index probes = max_entries > 0 ? std::min<Eigen::Index>(size, max_entries) : size;
    Eigen::VectorXd a(probes), fd(probes);
    for (Eigen::Index p = 0; p < probes; ++p) {
      const Eigen::Index idx = probes == size ? p : (p * size) / probes;
      double& x = value.data()[idx];
      const double saved = x;
      ad::NoGradGuard no_grad;
      x = saved + step;
      const double up = model.loss(phase, batch, mode, nullptr).total->scalar();
      x = saved - step;
      const double down = model.loss(phase, batch, mode, nullptr).total->scalar();
      x = saved;
      fd(p) = (up - down) / (2.0 * step);
      a(p) = analytic.data()[idx];
    }
    const double denom = std::max(a.norm() + fd.norm(), 1e-6);
    const double rel = (a - fd).norm() / denom;
    ++report.params_checked;
    report.entries_checked += static_cast<int>(probes);
    if (rel > report.max_rel_error) {
      report.max_rel_error = rel;
      report.worst_param = e.name;
    }
  }
  model.params().zero_grad();
  return report;
}

}  // namespace osmsl

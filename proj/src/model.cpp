#include "osmsl/model.hpp"

#include "osmsl/error.hpp"

namespace osmsl {

using nlohmann::json;

namespace {

constexpr int kVisual = 0;
constexpr int kAudio = 1;

}  // namespace

json to_json(const ModelConfig& c) {
  return json{{"d_vis", c.d_vis},
              {"d_aud", c.d_aud},
              {"use_visual", c.use_visual},
              {"use_audio", c.use_audio},
              {"use_diffcorr", c.use_diffcorr},
              {"use_bn", c.use_bn},
              {"use_crf", c.use_crf},
              {"hard_mask", c.hard_mask},
              {"bn_momentum", c.bn_momentum},
              {"diffcorr",
               {{"k", c.diffcorr.k},
                {"d_e", c.diffcorr.d_e},
                {"d_a", c.diffcorr.d_a},
                {"d_g", c.diffcorr.d_g},
                {"attention_normalize", c.diffcorr.attention_normalize},
                {"split_embed", c.diffcorr.split_embed}}},
              {"encoder",
               {{"n_layers", c.encoder.n_layers},
                {"n_heads", c.encoder.n_heads},
                {"d_m", c.encoder.d_model},
                {"ff_dim", c.encoder.d_ff},
                {"n_max", c.encoder.max_len},
                {"chunk_overlap", c.encoder.chunk_overlap},
                {"dropout", c.encoder.dropout}}}};
}

ModelConfig model_config_from_json(const json& j) {
  ModelConfig c;
  c.d_vis = j.value("d_vis", c.d_vis);
  c.d_aud = j.value("d_aud", c.d_aud);
  c.use_visual = j.value("use_visual", c.use_visual);
  c.use_audio = j.value("use_audio", c.use_audio);
  c.use_diffcorr = j.value("use_diffcorr", c.use_diffcorr);
  c.use_bn = j.value("use_bn", c.use_bn);
  c.use_crf = j.value("use_crf", c.use_crf);
  c.hard_mask = j.value("hard_mask", c.hard_mask);
  c.bn_momentum = j.value("bn_momentum", c.bn_momentum);
  if (j.contains("diffcorr")) {
    const auto& d = j["diffcorr"];
    c.diffcorr.k = d.value("k", c.diffcorr.k);
    c.diffcorr.d_e = d.value("d_e", c.diffcorr.d_e);
    c.diffcorr.d_a = d.value("d_a", c.diffcorr.d_a);
    c.diffcorr.d_g = d.value("d_g", c.diffcorr.d_g);
    c.diffcorr.attention_normalize = d.value("attention_normalize", c.diffcorr.attention_normalize);
    c.diffcorr.split_embed = d.value("split_embed", c.diffcorr.split_embed);
  }
  if (j.contains("encoder")) {
    const auto& e = j["encoder"];
    c.encoder.n_layers = e.value("n_layers", c.encoder.n_layers);
    c.encoder.n_heads = e.value("n_heads", c.encoder.n_heads);
    c.encoder.d_model = e.value("d_m", c.encoder.d_model);
    c.encoder.d_ff = e.value("ff_dim", c.encoder.d_ff);
    c.encoder.max_len = e.value("n_max", c.encoder.max_len);
    c.encoder.chunk_overlap = e.value("chunk_overlap", c.encoder.chunk_overlap);
    c.encoder.dropout = e.value("dropout", c.encoder.dropout);
  }
  return c;
}

json to_json(const LabelScheme& scheme) {
  return json{{"mode", scheme.has_categories() ? "SSC" : "SS"}, {"categories", scheme.categories()}};
}

LabelScheme scheme_from_json(const json& j) {
  const auto mode = j.at("mode").get<std::string>();
  if (mode == "SS") return LabelScheme::segmentation();
  if (mode == "SSC") return LabelScheme::classification(j.at("categories").get<std::vector<std::string>>());
  throw ValidationError("unknown scheme mode '" + mode + "'");
}

// ---------------------------------------------------------------- Trunk

Trunk::Trunk(ParamStore& store, const std::string& prefix, const ModelConfig& config, Rng& rng)
    : config_(config),
      dc_vis_(config.use_visual && config.use_diffcorr
                  ? std::optional<DiffCorrNet>(std::in_place, store, prefix + ".diffcorr_vis", config.d_vis,
                                               config.diffcorr, rng)
                  : std::nullopt),
      dc_aud_(config.use_audio && config.use_diffcorr
                  ? std::optional<DiffCorrNet>(std::in_place, store, prefix + ".diffcorr_aud", config.d_aud,
                                               config.diffcorr, rng)
                  : std::nullopt),
      fused_dim_([&] {
        if (!config.use_visual && !config.use_audio) throw ValidationError("at least one modality must be enabled");
        auto width = [&](int d) { return config.use_diffcorr ? 2 * d + config.diffcorr.resolved(d).d_g : d; };
        return (config.use_visual ? width(config.d_vis) : 0) + (config.use_audio ? width(config.d_aud) : 0);
      }()),
      encoder_(store, prefix + ".encoder", fused_dim_, config.encoder, rng) {
  // BN parameters are registered after the encoder; they draw no randomness.
  auto width = [&](int d) { return config.use_diffcorr ? 2 * d + config.diffcorr.resolved(d).d_g : d; };
  if (config.use_bn && config.use_visual) {
    bn_vis_.emplace(store, prefix + ".bn_vis", width(config.d_vis), config.bn_momentum);
  }
  if (config.use_bn && config.use_audio) {
    bn_aud_.emplace(store, prefix + ".bn_aud", width(config.d_aud), config.bn_momentum);
  }
}

ad::Var Trunk::enhance(int modality, const VideoSequence& video) const {
  const bool visual = modality == kVisual;
  const int expected = visual ? config_.d_vis : config_.d_aud;
  const ad::Matrix raw = visual ? video.visual() : video.audio();
  if (raw.cols() != expected) {
    throw ValidationError("video '" + video.video_id + "': " + (visual ? "visual" : "audio") + " dim " +
                          std::to_string(raw.cols()) + " does not match model dim " + std::to_string(expected));
  }
  const ad::Var features = ad::constant(raw);
  const auto& dc = visual ? dc_vis_ : dc_aud_;
  return dc ? dc->enhance(features) : features;
}

Trunk::Fused Trunk::fuse(VideoBatch videos, Mode mode) const {
  if (videos.empty()) throw ValidationError("empty batch");
  Fused out;
  std::vector<std::vector<ad::Var>> blocks(videos.size());
  long total_shots = 0;
  for (const auto* v : videos) total_shots += v->num_shots();
  const Mode bn_mode = (mode == Mode::Train && total_shots < 2) ? Mode::Eval : mode;

  for (int modality : {kVisual, kAudio}) {
    if (modality == kVisual ? !config_.use_visual : !config_.use_audio) continue;
    std::vector<ad::Var> enhanced;
    for (const auto* v : videos) enhanced.push_back(enhance(modality, *v));
    const auto& bn = modality == kVisual ? bn_vis_ : bn_aud_;
    if (!bn) {
      for (std::size_t i = 0; i < videos.size(); ++i) blocks[i].push_back(enhanced[i]);
      continue;
    }
    BatchStats stats;
    const ad::Var normed = bn->forward(ad::vstack(enhanced), bn_mode, &stats);
    if (bn_mode == Mode::Train) out.stats.emplace_back(modality, stats);
    Eigen::Index at = 0;
    for (std::size_t i = 0; i < videos.size(); ++i) {
      blocks[i].push_back(ad::slice_rows(normed, at, enhanced[i]->rows()));
      at += enhanced[i]->rows();
    }
  }
  for (auto& b : blocks) out.per_video.push_back(osmsl::fuse(b));
  return out;
}

ad::Var Trunk::encode(const ad::Var& fused, Rng* dropout_rng) const {
  return encoder_.forward_chunked(fused, dropout_rng);
}

void Trunk::commit(const Fused& fused) {
  for (const auto& [modality, stats] : fused.stats) {
    auto& bn = modality == kVisual ? bn_vis_ : bn_aud_;
    if (bn) bn->update_running(stats);
  }
}

// ---------------------------------------------------------------- OsMslNet

OsMslNet::OsMslNet(ParamStore& store, const std::string& prefix, const ModelConfig& config, LabelScheme scheme,
                   Rng& rng)
    : scheme_(std::move(scheme)),
      mask_(transition_mask(scheme_)),
      trunk_(store, prefix + ".trunk", config, rng),
      emission_(store, prefix + ".emission", config.encoder.d_model, scheme_.num_tags(), rng) {
  const int T = scheme_.num_tags();
  trans_ = store.add_zeros(prefix + ".crf.transitions", T, T);
  start_ = store.add_zeros(prefix + ".crf.start", 1, T);
  end_ = store.add_zeros(prefix + ".crf.end", 1, T);
}

CrfParams OsMslNet::crf() const {
  CrfParams c;
  c.transitions = trans_->value;
  c.start = start_->value.row(0);
  c.end = end_->value.row(0);
  c.mask = mask_;
  c.hard_mask = trunk_.config().hard_mask;
  return c;
}

OsMslNet::Loss OsMslNet::loss(VideoBatch batch, Mode mode, Rng* dropout_rng) const {
  Loss out;
  out.fused = trunk_.fuse(batch, mode);
  const bool use_crf = trunk_.config().use_crf;
  const bool hard = trunk_.config().hard_mask;
  std::vector<ad::Var> terms;
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const auto& video = *batch[i];
    if (!video.scenes) throw ValidationError("video '" + video.video_id + "' has no gold scenes");
    const auto gold = to_indices(encode(*video.scenes, video.num_shots(), scheme_), scheme_);
    const ad::Var e = emissions_var(trunk_.encode(out.fused.per_video[i], dropout_rng));
    ad::Var term = use_crf ? crf_nll(e, trans_, start_, end_, mask_, hard, gold) : ad::softmax_cross_entropy(e, gold);
    out.per_video.push_back(term->scalar());
    terms.push_back(term);
  }
  ad::Var total = terms[0];
  for (std::size_t i = 1; i < terms.size(); ++i) total = ad::add(total, terms[i]);
  out.total = ad::scale(total, 1.0 / static_cast<double>(terms.size()));
  return out;
}

Eigen::MatrixXd OsMslNet::emissions(const VideoSequence& video) const {
  ad::NoGradGuard no_grad;
  const VideoSequence* one[] = {&video};
  const auto fused = trunk_.fuse(one, Mode::Eval);
  return emissions_var(trunk_.encode(fused.per_video[0]))->value;
}

std::vector<LinkTag> OsMslNet::decode_emissions(const Eigen::MatrixXd& e) const {
  std::vector<int> best;
  if (trunk_.config().use_crf) {
    best = viterbi(e, crf()).tags;
  } else {
    best.resize(e.rows());
    for (Eigen::Index j = 0; j < e.rows(); ++j) {
      Eigen::Index arg;
      e.row(j).maxCoeff(&arg);
      best[j] = static_cast<int>(arg);
    }
  }
  auto tags = from_indices(best, scheme_);
  // Unconstrained decoders can emit ungrammatical sequences.
  if (!trunk_.config().use_crf || !trunk_.config().hard_mask) tags = repair(tags, scheme_);
  return tags;
}

std::vector<LinkTag> OsMslNet::predict_tags(const VideoSequence& video) const {
  return decode_emissions(emissions(video));
}

std::vector<SceneAnnotation> OsMslNet::predict(const VideoSequence& video) const {
  return decode(predict_tags(video), scheme_);
}

// ---------------------------------------------------------------- heads

std::string head_name(HeadKind kind) {
  switch (kind) {
    case HeadKind::OsMsl:
      return "osmsl";
    case HeadKind::MultiTask:
      return "multitask";
    case HeadKind::TwoStage:
      return "twostage";
  }
  return "?";
}

HeadKind parse_head(const std::string& name) {
  if (name == "osmsl") return HeadKind::OsMsl;
  if (name == "multitask") return HeadKind::MultiTask;
  if (name == "twostage") return HeadKind::TwoStage;
  throw ValidationError("unknown head '" + name + "' (expected osmsl|multitask|twostage)");
}

bool SceneModel::optimizes(const std::string& /*phase*/, const std::string& /*param_name*/) const { return true; }

OsMslModel::OsMslModel(const ModelConfig& config, LabelScheme scheme, Rng& rng)
    : net_(store_, "osmsl", config, std::move(scheme), rng) {}

LossOutput OsMslModel::loss(const std::string& /*phase*/, VideoBatch batch, Mode mode, Rng* dropout_rng) {
  auto l = net_.loss(batch, mode, dropout_rng);
  LossOutput out;
  out.total = l.total;
  out.per_video = std::move(l.per_video);
  out.tasks.emplace_back(head_name(kind()), l.total->scalar());
  if (mode == Mode::Train) pending_ = std::move(l.fused);
  return out;
}

void OsMslModel::commit_statistics() {
  if (pending_) net_.trunk().commit(*pending_);
  pending_.reset();
}

std::vector<SceneAnnotation> OsMslModel::predict(const VideoSequence& video) const { return net_.predict(video); }

}  // namespace osmsl

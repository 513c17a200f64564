#include "osmsl/baselines.hpp"

#include <cmath>

#include "osmsl/error.hpp"

namespace osmsl {

namespace {

void require_categories(const LabelScheme& scheme, const char* head) {
  if (!scheme.has_categories()) {
    throw ValidationError(std::string(head) + " baseline needs an SSC scheme with categories");
  }
}

ad::Var mean_of(const std::vector<ad::Var>& terms) {
  ad::Var total = terms[0];
  for (std::size_t i = 1; i < terms.size(); ++i) total = ad::add(total, terms[i]);
  return ad::scale(total, 1.0 / static_cast<double>(terms.size()));
}

}  // namespace

// ---------------------------------------------------------------- multi-task

MultiTaskModel::MultiTaskModel(const ModelConfig& config, LabelScheme scheme, Rng& rng, double lambda_seg,
                               double lambda_cls)
    : scheme_(std::move(scheme)),
      lambda_seg_(lambda_seg),
      lambda_cls_(lambda_cls),
      trunk_((require_categories(scheme_, "multitask"), store_), "multitask.trunk", config, rng) {
  if (lambda_seg < 0 || lambda_cls < 0) throw ValidationError("loss weights must be non-negative");
  const int d = config.encoder.d_model;
  boundary_w_ = store_.add_uniform("multitask.boundary.w", d, 1, rng);
  boundary_b_ = store_.add_zeros("multitask.boundary.b", 1, 1);
  class_w_ = store_.add_uniform("multitask.class.w", d, scheme_.num_categories(), rng);
  class_b_ = store_.add_zeros("multitask.class.b", 1, scheme_.num_categories());
}

LossOutput MultiTaskModel::loss(const std::string& /*phase*/, VideoBatch batch, Mode mode, Rng* dropout_rng) {
  auto fused = trunk_.fuse(batch, mode);
  std::vector<ad::Var> seg_terms, cls_terms, totals;
  LossOutput out;
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const auto& video = *batch[i];
    if (!video.scenes) throw ValidationError("video '" + video.video_id + "' has no gold scenes");
    std::vector<double> is_end(video.num_shots(), 0.0);
    std::vector<int> category(video.num_shots(), 0);
    for (const auto& s : *video.scenes) {
      if (!s.category) throw ValidationError("multitask training needs categorized scenes");
      is_end[s.end_shot] = 1.0;
      for (int j = s.start_shot; j <= s.end_shot; ++j) category[j] = *s.category;
    }
    const ad::Var hidden = trunk_.encode(fused.per_video[i], dropout_rng);
    const ad::Var seg = ad::bce_with_logits(ad::add_row(ad::matmul(hidden, boundary_w_), boundary_b_), is_end);
    const ad::Var cls = ad::softmax_cross_entropy(ad::add_row(ad::matmul(hidden, class_w_), class_b_), category);
    const ad::Var total = ad::add(ad::scale(seg, lambda_seg_), ad::scale(cls, lambda_cls_));
    seg_terms.push_back(seg);
    cls_terms.push_back(cls);
    totals.push_back(total);
    out.per_video.push_back(total->scalar());
  }
  out.total = mean_of(totals);
  out.tasks.emplace_back("segmentation", mean_of(seg_terms)->scalar());
  out.tasks.emplace_back("classification", mean_of(cls_terms)->scalar());
  if (mode == Mode::Train) pending_ = std::move(fused);
  return out;
}

void MultiTaskModel::commit_statistics() {
  if (pending_) trunk_.commit(*pending_);
  pending_.reset();
}

MultiTaskModel::Outputs MultiTaskModel::outputs(const VideoSequence& video) const {
  ad::NoGradGuard no_grad;
  const VideoSequence* one[] = {&video};
  const auto fused = trunk_.fuse(one, Mode::Eval);
  const ad::Var hidden = trunk_.encode(fused.per_video[0]);
  Outputs out;
  const ad::Matrix logit = ad::add_row(ad::matmul(hidden, boundary_w_), boundary_b_)->value;
  out.boundary_prob = (1.0 / (1.0 + (-logit.col(0).array()).exp())).matrix();
  out.class_logits = ad::add_row(ad::matmul(hidden, class_w_), class_b_)->value;
  return out;
}

std::vector<SceneAnnotation> MultiTaskModel::predict(const VideoSequence& video) const {
  const auto o = outputs(video);
  return multitask_decode(o.boundary_prob, o.class_logits);
}

nlohmann::json MultiTaskModel::extra_json() const {
  return {{"lambda_seg", lambda_seg_}, {"lambda_cls", lambda_cls_}};
}

std::vector<SceneAnnotation> multitask_decode(const Eigen::VectorXd& boundary_prob,
                                              const Eigen::MatrixXd& class_logits) {
  const int n = static_cast<int>(boundary_prob.size());
  if (n < 1 || class_logits.rows() != n) throw ValidationError("multitask outputs have inconsistent lengths");
  std::vector<SceneAnnotation> scenes;
  int start = 0;
  for (int j = 0; j < n; ++j) {
    // NaN probabilities fall through to "no boundary".
    const bool boundary = j == n - 1 || boundary_prob(j) >= 0.5;
    if (!boundary) continue;
    std::vector<int> votes(class_logits.cols(), 0);
    for (int s = start; s <= j; ++s) {
      Eigen::Index arg = 0;
      class_logits.row(s).maxCoeff(&arg);
      ++votes[arg];
    }
    int winner = 0;
    for (int c = 1; c < static_cast<int>(votes.size()); ++c) {
      if (votes[c] > votes[winner]) winner = c;
    }
    scenes.push_back({start, j, winner});
    start = j + 1;
  }
  return scenes;
}

// ---------------------------------------------------------------- two-stage

TwoStageModel::TwoStageModel(const ModelConfig& config, LabelScheme scheme, Rng& rng, int stage2_hidden)
    : scheme_(std::move(scheme)),
      hidden_(stage2_hidden),
      stage1_((require_categories(scheme_, "twostage"), store_), "twostage.stage1", config,
              LabelScheme::segmentation(), rng) {
  const int d = stage1_.trunk().fused_dim();
  w1_ = store_.add_uniform("twostage.stage2.w1", d, hidden_, rng);
  b1_ = store_.add_zeros("twostage.stage2.b1", 1, hidden_);
  w2_ = store_.add_uniform("twostage.stage2.w2", hidden_, scheme_.num_categories(), rng);
  b2_ = store_.add_zeros("twostage.stage2.b2", 1, scheme_.num_categories());
}

bool TwoStageModel::optimizes(const std::string& phase, const std::string& param_name) const {
  const bool stage2_param = param_name.rfind("twostage.stage2.", 0) == 0;
  return phase == "stage2" ? stage2_param : !stage2_param;
}

ad::Var TwoStageModel::segment_logits(const ad::Var& fused, const std::vector<SceneAnnotation>& segments) const {
  std::vector<ad::Var> pooled;
  for (const auto& s : segments) pooled.push_back(ad::mean_rows(ad::slice_rows(fused, s.start_shot, s.length())));
  const ad::Var x = ad::vstack(pooled);
  const ad::Var h = ad::relu(ad::add_row(ad::matmul(x, w1_), b1_));
  return ad::add_row(ad::matmul(h, w2_), b2_);
}

LossOutput TwoStageModel::loss(const std::string& phase, VideoBatch batch, Mode mode, Rng* dropout_rng) {
  LossOutput out;
  if (phase == "stage1") {
    // Gold scenes are projected onto the segmentation scheme by encode().
    auto l = stage1_.loss(batch, mode, dropout_rng);
    out.total = l.total;
    out.per_video = std::move(l.per_video);
    out.tasks.emplace_back("stage1", l.total->scalar());
    if (mode == Mode::Train) pending_ = std::move(l.fused);
    return out;
  }
  if (phase != "stage2") throw ValidationError("unknown two-stage phase '" + phase + "'");
  Trunk::Fused fused;
  {
    ad::NoGradGuard frozen;
    fused = stage1_.trunk().fuse(batch, Mode::Eval);
  }
  std::vector<ad::Var> terms;
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const auto& video = *batch[i];
    if (!video.scenes) throw ValidationError("video '" + video.video_id + "' has no gold scenes");
    std::vector<int> labels;
    for (const auto& s : *video.scenes) {
      if (!s.category) throw ValidationError("two-stage training needs categorized scenes");
      labels.push_back(*s.category);
    }
    const ad::Var term = ad::softmax_cross_entropy(segment_logits(fused.per_video[i], *video.scenes), labels);
    out.per_video.push_back(term->scalar());
    terms.push_back(term);
  }
  out.total = mean_of(terms);
  out.tasks.emplace_back("stage2", out.total->scalar());
  return out;
}

void TwoStageModel::commit_statistics() {
  if (pending_) stage1_.trunk().commit(*pending_);
  pending_.reset();
}

std::vector<SceneAnnotation> TwoStageModel::classify(const VideoSequence& video,
                                                     std::vector<SceneAnnotation> segments) const {
  ad::NoGradGuard no_grad;
  const VideoSequence* one[] = {&video};
  const auto fused = stage1_.trunk().fuse(one, Mode::Eval);
  const ad::Matrix logits = segment_logits(fused.per_video[0], segments)->value;
  for (std::size_t i = 0; i < segments.size(); ++i) {
    Eigen::Index arg = 0;
    logits.row(static_cast<Eigen::Index>(i)).maxCoeff(&arg);
    segments[i].category = static_cast<int>(arg);
  }
  return segments;
}

std::vector<SceneAnnotation> TwoStageModel::predict(const VideoSequence& video) const {
  return classify(video, stage1_.predict(video));
}

nlohmann::json TwoStageModel::extra_json() const { return {{"stage2_hidden", hidden_}}; }

}  // namespace osmsl

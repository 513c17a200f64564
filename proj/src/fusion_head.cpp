#include "osmsl/fusion_head.hpp"

#include <cmath>

#include "osmsl/error.hpp"

namespace osmsl {

BatchNorm::BatchNorm(ParamStore& store, const std::string& prefix, int dim, double momentum, double eps)
    : dim_(dim), momentum_(momentum), eps_(eps) {
  if (eps <= 0.0) throw ValidationError("batch-norm epsilon must be positive");
  gamma_ = store.add(prefix + ".gamma", ad::Matrix::Ones(1, dim));
  beta_ = store.add_zeros(prefix + ".beta", 1, dim);
  running_mean_ = store.add_zeros(prefix + ".running_mean", 1, dim, false);
  running_var_ = store.add(prefix + ".running_var", ad::Matrix::Ones(1, dim), false);
}

ad::Var BatchNorm::forward(const ad::Var& x, Mode mode, BatchStats* stats) const {
  if (x->cols() != dim_) throw ValidationError("batch-norm input dim mismatch");
  Eigen::RowVectorXd mean, var;
  if (mode == Mode::Train) {
    if (x->rows() < 2) throw ValidationError("train-mode batch norm needs a batch of at least 2 rows");
    mean = x->value.colwise().mean();
    var = (x->value.rowwise() - mean).array().square().colwise().mean();
    if (stats) *stats = BatchStats{mean, var, x->rows()};
  } else {
    mean = running_mean_->value.row(0);
    var = running_var_->value.row(0);
  }
  const Eigen::RowVectorXd inv_std = (var.array() + eps_).rsqrt();
  ad::Matrix xhat = (x->value.rowwise() - mean).array().rowwise() * inv_std.array();
  ad::Matrix out = (xhat.array().rowwise() * gamma_->value.row(0).array()).rowwise() + beta_->value.row(0).array();
  const bool batch_stats = mode == Mode::Train;
  return ad::make_node(std::move(out), {x, gamma_, beta_}, [xhat, inv_std, batch_stats](ad::Node& self) {
    const auto& X = self.parents[0];
    const auto& G = self.parents[1];
    const auto& B = self.parents[2];
    if (G->requires_grad) G->accumulate(self.grad.cwiseProduct(xhat).colwise().sum());
    if (B->requires_grad) B->accumulate(self.grad.colwise().sum());
    if (!X->requires_grad) return;
    const ad::Matrix gx_hat = self.grad.array().rowwise() * G->value.row(0).array();
    if (!batch_stats) {
      X->accumulate(gx_hat.array().rowwise() * inv_std.array());
      return;
    }
    const Eigen::RowVectorXd m1 = gx_hat.colwise().mean();
    const Eigen::RowVectorXd m2 = gx_hat.cwiseProduct(xhat).colwise().mean();
    ad::Matrix gx = ((gx_hat.rowwise() - m1) - (xhat.array().rowwise() * m2.array()).matrix()).array().rowwise() *
                    inv_std.array();
    X->accumulate(gx);
  });
}

void BatchNorm::update_running(const BatchStats& stats) {
  const double n = static_cast<double>(stats.count);
  const Eigen::RowVectorXd unbiased = n > 1 ? Eigen::RowVectorXd(stats.var * (n / (n - 1.0))) : stats.var;
  running_mean_->value = (1.0 - momentum_) * running_mean_->value + momentum_ * stats.mean;
  running_var_->value = (1.0 - momentum_) * running_var_->value + momentum_ * unbiased;
}

ad::Var fuse(std::span<const ad::Var> modality_features) {
  if (modality_features.empty()) throw ValidationError("fusion needs at least one modality");
  const auto n = modality_features[0]->rows();
  for (const auto& m : modality_features) {
    if (m->rows() != n) throw ValidationError("modalities disagree on sequence length");
  }
  return ad::concat_cols(modality_features);
}

TransformerEncoder::TransformerEncoder(ParamStore& store, const std::string& prefix, int d_in,
                                       const EncoderConfig& config, Rng& rng)
    : config_(config) {
  const int d = config.d_model;
  if (config.n_heads < 1 || d % config.n_heads != 0) {
    throw ValidationError("d_model must be divisible by n_heads");
  }
  if (config.max_len < 1) throw ValidationError("max_len must be >= 1");
  if (config.chunk_overlap < 0 || 2 * config.chunk_overlap >= config.max_len) {
    throw ValidationError("chunk_overlap must be in [0, max_len/2)");
  }
  in_w_ = store.add_uniform(prefix + ".input.w", d_in, d, rng);
  in_b_ = store.add_zeros(prefix + ".input.b", 1, d);
  {
    // Learned positions start from the sinusoidal table, which gives the
    // attention a usable notion of relative offset from the first step.
    ad::Matrix pos(config.max_len, d);
    for (Eigen::Index r = 0; r < pos.rows(); ++r) {
      for (Eigen::Index c = 0; c < pos.cols(); ++c) {
        const double rate = std::pow(10000.0, -static_cast<double>(2 * (c / 2)) / d);
        pos(r, c) = c % 2 == 0 ? std::sin(r * rate) : std::cos(r * rate);
      }
    }
    positions_ = store.add(prefix + ".positions", std::move(pos));
  }
  for (int l = 0; l < config.n_layers; ++l) {
    const std::string p = prefix + ".layer" + std::to_string(l);
    Layer layer;
    layer.ln1_g = store.add(p + ".ln1.gamma", ad::Matrix::Ones(1, d));
    layer.ln1_b = store.add_zeros(p + ".ln1.beta", 1, d);
    layer.wq = store.add_uniform(p + ".attn.wq", d, d, rng);
    layer.bq = store.add_zeros(p + ".attn.bq", 1, d);
    layer.wk = store.add_uniform(p + ".attn.wk", d, d, rng);
    layer.bk = store.add_zeros(p + ".attn.bk", 1, d);
    layer.wv = store.add_uniform(p + ".attn.wv", d, d, rng);
    layer.bv = store.add_zeros(p + ".attn.bv", 1, d);
    layer.wo = store.add_uniform(p + ".attn.wo", d, d, rng);
    layer.bo = store.add_zeros(p + ".attn.bo", 1, d);
    layer.ln2_g = store.add(p + ".ln2.gamma", ad::Matrix::Ones(1, d));
    layer.ln2_b = store.add_zeros(p + ".ln2.beta", 1, d);
    layer.w1 = store.add_uniform(p + ".ff.w1", d, config.d_ff, rng);
    layer.b1 = store.add_zeros(p + ".ff.b1", 1, config.d_ff);
    layer.w2 = store.add_uniform(p + ".ff.w2", config.d_ff, d, rng);
    layer.b2 = store.add_zeros(p + ".ff.b2", 1, d);
    layers_.push_back(layer);
  }
  final_g_ = store.add(prefix + ".final_ln.gamma", ad::Matrix::Ones(1, d));
  final_b_ = store.add_zeros(prefix + ".final_ln.beta", 1, d);
}

ad::Var TransformerEncoder::dropout(const ad::Var& x, Rng* rng) const {
  if (!rng || config_.dropout <= 0.0) return x;
  std::bernoulli_distribution keep(1.0 - config_.dropout);
  ad::Matrix mask(x->rows(), x->cols());
  for (Eigen::Index c = 0; c < mask.cols(); ++c) {
    for (Eigen::Index r = 0; r < mask.rows(); ++r) mask(r, c) = keep(*rng) ? 1.0 / (1.0 - config_.dropout) : 0.0;
  }
  return ad::mul(x, ad::constant(std::move(mask)));
}

ad::Var TransformerEncoder::forward(const ad::Var& x, std::vector<Eigen::MatrixXd>* attention,
                                    Rng* dropout_rng) const {
  using namespace ad;
  const auto n = x->rows();
  if (n < 1) throw ValidationError("encoder needs at least one position");
  if (n > config_.max_len) {
    throw ValidationError("sequence of " + std::to_string(n) + " exceeds max_len " + std::to_string(config_.max_len));
  }
  const int d = config_.d_model;
  const int heads = config_.n_heads;
  const int dh = d / heads;
  const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(dh));

  Var h = add(add_row(matmul(x, in_w_), in_b_), slice_rows(positions_, 0, n));
  for (const auto& layer : layers_) {
    const Var normed = layer_norm_rows(h, layer.ln1_g, layer.ln1_b, 1e-5);
    const Var q = add_row(matmul(normed, layer.wq), layer.bq);
    const Var k = add_row(matmul(normed, layer.wk), layer.bk);
    const Var v = add_row(matmul(normed, layer.wv), layer.bv);
    std::vector<Var> head_out;
    for (int hd = 0; hd < heads; ++hd) {
      const Var qh = slice_cols(q, hd * dh, dh);
      const Var kh = slice_cols(k, hd * dh, dh);
      const Var vh = slice_cols(v, hd * dh, dh);
      const Var weights = softmax_rows(scale(matmul_nt(qh, kh), inv_sqrt));
      if (attention) attention->push_back(weights->value);
      head_out.push_back(matmul(weights, vh));
    }
    const Var attn = add_row(matmul(concat_cols(head_out), layer.wo), layer.bo);
    h = add(h, dropout(attn, dropout_rng));
    const Var normed2 = layer_norm_rows(h, layer.ln2_g, layer.ln2_b, 1e-5);
    const Var ff = add_row(matmul(relu(add_row(matmul(normed2, layer.w1), layer.b1)), layer.w2), layer.b2);
    h = add(h, dropout(ff, dropout_rng));
  }
  return layer_norm_rows(h, final_g_, final_b_, 1e-5);
}

std::vector<ChunkPlan> plan_chunks(int n, int max_len, int overlap) {
  if (n <= max_len) return {{0, 0, n}};
  const int stride = max_len - overlap;
  const int half = overlap / 2;
  std::vector<ChunkPlan> plan;
  for (int start = 0;; start += stride) {
    const bool last = start + max_len >= n;
    const int chunk_start = last ? n - max_len : start;
    const int own_begin = plan.empty() ? 0 : plan.back().own_end;
    const int own_end = last ? n : start + max_len - half;
    plan.push_back({chunk_start, own_begin, own_end});
    if (last) break;
  }
  return plan;
}

ad::Var TransformerEncoder::forward_chunked(const ad::Var& x, Rng* dropout_rng) const {
  const int n = static_cast<int>(x->rows());
  const auto plan = plan_chunks(n, config_.max_len, config_.chunk_overlap);
  if (plan.size() == 1) return forward(x, nullptr, dropout_rng);
  std::vector<ad::Var> pieces;
  for (const auto& chunk : plan) {
    const int len = std::min(config_.max_len, n - chunk.start);
    const ad::Var out = forward(ad::slice_rows(x, chunk.start, len), nullptr, dropout_rng);
    pieces.push_back(ad::slice_rows(out, chunk.own_begin - chunk.start, chunk.own_end - chunk.own_begin));
  }
  return ad::vstack(pieces);
}

EmissionLayer::EmissionLayer(ParamStore& store, const std::string& prefix, int d_model, int num_tags, Rng& rng)
    : num_tags_(num_tags) {
  w_ = store.add_uniform(prefix + ".w", d_model, num_tags, rng);
  b_ = store.add_zeros(prefix + ".b", 1, num_tags);
}

ad::Var EmissionLayer::forward(const ad::Var& hidden) const { return ad::add_row(ad::matmul(hidden, w_), b_); }

}  // namespace osmsl

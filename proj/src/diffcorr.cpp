#include "osmsl/diffcorr.hpp"

#include <algorithm>
#include <cmath>

#include "osmsl/error.hpp"

namespace osmsl {

namespace {

int clamp_index(int i, int n) { return std::clamp(i, 0, n - 1); }

std::vector<int> shifted(int n, int offset) {
  std::vector<int> idx(n);
  for (int j = 0; j < n; ++j) idx[j] = clamp_index(j + offset, n);
  return idx;
}

Eigen::RowVectorXd affine(const Eigen::RowVectorXd& x, const ad::Var& w, const ad::Var& b) {
  return x * w->value + b->value.row(0);
}

}  // namespace

DiffCorrConfig DiffCorrConfig::resolved(int d_in) const {
  DiffCorrConfig c = *this;
  if (c.k < 1) throw ValidationError("diffcorr k must be >= 1");
  if (c.d_e <= 0) c.d_e = d_in;
  if (c.d_a <= 0) c.d_a = d_in;
  if (c.d_g <= 0) c.d_g = (d_in + 1) / 2;
  return c;
}

ShotWindow window(int j, int n, int k) {
  ShotWindow w;
  for (int i = j - (k - 1); i <= j; ++i) w.former.push_back(clamp_index(i, n));
  for (int i = j + 1; i <= j + k; ++i) w.latter.push_back(clamp_index(i, n));
  for (int i = j - (k - 1); i <= j + k; ++i) {
    if (i != j) w.neighbors.push_back(clamp_index(i, n));
  }
  return w;
}

DiffCorrNet::DiffCorrNet(ParamStore& store, const std::string& prefix, int d_in, const DiffCorrConfig& config,
                         Rng& rng)
    : d_in_(d_in), config_(config.resolved(d_in)) {
  const int d_e = config_.d_e;
  w_.embed_w = store.add_uniform(prefix + ".embed.w", d_in, d_e, rng);
  w_.embed_b = store.add_zeros(prefix + ".embed.b", 1, d_e);
  if (config_.split_embed) {
    w_.attn_embed_w = store.add_uniform(prefix + ".attn_embed.w", d_in, d_e, rng);
    w_.attn_embed_b = store.add_zeros(prefix + ".attn_embed.b", 1, d_e);
  } else {
    w_.attn_embed_w = w_.embed_w;
    w_.attn_embed_b = w_.embed_b;
  }
  w_.proj_w = store.add_uniform(prefix + ".boundary_proj.w", d_e + 1, config_.d_g, rng);
  w_.proj_b = store.add_zeros(prefix + ".boundary_proj.b", 1, config_.d_g);
  w_.mlp_w1 = store.add_uniform(prefix + ".attn_mlp.w1", d_e, config_.d_a, rng);
  w_.mlp_b1 = store.add_zeros(prefix + ".attn_mlp.b1", 1, config_.d_a);
  w_.mlp_w2 = store.add_uniform(prefix + ".attn_mlp.w2", config_.d_a, 1, rng);
  w_.mlp_b2 = store.add_zeros(prefix + ".attn_mlp.b2", 1, 1);
}

ad::Var DiffCorrNet::enhance(const ad::Var& features) const {
  using namespace ad;
  const int n = static_cast<int>(features->rows());
  const int k = config_.k;
  if (n < 1) throw ValidationError("enhance needs at least one shot");
  if (features->cols() != d_in_) throw ValidationError("diffcorr input dim mismatch");

  const Var embedded = add_row(matmul(features, w_.embed_w), w_.embed_b);

  // Boundary branch: mean-pooled former/latter windows.
  Var former = gather_rows(embedded, shifted(n, -(k - 1)));
  for (int o = -(k - 2); o <= 0; ++o) former = add(former, gather_rows(embedded, shifted(n, o)));
  Var latter = gather_rows(embedded, shifted(n, 1));
  for (int o = 2; o <= k; ++o) latter = add(latter, gather_rows(embedded, shifted(n, o)));
  former = scale(former, 1.0 / k);
  latter = scale(latter, 1.0 / k);
  const Var boundary_in = concat_cols(std::vector<Var>{row_cosine(former, latter), sub(former, latter)});
  const Var g = add_row(matmul(boundary_in, w_.proj_w), w_.proj_b);

  // Correlation branch: one logit per neighbour offset, evaluated as one
  // stacked MLP pass.
  const Var attn_embedded =
      config_.split_embed ? add_row(matmul(features, w_.attn_embed_w), w_.attn_embed_b) : embedded;
  std::vector<int> offsets;
  for (int o = -(k - 1); o <= k; ++o) {
    if (o != 0) offsets.push_back(o);
  }
  std::vector<Var> diffs;
  for (int o : offsets) diffs.push_back(sub(attn_embedded, gather_rows(attn_embedded, shifted(n, o))));
  const Var hidden = relu(add_row(matmul(vstack(diffs), w_.mlp_w1), w_.mlp_b1));
  const Var stacked_logits = add_row(matmul(hidden, w_.mlp_w2), w_.mlp_b2);
  std::vector<Var> logit_cols;
  for (std::size_t m = 0; m < offsets.size(); ++m) logit_cols.push_back(slice_rows(stacked_logits, m * n, n));
  const Var logits = concat_cols(logit_cols);
  const Var weights = config_.attention_normalize ? softmax_rows(logits) : logits;

  Var h;
  for (std::size_t m = 0; m < offsets.size(); ++m) {
    Var term = mul_col(gather_rows(features, shifted(n, offsets[m])), slice_cols(weights, m, 1));
    h = h ? add(h, term) : term;
  }
  return concat_cols(std::vector<Var>{features, g, h});
}

Eigen::RowVectorXd DiffCorrNet::embed(const Eigen::RowVectorXd& f) const {
  return affine(f, w_.embed_w, w_.embed_b);
}

Eigen::RowVectorXd DiffCorrNet::attn_embed(const Eigen::RowVectorXd& f) const {
  return affine(f, w_.attn_embed_w, w_.attn_embed_b);
}

DiffCorrNet::BoundaryParts DiffCorrNet::boundary_parts(const Eigen::MatrixXd& features, int j) const {
  const int n = static_cast<int>(features.rows());
  const auto win = window(j, n, config_.k);
  Eigen::RowVectorXd p_former = Eigen::RowVectorXd::Zero(config_.d_e);
  Eigen::RowVectorXd p_latter = Eigen::RowVectorXd::Zero(config_.d_e);
  for (int i : win.former) p_former += embed(features.row(i));
  for (int i : win.latter) p_latter += embed(features.row(i));
  p_former /= static_cast<double>(win.former.size());
  p_latter /= static_cast<double>(win.latter.size());

  BoundaryParts parts;
  const double nf = p_former.norm();
  const double nl = p_latter.norm();
  parts.cosine = (nf == 0.0 || nl == 0.0) ? 0.0 : p_former.dot(p_latter) / (nf * nl);
  parts.difference = (p_former - p_latter).transpose();
  Eigen::RowVectorXd in(config_.d_e + 1);
  in(0) = parts.cosine;
  in.tail(config_.d_e) = p_former - p_latter;
  parts.g = affine(in, w_.proj_w, w_.proj_b).transpose();
  return parts;
}

Eigen::VectorXd DiffCorrNet::boundary_feature(const Eigen::MatrixXd& features, int j) const {
  return boundary_parts(features, j).g;
}

double DiffCorrNet::attention_weight(const Eigen::VectorXd& f_j, const Eigen::VectorXd& f_i) const {
  const Eigen::RowVectorXd diff = attn_embed(f_j.transpose()) - attn_embed(f_i.transpose());
  const Eigen::RowVectorXd hidden = affine(diff, w_.mlp_w1, w_.mlp_b1).cwiseMax(0.0);
  return affine(hidden, w_.mlp_w2, w_.mlp_b2)(0);
}

Eigen::VectorXd DiffCorrNet::attention_distribution(const Eigen::MatrixXd& features, int j) const {
  const auto win = window(j, static_cast<int>(features.rows()), config_.k);
  Eigen::VectorXd logits(win.neighbors.size());
  for (std::size_t m = 0; m < win.neighbors.size(); ++m) {
    logits(m) = attention_weight(features.row(j).transpose(), features.row(win.neighbors[m]).transpose());
  }
  if (!config_.attention_normalize) return logits;
  const double peak = logits.maxCoeff();
  Eigen::VectorXd w = (logits.array() - peak).exp();
  return w / w.sum();
}

Eigen::VectorXd DiffCorrNet::aggregated_feature(const Eigen::MatrixXd& features, int j) const {
  const auto win = window(j, static_cast<int>(features.rows()), config_.k);
  const Eigen::VectorXd w = attention_distribution(features, j);
  Eigen::VectorXd h = Eigen::VectorXd::Zero(features.cols());
  for (std::size_t m = 0; m < win.neighbors.size(); ++m) h += w(m) * features.row(win.neighbors[m]).transpose();
  return h;
}

}  // namespace osmsl

#include "osmsl/params.hpp"

#include <cmath>

#include "osmsl/error.hpp"

namespace osmsl {

ad::Var ParamStore::add(const std::string& name, ad::Matrix value, bool trainable) {
  if (contains(name)) throw Error("duplicate parameter '" + name + "'");
  ad::Var var = trainable ? ad::parameter(std::move(value)) : ad::constant(std::move(value));
  entries_.push_back({name, var, trainable});
  return var;
}

ad::Var ParamStore::add_uniform(const std::string& name, Eigen::Index rows, Eigen::Index cols, Rng& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(std::max<Eigen::Index>(rows, 1)));
  std::uniform_real_distribution<double> dist(-bound, bound);
  ad::Matrix value(rows, cols);
  // Column-major fill order is part of the reproducibility contract.
  for (Eigen::Index c = 0; c < cols; ++c) {
    for (Eigen::Index r = 0; r < rows; ++r) value(r, c) = dist(rng);
  }
  return add(name, std::move(value));
}

ad::Var ParamStore::add_zeros(const std::string& name, Eigen::Index rows, Eigen::Index cols, bool trainable) {
  return add(name, ad::Matrix::Zero(rows, cols), trainable);
}

const ad::Var& ParamStore::get(const std::string& name) const {
  for (const auto& e : entries_) {
    if (e.name == name) return e.var;
  }
  throw Error("unknown parameter '" + name + "'");
}

bool ParamStore::contains(const std::string& name) const {
  for (const auto& e : entries_) {
    if (e.name == name) return true;
  }
  return false;
}

void ParamStore::zero_grad() {
  for (auto& e : entries_) e.var->zero_grad();
}

std::size_t ParamStore::num_scalars(bool trainable_only) const {
  std::size_t n = 0;
  for (const auto& e : entries_) {
    if (!trainable_only || e.trainable) n += static_cast<std::size_t>(e.var->value.size());
  }
  return n;
}

}  // namespace osmsl

#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "osmsl/autograd.hpp"

namespace osmsl {

/// The single random source used for initialization, synthesis and shuffling.
using Rng = std::mt19937_64;

/// Named, ordered tensors of a model. Trainable entries receive gradients;
/// buffers (e.g. running statistics) are saved but never optimized.
class ParamStore {
 public:
  struct Entry {
    std::string name;
    ad::Var var;
    bool trainable = true;
  };

  ad::Var add(const std::string& name, ad::Matrix value, bool trainable = true);
  /// Scaled-uniform init in [-1/sqrt(fan_in), 1/sqrt(fan_in)].
  ad::Var add_uniform(const std::string& name, Eigen::Index rows, Eigen::Index cols, Rng& rng);
  ad::Var add_zeros(const std::string& name, Eigen::Index rows, Eigen::Index cols, bool trainable = true);

  const ad::Var& get(const std::string& name) const;
  bool contains(const std::string& name) const;

  std::vector<Entry>& entries() { return entries_; }
  const std::vector<Entry>& entries() const { return entries_; }

  void zero_grad();
  std::size_t num_scalars(bool trainable_only = true) const;

 private:
  std::vector<Entry> entries_;
};

}  // namespace osmsl

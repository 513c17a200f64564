#pragma once

// Brute-force reference implementations shared by the unit tests and the
// acceptance binary. Everything here is written for clarity, not speed.

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <vector>

#include "osmsl/crf.hpp"
#include "osmsl/label_scheme.hpp"

namespace oracle {

using osmsl::SceneAnnotation;

/// Every composition of n shots into scenes, each scene labeled with one of
/// `categories` classes (no labels when categories == 0).
inline std::vector<std::vector<SceneAnnotation>> all_partitions(int n, int categories) {
  std::vector<std::vector<SceneAnnotation>> out;
  const int labels = std::max(categories, 1);
  for (unsigned cuts = 0; cuts < (1u << (n - 1)); ++cuts) {
    std::vector<SceneAnnotation> shape;
    int start = 0;
    for (int j = 0; j < n; ++j) {
      if (j == n - 1 || (cuts >> j & 1u)) {
        shape.push_back({start, j, std::nullopt});
        start = j + 1;
      }
    }
    long combos = 1;
    for (std::size_t s = 0; s < shape.size(); ++s) combos *= labels;
    for (long code = 0; code < combos; ++code) {
      auto labeled = shape;
      long rest = code;
      if (categories > 0) {
        for (auto& scene : labeled) {
          scene.category = static_cast<int>(rest % labels);
          rest /= labels;
        }
      }
      out.push_back(std::move(labeled));
    }
  }
  return out;
}

template <class Rng>
std::vector<SceneAnnotation> random_partition(int n, int categories, Rng& rng, double cut_prob = 0.3) {
  std::bernoulli_distribution cut(cut_prob);
  std::uniform_int_distribution<int> label(0, std::max(categories, 1) - 1);
  std::vector<SceneAnnotation> scenes;
  int start = 0;
  for (int j = 0; j < n; ++j) {
    if (j == n - 1 || cut(rng)) {
      SceneAnnotation s{start, j, std::nullopt};
      if (categories > 0) s.category = label(rng);
      scenes.push_back(s);
      start = j + 1;
    }
  }
  return scenes;
}

/// Direct summation of a tag path's score; -inf when the grammar forbids it.
inline double path_score(const Eigen::MatrixXd& em, const osmsl::CrfParams& crf, const std::vector<int>& tags) {
  const auto& m = crf.mask;
  const double ninf = -std::numeric_limits<double>::infinity();
  const std::size_t n = tags.size();
  if (!m.legal_start[tags[0]] || !m.legal_end[tags[n - 1]]) return ninf;
  double s = crf.start(tags[0]) + crf.end(tags[n - 1]);
  for (std::size_t j = 0; j < n; ++j) {
    s += em(static_cast<Eigen::Index>(j), tags[j]);
    if (j + 1 < n) {
      if (!m.is_allowed(tags[j], tags[j + 1])) return ninf;
      s += crf.transitions(tags[j], tags[j + 1]);
    }
  }
  return s;
}

struct Enumeration {
  double log_z = -std::numeric_limits<double>::infinity();
  double best = -std::numeric_limits<double>::infinity();
  std::vector<int> argmax;
  int legal_paths = 0;
};

/// Walks all T^n tag sequences.
inline Enumeration enumerate(const Eigen::MatrixXd& em, const osmsl::CrfParams& crf) {
  const int n = static_cast<int>(em.rows());
  const int T = static_cast<int>(em.cols());
  std::vector<int> tags(n, 0);
  std::vector<double> scores;
  Enumeration out;
  while (true) {
    const double s = path_score(em, crf, tags);
    if (std::isfinite(s)) {
      scores.push_back(s);
      ++out.legal_paths;
      if (s > out.best) {
        out.best = s;
        out.argmax = tags;
      }
    }
    int pos = n - 1;
    while (pos >= 0 && ++tags[pos] == T) tags[pos--] = 0;
    if (pos < 0) break;
  }
  if (!scores.empty()) {
    double acc = 0.0;
    for (double s : scores) acc += std::exp(s - out.best);
    out.log_z = out.best + std::log(acc);
  }
  return out;
}

struct Counts {
  long tp_seg = 0;
  long tp_seg_cls = 0;
};

/// Literal double loop over every (predicted, ground-truth) scene pair: a
/// pair matches when the end shots agree (and, for seg_cls, the labels too).
inline Counts match_counts(const std::vector<SceneAnnotation>& pred, const std::vector<SceneAnnotation>& gt) {
  Counts c;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    for (std::size_t j = 0; j < gt.size(); ++j) {
      if (pred[i].end_shot != gt[j].end_shot) continue;
      ++c.tp_seg;
      if (pred[i].category == gt[j].category) ++c.tp_seg_cls;
    }
  }
  return c;
}

/// tp per category c: pairs with matching end shot and both labeled c.
inline long match_count_category(const std::vector<SceneAnnotation>& pred, const std::vector<SceneAnnotation>& gt,
                                 int c) {
  long tp = 0;
  for (const auto& p : pred) {
    for (const auto& g : gt) {
      if (p.end_shot == g.end_shot && p.category == c && g.category == c) ++tp;
    }
  }
  return tp;
}

}  // namespace oracle

#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "osmsl/label_scheme.hpp"

namespace osmsl {

struct PRF {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  long tp = 0;
  long fp = 0;
  long fn = 0;

  /// P = tp/(tp+fp), R = tp/(tp+fn), 0/0 -> 0.
  static PRF from_counts(long tp, long fp, long fn);
  friend bool operator==(const PRF&, const PRF&) = default;
};

struct EvalReport {
  PRF seg;
  PRF seg_cls_micro;
  PRF seg_cls_macro;
  std::map<std::string, PRF> per_category;
  bool has_classification = false;
};

/// End-shot index of every scene.
std::vector<int> seg_points(const std::vector<SceneAnnotation>& scenes);

/// Seg-point matching for one video.
PRF eval_seg(const std::vector<SceneAnnotation>& pred, const std::vector<SceneAnnotation>& gt);

struct SegClsResult {
  PRF micro;
  PRF macro;
  std::map<int, PRF> per_category;
};

/// Seg-point plus label matching for one video. Macro averages over
/// `categories` when given, otherwise over categories seen in gt or pred.
SegClsResult eval_seg_cls(const std::vector<SceneAnnotation>& pred, const std::vector<SceneAnnotation>& gt,
                          int num_categories, const std::optional<std::vector<int>>& macro_categories = {});

/// Accumulates counts over many videos; micro pools, macro averages the
/// per-category P/R/F1.
class Evaluator {
 public:
  explicit Evaluator(LabelScheme scheme) : scheme_(std::move(scheme)) {}

  void add(const std::vector<SceneAnnotation>& pred, const std::vector<SceneAnnotation>& gt);
  EvalReport report(const std::optional<std::vector<int>>& macro_categories = {}) const;

 private:
  LabelScheme scheme_;
  long seg_tp_ = 0, n_pred_ = 0, n_gt_ = 0;
  std::map<int, long> tp_, n_pred_cat_, n_gt_cat_;
};

/// report.json text (keys sorted, fixed precision).
std::string report_to_json(const EvalReport& report);
/// Plain-text table for terminals.
std::string report_table(const EvalReport& report);

}  // namespace osmsl

#include "osmsl/metrics.hpp"

#include <cstdio>
#include <json.hpp>
#include <set>
#include <sstream>

#include "osmsl/error.hpp"

namespace osmsl {

namespace {

double safe_div(double num, double den) { return den == 0.0 ? 0.0 : num / den; }

double harmonic(double p, double r) { return p + r == 0.0 ? 0.0 : 2.0 * p * r / (p + r); }

// Scenes ending at each shot index; a partition has at most one.
std::map<int, const SceneAnnotation*> by_end(const std::vector<SceneAnnotation>& scenes) {
  std::map<int, const SceneAnnotation*> out;
  for (const auto& scene : scenes) out[scene.end_shot] = &scene;
  return out;
}

void check_same_length(const std::vector<SceneAnnotation>& pred, const std::vector<SceneAnnotation>& gt) {
  if (pred.empty() || gt.empty()) throw ValidationError("empty scene list in evaluation");
  const int n_pred = pred.back().end_shot + 1;
  const int n_gt = gt.back().end_shot + 1;
  if (n_pred != n_gt) {
    throw ValidationError("shot-count mismatch: prediction covers " + std::to_string(n_pred) +
                          " shots, ground truth " + std::to_string(n_gt));
  }
  validate_partition(pred, n_pred);
  validate_partition(gt, n_gt);
}

PRF macro_of(const std::map<int, PRF>& per_category, const std::set<int>& categories) {
  PRF macro;
  if (categories.empty()) return macro;
  for (int c : categories) {
    auto it = per_category.find(c);
    const PRF prf = it == per_category.end() ? PRF{} : it->second;
    macro.precision += prf.precision;
    macro.recall += prf.recall;
    macro.f1 += prf.f1;
    macro.tp += prf.tp;
    macro.fp += prf.fp;
    macro.fn += prf.fn;
  }
  const double k = static_cast<double>(categories.size());
  macro.precision /= k;
  macro.recall /= k;
  macro.f1 /= k;
  return macro;
}

nlohmann::json prf_json(const PRF& prf, bool with_counts) {
  nlohmann::json j{{"p", prf.precision}, {"r", prf.recall}, {"f1", prf.f1}};
  if (with_counts) {
    j["tp"] = prf.tp;
    j["fp"] = prf.fp;
    j["fn"] = prf.fn;
  }
  return j;
}

}  // namespace

PRF PRF::from_counts(long tp, long fp, long fn) {
  PRF prf;
  prf.tp = tp;
  prf.fp = fp;
  prf.fn = fn;
  prf.precision = safe_div(tp, tp + fp);
  prf.recall = safe_div(tp, tp + fn);
  prf.f1 = harmonic(prf.precision, prf.recall);
  return prf;
}

std::vector<int> seg_points(const std::vector<SceneAnnotation>& scenes) {
  if (scenes.empty()) throw ValidationError("no scenes");
  validate_partition(scenes, scenes.back().end_shot + 1);
  std::vector<int> points;
  points.reserve(scenes.size());
  for (const auto& scene : scenes) points.push_back(scene.end_shot);
  return points;
}

PRF eval_seg(const std::vector<SceneAnnotation>& pred, const std::vector<SceneAnnotation>& gt) {
  check_same_length(pred, gt);
  const auto gt_ends = by_end(gt);
  long tp = 0;
  for (const auto& scene : pred) tp += gt_ends.count(scene.end_shot);
  const long n_pred = static_cast<long>(pred.size());
  const long n_gt = static_cast<long>(gt.size());
  return PRF::from_counts(tp, n_pred - tp, n_gt - tp);
}

SegClsResult eval_seg_cls(const std::vector<SceneAnnotation>& pred, const std::vector<SceneAnnotation>& gt,
                          int num_categories, const std::optional<std::vector<int>>& macro_categories) {
  check_same_length(pred, gt);
  std::map<int, long> tp, n_pred, n_gt;
  auto category_of = [num_categories](const SceneAnnotation& scene) {
    if (!scene.category) throw ValidationError("scene without category in seg&cls evaluation");
    if (*scene.category < 0 || *scene.category >= num_categories) {
      throw ValidationError("unknown category index " + std::to_string(*scene.category));
    }
    return *scene.category;
  };
  const auto gt_ends = by_end(gt);
  for (const auto& scene : pred) {
    const int c = category_of(scene);
    ++n_pred[c];
    auto it = gt_ends.find(scene.end_shot);
    if (it != gt_ends.end() && category_of(*it->second) == c) ++tp[c];
  }
  for (const auto& scene : gt) ++n_gt[category_of(scene)];

  SegClsResult result;
  std::set<int> seen;
  long tp_sum = 0;
  for (int c = 0; c < num_categories; ++c) {
    if (!n_pred.count(c) && !n_gt.count(c)) continue;
    seen.insert(c);
    result.per_category[c] = PRF::from_counts(tp[c], n_pred[c] - tp[c], n_gt[c] - tp[c]);
    tp_sum += tp[c];
  }
  result.micro = PRF::from_counts(tp_sum, static_cast<long>(pred.size()) - tp_sum,
                                  static_cast<long>(gt.size()) - tp_sum);
  const std::set<int> divisor = macro_categories ? std::set<int>(macro_categories->begin(), macro_categories->end())
                                                 : seen;
  result.macro = macro_of(result.per_category, divisor);
  return result;
}

void Evaluator::add(const std::vector<SceneAnnotation>& pred, const std::vector<SceneAnnotation>& gt) {
  const PRF seg = eval_seg(pred, gt);
  seg_tp_ += seg.tp;
  n_pred_ += static_cast<long>(pred.size());
  n_gt_ += static_cast<long>(gt.size());
  if (!scheme_.has_categories()) return;
  const auto cls = eval_seg_cls(pred, gt, scheme_.num_categories());
  for (const auto& [c, prf] : cls.per_category) {
    tp_[c] += prf.tp;
    n_pred_cat_[c] += prf.tp + prf.fp;
    n_gt_cat_[c] += prf.tp + prf.fn;
  }
}

EvalReport Evaluator::report(const std::optional<std::vector<int>>& macro_categories) const {
  EvalReport report;
  report.seg = PRF::from_counts(seg_tp_, n_pred_ - seg_tp_, n_gt_ - seg_tp_);
  if (!scheme_.has_categories()) return report;
  report.has_classification = true;
  std::map<int, PRF> per_category;
  std::set<int> seen;
  long tp_sum = 0, pred_sum = 0, gt_sum = 0;
  for (int c = 0; c < scheme_.num_categories(); ++c) {
    const long tp = tp_.count(c) ? tp_.at(c) : 0;
    const long np = n_pred_cat_.count(c) ? n_pred_cat_.at(c) : 0;
    const long ng = n_gt_cat_.count(c) ? n_gt_cat_.at(c) : 0;
    if (np == 0 && ng == 0) continue;
    seen.insert(c);
    per_category[c] = PRF::from_counts(tp, np - tp, ng - tp);
    tp_sum += tp;
    pred_sum += np;
    gt_sum += ng;
  }
  report.seg_cls_micro = PRF::from_counts(tp_sum, pred_sum - tp_sum, gt_sum - tp_sum);
  const std::set<int> divisor = macro_categories ? std::set<int>(macro_categories->begin(), macro_categories->end())
                                                 : seen;
  report.seg_cls_macro = macro_of(per_category, divisor);
  for (const auto& [c, prf] : per_category) report.per_category[scheme_.category_name(c)] = prf;
  // Pinned categories without any occurrences still get an (all-zero) row.
  if (macro_categories) {
    for (int c : *macro_categories) report.per_category.emplace(scheme_.category_name(c), PRF{});
  }
  return report;
}

std::string report_to_json(const EvalReport& report) {
  nlohmann::json j;
  j["seg"] = prf_json(report.seg, false);
  j["seg_cls_micro"] = prf_json(report.seg_cls_micro, false);
  j["seg_cls_macro"] = prf_json(report.seg_cls_macro, false);
  j["per_category"] = nlohmann::json::object();
  for (const auto& [name, prf] : report.per_category) j["per_category"][name] = prf_json(prf, true);
  return j.dump(2) + "\n";
}

std::string report_table(const EvalReport& report) {
  std::ostringstream out;
  char line[160];
  auto row = [&](const std::string& name, const PRF& prf) {
    std::snprintf(line, sizeof line, "%-22s %8.4f %8.4f %8.4f\n", name.c_str(), prf.precision, prf.recall,
                  prf.f1);
    out << line;
  };
  std::snprintf(line, sizeof line, "%-22s %8s %8s %8s\n", "metric", "P", "R", "F1");
  out << line;
  row("seg", report.seg);
  if (report.has_classification) {
    row("seg&cls micro", report.seg_cls_micro);
    row("seg&cls macro", report.seg_cls_macro);
    for (const auto& [name, prf] : report.per_category) row("  " + name, prf);
  }
  return out.str();
}

}  // namespace osmsl

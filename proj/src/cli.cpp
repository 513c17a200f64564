#include "osmsl/cli.hpp"

#include <CLI11.hpp>
#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <json.hpp>
#include <map>
#include <optional>
#include <ostream>

#include "osmsl/error.hpp"
#include "osmsl/synth.hpp"
#include "osmsl/trainer.hpp"

namespace osmsl::cli {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

std::vector<VideoSequence> read_features(const fs::path& path) {
  return path.extension() == ".bin" ? load_features_binary(path) : load_features(path);
}

json read_json(const fs::path& path) {
  try {
    return json::parse(read_text_file(path));
  } catch (const json::parse_error& e) {
    throw ValidationError(path.string() + ": " + e.what());
  }
}

void write_json(const fs::path& path, const json& j) { write_text_file(path, j.dump(2) + "\n"); }

// "<dir>/<stem>.config.json" next to a single-file output.
fs::path config_path_for(const fs::path& output) {
  return output.parent_path() / (output.stem().string() + ".config.json");
}

LabelScheme resolve_scheme(const std::string& flag, const fs::path& near) {
  if (!flag.empty()) return load_scheme(flag);
  const fs::path sibling = near.parent_path() / "scheme.json";
  if (fs::exists(sibling)) return load_scheme(sibling);
  throw ValidationError("no --scheme given and no scheme.json next to " + near.string());
}

int resolve_threads(const std::optional<int>& flag) {
  if (flag) return std::max(1, *flag);
  if (const char* env = std::getenv("OSMSL_THREADS")) {
    try {
      return std::max(1, std::stoi(env));
    } catch (const std::exception&) {
      throw ValidationError(std::string("OSMSL_THREADS is not an integer: ") + env);
    }
  }
  return 1;
}

std::vector<std::string> split_list(const std::string& text) {
  std::vector<std::string> out;
  std::string item;
  for (char ch : text + ",") {
    if (ch == ',') {
      if (!item.empty()) out.push_back(item);
      item.clear();
    } else {
      item.push_back(ch);
    }
  }
  return out;
}

template <class T>
void apply(const std::optional<T>& flag, T& target) {
  if (flag) target = *flag;
}

// ---------------------------------------------------------------- synth

struct SynthArgs {
  std::string out, config, split;
  bool binary = false;
  std::optional<std::uint64_t> seed;
  std::optional<int> n_videos, min_shots, max_shots, max_scene_len, categories, d_vis, d_aud;
  std::optional<double> center_scale, sigma_scene, sigma_shot, vis_weight, aud_weight;
  bool generalized = false;
};

void write_corpus(const fs::path& dir, const std::vector<VideoSequence>& videos, const LabelScheme& scheme,
                  bool binary) {
  save_features(dir / "features.jsonl", videos);
  if (binary) save_features_binary(dir / "features.bin", videos);
  save_scenes(dir / "scenes.json", videos, scheme);
  save_scheme(dir / "scheme.json", scheme);
}

int cmd_synth(const SynthArgs& a, std::ostream& out, bool quiet) {
  SynthConfig config;
  std::optional<std::array<double, 3>> fractions;
  if (!a.config.empty()) {
    const json j = read_json(a.config);
    config = synth_config_from_json(j.contains("synth") ? j["synth"] : j, config);
    if (j.contains("split")) fractions = j["split"].get<std::array<double, 3>>();
  }
  apply(a.seed, config.seed);
  apply(a.n_videos, config.n_videos);
  apply(a.min_shots, config.min_shots);
  apply(a.max_shots, config.max_shots);
  apply(a.max_scene_len, config.max_scene_len);
  apply(a.categories, config.num_categories);
  apply(a.d_vis, config.d_vis);
  apply(a.d_aud, config.d_aud);
  apply(a.center_scale, config.center_scale);
  apply(a.sigma_scene, config.sigma_scene);
  apply(a.sigma_shot, config.sigma_shot);
  apply(a.vis_weight, config.vis_weight);
  apply(a.aud_weight, config.aud_weight);
  if (a.generalized) config.generalized = true;
  if (!a.split.empty()) {
    const auto parts = split_list(a.split);
    if (parts.size() != 3) throw ValidationError("--split needs three fractions: train,val,test");
    fractions = std::array<double, 3>{std::stod(parts[0]), std::stod(parts[1]), std::stod(parts[2])};
  }

  const Corpus corpus = generate_corpus(config);
  const double probe = linear_probe_accuracy(corpus);
  const fs::path dir = a.out;
  json resolved{{"command", "synth"}, {"synth", to_json(config)}, {"probe_accuracy", probe}};
  if (fractions) {
    const auto parts = split(corpus.videos, *fractions, config.seed);
    write_corpus(dir / "train", parts.train, corpus.scheme, a.binary);
    write_corpus(dir / "val", parts.val, corpus.scheme, a.binary);
    write_corpus(dir / "test", parts.test, corpus.scheme, a.binary);
    resolved["split"] = *fractions;
    resolved["split_sizes"] = {parts.train.size(), parts.val.size(), parts.test.size()};
  } else {
    write_corpus(dir, corpus.videos, corpus.scheme, a.binary);
  }
  write_json(dir / "config.json", resolved);
  if (!quiet) {
    char line[160];
    std::snprintf(line, sizeof line, "wrote %d videos to %s (probe accuracy %.4f)\n", config.n_videos,
                  dir.string().c_str(), probe);
    out << line;
  }
  return 0;
}

// ---------------------------------------------------------------- train

struct TrainArgs {
  std::string features, scenes, scheme, out, config, head;
  std::optional<std::uint64_t> seed;
  std::optional<int> epochs, batch_size, k, layers, heads, d_model, ff_dim, stage2_hidden;
  std::optional<double> lr, clip_norm, lambda_seg, lambda_cls, dropout;
  bool no_audio = false, no_visual = false, no_diffcorr = false, no_bn = false, no_crf = false, soft_mask = false;
  std::optional<int> threads;
};

int cmd_train(const TrainArgs& a, std::ostream& out, bool quiet) {
  TrainConfig tc;
  ModelConfig mc;
  if (!a.config.empty()) {
    const json j = read_json(a.config);
    if (j.contains("train")) tc = train_config_from_json(j["train"], tc);
    if (j.contains("model")) mc = model_config_from_json(j["model"]);
  }
  if (!a.head.empty()) tc.head = parse_head(a.head);
  apply(a.seed, tc.seed);
  apply(a.epochs, tc.epochs);
  apply(a.batch_size, tc.batch_size);
  apply(a.stage2_hidden, tc.stage2_hidden);
  apply(a.lr, tc.lr);
  apply(a.clip_norm, tc.clip_norm);
  apply(a.lambda_seg, tc.lambda_seg);
  apply(a.lambda_cls, tc.lambda_cls);
  apply(a.k, mc.diffcorr.k);
  apply(a.layers, mc.encoder.n_layers);
  apply(a.heads, mc.encoder.n_heads);
  apply(a.d_model, mc.encoder.d_model);
  apply(a.ff_dim, mc.encoder.d_ff);
  apply(a.dropout, mc.encoder.dropout);
  if (a.no_audio) mc.use_audio = false;
  if (a.no_visual) mc.use_visual = false;
  if (a.no_diffcorr) mc.use_diffcorr = false;
  if (a.no_bn) mc.use_bn = false;
  if (a.no_crf) mc.use_crf = false;
  if (a.soft_mask) mc.hard_mask = false;

  const LabelScheme scheme = resolve_scheme(a.scheme, a.scenes);
  auto videos = read_features(a.features);
  load_scenes(a.scenes, videos, scheme);
  mc = with_corpus_dims(mc, videos);

  auto model = init_model(mc, tc, scheme);
  const CurveLog curve = train(*model, videos, tc);

  const fs::path dir = a.out;
  save_checkpoint(*model, dir / "checkpoint.osmsl");
  write_text_file(dir / "curves.csv", curve.to_csv());
  write_json(dir / "config.json", {{"command", "train"},
                                   {"inputs", {{"features", a.features}, {"scenes", a.scenes}}},
                                   {"scheme", to_json(scheme)},
                                   {"train", to_json(tc)},
                                   {"model", to_json(mc)}});
  if (!quiet) {
    out << "trained " << head_name(tc.head) << " on " << videos.size() << " videos, " << tc.epochs << " epochs\n";
    for (const auto& task : curve.tasks()) {
      const auto s = curve.series(task);
      char line[160];
      std::snprintf(line, sizeof line, "  %-15s loss %.6g -> %.6g\n", task.c_str(), s.front().raw_loss,
                    s.back().raw_loss);
      out << line;
    }
    out << "checkpoint: " << (dir / "checkpoint.osmsl").string() << "\n";
  }
  return 0;
}

// ---------------------------------------------------------------- predict

struct PredictArgs {
  std::string checkpoint, features, scheme, out;
  std::optional<int> threads;
};

int cmd_predict(const PredictArgs& a, std::ostream& out, bool quiet) {
  const auto model = load_checkpoint(a.checkpoint);
  if (!a.scheme.empty()) check_scheme(*model, load_scheme(a.scheme));
  const auto videos = read_features(a.features);
  const int threads = resolve_threads(a.threads);
  const auto predicted = predict(*model, videos, threads);
  save_scenes(a.out, predicted, model->scheme());
  write_json(config_path_for(a.out), {{"command", "predict"},
                                      {"checkpoint", a.checkpoint},
                                      {"features", a.features},
                                      {"head", head_name(model->kind())},
                                      {"scheme", to_json(model->scheme())},
                                      {"threads", threads}});
  if (!quiet) out << "predicted " << predicted.size() << " videos -> " << a.out << "\n";
  return 0;
}

// ---------------------------------------------------------------- eval

struct EvalArgs {
  std::string pred, gt, scheme, out, macro;
};

int cmd_eval(const EvalArgs& a, std::ostream& out, bool quiet) {
  const LabelScheme scheme = resolve_scheme(a.scheme, a.gt);
  const auto gt = load_scene_file(a.gt, scheme);
  const auto pred = load_scene_file(a.pred, scheme);
  std::map<std::string, const VideoSequence*> by_id;
  for (const auto& v : pred) by_id[v.video_id] = &v;
  Evaluator evaluator(scheme);
  for (const auto& g : gt) {
    const auto it = by_id.find(g.video_id);
    if (it == by_id.end()) throw ValidationError("prediction missing video '" + g.video_id + "'");
    evaluator.add(*it->second->scenes, *g.scenes);
  }
  if (pred.size() != gt.size()) throw ValidationError("prediction file has videos absent from ground truth");
  std::optional<std::vector<int>> macro;
  if (!a.macro.empty()) {
    macro.emplace();
    for (const auto& name : split_list(a.macro)) macro->push_back(scheme.category_index(name));
  }
  const EvalReport report = evaluator.report(macro);
  save_report(a.out, report);
  json resolved{{"command", "eval"}, {"pred", a.pred}, {"gt", a.gt}, {"scheme", to_json(scheme)}};
  resolved["macro_categories"] = a.macro.empty() ? json(nullptr) : json(split_list(a.macro));
  write_json(config_path_for(a.out), resolved);
  if (!quiet) out << report_table(report);
  return 0;
}

// ---------------------------------------------------------------- inspect

struct InspectArgs {
  std::string checkpoint, features, video, out;
};

json row_json(const Eigen::MatrixXd& m, Eigen::Index r) {
  json row = json::array();
  for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
  return row;
}

json inspect_net(const OsMslNet& net, const VideoSequence& video) {
  const Eigen::MatrixXd e = net.emissions(video);
  const CrfParams crf = net.crf();
  const CrfMarginals marg = marginals(e, crf);
  const auto tags = net.predict_tags(video);
  const auto& scheme = net.scheme();
  json j;
  json names = json::array();
  for (int t = 0; t < scheme.num_tags(); ++t) names.push_back(scheme.tag_string(scheme.tag(t)));
  j["tags"] = names;
  j["log_partition"] = marg.log_z;
  j["shots"] = json::array();
  for (Eigen::Index s = 0; s < e.rows(); ++s) {
    j["shots"].push_back({{"index", s},
                          {"viterbi", scheme.tag_string(tags[s])},
                          {"emissions", row_json(e, s)},
                          {"marginals", row_json(marg.node, s)}});
  }
  return j;
}

int cmd_inspect(const InspectArgs& a, std::ostream& out, bool /*quiet*/) {
  const auto model = load_checkpoint(a.checkpoint);
  const auto videos = read_features(a.features);
  const auto it = std::find_if(videos.begin(), videos.end(), [&](const auto& v) { return v.video_id == a.video; });
  if (it == videos.end()) throw ValidationError("video '" + a.video + "' not found in " + a.features);
  json j;
  switch (model->kind()) {
    case HeadKind::OsMsl:
      j = inspect_net(static_cast<const OsMslModel&>(*model).net(), *it);
      break;
    case HeadKind::TwoStage:
      j = inspect_net(static_cast<const TwoStageModel&>(*model).stage1(), *it);
      j["stage"] = "stage1";
      break;
    case HeadKind::MultiTask: {
      const auto o = static_cast<const MultiTaskModel&>(*model).outputs(*it);
      j["shots"] = json::array();
      for (Eigen::Index s = 0; s < o.class_logits.rows(); ++s) {
        j["shots"].push_back({{"index", s}, {"boundary_prob", o.boundary_prob(s)}, {"class_logits", row_json(o.class_logits, s)}});
      }
      break;
    }
  }
  j["video_id"] = a.video;
  j["head"] = head_name(model->kind());
  j["scenes"] = json::array();
  for (const auto& s : model->predict(*it)) {
    j["scenes"].push_back({{"start_shot", s.start_shot},
                           {"end_shot", s.end_shot},
                           {"category", s.category ? json(model->scheme().category_name(*s.category)) : json(nullptr)}});
  }
  const std::string text = j.dump(2) + "\n";
  if (a.out.empty()) {
    out << text;
  } else {
    write_text_file(a.out, text);
    write_json(config_path_for(a.out),
               {{"command", "inspect"}, {"checkpoint", a.checkpoint}, {"features", a.features}, {"video", a.video}});
  }
  return 0;
}

// ---------------------------------------------------------------- curves

struct CurvesArgs {
  std::vector<std::string> inputs;
  std::string svg, csv;
  int smooth = 1;
};

int cmd_curves(const CurvesArgs& a, std::ostream& out, bool quiet) {
  if (a.svg.empty() && a.csv.empty()) throw ValidationError("curves needs --svg and/or --csv");
  if (a.smooth < 1) throw ValidationError("--smooth must be >= 1");
  CurveLog combined;
  std::vector<std::pair<std::string, std::vector<std::pair<int, double>>>> series;
  for (const auto& spec : a.inputs) {
    const auto eq = spec.find('=');
    const std::string label = eq == std::string::npos ? "" : spec.substr(0, eq);
    const std::string path = eq == std::string::npos ? spec : spec.substr(eq + 1);
    const CurveLog log = CurveLog::from_csv(read_text_file(path));
    for (const auto& task : log.tasks()) {
      const std::string name = label.empty() ? task : label + "/" + task;
      std::vector<std::pair<int, double>> points;
      double window_sum = 0.0;
      const auto records = log.series(task);
      for (std::size_t i = 0; i < records.size(); ++i) {
        combined.add(records[i].iteration, name, records[i].raw_loss);
        window_sum += records[i].normalized_loss;
        if (i >= static_cast<std::size_t>(a.smooth)) window_sum -= records[i - a.smooth].normalized_loss;
        const double n = static_cast<double>(std::min<std::size_t>(i + 1, a.smooth));
        points.emplace_back(records[i].iteration, window_sum / n);
      }
      series.emplace_back(name, std::move(points));
    }
  }
  if (!a.csv.empty()) write_text_file(a.csv, combined.to_csv());
  if (!a.svg.empty()) write_text_file(a.svg, render_curves_svg(series));
  if (!quiet) out << "rendered " << series.size() << " series\n";
  return 0;
}

}  // namespace

std::string render_curves_svg(const std::vector<std::pair<std::string, std::vector<std::pair<int, double>>>>& series) {
  constexpr double kW = 760, kH = 440, kLeft = 60, kRight = 180, kTop = 20, kBottom = 50;
  static const char* kColors[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2"};
  int max_iter = 1;
  double max_y = 1.0;
  for (const auto& [name, pts] : series) {
    for (const auto& [it, y] : pts) {
      max_iter = std::max(max_iter, it);
      if (std::isfinite(y)) max_y = std::max(max_y, y);
    }
  }
  const double plot_w = kW - kLeft - kRight, plot_h = kH - kTop - kBottom;
  auto px = [&](double it) { return kLeft + plot_w * (it - 1) / std::max(1, max_iter - 1); };
  auto py = [&](double y) { return kTop + plot_h * (1.0 - std::clamp(y, 0.0, max_y) / max_y); };

  std::string svg;
  char buf[256];
  std::snprintf(buf, sizeof buf,
                "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"%.0f\" height=\"%.0f\" font-family=\"sans-serif\" "
                "font-size=\"12\">\n",
                kW, kH);
  svg += buf;
  svg += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  std::snprintf(buf, sizeof buf,
                "<path d=\"M%.1f %.1f V%.1f H%.1f\" stroke=\"black\" fill=\"none\"/>\n", kLeft, kTop, kTop + plot_h,
                kLeft + plot_w);
  svg += buf;
  for (int t = 0; t <= 4; ++t) {
    const double y = max_y * t / 4.0;
    std::snprintf(buf, sizeof buf, "<text x=\"%.1f\" y=\"%.1f\" text-anchor=\"end\">%.2f</text>\n", kLeft - 6,
                  py(y) + 4, y);
    svg += buf;
  }
  std::snprintf(buf, sizeof buf,
                "<text x=\"%.1f\" y=\"%.1f\" text-anchor=\"middle\">iteration (1..%d)</text>\n"
                "<text x=\"14\" y=\"%.1f\" transform=\"rotate(-90 14 %.1f)\" text-anchor=\"middle\">normalized loss</text>\n",
                kLeft + plot_w / 2, kH - 15, max_iter, kTop + plot_h / 2, kTop + plot_h / 2);
  svg += buf;
  for (std::size_t s = 0; s < series.size(); ++s) {
    const char* color = kColors[s % std::size(kColors)];
    svg += "<polyline fill=\"none\" stroke-width=\"1.5\" stroke=\"";
    svg += color;
    svg += "\" points=\"";
    for (const auto& [it, y] : series[s].second) {
      std::snprintf(buf, sizeof buf, "%.1f,%.1f ", px(it), py(y));
      svg += buf;
    }
    svg += "\"/>\n";
    const double ly = kTop + 16 + 18.0 * static_cast<double>(s);
    std::snprintf(buf, sizeof buf,
                  "<line x1=\"%.1f\" y1=\"%.1f\" x2=\"%.1f\" y2=\"%.1f\" stroke=\"%s\" stroke-width=\"2\"/>"
                  "<text x=\"%.1f\" y=\"%.1f\">",
                  kW - kRight + 12, ly, kW - kRight + 36, ly, color, kW - kRight + 42, ly + 4);
    svg += buf;
    svg += series[s].first;
    svg += "</text>\n";
  }
  svg += "</svg>\n";
  return svg;
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"OS-MSL: one-stage scene segmentation and classification by link tagging", "osmsl"};
  app.require_subcommand(1);
  bool quiet = false;
  app.add_flag("-q,--quiet", quiet, "Only print errors");

  SynthArgs sa;
  auto* synth = app.add_subcommand("synth", "Generate a synthetic corpus (features.jsonl, scenes.json, scheme.json)");
  synth->add_option("--out", sa.out, "Output directory")->required();
  synth->add_option("--config", sa.config, "JSON config; flags override it");
  synth->add_option("--seed", sa.seed);
  synth->add_option("--videos", sa.n_videos);
  synth->add_option("--min-shots", sa.min_shots);
  synth->add_option("--max-shots", sa.max_shots);
  synth->add_option("--max-scene-len", sa.max_scene_len);
  synth->add_option("--categories", sa.categories);
  synth->add_option("--d-vis", sa.d_vis);
  synth->add_option("--d-aud", sa.d_aud);
  synth->add_option("--center-scale", sa.center_scale);
  synth->add_option("--sigma-scene", sa.sigma_scene);
  synth->add_option("--sigma-shot", sa.sigma_shot);
  synth->add_option("--vis-weight", sa.vis_weight);
  synth->add_option("--aud-weight", sa.aud_weight);
  synth->add_flag("--generalized", sa.generalized, "Rotate the within-class drift process");
  synth->add_option("--split", sa.split, "train,val,test fractions; writes train/ val/ test/ subdirectories");
  synth->add_flag("--binary", sa.binary, "Also write features.bin");

  TrainArgs ta;
  auto* trn = app.add_subcommand("train", "Train a model; writes checkpoint.osmsl, curves.csv, config.json");
  trn->add_option("--features", ta.features, "features.jsonl or .bin")->required()->check(CLI::ExistingFile);
  trn->add_option("--scenes", ta.scenes, "Gold scenes.json")->required()->check(CLI::ExistingFile);
  trn->add_option("--scheme", ta.scheme, "scheme.json (default: next to --scenes)");
  trn->add_option("--out", ta.out, "Output directory")->required();
  trn->add_option("--config", ta.config, "JSON with \"train\" / \"model\" sections; flags override it");
  trn->add_option("--head", ta.head, "osmsl | multitask | twostage")
      ->check(CLI::IsMember({"osmsl", "multitask", "twostage"}));
  trn->add_option("--seed", ta.seed);
  trn->add_option("--epochs", ta.epochs);
  trn->add_option("--batch-size", ta.batch_size, "Videos per step");
  trn->add_option("--lr", ta.lr);
  trn->add_option("--clip-norm", ta.clip_norm);
  trn->add_option("--lambda-seg", ta.lambda_seg);
  trn->add_option("--lambda-cls", ta.lambda_cls);
  trn->add_option("--stage2-hidden", ta.stage2_hidden);
  trn->add_option("--k", ta.k, "DiffCorrNet window half-count");
  trn->add_option("--layers", ta.layers);
  trn->add_option("--heads", ta.heads);
  trn->add_option("--d-model", ta.d_model);
  trn->add_option("--ff-dim", ta.ff_dim);
  trn->add_option("--dropout", ta.dropout);
  trn->add_flag("--no-audio", ta.no_audio);
  trn->add_flag("--no-visual", ta.no_visual);
  trn->add_flag("--no-diffcorr", ta.no_diffcorr);
  trn->add_flag("--no-bn", ta.no_bn);
  trn->add_flag("--no-crf", ta.no_crf, "Softmax training, argmax + repair decoding");
  trn->add_flag("--soft-mask", ta.soft_mask, "Learn illegal transitions instead of masking them");
  trn->add_option("--threads", ta.threads, "Accepted for symmetry; training is single-threaded");

  PredictArgs pa;
  auto* prd = app.add_subcommand("predict", "Decode scenes for every video; writes predictions.json");
  prd->add_option("--checkpoint", pa.checkpoint)->required()->check(CLI::ExistingFile);
  prd->add_option("--features", pa.features)->required()->check(CLI::ExistingFile);
  prd->add_option("--scheme", pa.scheme, "Reject the checkpoint unless it matches this scheme");
  prd->add_option("--out", pa.out)->required();
  prd->add_option("--threads", pa.threads, "Worker threads (env OSMSL_THREADS, default 1)");

  EvalArgs ea;
  ea.out = "report.json";
  auto* evl = app.add_subcommand("eval", "Score predictions against gold scenes; writes report.json");
  evl->add_option("--pred", ea.pred)->required()->check(CLI::ExistingFile);
  evl->add_option("--gt", ea.gt)->required()->check(CLI::ExistingFile);
  evl->add_option("--scheme", ea.scheme, "scheme.json (default: next to --gt)");
  evl->add_option("--macro-categories", ea.macro, "Comma-separated categories averaged by macro F1");
  evl->add_option("--out", ea.out, "Report path")->capture_default_str();

  InspectArgs ia;
  auto* ins = app.add_subcommand("inspect", "Dump per-shot emissions, marginals and Viterbi tags for one video");
  ins->add_option("--checkpoint", ia.checkpoint)->required()->check(CLI::ExistingFile);
  ins->add_option("--features", ia.features)->required()->check(CLI::ExistingFile);
  ins->add_option("--video", ia.video)->required();
  ins->add_option("--out", ia.out, "JSON output (default: stdout)");

  CurvesArgs ca;
  auto* crv = app.add_subcommand("curves", "Render normalized loss curves to SVG and/or CSV");
  crv->add_option("--input", ca.inputs, "curves.csv or label=curves.csv; repeatable")->required();
  crv->add_option("--svg", ca.svg);
  crv->add_option("--csv", ca.csv);
  crv->add_option("--smooth", ca.smooth, "Moving-average window for the SVG")->capture_default_str();

  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err);
  }

  try {
    if (*synth) return cmd_synth(sa, out, quiet);
    if (*trn) return cmd_train(ta, out, quiet);
    if (*prd) return cmd_predict(pa, out, quiet);
    if (*evl) return cmd_eval(ea, out, quiet);
    if (*ins) return cmd_inspect(ia, out, quiet);
    if (*crv) return cmd_curves(ca, out, quiet);
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }
  return 1;
}

}  // namespace osmsl::cli

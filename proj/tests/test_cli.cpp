#include <doctest.h>

#include <json.hpp>
#include <sstream>

#include "osmsl/cli.hpp"
#include "osmsl/feature_io.hpp"
#include "temp_dir.hpp"

using namespace osmsl;
namespace fs = std::filesystem;

namespace {

struct Result {
  int code;
  std::string out, err;
};

Result run_cli(std::vector<std::string> args) {
  args.insert(args.begin(), "osmsl");
  std::ostringstream out, err;
  const int code = cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

std::vector<std::string> small_synth(const fs::path& dir) {
  return {"synth", "--out", dir.string(), "--seed", "7", "--videos", "6", "--min-shots", "6", "--max-shots",
          "10", "--categories", "3", "--d-vis", "4", "--d-aud", "3"};
}

std::vector<std::string> small_train(const fs::path& corpus, const fs::path& out, const std::string& head) {
  return {"-q",          "train", "--features",   (corpus / "features.jsonl").string(),
          "--scenes",    (corpus / "scenes.json").string(),     "--out", out.string(),
          "--head",      head,    "--epochs",     "2",
          "--d-model",   "8",     "--heads",      "2",
          "--ff-dim",    "8",     "--layers",     "1",
          "--stage2-hidden", "8"};
}

}  // namespace

TEST_CASE("synth is byte-identical across runs") {
  TempDir dir;
  REQUIRE(run_cli(small_synth(dir / "a")).code == 0);
  REQUIRE(run_cli(small_synth(dir / "b")).code == 0);
  for (const char* name : {"features.jsonl", "scenes.json", "scheme.json", "config.json"}) {
    CHECK(read_text_file(dir / "a" / name) == read_text_file(dir / "b" / name));
  }
  auto config = nlohmann::json::parse(read_text_file(dir / "a" / "config.json"));
  CHECK(config["synth"]["seed"] == 7);
  CHECK(config.contains("probe_accuracy"));
}

TEST_CASE("synth with splits and config file") {
  TempDir dir;
  write_text_file(dir / "synth.json", R"({"synth": {"n_videos": 12, "min_shots": 4, "max_shots": 6}, "split": [0.5, 0.25, 0.25]})");
  auto r = run_cli({"synth", "--out", (dir / "c").string(), "--config", (dir / "synth.json").string(), "--binary"});
  REQUIRE(r.code == 0);
  CHECK(load_features((dir / "c" / "train" / "features.jsonl")).size() == 6);
  CHECK(load_features_binary((dir / "c" / "test" / "features.bin")).size() == 3);
  auto bad = run_cli({"synth", "--out", (dir / "d").string(), "--split", "0.5,0.5"});
  CHECK(bad.code != 0);
  CHECK(bad.err.find("error") != std::string::npos);
}

TEST_CASE("train, predict, eval, inspect, curves") {
  TempDir dir;
  REQUIRE(run_cli(small_synth(dir / "data")).code == 0);
  for (const std::string head : {"osmsl", "multitask", "twostage"}) {
    const fs::path run = dir / head;
    auto t = run_cli(small_train(dir / "data", run, head));
    REQUIRE_MESSAGE(t.code == 0, t.err);
    CHECK(fs::exists(run / "checkpoint.osmsl"));
    CHECK(fs::exists(run / "curves.csv"));
    CHECK(fs::exists(run / "config.json"));

    auto p = run_cli({"-q", "predict", "--checkpoint", (run / "checkpoint.osmsl").string(), "--features",
                      (dir / "data" / "features.jsonl").string(), "--scheme", (dir / "data" / "scheme.json").string(),
                      "--out", (run / "predictions.json").string(), "--threads", "2"});
    REQUIRE_MESSAGE(p.code == 0, p.err);
    CHECK(fs::exists(run / "predictions.config.json"));

    auto e = run_cli({"eval", "--pred", (run / "predictions.json").string(), "--gt",
                      (dir / "data" / "scenes.json").string(), "--out", (run / "report.json").string()});
    REQUIRE_MESSAGE(e.code == 0, e.err);
    CHECK(e.out.find("seg&cls micro") != std::string::npos);
    auto report = nlohmann::json::parse(read_text_file(run / "report.json"));
    CHECK(report["seg"].contains("f1"));

    auto i = run_cli({"inspect", "--checkpoint", (run / "checkpoint.osmsl").string(), "--features",
                      (dir / "data" / "features.jsonl").string(), "--video", "video_0001"});
    REQUIRE_MESSAGE(i.code == 0, i.err);
    auto dump = nlohmann::json::parse(i.out);
    CHECK(dump["video_id"] == "video_0001");
    CHECK(dump["head"] == head);
    CHECK_FALSE(dump["shots"].empty());
    if (head != "multitask") {
      CHECK(dump["shots"][0].contains("marginals"));
      CHECK(dump["shots"][0].contains("viterbi"));
    }
  }

  auto c = run_cli({"curves", "--input", "one=" + (dir / "osmsl" / "curves.csv").string(), "--input",
                    "mt=" + (dir / "multitask" / "curves.csv").string(), "--svg", (dir / "curves.svg").string(),
                    "--csv", (dir / "curves.csv").string()});
  REQUIRE_MESSAGE(c.code == 0, c.err);
  const auto svg = read_text_file(dir / "curves.svg");
  CHECK(svg.find("<svg") == 0);
  CHECK(svg.find("mt/segmentation") != std::string::npos);
  CHECK(svg.find("mt/classification") != std::string::npos);
  CHECK(read_text_file(dir / "curves.csv").find("one/osmsl") != std::string::npos);
}

TEST_CASE("eval of ground truth against itself") {
  TempDir dir;
  REQUIRE(run_cli(small_synth(dir / "data")).code == 0);
  const auto gt = (dir / "data" / "scenes.json").string();
  auto r = run_cli({"-q", "eval", "--pred", gt, "--gt", gt, "--out", (dir / "report.json").string(),
                    "--macro-categories", "Studio,Meeting,Outdoor"});
  REQUIRE_MESSAGE(r.code == 0, r.err);
  auto report = nlohmann::json::parse(read_text_file(dir / "report.json"));
  CHECK(report["seg"]["f1"] == 1.0);
  CHECK(report["seg_cls_micro"]["f1"] == 1.0);
  CHECK(report["seg_cls_macro"]["f1"] == 1.0);
}

TEST_CASE("errors exit nonzero") {
  TempDir dir;
  CHECK(run_cli({"synth", "--out", (dir / "x").string(), "--bogus"}).code != 0);
  CHECK(run_cli({"frobnicate"}).code != 0);
  CHECK(run_cli({}).code != 0);
  CHECK(run_cli({"predict", "--checkpoint", (dir / "missing").string(), "--features", "x", "--out", "y"}).code != 0);

  REQUIRE(run_cli(small_synth(dir / "data")).code == 0);
  REQUIRE(run_cli(small_train(dir / "data", dir / "run", "osmsl")).code == 0);
  // a segmentation-only scheme does not match the checkpoint
  write_text_file(dir / "ss.json", R"({"mode": "SS", "categories": []})");
  auto mismatch = run_cli({"predict", "--checkpoint", (dir / "run" / "checkpoint.osmsl").string(), "--features",
                           (dir / "data" / "features.jsonl").string(), "--scheme", (dir / "ss.json").string(),
                           "--out", (dir / "p.json").string()});
  CHECK(mismatch.code != 0);
  CHECK(mismatch.err.find("scheme mismatch") != std::string::npos);
  auto unknown = run_cli({"inspect", "--checkpoint", (dir / "run" / "checkpoint.osmsl").string(), "--features",
                          (dir / "data" / "features.jsonl").string(), "--video", "nope"});
  CHECK(unknown.code != 0);
}

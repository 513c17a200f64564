#include <doctest.h>

#include <fstream>
#include <json.hpp>

#include "osmsl/error.hpp"
#include "osmsl/feature_io.hpp"
#include "osmsl/synth.hpp"
#include "temp_dir.hpp"

using namespace osmsl;

namespace {

void write_lines(const std::filesystem::path& path, const std::vector<std::string>& lines) {
  std::ofstream out(path);
  for (const auto& l : lines) out << l << '\n';
}

std::string shot_line(const std::string& video, int index, int d_vis = 4, int d_aud = 2) {
  nlohmann::json j{{"video_id", video},
                   {"shot_index", index},
                   {"start_sec", index * 2.0},
                   {"end_sec", index * 2.0 + 1.5},
                   {"vis", std::vector<double>(d_vis, 0.25 * index)},
                   {"aud", std::vector<double>(d_aud, -1.0)}};
  return j.dump();
}

}  // namespace

TEST_CASE("load_features groups and sorts") {
  TempDir dir;
  write_lines(dir / "f.jsonl", {shot_line("b", 2), shot_line("a", 0), shot_line("b", 0), shot_line("a", 2),
                                shot_line("b", 1), "", shot_line("a", 1)});
  auto videos = load_features(dir / "f.jsonl");
  REQUIRE(videos.size() == 2);
  CHECK(videos[0].video_id == "a");
  CHECK(videos[1].video_id == "b");
  for (const auto& v : videos) {
    REQUIRE(v.num_shots() == 3);
    for (int j = 0; j < 3; ++j) CHECK(v.shots[j].shot_index == j);
    CHECK(v.visual().cols() == 4);
    CHECK(v.audio().cols() == 2);
    CHECK_FALSE(v.scenes.has_value());
  }
  CHECK(videos[1].visual()(2, 0) == doctest::Approx(0.5));
}

TEST_CASE("load_features errors") {
  TempDir dir;
  write_lines(dir / "gap.jsonl", {shot_line("a", 0), shot_line("a", 2)});
  CHECK_THROWS_WITH_AS(load_features(dir / "gap.jsonl"), doctest::Contains("missing index 1"), ValidationError);

  write_lines(dir / "dup.jsonl", {shot_line("a", 0), shot_line("a", 0)});
  CHECK_THROWS_WITH_AS(load_features(dir / "dup.jsonl"), doctest::Contains("duplicate"), ValidationError);

  write_lines(dir / "dim.jsonl", {shot_line("a", 0), shot_line("a", 1, 3)});
  CHECK_THROWS_WITH_AS(load_features(dir / "dim.jsonl"), doctest::Contains("dim mismatch"), ValidationError);

  write_lines(dir / "bad.jsonl", {shot_line("a", 0), "{not json"});
  CHECK_THROWS_WITH_AS(load_features(dir / "bad.jsonl"), doctest::Contains("line 2"), ValidationError);

  CHECK_THROWS_AS(load_features(dir / "missing.jsonl"), IoError);
}

TEST_CASE("feature round trips") {
  SynthConfig config;
  config.n_videos = 3;
  config.d_vis = 5;
  config.d_aud = 3;
  auto corpus = generate_corpus(config);
  for (auto& v : corpus.videos) v.scenes.reset();
  TempDir dir;

  save_features_binary(dir / "f.bin", corpus.videos);
  CHECK(load_features_binary(dir / "f.bin") == corpus.videos);

  save_features(dir / "f.jsonl", corpus.videos);
  CHECK(load_features(dir / "f.jsonl") == corpus.videos);

  write_lines(dir / "not.bin", {"hello"});
  CHECK_THROWS(load_features_binary(dir / "not.bin"));
}

TEST_CASE("scenes files") {
  auto scheme = LabelScheme::classification({"A", "B"});
  TempDir dir;
  std::vector<VideoSequence> videos(1);
  videos[0].video_id = "v";
  for (int j = 0; j < 5; ++j) videos[0].shots.push_back({"v", j, j * 1.0, j + 1.0, {1.0}, {2.0}});
  videos[0].scenes = std::vector<SceneAnnotation>{{0, 2, 0}, {3, 4, 1}};
  save_scenes(dir / "pred.json", videos, scheme);

  auto j = nlohmann::json::parse(read_text_file(dir / "pred.json"));
  const auto dumped = j.dump();
  CHECK(dumped.find("start_shot") != std::string::npos);
  CHECK(dumped.find("end_shot") != std::string::npos);
  CHECK(dumped.find("\"B\"") != std::string::npos);

  auto reloaded = videos;
  reloaded[0].scenes.reset();
  load_scenes(dir / "pred.json", reloaded, scheme);
  CHECK(reloaded == videos);
  auto parsed = load_scene_file(dir / "pred.json", scheme);
  REQUIRE(parsed.size() == 1);
  CHECK(*parsed[0].scenes == *videos[0].scenes);

  auto write_scenes = [&](const std::string& body) {
    write_text_file(dir / "s.json", body);
    auto copy = videos;
    copy[0].scenes.reset();
    load_scenes(dir / "s.json", copy, scheme);
  };
  const std::string head = R"({"videos":[{"video_id":"v","scenes":[)";
  CHECK_NOTHROW(write_scenes(head + R"({"start_shot":0,"end_shot":2,"category":"A"},
      {"start_shot":3,"end_shot":4,"category":"A"}]}]})"));
  CHECK_THROWS_WITH(write_scenes(head + R"({"start_shot":0,"end_shot":2,"category":"A"},
      {"start_shot":2,"end_shot":4,"category":"A"}]}]})"),
                    doctest::Contains("shot 2 assigned twice"));
  CHECK_THROWS_WITH(write_scenes(head + R"({"start_shot":0,"end_shot":1,"category":"A"},
      {"start_shot":3,"end_shot":4,"category":"A"}]}]})"),
                    doctest::Contains("gap in scenes at shot 2"));
  CHECK_THROWS_WITH(write_scenes(head + R"({"start_shot":0,"end_shot":4,"category":"Z"}]}]})"),
                    doctest::Contains("unknown category"));
}

TEST_CASE("scheme and report files") {
  TempDir dir;
  auto scheme = LabelScheme::classification({"Studio", "Meeting"});
  save_scheme(dir / "scheme.json", scheme);
  CHECK(load_scheme(dir / "scheme.json") == scheme);
  save_scheme(dir / "ss.json", LabelScheme::segmentation());
  CHECK(load_scheme(dir / "ss.json") == LabelScheme::segmentation());

  EvalReport report;
  report.seg = PRF::from_counts(3, 1, 1);
  report.has_classification = true;
  report.seg_cls_micro = PRF::from_counts(2, 2, 2);
  report.per_category["Studio"] = PRF::from_counts(1, 0, 1);
  save_report(dir / "report.json", report);
  auto j = nlohmann::json::parse(read_text_file(dir / "report.json"));
  for (const char* block : {"seg", "seg_cls_micro", "seg_cls_macro"}) {
    REQUIRE(j.contains(block));
    for (const char* key : {"p", "r", "f1"}) CHECK(j[block].contains(key));
  }
  CHECK(j["seg"]["p"].get<double>() == doctest::Approx(0.75));
}

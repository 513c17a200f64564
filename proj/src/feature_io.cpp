#include "osmsl/feature_io.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <map>
#include <json.hpp>
#include <sstream>

#include "osmsl/error.hpp"

namespace osmsl {

using nlohmann::json;

namespace {

constexpr char kFeatureMagic[8] = {'O', 'S', 'M', 'S', 'L', 'F', 'T', '1'};

Eigen::MatrixXd stack(const std::vector<ShotRecord>& shots, bool visual) {
  if (shots.empty()) return {};
  const auto dim = visual ? shots.front().vis.size() : shots.front().aud.size();
  Eigen::MatrixXd m(shots.size(), dim);
  for (std::size_t i = 0; i < shots.size(); ++i) {
    const auto& v = visual ? shots[i].vis : shots[i].aud;
    for (std::size_t d = 0; d < dim; ++d) m(i, d) = v[d];
  }
  return m;
}

std::vector<double> read_vector(const json& j, const char* key, std::size_t line) {
  if (!j.contains(key) || !j[key].is_array()) {
    throw ValidationError("line " + std::to_string(line) + ": missing array '" + key + "'");
  }
  std::vector<double> out;
  out.reserve(j[key].size());
  for (const auto& x : j[key]) {
    if (!x.is_number()) throw ValidationError("line " + std::to_string(line) + ": non-numeric entry in '" + key + "'");
    const double v = x.get<double>();
    if (!std::isfinite(v)) throw ValidationError("line " + std::to_string(line) + ": non-finite feature");
    out.push_back(v);
  }
  return out;
}

void put_u64(std::ostream& out, std::uint64_t v) {
  unsigned char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
  out.write(reinterpret_cast<const char*>(b), 8);
}

std::uint64_t get_u64(std::istream& in) {
  unsigned char b[8];
  if (!in.read(reinterpret_cast<char*>(b), 8)) throw IoError("truncated binary file");
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
  return v;
}

void put_f64(std::ostream& out, double x) { put_u64(out, std::bit_cast<std::uint64_t>(x)); }
double get_f64(std::istream& in) { return std::bit_cast<double>(get_u64(in)); }

std::ifstream open_in(const std::filesystem::path& path, std::ios::openmode mode = std::ios::in) {
  std::ifstream in(path, mode);
  if (!in) throw IoError("cannot open '" + path.string() + "' for reading");
  return in;
}

std::ofstream open_out(const std::filesystem::path& path, std::ios::openmode mode = std::ios::out) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, mode | std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  return out;
}

json scenes_json(const std::vector<SceneAnnotation>& scenes, const LabelScheme& scheme) {
  json arr = json::array();
  for (const auto& s : scenes) {
    json category = nullptr;
    if (s.category) category = scheme.category_name(*s.category);
    arr.push_back({{"start_shot", s.start_shot}, {"end_shot", s.end_shot}, {"category", category}});
  }
  return arr;
}

std::vector<SceneAnnotation> parse_scenes(const json& arr, const LabelScheme& scheme, const std::string& video_id) {
  std::vector<SceneAnnotation> scenes;
  for (const auto& s : arr) {
    SceneAnnotation scene;
    scene.start_shot = s.at("start_shot").get<int>();
    scene.end_shot = s.at("end_shot").get<int>();
    const bool has_cat = s.contains("category") && !s["category"].is_null();
    if (scheme.has_categories()) {
      if (!has_cat) throw ValidationError("video '" + video_id + "': scene without category in SSC mode");
      scene.category = scheme.category_index(s["category"].get<std::string>());
    }
    scenes.push_back(scene);
  }
  return scenes;
}

}  // namespace

Eigen::MatrixXd VideoSequence::visual() const { return stack(shots, true); }
Eigen::MatrixXd VideoSequence::audio() const { return stack(shots, false); }

int Corpus::d_vis() const { return videos.empty() ? 0 : static_cast<int>(videos.front().shots.front().vis.size()); }
int Corpus::d_aud() const { return videos.empty() ? 0 : static_cast<int>(videos.front().shots.front().aud.size()); }

std::vector<VideoSequence> group_shots(std::vector<ShotRecord> shots) {
  std::map<std::string, std::vector<ShotRecord>> grouped;
  std::optional<std::size_t> d_vis, d_aud;
  for (auto& shot : shots) {
    if (!d_vis) {
      d_vis = shot.vis.size();
      d_aud = shot.aud.size();
    }
    if (shot.vis.size() != *d_vis || shot.aud.size() != *d_aud) {
      throw ValidationError("feature dim mismatch at video '" + shot.video_id + "' shot " +
                            std::to_string(shot.shot_index) + ": expected vis " + std::to_string(*d_vis) +
                            "/aud " + std::to_string(*d_aud) + ", got " + std::to_string(shot.vis.size()) +
                            "/" + std::to_string(shot.aud.size()));
    }
    if (!(shot.start_sec < shot.end_sec)) {
      throw ValidationError("video '" + shot.video_id + "' shot " + std::to_string(shot.shot_index) +
                            ": start_sec must be < end_sec");
    }
    grouped[shot.video_id].push_back(std::move(shot));
  }
  if (d_vis && *d_vis == 0 && *d_aud == 0) throw ValidationError("shots carry no features");
  std::vector<VideoSequence> videos;
  for (auto& [id, list] : grouped) {
    std::sort(list.begin(), list.end(),
              [](const ShotRecord& a, const ShotRecord& b) { return a.shot_index < b.shot_index; });
    for (std::size_t i = 0; i < list.size(); ++i) {
      const int index = list[i].shot_index;
      if (index < static_cast<int>(i)) {
        throw ValidationError("duplicate shot (" + id + ", " + std::to_string(index) + ")");
      }
      if (index > static_cast<int>(i)) {
        throw ValidationError("gap in shot_index of video '" + id + "': missing index " + std::to_string(i));
      }
    }
    videos.push_back(VideoSequence{id, std::move(list), std::nullopt});
  }
  return videos;
}

std::vector<VideoSequence> load_features(const std::filesystem::path& path) {
  auto in = open_in(path);
  std::vector<ShotRecord> shots;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::parse_error& e) {
      throw ValidationError("malformed JSON at line " + std::to_string(line_no) + ": " + e.what());
    }
    try {
      ShotRecord shot;
      shot.video_id = j.at("video_id").get<std::string>();
      shot.shot_index = j.at("shot_index").get<int>();
      shot.start_sec = j.at("start_sec").get<double>();
      shot.end_sec = j.at("end_sec").get<double>();
      if (shot.shot_index < 0) throw ValidationError("negative shot_index");
      shot.vis = read_vector(j, "vis", line_no);
      shot.aud = read_vector(j, "aud", line_no);
      shots.push_back(std::move(shot));
    } catch (const json::exception& e) {
      throw ValidationError("bad record at line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return group_shots(std::move(shots));
}

void save_features(const std::filesystem::path& path, const std::vector<VideoSequence>& videos) {
  auto out = open_out(path);
  for (const auto& video : videos) {
    for (const auto& shot : video.shots) {
      json j{{"video_id", shot.video_id}, {"shot_index", shot.shot_index}, {"start_sec", shot.start_sec},
             {"end_sec", shot.end_sec},   {"vis", shot.vis},                {"aud", shot.aud}};
      out << j.dump() << '\n';
    }
  }
  if (!out) throw IoError("write failed: " + path.string());
}

void save_features_binary(const std::filesystem::path& path, const std::vector<VideoSequence>& videos) {
  json manifest;
  manifest["d_vis"] = videos.empty() ? 0 : videos.front().shots.front().vis.size();
  manifest["d_aud"] = videos.empty() ? 0 : videos.front().shots.front().aud.size();
  manifest["videos"] = json::array();
  for (const auto& v : videos) manifest["videos"].push_back({{"video_id", v.video_id}, {"n_shots", v.num_shots()}});
  const std::string text = manifest.dump();

  auto out = open_out(path, std::ios::binary);
  out.write(kFeatureMagic, sizeof kFeatureMagic);
  put_u64(out, text.size());
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  for (const auto& video : videos) {
    for (const auto& shot : video.shots) {
      put_f64(out, shot.start_sec);
      put_f64(out, shot.end_sec);
      for (double x : shot.vis) put_f64(out, x);
      for (double x : shot.aud) put_f64(out, x);
    }
  }
  if (!out) throw IoError("write failed: " + path.string());
}

std::vector<VideoSequence> load_features_binary(const std::filesystem::path& path) {
  auto in = open_in(path, std::ios::binary);
  char magic[8];
  if (!in.read(magic, 8) || std::memcmp(magic, kFeatureMagic, 8) != 0) {
    throw IoError("'" + path.string() + "' is not a binary feature file (bad magic/version)");
  }
  const auto len = get_u64(in);
  std::string text(len, '\0');
  if (!in.read(text.data(), static_cast<std::streamsize>(len))) throw IoError("truncated manifest");
  const json manifest = json::parse(text);
  const auto d_vis = manifest.at("d_vis").get<std::size_t>();
  const auto d_aud = manifest.at("d_aud").get<std::size_t>();
  std::vector<ShotRecord> shots;
  for (const auto& v : manifest.at("videos")) {
    const auto id = v.at("video_id").get<std::string>();
    const int n = v.at("n_shots").get<int>();
    for (int i = 0; i < n; ++i) {
      ShotRecord shot;
      shot.video_id = id;
      shot.shot_index = i;
      shot.start_sec = get_f64(in);
      shot.end_sec = get_f64(in);
      shot.vis.resize(d_vis);
      shot.aud.resize(d_aud);
      for (auto& x : shot.vis) x = get_f64(in);
      for (auto& x : shot.aud) x = get_f64(in);
      shots.push_back(std::move(shot));
    }
  }
  return group_shots(std::move(shots));
}

std::vector<VideoSequence> load_scene_file(const std::filesystem::path& path, const LabelScheme& scheme) {
  json j;
  try {
    j = json::parse(read_text_file(path));
  } catch (const json::parse_error& e) {
    throw ValidationError("malformed JSON in '" + path.string() + "': " + e.what());
  }
  std::vector<VideoSequence> out;
  try {
    for (const auto& v : j.at("videos")) {
      VideoSequence video;
      video.video_id = v.at("video_id").get<std::string>();
      video.scenes = parse_scenes(v.at("scenes"), scheme, video.video_id);
      out.push_back(std::move(video));
    }
  } catch (const json::exception& e) {
    throw ValidationError("bad scenes file '" + path.string() + "': " + e.what());
  }
  std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.video_id < b.video_id; });
  for (std::size_t i = 1; i < out.size(); ++i) {
    if (out[i].video_id == out[i - 1].video_id) {
      throw ValidationError("video '" + out[i].video_id + "' listed twice in scenes file");
    }
  }
  for (const auto& video : out) {
    if (video.scenes->empty()) throw ValidationError("video '" + video.video_id + "' has no scenes");
    try {
      validate_partition(*video.scenes, video.scenes->back().end_shot + 1);
    } catch (const ValidationError& e) {
      throw ValidationError("video '" + video.video_id + "': " + e.what());
    }
  }
  return out;
}

void load_scenes(const std::filesystem::path& path, std::vector<VideoSequence>& videos, const LabelScheme& scheme) {
  auto annotated = load_scene_file(path, scheme);
  std::map<std::string, VideoSequence*> index;
  for (auto& v : videos) index[v.video_id] = &v;
  for (auto& a : annotated) {
    auto it = index.find(a.video_id);
    if (it == index.end()) throw ValidationError("scenes reference unknown video '" + a.video_id + "'");
    try {
      validate_partition(*a.scenes, it->second->num_shots());
    } catch (const ValidationError& e) {
      throw ValidationError("video '" + a.video_id + "': " + e.what());
    }
    it->second->scenes = std::move(a.scenes);
  }
  for (const auto& v : videos) {
    if (!v.scenes) throw ValidationError("video '" + v.video_id + "' has no scene annotation");
  }
}

void save_scenes(const std::filesystem::path& path, const std::vector<VideoSequence>& videos,
                 const LabelScheme& scheme) {
  json j;
  j["videos"] = json::array();
  for (const auto& v : videos) {
    if (!v.scenes) throw ValidationError("video '" + v.video_id + "' has no scenes to save");
    j["videos"].push_back({{"video_id", v.video_id}, {"scenes", scenes_json(*v.scenes, scheme)}});
  }
  write_text_file(path, j.dump(2) + "\n");
}

LabelScheme load_scheme(const std::filesystem::path& path) {
  const json j = json::parse(read_text_file(path));
  const auto mode = j.at("mode").get<std::string>();
  if (mode == "SS") return LabelScheme::segmentation();
  if (mode == "SSC") return LabelScheme::classification(j.at("categories").get<std::vector<std::string>>());
  throw ValidationError("unknown scheme mode '" + mode + "'");
}

void save_scheme(const std::filesystem::path& path, const LabelScheme& scheme) {
  json j{{"mode", scheme.has_categories() ? "SSC" : "SS"}, {"categories", scheme.categories()}};
  write_text_file(path, j.dump(2) + "\n");
}

void save_report(const std::filesystem::path& path, const EvalReport& report) {
  write_text_file(path, report_to_json(report));
}

void write_text_file(const std::filesystem::path& path, const std::string& text) {
  auto out = open_out(path, std::ios::binary);
  out << text;
  if (!out) throw IoError("write failed: " + path.string());
}

std::string read_text_file(const std::filesystem::path& path) {
  auto in = open_in(path, std::ios::binary);
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

}  // namespace osmsl

// File formats around the video features: PGM frames with their manifest, the flow CSV and rhythm JSON.
#include <algorithm>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "cmt/error.hpp"
#include "cmt/video_rhythm.hpp"

namespace cmt::video {

using nlohmann::json;

namespace {

std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << text;
}

std::string format_double(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

int schema_major(const json& j) {
  if (!j.contains("schema_version")) throw SchemaError("missing schema_version");
  const auto& v = j.at("schema_version");
  std::string s = v.is_string() ? v.get<std::string>() : v.dump();
  int major = 0;
  auto res = std::from_chars(s.data(), s.data() + s.size(), major);
  if (res.ec != std::errc()) throw SchemaError("unreadable schema_version '" + s + "'");
  return major;
}

}  // namespace

GrayImage read_pgm(const std::filesystem::path& path) {
  const std::string data = read_text(path);
  std::size_t pos = 0;
  auto skip_space = [&] {
    while (pos < data.size()) {
      if (data[pos] == '#') {
        while (pos < data.size() && data[pos] != '\n') ++pos;
      } else if (std::isspace(static_cast<unsigned char>(data[pos]))) {
        ++pos;
      } else {
        break;
      }
    }
  };
  auto number = [&] {
    skip_space();
    int v = 0;
    auto res = std::from_chars(data.data() + pos, data.data() + data.size(), v);
    if (res.ec != std::errc()) throw ParseError("bad PGM header in " + path.string(), pos);
    pos = static_cast<std::size_t>(res.ptr - data.data());
    return v;
  };
  if (data.size() < 2 || data[0] != 'P' || data[1] != '5') throw ParseError("not a binary PGM: " + path.string(), 0);
  pos = 2;
  GrayImage img;
  img.width = number();
  img.height = number();
  const int maxval = number();
  if (img.width <= 0 || img.height <= 0 || maxval <= 0 || maxval > 255)
    throw ParseError("unsupported PGM geometry in " + path.string(), pos);
  ++pos;  // single whitespace before raster
  const std::size_t n = static_cast<std::size_t>(img.width) * img.height;
  if (data.size() < pos + n) throw ParseError("truncated PGM raster in " + path.string(), data.size());
  img.pixels.assign(data.begin() + static_cast<std::ptrdiff_t>(pos), data.begin() + static_cast<std::ptrdiff_t>(pos + n));
  return img;
}

void write_pgm(const std::filesystem::path& path, const GrayImage& image) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << "P5\n" << image.width << ' ' << image.height << "\n255\n";
  out.write(reinterpret_cast<const char*>(image.pixels.data()), static_cast<std::streamsize>(image.pixels.size()));
}

FrameManifest read_manifest(const std::filesystem::path& dir) {
  json j;
  try {
    j = json::parse(read_text(dir / "manifest.json"));
  } catch (const json::exception& e) {
    throw SchemaError(std::string("manifest.json: ") + e.what());
  }
  FrameManifest m;
  if (!j.contains("fps") || !j["fps"].is_number()) throw SchemaError("manifest.json needs a numeric fps");
  m.fps = j["fps"].get<double>();
  if (!(m.fps > 0)) throw SchemaError("manifest fps must be positive");
  if (j.contains("tempo") && !j["tempo"].is_null()) {
    if (!j["tempo"].is_number()) throw SchemaError("manifest tempo must be numeric");
    m.tempo = j["tempo"].get<double>();
  }
  return m;
}

std::vector<GrayImage> read_frames(const std::filesystem::path& dir) {
  std::vector<GrayImage> frames;
  for (int i = 0;; ++i) {
    char name[32];
    std::snprintf(name, sizeof name, "frame_%06d.pgm", i);
    const auto p = dir / name;
    if (!std::filesystem::exists(p)) break;
    frames.push_back(read_pgm(p));
  }
  if (frames.size() < 2) throw IoError("need at least two frame_%06d.pgm files in " + dir.string());
  return frames;
}

MotionFeatures read_flow_csv(const std::filesystem::path& path) {
  std::istringstream in(read_text(path));
  MotionFeatures f;
  std::string line;
  std::size_t lineno = 0;
  bool with_saliency = false;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    const auto comma = line.find(',');
    auto parse = [&](std::string_view s) {
      double v = 0;
      auto res = std::from_chars(s.data(), s.data() + s.size(), v);
      if (res.ec != std::errc() || res.ptr != s.data() + s.size() || !(v >= 0))
        throw ParseError("bad value in flow CSV", lineno);
      return v;
    };
    const std::string_view view(line);
    if (f.magnitudes.empty()) with_saliency = comma != std::string::npos;
    if ((comma != std::string::npos) != with_saliency) throw ParseError("inconsistent column count", lineno);
    f.magnitudes.push_back(parse(view.substr(0, comma)));
    if (with_saliency) f.saliency.push_back(parse(view.substr(comma + 1)));
  }
  if (f.magnitudes.empty()) throw ParseError("flow CSV has no values", lineno);
  return f;
}

void write_flow_csv(const std::filesystem::path& path, const MotionFeatures& features) {
  std::string text;
  for (std::size_t i = 0; i < features.magnitudes.size(); ++i) {
    text += format_double(features.magnitudes[i]);
    if (!features.saliency.empty()) text += "," + format_double(features.saliency.at(i));
    text += '\n';
  }
  write_text(path, text);
}

std::string rhythm_to_json(const VideoRhythm& r) {
  json beats = json::array();
  for (const auto& b : r.visual_beats) beats.push_back({{"bar", b.bar}, {"tick", b.tick}, {"strength", b.strength}});
  json j = {{"schema_version", "1.0"},
            {"tempo_bpm", r.tempo_bpm},
            {"n_beats", r.n_beats},
            {"n_bars", r.n_bars},
            {"bar_density_class", r.bar_density_class},
            {"visual_beats", beats},
            {"total_frames", r.total_frames},
            {"fps", r.fps}};
  return j.dump(2) + "\n";
}

VideoRhythm rhythm_from_json(const std::string& text) {
  VideoRhythm r;
  try {
    const json j = json::parse(text);
    if (schema_major(j) != kRhythmSchemaMajor) throw SchemaError("unsupported rhythm schema major version");
    r.tempo_bpm = j.at("tempo_bpm").get<double>();
    r.n_beats = j.at("n_beats").get<int>();
    r.n_bars = j.at("n_bars").get<int>();
    r.bar_density_class = j.at("bar_density_class").get<std::vector<int>>();
    for (const auto& b : j.at("visual_beats"))
      r.visual_beats.push_back({b.at("bar").get<int>(), b.at("tick").get<int>(), b.at("strength").get<int>()});
    r.total_frames = j.at("total_frames").get<long>();
    r.fps = j.at("fps").get<double>();
  } catch (const json::exception& e) {
    throw SchemaError(std::string("rhythm JSON: ") + e.what());
  }
  try {
    check_rhythm(r);
  } catch (const InvalidArgument& e) {
    throw SchemaError(std::string("rhythm JSON: ") + e.what());
  }
  return r;
}

void save_rhythm(const std::filesystem::path& path, const VideoRhythm& rhythm) {
  write_text(path, rhythm_to_json(rhythm));
}

VideoRhythm load_rhythm(const std::filesystem::path& path) { return rhythm_from_json(read_text(path)); }

}  // namespace cmt::video

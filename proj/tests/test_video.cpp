#include <doctest.h>

#include <cmath>
#include <random>

#include "cmt/error.hpp"
#include "cmt/toy_data.hpp"
#include "cmt/video_rhythm.hpp"
#include "test_util.hpp"

using namespace cmt;
using namespace cmt::video;

namespace {

double interior_magnitude(const FlowField& f, int margin) {
  double sum = 0;
  long n = 0;
  for (int y = margin; y < f.height - margin; ++y)
    for (int x = margin; x < f.width - margin; ++x) {
      sum += std::hypot(f.at(x, y).dx, f.at(x, y).dy);
      ++n;
    }
  return sum / static_cast<double>(n);
}

FlowField constant_flow(int w, int h, float dx, float dy) {
  return {w, h, std::vector<FlowVector>(static_cast<std::size_t>(w) * h, FlowVector{dx, dy})};
}

}  // namespace

TEST_CASE("frame/beat conversion hand values") {
  CHECK(frame_to_beat(30, 30, 120) == doctest::Approx(2.0));
  CHECK(frame_to_beat(45, 30, 100) == doctest::Approx(2.5));
  // 7 frames at 30 fps, 120 BPM is 0.4667 beats, nearest quarter beat 0.5.
  CHECK(frame_to_beat(7, 30, 120, true) == doctest::Approx(0.5));
  CHECK(beat_to_frame(2.0, 30, 120) == 30);
  CHECK(beat_to_frame(1.0, 24, 90) == 16);
  CHECK_THROWS_AS(frame_to_beat(1, 0, 120), InvalidArgument);
  CHECK_THROWS_AS(beat_to_frame(-1, 30, 120), InvalidArgument);
}

TEST_CASE("property: beat_to_frame then frame_to_beat stays within half a frame") {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> fps_d(10, 120), tempo_d(40, 220), beat_d(0, 500);
  for (int i = 0; i < 500; ++i) {
    const double fps = fps_d(rng), tempo = tempo_d(rng), beat = beat_d(rng);
    const double back = frame_to_beat(static_cast<double>(beat_to_frame(beat, fps, tempo)), fps, tempo);
    CHECK(std::abs(back - beat) <= 0.5 * tempo / (fps * 60.0) + 1e-9);
  }
}

TEST_CASE("beat totals and clip counts") {
  CHECK(total_beats(121, 30, 120) == 8);
  CHECK(clip_count(121, 30, 120) == 2);
  CHECK(total_beats(1800, 30, 120) == 120);
  CHECK(clip_count(1800, 30, 120) == 30);
  CHECK(total_beats(3, 30, 120) == 1);  // at least one beat
}

TEST_CASE("block matching recovers a 2 px translation") {
  const auto a = toy::texture(128, 128, 5);
  const auto b = toy::translate(a, 2, 0);
  const auto flow = estimate_flow(a, b);
  for (int by = 16; by < 112; by += 16)
    for (int bx = 16; bx < 112; bx += 16) {
      CHECK(flow.at(bx, by).dx == 2.0f);
      CHECK(flow.at(bx, by).dy == 0.0f);
    }
  CHECK(interior_magnitude(flow, 16) == doctest::Approx(2.0));

  const auto c = toy::translate(a, 0, -3);
  const auto up = estimate_flow(a, c);
  CHECK(up.at(64, 64).dx == 0.0f);
  CHECK(up.at(64, 64).dy == -3.0f);
}

TEST_CASE("identical and flat frames give exactly zero flow") {
  const auto a = toy::texture(64, 48, 9);
  CHECK(flow_magnitude(estimate_flow(a, a)) == 0.0);
  GrayImage flat{32, 32, std::vector<std::uint8_t>(32 * 32, 77)};
  const auto f = estimate_flow(flat, flat);
  CHECK(flow_magnitude(f) == 0.0);  // all SADs tie, the zero vector wins
  CHECK_THROWS_AS(estimate_flow(a, flat), InvalidArgument);
}

TEST_CASE("directogram bins by angle, weighted by magnitude") {
  const auto right = directogram(constant_flow(4, 4, 2, 0));
  CHECK(right[0] == doctest::Approx(32.0));
  const auto down = directogram(constant_flow(4, 4, 0, 3));
  CHECK(down[3] == doctest::Approx(48.0));  // 90 degrees
  const auto left = directogram(constant_flow(4, 4, -1, 0));
  CHECK(left[6] == doctest::Approx(16.0));  // 180 degrees
  double rest = 0;
  for (int k = 0; k < kDirectionBins; ++k) rest += k == 6 ? 0 : left[k];
  CHECK(rest == 0.0);
}

TEST_CASE("saliency is the positive directogram rise per pixel") {
  const std::vector<FlowField> flows = {constant_flow(4, 4, 2, 0), constant_flow(4, 4, 0, 3),
                                        constant_flow(4, 4, 0, 1)};
  const auto s = motion_saliency(flows);
  REQUIRE(s.size() == 3);
  CHECK(s[0] == 0.0);
  CHECK(s[1] == doctest::Approx(3.0));  // bin 3 rises 48 over 16 pixels
  CHECK(s[2] == 0.0);                   // only decreases
}

TEST_CASE("motion speed averages the magnitudes of one clip") {
  std::vector<double> mags(120);
  for (int k = 0; k < 120; ++k) mags[k] = k;
  // 30 fps, 120 BPM: one clip = 4 beats = 60 frames.
  CHECK(motion_speed(mags, 1, 30, 120) == doctest::Approx(29.5));
  CHECK(motion_speed(mags, 2, 30, 120) == doctest::Approx(89.5));
  CHECK_THROWS_AS(motion_speed(mags, 3, 30, 120), InvalidArgument);
}

TEST_CASE("quantile thresholds reproduce class proportions") {
  std::vector<double> speeds;
  for (int k = 1; k <= 16; ++k) speeds.push_back(k);
  const auto d = DensityDistribution::uniform();
  const auto t = thresholds_from_cdf(d.density_cdf, speeds);
  REQUIRE(t.size() == 15);
  for (int k = 0; k < 15; ++k) CHECK(t[k] == k + 1);
  for (int k = 1; k <= 16; ++k) CHECK(classify(k, t) == k);

  std::vector<double> degenerate(16, 0.0);
  for (int k = 7; k < 16; ++k) degenerate[k] = 1.0;  // every bar has density 8
  const auto td = thresholds_from_cdf(degenerate, speeds);
  for (double s : {0.0, 5.0, 1e9}) CHECK(classify(s, td) == 8);

  // Proportions: classes of 32 random speeds under a skewed cdf.
  std::mt19937_64 rng(1);
  std::vector<double> sample(64);
  for (auto& v : sample) v = std::uniform_real_distribution<double>(0, 10)(rng);
  std::vector<double> cdf(16);
  for (int k = 0; k < 16; ++k) cdf[k] = k < 8 ? 0.5 * (k + 1) / 8 : 0.5 + 0.5 * (k - 7) / 8;
  cdf[15] = 1;
  const auto ts = thresholds_from_cdf(cdf, sample);
  CHECK(std::is_sorted(ts.begin(), ts.end()));
  int low = 0;
  for (double v : sample) low += classify(v, ts) <= 8;
  CHECK(std::abs(low - 32) <= 1);
}

TEST_CASE("visual beats from an impulse train at tick spacing") {
  // 24 fps, 90 BPM: one tick = 4 frames. Impulses every 3 ticks from frame 12.
  std::vector<double> s(400, 0.0);
  std::vector<long> expected;
  for (long f = 12; f < 400; f += 12) {
    s[f] = 1.0;
    expected.push_back(f / 4);
  }
  const auto beats = detect_visual_beats(s, 24, 90);
  REQUIRE(beats.size() == expected.size());
  for (std::size_t i = 0; i < beats.size(); ++i) {
    CHECK(beats[i].global_tick == expected[i]);
    CHECK(beats[i].frame == expected[i] * 4);
  }
  CHECK(detect_visual_beats(std::vector<double>(300, 0.0), 24, 90).empty());
  CHECK(detect_visual_beats({}, 24, 90).empty());
}

TEST_CASE("rhythm JSON round trip and schema checks") {
  std::mt19937_64 rng(2);
  const auto r = toy::random_rhythm(rng, 5);
  const auto text = rhythm_to_json(r);
  CHECK(text.find("\"schema_version\"") != std::string::npos);
  CHECK(rhythm_from_json(text) == r);

  std::string v2 = text;
  v2.replace(v2.find("1.0"), 3, "2.0");
  CHECK_THROWS_AS(rhythm_from_json(v2), SchemaError);
  CHECK_THROWS_AS(rhythm_from_json("{\"schema_version\": \"1.0\"}"), SchemaError);
  CHECK_THROWS_AS(rhythm_from_json("not json"), SchemaError);

  auto bad = r;
  bad.bar_density_class[0] = 17;
  CHECK_THROWS_AS(check_rhythm(bad), InvalidArgument);
  bad = r;
  bad.visual_beats.push_back({r.n_bars, 1, 3});  // past the video end
  CHECK_THROWS_AS(check_rhythm(bad), InvalidArgument);
}

TEST_CASE("distribution serialization") {
  auto d = DensityDistribution::uniform();
  d.speed_thresholds = std::vector<double>(15, 0.5);
  const auto bytes = serialize_distribution(d);
  CHECK(deserialize_distribution(bytes) == d);
  auto broken = bytes;
  broken[0] = 'X';
  CHECK_THROWS(deserialize_distribution(broken));
  testutil::TempDir dir;
  save_distribution(dir / "d.bin", d);
  CHECK(load_distribution(dir / "d.bin") == d);
}

TEST_CASE("frames directory, PGM and flow CSV I/O") {
  testutil::TempDir dir;
  const auto base = toy::texture(48, 32, 4);
  std::vector<GrayImage> frames;
  for (int f = 0; f < 6; ++f) {
    frames.push_back(toy::translate(base, f, 0));
    char name[32];
    std::snprintf(name, sizeof name, "frame_%06d.pgm", f);
    write_pgm(dir / name, frames.back());
  }
  testutil::spit(dir / "manifest.json", "{\"fps\": 25, \"tempo\": 100}");
  const auto m = read_manifest(dir.path());
  CHECK(m.fps == 25);
  CHECK(m.tempo == 100);
  const auto back = read_frames(dir.path());
  REQUIRE(back.size() == 6);
  CHECK(back[3].pixels == frames[3].pixels);

  const auto mf = motion_features(frames, 1);
  CHECK(mf.magnitudes.size() == 5);
  const auto mf3 = motion_features(frames, 3);
  CHECK(mf3.magnitudes == mf.magnitudes);
  CHECK(mf3.saliency == mf.saliency);

  write_flow_csv(dir / "flow.csv", mf);
  const auto csv = read_flow_csv(dir / "flow.csv");
  CHECK(csv.magnitudes == mf.magnitudes);
  CHECK(csv.saliency == mf.saliency);
  const auto d = DensityDistribution::uniform();
  CHECK(build_video_rhythm(csv, 6, 25, 100, d) == build_video_rhythm(frames, 25, 100, d, 2));

  testutil::spit(dir / "bad.csv", "1.0\n2.0,3.0\n");
  CHECK_THROWS_AS(read_flow_csv(dir / "bad.csv"), ParseError);
  testutil::spit(dir / "manifest.json", "{\"tempo\": 100}");
  CHECK_THROWS_AS(read_manifest(dir.path()), SchemaError);
}

TEST_CASE("rhythm extraction from synthetic motion") {
  // 60 frames at 30 fps, 120 BPM: 4 beats, one bar.
  const auto base = toy::texture(64, 64, 8);
  std::vector<GrayImage> frames;
  int x = 0;
  for (int f = 0; f < 61; ++f) {
    x += f % 15 == 0 ? 5 : 0;  // a jump every beat
    frames.push_back(toy::translate(base, x % 7, 0));
  }
  const auto r = build_video_rhythm(frames, 30, 120, DensityDistribution::uniform(), 1);
  CHECK(r.n_beats == 4);
  CHECK(r.n_bars == 1);
  CHECK(r.total_frames == 61);
  REQUIRE(r.bar_density_class.size() == 1);
  check_rhythm(r);
  for (const auto& b : r.visual_beats) CHECK(b.global_tick() < 16);
  const auto sv = strength_vector(r);
  CHECK(sv.size() == 16);
  CHECK(density_vector(r) == std::vector<double>{static_cast<double>(r.bar_density_class[0])});
}

#include "cmt/toy_data.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <tuple>

namespace cmt::toy {

QuantizedScore random_score(std::mt19937_64& rng, int max_bars, int max_instruments) {
  auto uni = [&](int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); };
  QuantizedScore s;
  s.n_bars = uni(1, max_bars);
  s.tempo_bpm = uni(4000, 22000) / 100.0;
  std::vector<Instrument> pool(kNumInstruments);
  for (int i = 0; i < kNumInstruments; ++i) pool[i] = static_cast<Instrument>(i);
  std::shuffle(pool.begin(), pool.end(), rng);
  pool.resize(static_cast<std::size_t>(uni(1, std::min(max_instruments, kNumInstruments))));

  const int total_ticks = s.n_bars * kTicksPerBar;
  const int target = uni(1, std::min(200, total_ticks * 2));
  std::map<std::pair<Instrument, int>, std::vector<std::pair<int, int>>> spans;
  std::map<int, int> per_tick;
  for (int tries = 0; static_cast<int>(s.notes.size()) < target && tries < target * 20; ++tries) {
    NoteEvent n;
    n.instrument = pool[static_cast<std::size_t>(uni(0, static_cast<int>(pool.size()) - 1))];
    n.pitch = uni(0, 127);
    n.onset_tick = uni(0, total_ticks - 1);
    n.duration_ticks = uni(1, kMaxDuration);
    if (per_tick[n.onset_tick] >= kMaxStrength) continue;
    // Same instrument and pitch may not sound twice at once.
    bool clash = false;
    for (auto [a, b] : spans[{n.instrument, n.pitch}])
      if (n.onset_tick < b && a < n.end_tick()) clash = true;
    if (clash) continue;
    spans[{n.instrument, n.pitch}].push_back({n.onset_tick, n.end_tick()});
    ++per_tick[n.onset_tick];
    s.notes.push_back(n);
  }
  if (s.notes.empty()) s.notes.push_back({60, 0, 1, pool[0]});
  std::sort(s.notes.begin(), s.notes.end(), note_order);
  return s;
}

std::vector<ToyPiece> toy_corpus(std::uint64_t seed, int count, int bars) {
  static const std::vector<std::vector<int>> kPatterns = {
      {1, 5, 9, 13}, {1, 3, 5, 7, 9, 11, 13, 15}, {1, 9}, {1, 4, 7, 11, 13}, {1, 7, 9, 15}, {1, 5, 7, 9, 13}};
  static const int kProgression[4] = {0, 5, 7, 0};
  std::mt19937_64 rng(seed);
  auto uni = [&](int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); };
  std::vector<ToyPiece> out;
  for (int p = 0; p < count; ++p) {
    ToyPiece piece;
    piece.genre = static_cast<Genre>(p % kNumGenres);
    auto& s = piece.score;
    s.n_bars = bars;
    s.tempo_bpm = 120;
    const auto& pattern = kPatterns[static_cast<std::size_t>(uni(0, static_cast<int>(kPatterns.size()) - 1))];
    const int root = 48 + uni(0, 11);
    const bool drums = uni(0, 1) == 1;
    const int step = 16 / static_cast<int>(pattern.size());
    for (int b = 0; b < bars; ++b) {
      const int chord = root + kProgression[b % 4];
      for (std::size_t k = 0; k < pattern.size(); ++k) {
        const int onset = b * kTicksPerBar + pattern[k] - 1;
        const int dur = std::max(1, step);
        s.notes.push_back({chord, onset, dur, Instrument::Piano});
        if (k % 2 == 0) s.notes.push_back({chord + 7, onset, dur, Instrument::Piano});
        if (k == 0) s.notes.push_back({chord - 12, onset, kTicksPerBar / 2, Instrument::Bass});
        if (drums) s.notes.push_back({k % 2 ? 38 : 36, onset, 1, Instrument::Drums});
      }
    }
    s = normalize(std::move(s));
    out.push_back(std::move(piece));
  }
  return out;
}

video::VideoRhythm random_rhythm(std::mt19937_64& rng, int n_bars) {
  auto uni = [&](int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); };
  video::VideoRhythm r;
  r.fps = 30;
  r.tempo_bpm = 120;
  r.n_beats = n_bars * kBeatsPerBar;
  r.n_bars = n_bars;
  r.total_frames = video::beat_to_frame(r.n_beats, r.fps, r.tempo_bpm);
  for (int b = 0; b < n_bars; ++b) {
    const int density = uni(1, video::kDensityClasses);
    r.bar_density_class.push_back(density);
    std::vector<int> ticks(kTicksPerBar);
    for (int t = 0; t < kTicksPerBar; ++t) ticks[t] = t + 1;
    std::shuffle(ticks.begin(), ticks.end(), rng);
    ticks.resize(static_cast<std::size_t>(uni(0, std::min(density, 4))));
    std::sort(ticks.begin(), ticks.end());
    for (int t : ticks) r.visual_beats.push_back({b, t, uni(1, video::kStrengthClasses)});
  }
  return r;
}

video::GrayImage texture(int width, int height, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  // Sum of a few random plane waves gives texture with no flat regions.
  struct Wave {
    double fx, fy, phase, amp;
  };
  std::vector<Wave> waves;
  std::uniform_real_distribution<double> f(0.05, 0.45), ph(0, 6.283185307179586), a(10, 30);
  for (int i = 0; i < 6; ++i) waves.push_back({f(rng), f(rng), ph(rng), a(rng)});
  video::GrayImage img{width, height, std::vector<std::uint8_t>(static_cast<std::size_t>(width) * height)};
  for (int y = 0; y < height; ++y)
    for (int x = 0; x < width; ++x) {
      double v = 128;
      for (const auto& w : waves) v += w.amp * std::sin(w.fx * x + w.fy * y + w.phase);
      img.pixels[static_cast<std::size_t>(y) * width + x] = static_cast<std::uint8_t>(std::clamp(std::lround(v), 0L, 255L));
    }
  return img;
}

video::GrayImage translate(const video::GrayImage& image, int dx, int dy) {
  video::GrayImage out = image;
  for (int y = 0; y < image.height; ++y)
    for (int x = 0; x < image.width; ++x) {
      const int sx = std::clamp(x - dx, 0, image.width - 1);
      const int sy = std::clamp(y - dy, 0, image.height - 1);
      out.pixels[static_cast<std::size_t>(y) * image.width + x] = image.at(sx, sy);
    }
  return out;
}

}  // namespace cmt::toy

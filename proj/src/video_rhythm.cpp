#include "cmt/video_rhythm.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <limits>
#include <numbers>
#include <numeric>
#include <thread>

#include "cmt/error.hpp"

namespace cmt::video {

namespace {

void check_timing(double fps, double tempo) {
  if (!(fps > 0.0) || !std::isfinite(fps)) throw InvalidArgument("fps must be positive");
  if (!(tempo > 0.0) || !std::isfinite(tempo)) throw InvalidArgument("tempo must be positive");
}

}  // namespace

double frame_to_beat(double frame, double fps, double tempo, bool to_tick) {
  check_timing(fps, tempo);
  if (frame < 0) throw InvalidArgument("frame index must be non-negative");
  const double beat = tempo * frame / (fps * 60.0);
  return to_tick ? std::round(beat * kTicksPerBeat) / kTicksPerBeat : beat;
}

long beat_to_frame(double beat, double fps, double tempo) {
  check_timing(fps, tempo);
  if (beat < 0) throw InvalidArgument("beat must be non-negative");
  return std::lround(beat * fps * 60.0 / tempo);
}

FlowField estimate_flow(const GrayImage& a, const GrayImage& b, const BlockMatchParams& params) {
  if (a.width != b.width || a.height != b.height) throw InvalidArgument("frame dimensions differ");
  if (a.width <= 0 || a.height <= 0) throw InvalidArgument("empty frame");
  const int W = a.width, H = a.height, B = params.block_size, R = params.search_radius;
  FlowField flow{W, H, std::vector<FlowVector>(static_cast<std::size_t>(W) * H)};

  for (int by = 0; by < H; by += B) {
    for (int bx = 0; bx < W; bx += B) {
      const int bw = std::min(B, W - bx), bh = std::min(B, H - by);
      long best_sad = std::numeric_limits<long>::max();
      int best_dx = 0, best_dy = 0, best_norm = 0;
      for (int dy = -R; dy <= R; ++dy) {
        if (by + dy < 0 || by + dy + bh > H) continue;
        for (int dx = -R; dx <= R; ++dx) {
          if (bx + dx < 0 || bx + dx + bw > W) continue;
          long sad = 0;
          for (int y = 0; y < bh && sad <= best_sad; ++y) {
            const std::uint8_t* pa = &a.pixels[static_cast<std::size_t>(by + y) * W + bx];
            const std::uint8_t* pb = &b.pixels[static_cast<std::size_t>(by + y + dy) * W + bx + dx];
            for (int x = 0; x < bw; ++x) sad += std::abs(static_cast<int>(pa[x]) - static_cast<int>(pb[x]));
          }
          const int norm = dx * dx + dy * dy;
          if (sad < best_sad || (sad == best_sad && norm < best_norm)) {
            best_sad = sad;
            best_dx = dx;
            best_dy = dy;
            best_norm = norm;
          }
        }
      }
      for (int y = by; y < by + bh; ++y)
        for (int x = bx; x < bx + bw; ++x)
          flow.vectors[static_cast<std::size_t>(y) * W + x] = {static_cast<float>(best_dx), static_cast<float>(best_dy)};
    }
  }
  return flow;
}

double flow_magnitude(const FlowField& flow) {
  if (flow.vectors.empty()) return 0.0;
  double sum = 0.0;
  for (const auto& v : flow.vectors) sum += std::hypot(static_cast<double>(v.dx), static_cast<double>(v.dy));
  return sum / static_cast<double>(flow.vectors.size());
}

std::array<double, kDirectionBins> directogram(const FlowField& flow) {
  std::array<double, kDirectionBins> bins{};
  constexpr double kBinWidth = 2.0 * std::numbers::pi / kDirectionBins;
  for (const auto& v : flow.vectors) {
    const double mag = std::hypot(static_cast<double>(v.dx), static_cast<double>(v.dy));
    if (mag == 0.0) continue;
    double angle = std::atan2(static_cast<double>(v.dy), static_cast<double>(v.dx));
    if (angle < 0) angle += 2.0 * std::numbers::pi;
    const int bin = std::min(kDirectionBins - 1, static_cast<int>(angle / kBinWidth));
    bins[bin] += mag;
  }
  return bins;
}

std::vector<double> saliency_from_directograms(std::span<const std::array<double, kDirectionBins>> bins, int width,
                                               int height) {
  std::vector<double> out(bins.size(), 0.0);
  const double area = static_cast<double>(width) * height;
  for (std::size_t t = 1; t < bins.size(); ++t) {
    double rise = 0.0;
    for (int k = 0; k < kDirectionBins; ++k) rise += std::max(0.0, bins[t][k] - bins[t - 1][k]);
    out[t] = rise / area;
  }
  return out;
}

std::vector<double> motion_saliency(std::span<const FlowField> flows) {
  if (flows.empty()) return {};
  std::vector<std::array<double, kDirectionBins>> bins;
  bins.reserve(flows.size());
  for (const auto& f : flows) bins.push_back(directogram(f));
  return saliency_from_directograms(bins, flows[0].width, flows[0].height);
}

MotionFeatures motion_features(std::span<const GrayImage> frames, unsigned threads, const BlockMatchParams& params) {
  if (frames.size() < 2) throw InvalidArgument("need at least two frames");
  for (const auto& f : frames)
    if (f.width != frames[0].width || f.height != frames[0].height) throw InvalidArgument("frame dimensions differ");
  const std::size_t pairs = frames.size() - 1;
  std::vector<double> mags(pairs);
  std::vector<std::array<double, kDirectionBins>> bins(pairs);
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < pairs; i = next++) {
      const FlowField flow = estimate_flow(frames[i], frames[i + 1], params);
      mags[i] = flow_magnitude(flow);
      bins[i] = directogram(flow);
    }
  };
  threads = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(pairs)));
  std::vector<std::thread> pool;
  for (unsigned k = 1; k < threads; ++k) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  return {std::move(mags), saliency_from_directograms(bins, frames[0].width, frames[0].height)};
}

int total_beats(long total_frames, double fps, double tempo) {
  const double beats = frame_to_beat(static_cast<double>(total_frames), fps, tempo);
  return std::max(1, static_cast<int>(std::floor(beats + 1e-9)));
}

int clip_count(long total_frames, double fps, double tempo) {
  return (total_beats(total_frames, fps, tempo) + kBeatsPerClip - 1) / kBeatsPerClip;
}

double motion_speed(std::span<const double> magnitudes, int m, double fps, double tempo) {
  check_timing(fps, tempo);
  const long T = static_cast<long>(magnitudes.size()) + 1;
  if (m < 1 || m > clip_count(T, fps, tempo)) throw InvalidArgument("clip index outside the video");
  // Frames f_frame(S(m-1))+1 .. f_frame(Sm), 1-based; magnitudes[k] is frame k+1.
  const long first = beat_to_frame(kBeatsPerClip * (m - 1.0), fps, tempo);
  const long last = std::min<long>(beat_to_frame(kBeatsPerClip * static_cast<double>(m), fps, tempo),
                                   static_cast<long>(magnitudes.size()));
  if (last <= first) return magnitudes.empty() ? 0.0 : magnitudes.back();
  double sum = 0.0;
  for (long k = first; k < last; ++k) sum += magnitudes[k];
  return sum / static_cast<double>(last - first);
}

DensityDistribution DensityDistribution::uniform() {
  DensityDistribution d;
  for (int k = 1; k <= kDensityClasses; ++k) d.density_cdf.push_back(static_cast<double>(k) / kDensityClasses);
  for (int k = 1; k <= kStrengthClasses; ++k) d.strength_cdf.push_back(static_cast<double>(k) / kStrengthClasses);
  return d;
}

std::vector<double> thresholds_from_cdf(std::span<const double> cdf, std::span<const double> sample) {
  if (cdf.empty()) throw InvalidArgument("empty class distribution");
  if (sample.empty()) throw InvalidArgument("empty reference sample");
  std::vector<double> sorted(sample.begin(), sample.end());
  std::sort(sorted.begin(), sorted.end());
  const double n = static_cast<double>(sorted.size());
  std::vector<double> out;
  for (std::size_t k = 0; k + 1 < cdf.size(); ++k) {
    const double c = cdf[k];
    if (c <= 1e-12) {
      out.push_back(-std::numeric_limits<double>::infinity());
    } else if (c >= 1.0 - 1e-12) {
      out.push_back(std::numeric_limits<double>::infinity());
    } else {
      const long idx = std::clamp(static_cast<long>(std::ceil(c * n - 1e-9)) - 1, 0L, static_cast<long>(n) - 1);
      out.push_back(sorted[idx]);
    }
  }
  for (std::size_t k = 1; k < out.size(); ++k) out[k] = std::max(out[k], out[k - 1]);
  return out;
}

int classify(double value, std::span<const double> thresholds) {
  return 1 + static_cast<int>(std::count_if(thresholds.begin(), thresholds.end(), [&](double t) { return t < value; }));
}

std::vector<int> classify_density(std::span<const double> speeds, const DensityDistribution& dist) {
  if (dist.speed_thresholds.empty()) throw InvalidArgument("density distribution has no speed thresholds");
  if (!std::is_sorted(dist.speed_thresholds.begin(), dist.speed_thresholds.end()))
    throw InvalidArgument("speed thresholds must be ascending");
  std::vector<int> out;
  out.reserve(speeds.size());
  for (double s : speeds) out.push_back(classify(s, dist.speed_thresholds));
  return out;
}

namespace {

bool spacing_ok(double gap, double tick_frames, double tolerance) {
  if (gap <= 0) return false;
  const long k_hi = static_cast<long>(std::ceil(gap / tick_frames / (1.0 - tolerance)));
  for (long k = 1; k <= k_hi; ++k)
    if (std::abs(gap - k * tick_frames) <= tolerance * k * tick_frames + 1e-9) return true;
  return false;
}

}  // namespace

std::vector<VisualBeat> detect_visual_beats(std::span<const double> saliency, double fps, double tempo,
                                            const BeatDetectParams& params) {
  check_timing(fps, tempo);
  const std::size_t n = saliency.size();
  if (n == 0) return {};
  const double mean = std::accumulate(saliency.begin(), saliency.end(), 0.0) / static_cast<double>(n);
  double var = 0.0;
  for (double s : saliency) var += (s - mean) * (s - mean);
  const double threshold = mean + std::sqrt(var / static_cast<double>(n));

  std::vector<std::size_t> candidates;
  for (std::size_t t = 0; t < n; ++t) {
    const double s = saliency[t];
    if (!(s > threshold)) continue;
    if (t > 0 && !(s > saliency[t - 1])) continue;
    if (t + 1 < n && !(s > saliency[t + 1])) continue;
    candidates.push_back(t);
  }

  const double tick_frames = fps * 60.0 / tempo / kTicksPerBeat;
  const double tol = params.spacing_tolerance;
  std::vector<std::size_t> kept;
  for (std::size_t c : candidates) {
    if (kept.empty() || spacing_ok(static_cast<double>(c - kept.back()), tick_frames, tol)) {
      kept.push_back(c);
    } else if (saliency[c] > saliency[kept.back()] &&
               (kept.size() < 2 || spacing_ok(static_cast<double>(c - kept[kept.size() - 2]), tick_frames, tol))) {
      kept.back() = c;
    }
  }

  std::vector<VisualBeat> beats;
  for (std::size_t t : kept) {
    const long tick = std::lround(frame_to_beat(static_cast<double>(t), fps, tempo) * kTicksPerBeat);
    if (!beats.empty() && beats.back().global_tick == tick) {
      if (saliency[t] > beats.back().saliency) beats.back() = {static_cast<long>(t), saliency[t], tick};
      continue;
    }
    beats.push_back({static_cast<long>(t), saliency[t], tick});
  }
  return beats;
}

double VideoRhythm::exact_beats() const { return frame_to_beat(static_cast<double>(total_frames), fps, tempo_bpm); }

void check_rhythm(const VideoRhythm& r) {
  check_timing(r.fps, r.tempo_bpm);
  if (r.n_beats < 1) throw InvalidArgument("rhythm needs at least one beat");
  if (r.n_bars != (r.n_beats + kBeatsPerClip - 1) / kBeatsPerClip) throw InvalidArgument("n_bars != ceil(n_beats/4)");
  if (static_cast<int>(r.bar_density_class.size()) != r.n_bars)
    throw InvalidArgument("one density class per bar required");
  for (int c : r.bar_density_class)
    if (c < 1 || c > kDensityClasses) throw InvalidArgument("density class out of range");
  long prev = -1;
  for (const auto& b : r.visual_beats) {
    if (b.tick < 1 || b.tick > kTicksPerBar || b.bar < 0) throw InvalidArgument("visual beat position out of range");
    if (b.strength < 1 || b.strength > kStrengthClasses) throw InvalidArgument("visual beat strength out of range");
    if (b.global_tick() <= prev) throw InvalidArgument("visual beats must be strictly increasing");
    if (b.global_tick() >= static_cast<long>(r.n_beats) * kTicksPerBeat)
      throw InvalidArgument("visual beat after the last beat");
    prev = b.global_tick();
  }
}

VideoRhythm build_video_rhythm(const MotionFeatures& features, long total_frames, double fps, double tempo,
                               const DensityDistribution& dist, const BeatDetectParams& params) {
  check_timing(fps, tempo);
  if (features.magnitudes.empty()) throw InvalidArgument("no motion magnitudes");
  if (!features.saliency.empty() && features.saliency.size() != features.magnitudes.size())
    throw InvalidArgument("saliency and magnitudes are not aligned");

  VideoRhythm r;
  r.tempo_bpm = tempo;
  r.fps = fps;
  r.total_frames = total_frames;
  r.n_beats = total_beats(total_frames, fps, tempo);
  r.n_bars = (r.n_beats + kBeatsPerClip - 1) / kBeatsPerClip;

  std::vector<double> speeds;
  for (int m = 1; m <= r.n_bars; ++m) speeds.push_back(motion_speed(features.magnitudes, m, fps, tempo));
  DensityDistribution d = dist;
  if (d.density_cdf.empty()) d = DensityDistribution::uniform();
  if (d.speed_thresholds.empty()) d.speed_thresholds = thresholds_from_cdf(d.density_cdf, speeds);
  r.bar_density_class = classify_density(speeds, d);

  // Feature k describes frame k + 1; frame 0 has no incoming motion.
  std::vector<double> per_frame(1, 0.0);
  per_frame.insert(per_frame.end(), features.saliency.begin(), features.saliency.end());
  auto beats = detect_visual_beats(features.saliency.empty() ? std::span<const double>{} : per_frame, fps, tempo, params);
  const long last_tick = static_cast<long>(r.n_beats) * kTicksPerBeat;
  std::erase_if(beats, [&](const VisualBeat& b) { return b.global_tick >= last_tick; });
  if (!beats.empty()) {
    std::vector<double> sal;
    for (const auto& b : beats) sal.push_back(b.saliency);
    if (d.saliency_thresholds.empty()) d.saliency_thresholds = thresholds_from_cdf(d.strength_cdf, sal);
    for (const auto& b : beats)
      r.visual_beats.push_back({static_cast<int>(b.global_tick / kTicksPerBar),
                                static_cast<int>(b.global_tick % kTicksPerBar) + 1,
                                classify(b.saliency, d.saliency_thresholds)});
  }
  return r;
}

VideoRhythm build_video_rhythm(std::span<const GrayImage> frames, double fps, double tempo,
                               const DensityDistribution& dist, unsigned threads) {
  const auto features = motion_features(frames, threads);
  return build_video_rhythm(features, static_cast<long>(frames.size()), fps, tempo, dist);
}

std::vector<double> density_vector(const VideoRhythm& rhythm) {
  return {rhythm.bar_density_class.begin(), rhythm.bar_density_class.end()};
}

std::vector<double> strength_vector(const VideoRhythm& rhythm) {
  std::vector<double> s(static_cast<std::size_t>(rhythm.n_bars) * kTicksPerBar, 0.0);
  for (const auto& b : rhythm.visual_beats)
    if (b.global_tick() < static_cast<long>(s.size())) s[b.global_tick()] = b.strength;
  return s;
}

namespace {

constexpr char kDistMagic[8] = {'C', 'M', 'T', 'D', 'I', 'S', 'T', '1'};

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

void put_f64(std::vector<std::uint8_t>& out, double v) {
  std::uint64_t bits;
  std::memcpy(&bits, &v, sizeof bits);
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<std::uint8_t>(bits >> (8 * i)));
}

}  // namespace

std::vector<std::uint8_t> serialize_distribution(const DensityDistribution& dist) {
  std::vector<std::uint8_t> out(std::begin(kDistMagic), std::end(kDistMagic));
  for (const auto* v : {&dist.density_cdf, &dist.strength_cdf, &dist.speed_thresholds, &dist.saliency_thresholds}) {
    put_u32(out, static_cast<std::uint32_t>(v->size()));
    for (double x : *v) put_f64(out, x);
  }
  return out;
}

DensityDistribution deserialize_distribution(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 8 || !std::equal(std::begin(kDistMagic), std::end(kDistMagic), bytes.begin()))
    throw SchemaError("not a density distribution file (bad magic)");
  std::size_t pos = 8;
  auto need = [&](std::size_t n) {
    if (bytes.size() - pos < n) throw ParseError("truncated distribution file", pos);
  };
  auto u32 = [&] {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(bytes[pos++]) << (8 * i);
    return v;
  };
  auto f64 = [&] {
    need(8);
    std::uint64_t bits = 0;
    for (int i = 0; i < 8; ++i) bits |= static_cast<std::uint64_t>(bytes[pos++]) << (8 * i);
    double v;
    std::memcpy(&v, &bits, sizeof v);
    return v;
  };
  DensityDistribution d;
  for (auto* v : {&d.density_cdf, &d.strength_cdf, &d.speed_thresholds, &d.saliency_thresholds}) {
    const std::uint32_t n = u32();
    if (n > 1024) throw ParseError("implausible vector length", pos);
    for (std::uint32_t i = 0; i < n; ++i) v->push_back(f64());
  }
  if (d.density_cdf.size() != kDensityClasses || d.strength_cdf.size() != kStrengthClasses)
    throw SchemaError("distribution has wrong class counts");
  if (!d.speed_thresholds.empty() && d.speed_thresholds.size() != kDensityClasses - 1)
    throw SchemaError("distribution needs 15 speed thresholds");
  if (!d.saliency_thresholds.empty() && d.saliency_thresholds.size() != kStrengthClasses - 1)
    throw SchemaError("distribution needs 19 saliency thresholds");
  return d;
}

void save_distribution(const std::filesystem::path& path, const DensityDistribution& dist) {
  const auto bytes = serialize_distribution(dist);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

DensityDistribution load_distribution(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::vector<std::uint8_t> bytes{std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
  return deserialize_distribution(bytes);
}

}  // namespace cmt::video

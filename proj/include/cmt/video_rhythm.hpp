#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "cmt/score.hpp"

namespace cmt::video {

inline constexpr int kBeatsPerClip = 4;  // one clip spans one bar
inline constexpr int kDensityClasses = 16;
inline constexpr int kStrengthClasses = 20;
inline constexpr int kDirectionBins = 12;
inline constexpr double kDefaultTempo = 120.0;

// Frame t -> beat number. With `to_tick` the result is rounded to the nearest quarter beat.
double frame_to_beat(double frame, double fps, double tempo, bool to_tick = false);
// Beat number -> nearest frame index.
long beat_to_frame(double beat, double fps, double tempo);

struct GrayImage {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> pixels;  // row-major

  std::uint8_t at(int x, int y) const { return pixels[static_cast<std::size_t>(y) * width + x]; }
};

struct FlowVector {
  float dx = 0.f;
  float dy = 0.f;
};

struct FlowField {
  int width = 0;
  int height = 0;
  std::vector<FlowVector> vectors;  // row-major, pixels per frame

  const FlowVector& at(int x, int y) const { return vectors[static_cast<std::size_t>(y) * width + x]; }
};

struct BlockMatchParams {
  int block_size = 16;
  int search_radius = 8;
};

// Exhaustive SAD block matching from a to b; every pixel takes its block's vector.
FlowField estimate_flow(const GrayImage& a, const GrayImage& b, const BlockMatchParams& params = {});

// Mean Euclidean norm of the flow vectors.
double flow_magnitude(const FlowField& flow);

// Magnitude-weighted histogram of flow directions, 12 bins of 30 degrees starting at +x.
std::array<double, kDirectionBins> directogram(const FlowField& flow);

// Per-flow saliency: summed positive bin increase over the previous flow, divided by H*W.
// Entry 0 has no predecessor and is 0.
std::vector<double> motion_saliency(std::span<const FlowField> flows);
std::vector<double> saliency_from_directograms(std::span<const std::array<double, kDirectionBins>> bins,
                                               int width, int height);

// Per-frame flow magnitude F_t plus saliency, flows computed pairwise on up to `threads` workers.
struct MotionFeatures {
  std::vector<double> magnitudes;  // one per consecutive frame pair
  std::vector<double> saliency;    // aligned with magnitudes
};
MotionFeatures motion_features(std::span<const GrayImage> frames, unsigned threads = 1,
                               const BlockMatchParams& params = {});

// Total beats covered by T frames (floored to a whole beat, at least 1) and clip count.
int total_beats(long total_frames, double fps, double tempo);
int clip_count(long total_frames, double fps, double tempo);

// Mean F_t over the frames of clip m (1-based). `magnitudes[k]` belongs to frame k+1.
double motion_speed(std::span<const double> magnitudes, int m, double fps, double tempo);

// Class boundaries for mapping motion speed to density and saliency to strength.
// The cumulative class proportions come from a music corpus; thresholds are the matching
// quantiles of a reference sample of speeds/saliencies. Empty thresholds mean "calibrate
// against the video itself".
struct DensityDistribution {
  std::vector<double> density_cdf;          // 16 entries, last == 1
  std::vector<double> strength_cdf;         // 20 entries, last == 1
  std::vector<double> speed_thresholds;     // 15 nondecreasing, or empty
  std::vector<double> saliency_thresholds;  // 19 nondecreasing, or empty

  static DensityDistribution uniform();
  friend bool operator==(const DensityDistribution&, const DensityDistribution&) = default;
};

// Quantiles of `sample` at the cumulative proportions (all but the last).
std::vector<double> thresholds_from_cdf(std::span<const double> cdf, std::span<const double> sample);

// 1 + number of thresholds strictly below the value.
int classify(double value, std::span<const double> thresholds);
std::vector<int> classify_density(std::span<const double> speeds, const DensityDistribution& dist);

void save_distribution(const std::filesystem::path& path, const DensityDistribution& dist);
DensityDistribution load_distribution(const std::filesystem::path& path);
std::vector<std::uint8_t> serialize_distribution(const DensityDistribution& dist);
DensityDistribution deserialize_distribution(std::span<const std::uint8_t> bytes);

struct VisualBeat {
  long frame = 0;
  double saliency = 0.0;
  long global_tick = 0;  // snapped position, 16 per bar
};

struct BeatDetectParams {
  double spacing_tolerance = 0.25;  // fraction of k tick intervals
};

std::vector<VisualBeat> detect_visual_beats(std::span<const double> saliency, double fps, double tempo,
                                            const BeatDetectParams& params = {});

struct RhythmBeat {
  int bar = 0;
  int tick = 1;  // 1..16
  int strength = 1;
  long global_tick() const { return static_cast<long>(bar) * kTicksPerBar + tick - 1; }
  friend bool operator==(const RhythmBeat&, const RhythmBeat&) = default;
};

struct VideoRhythm {
  double tempo_bpm = kDefaultTempo;
  int n_beats = 1;
  int n_bars = 1;
  std::vector<int> bar_density_class;
  std::vector<RhythmBeat> visual_beats;
  long total_frames = 0;
  double fps = 30.0;

  // Video length in beats before flooring.
  double exact_beats() const;
  friend bool operator==(const VideoRhythm&, const VideoRhythm&) = default;
};

void check_rhythm(const VideoRhythm& rhythm);

// Composes the whole extraction from per-frame motion features. `total_frames` is T.
VideoRhythm build_video_rhythm(const MotionFeatures& features, long total_frames, double fps, double tempo,
                               const DensityDistribution& dist, const BeatDetectParams& params = {});
VideoRhythm build_video_rhythm(std::span<const GrayImage> frames, double fps, double tempo,
                               const DensityDistribution& dist, unsigned threads = 1);

// Density vector d_v (per bar) and strength vector s_v (per global tick, zero off-beat).
std::vector<double> density_vector(const VideoRhythm& rhythm);
std::vector<double> strength_vector(const VideoRhythm& rhythm);

inline constexpr int kRhythmSchemaMajor = 1;
std::string rhythm_to_json(const VideoRhythm& rhythm);
VideoRhythm rhythm_from_json(const std::string& text);
void save_rhythm(const std::filesystem::path& path, const VideoRhythm& rhythm);
VideoRhythm load_rhythm(const std::filesystem::path& path);

// Frames directory: frame_%06d.pgm (binary P5) plus manifest.json {fps, tempo?}.
struct FrameManifest {
  double fps = 30.0;
  std::optional<double> tempo;
};
GrayImage read_pgm(const std::filesystem::path& path);
void write_pgm(const std::filesystem::path& path, const GrayImage& image);
FrameManifest read_manifest(const std::filesystem::path& dir);
std::vector<GrayImage> read_frames(const std::filesystem::path& dir);

// Precomputed magnitudes: one F_t per line, optionally followed by ",saliency".
MotionFeatures read_flow_csv(const std::filesystem::path& path);
void write_flow_csv(const std::filesystem::path& path, const MotionFeatures& features);

}  // namespace cmt::video

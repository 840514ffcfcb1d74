#pragma once

#include <array>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "cmt/score.hpp"
#include "cmt/tokens.hpp"
#include "cmt/video_rhythm.hpp"

namespace cmt::metrics {

inline constexpr double kMatchEpsilon = 1e-8;
inline constexpr int kMinStructureLag = 4;
inline constexpr int kMaxStructureLag = 16;

// Base-2 entropy of the 12-bin pitch-class histogram of non-drum notes. With
// window_bars > 0 the entropy is averaged over consecutive windows of that many bars
// (windows without pitched notes are skipped).
double pitch_entropy(const QuantizedScore& score, int window_bars = 0);

// 16-slot onset pattern of one bar over all instruments.
std::array<bool, kTicksPerBar> onset_pattern(const QuantizedScore& score, int bar);

// Mean over unordered bar pairs of 1 - Hamming / 16.
double grooving_similarity(const QuantizedScore& score);

// Highest mean self-similarity along a diagonal stripe at lags 4..16 bars. Each bar is
// described by its onset pattern and pitch-class histogram, each scaled to unit length.
double structureness(const QuantizedScore& score, int* best_lag = nullptr);

// 1 / (MSE(d_m, d_v) + MSE(s_m * [s_v > 0], s_v) + eps), both pairs truncated to their common length.
double matching_score(std::span<const double> d_m, std::span<const double> d_v, std::span<const double> s_m,
                      std::span<const double> s_v, double eps = kMatchEpsilon);

struct ControlError {
  double density_err = 0;
  double strength_err = 0;
  double time_err = 0;
};

// Realized densities and strengths are read from the token stream itself.
ControlError control_error(const TokenSequence& tokens, const video::VideoRhythm& rhythm);

struct MetricReport {
  std::optional<double> pitch_entropy;
  std::optional<double> grooving_similarity;
  std::optional<double> structureness;
  std::optional<ControlError> control;
  int n_bars = 0;
  std::size_t n_notes = 0;
};

// Metrics whose preconditions the piece does not meet are left empty.
MetricReport evaluate(const TokenSequence& tokens, const video::VideoRhythm* rhythm = nullptr);
std::string report_to_json(const MetricReport& report);
std::string report_csv_header();
std::string report_csv_row(const std::string& id, const MetricReport& report);

}  // namespace cmt::metrics

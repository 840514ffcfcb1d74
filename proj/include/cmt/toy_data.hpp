#pragma once

#include <cstdint>
#include <random>
#include <vector>

#include "cmt/score.hpp"
#include "cmt/tokens.hpp"
#include "cmt/video_rhythm.hpp"

// Synthetic data for tests and the toy training run.
namespace cmt::toy {

// A valid score with 1..max_bars bars and notes from up to max_instruments instruments.
// Durations stay within the token vocabulary and tempos on the 0.01 BPM grid.
QuantizedScore random_score(std::mt19937_64& rng, int max_bars = 32, int max_instruments = kNumInstruments);

struct ToyPiece {
  QuantizedScore score;
  Genre genre = Genre::Pop;
};

// Short repetitive pieces: one bar pattern per piece, replayed over a chord progression.
std::vector<ToyPiece> toy_corpus(std::uint64_t seed, int count = 20, int bars = 4);

// Bar-aligned rhythm (fps 30, tempo 120, 4 * n_bars beats) whose visual beats never
// outnumber their bar's density class.
video::VideoRhythm random_rhythm(std::mt19937_64& rng, int n_bars);

// Deterministic pseudo-random texture, smooth enough for block matching.
video::GrayImage texture(int width, int height, std::uint64_t seed);

// `image` shifted right by dx and down by dy, edges clamped.
video::GrayImage translate(const video::GrayImage& image, int dx, int dy);

}  // namespace cmt::toy

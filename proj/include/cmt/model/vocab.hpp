#pragma once

#include <array>
#include <string_view>

#include "cmt/tokens.hpp"

namespace cmt::model {

// Attribute order used by every per-attribute array in the model.
enum class Attr : int { Type = 0, Beat, Density, Strength, Instrument, Pitch, Duration };
inline constexpr int kNumAttrs = 7;

// Index 0 of every vocabulary is None.
inline constexpr std::array<int, kNumAttrs> kVocabSize = {4, 2 + kTicksPerBar, 2 + kTicksPerBar, 1 + kMaxStrength,
                                                          1 + kNumInstruments, 129, 1 + kMaxDuration};

// Embedding widths (type, beat, density, strength, instrument, pitch, duration).
inline constexpr std::array<int, kNumAttrs> kEmbedDims = {32, 64, 64, 64, 32, 512, 128};

constexpr int embed_width_total() {
  int s = 0;
  for (int d : kEmbedDims) s += d;
  return s;
}

std::string_view attr_name(Attr a);

inline constexpr int vocab(Attr a) { return kVocabSize[static_cast<int>(a)]; }

using TokenIndices = std::array<int, kNumAttrs>;

// Raises InvalidArgument on attributes outside their vocabulary.
TokenIndices to_indices(const CompoundToken& token);
CompoundToken from_indices(const TokenIndices& idx);

inline constexpr int type_index(TokenType t) { return static_cast<int>(t) + 1; }
inline constexpr int beat_index(int beat) { return beat + 1; }  // kBarBeat -> 1, tick j -> j + 1
inline constexpr int density_index(int d) { return d + 1; }
inline constexpr int strength_index(int s) { return s; }
inline constexpr int instrument_index(Instrument i) { return static_cast<int>(i) + 1; }
inline constexpr int pitch_index(int p) { return p + 1; }
inline constexpr int duration_index(int d) { return d; }

// Initial-token table: 6 genres then 5 instruments.
inline constexpr int kInitialVocab = kNumGenres + kNumInstruments;
int initial_index(const InitialToken& t);

}  // namespace cmt::model

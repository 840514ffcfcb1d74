#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "cmt/score.hpp"

namespace cmt {

inline constexpr int kMaxStrength = 20;
inline constexpr int kMaxDuration = 32;
inline constexpr int kBarBeat = 0;  // beat attribute value of a bar token; ticks are 1..16

enum class TokenType : std::uint8_t { Rhythm = 0, Note = 1, Eos = 2 };

// One compound word. Attributes that do not apply to the token's type are nullopt.
struct CompoundToken {
  TokenType type = TokenType::Eos;
  std::optional<int> beat;  // kBarBeat or tick 1..16
  std::optional<int> density;
  std::optional<int> strength;
  std::optional<Instrument> instrument;
  std::optional<int> pitch;
  std::optional<int> duration;

  static CompoundToken bar(int density);
  static CompoundToken tick(int tick, int density, int strength);
  static CompoundToken note(Instrument instrument, int pitch, int duration);
  static CompoundToken eos();

  bool is_bar() const { return type == TokenType::Rhythm && beat == kBarBeat; }
  bool is_tick() const { return type == TokenType::Rhythm && beat.has_value() && *beat != kBarBeat; }
  bool is_note() const { return type == TokenType::Note; }
  bool is_eos() const { return type == TokenType::Eos; }

  friend bool operator==(const CompoundToken&, const CompoundToken&) = default;
};

struct InitialToken {
  enum class Kind : std::uint8_t { Genre, Instrument } kind = Kind::Genre;
  int value = 0;  // Genre or Instrument enumerator

  static InitialToken genre(Genre g) { return {Kind::Genre, static_cast<int>(g)}; }
  static InitialToken instrument(Instrument i) { return {Kind::Instrument, static_cast<int>(i)}; }

  friend bool operator==(const InitialToken&, const InitialToken&) = default;
};

struct TokenSequence {
  std::vector<InitialToken> prefix;
  std::vector<CompoundToken> body;
  // Playback tempo. Not part of the token stream; carried so detokenizing is lossless.
  double tempo_bpm = 120.0;

  friend bool operator==(const TokenSequence&, const TokenSequence&) = default;
};

std::vector<InitialToken> make_prefix(Genre genre, const std::vector<Instrument>& instruments);

// Notes with a common onset and instrument.
struct SimuNote {
  int bar = 0;
  int tick = 1;  // 1..16
  Instrument instrument = Instrument::Piano;
  std::vector<NoteEvent> notes;
};

std::vector<SimuNote> group_simu_notes(const QuantizedScore& score);

// Distinct occupied ticks in a bar, over all instruments.
int bar_density(const QuantizedScore& score, int bar);

// Notes starting at (bar, tick) across all instruments, clipped to kMaxStrength.
int tick_strength(const QuantizedScore& score, int bar, int tick);

// Per-bar densities and per-global-tick strengths for the whole score.
std::vector<int> density_profile(const QuantizedScore& score);
std::vector<int> strength_profile(const QuantizedScore& score);

TokenSequence encode(const QuantizedScore& score, Genre genre, const std::vector<Instrument>& instruments);
TokenSequence encode(const QuantizedScore& score, Genre genre);

enum class DecodeMode { Strict, Tolerant };

// Strict mode rejects any grammar violation. Tolerant mode ignores density and
// strength fields that disagree with the tokens that follow and trusts the notes.
QuantizedScore decode(const TokenSequence& tokens, DecodeMode mode = DecodeMode::Strict);

enum class ViolationKind {
  Prefix,
  Structure,
  NonePattern,
  Range,
  BeatOrder,
  Density,
  Strength,
  DuplicateNote,
};

std::string_view to_string(ViolationKind kind);

struct Violation {
  std::size_t index = 0;  // body index, or prefix index for ViolationKind::Prefix
  ViolationKind kind = ViolationKind::Structure;
  std::string message;
};

std::vector<Violation> validate(const TokenSequence& tokens);

// Line-oriented ".cwt" text format.
void write_cwt(std::ostream& out, const TokenSequence& tokens);
TokenSequence read_cwt(std::istream& in);
std::string to_cwt(const TokenSequence& tokens);
TokenSequence from_cwt(const std::string& text);
void save_cwt(const std::filesystem::path& path, const TokenSequence& tokens);
TokenSequence load_cwt(const std::filesystem::path& path);

}  // namespace cmt

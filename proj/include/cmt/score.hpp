#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace cmt {

inline constexpr int kTicksPerBeat = 4;
inline constexpr int kBeatsPerBar = 4;
inline constexpr int kTicksPerBar = kTicksPerBeat * kBeatsPerBar;

enum class Instrument : std::uint8_t { Drums = 0, Piano = 1, Guitar = 2, Bass = 3, Strings = 4 };
inline constexpr int kNumInstruments = 5;
inline constexpr std::array<Instrument, kNumInstruments> kAllInstruments = {
    Instrument::Drums, Instrument::Piano, Instrument::Guitar, Instrument::Bass, Instrument::Strings};

enum class Genre : std::uint8_t { Country = 0, Dance = 1, Electronic = 2, Metal = 3, Pop = 4, Rock = 5 };
inline constexpr int kNumGenres = 6;

std::string_view to_string(Instrument instrument);
std::string_view to_string(Genre genre);
std::optional<Instrument> parse_instrument(std::string_view name);
std::optional<Genre> parse_genre(std::string_view name);

struct NoteEvent {
  int pitch = 60;
  int onset_tick = 0;  // global, 16 per bar
  int duration_ticks = 1;
  Instrument instrument = Instrument::Piano;

  int bar() const { return onset_tick / kTicksPerBar; }
  int tick_in_bar() const { return onset_tick % kTicksPerBar + 1; }  // 1..16
  int end_tick() const { return onset_tick + duration_ticks; }

  friend bool operator==(const NoteEvent&, const NoteEvent&) = default;
};

// Canonical note order: (onset, instrument, pitch).
bool note_order(const NoteEvent& a, const NoteEvent& b);

struct QuantizedScore {
  double tempo_bpm = 120.0;
  std::vector<NoteEvent> notes;
  int n_bars = 1;

  friend bool operator==(const QuantizedScore&, const QuantizedScore&) = default;
};

// Throws InvalidArgument describing the first broken invariant.
void check_score(const QuantizedScore& score);

// Brings a note list into canonical form: sorted, identical (onset, instrument, pitch)
// collapsed to the longer duration, and a sounding note cut short where the same
// pitch/instrument is re-struck. n_bars is grown to cover every onset.
QuantizedScore normalize(QuantizedScore score);

// Instruments that have at least one note, ascending.
std::vector<Instrument> instruments_present(const QuantizedScore& score);

// Tempo is carried at 0.01 BPM resolution so it survives the integer microsecond MIDI field.
double round_tempo(double bpm);

}  // namespace cmt

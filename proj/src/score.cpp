#include "cmt/score.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <map>
#include <tuple>

#include "cmt/error.hpp"

namespace cmt {

namespace {

constexpr std::array<std::string_view, kNumInstruments> kInstrumentNames = {"Drums", "Piano", "Guitar", "Bass",
                                                                            "Strings"};
constexpr std::array<std::string_view, kNumGenres> kGenreNames = {"Country", "Dance", "Electronic",
                                                                  "Metal",   "Pop",   "Rock"};

bool iequals(std::string_view a, std::string_view b) {
  return a.size() == b.size() && std::equal(a.begin(), a.end(), b.begin(), [](char x, char y) {
           return std::tolower(static_cast<unsigned char>(x)) == std::tolower(static_cast<unsigned char>(y));
         });
}

}  // namespace

std::string_view to_string(Instrument instrument) { return kInstrumentNames.at(static_cast<int>(instrument)); }
std::string_view to_string(Genre genre) { return kGenreNames.at(static_cast<int>(genre)); }

std::optional<Instrument> parse_instrument(std::string_view name) {
  for (int i = 0; i < kNumInstruments; ++i)
    if (iequals(name, kInstrumentNames[i])) return static_cast<Instrument>(i);
  return std::nullopt;
}

std::optional<Genre> parse_genre(std::string_view name) {
  for (int i = 0; i < kNumGenres; ++i)
    if (iequals(name, kGenreNames[i])) return static_cast<Genre>(i);
  return std::nullopt;
}

bool note_order(const NoteEvent& a, const NoteEvent& b) {
  return std::tuple(a.onset_tick, a.instrument, a.pitch) < std::tuple(b.onset_tick, b.instrument, b.pitch);
}

void check_score(const QuantizedScore& score) {
  if (!(score.tempo_bpm > 0.0) || !std::isfinite(score.tempo_bpm))
    throw InvalidArgument("tempo must be positive");
  if (score.n_bars < 1) throw InvalidArgument("n_bars must be positive");
  std::map<std::pair<Instrument, int>, int> sounding_until;
  for (std::size_t i = 0; i < score.notes.size(); ++i) {
    const NoteEvent& n = score.notes[i];
    if (n.pitch < 0 || n.pitch > 127) throw InvalidArgument("pitch out of range at note " + std::to_string(i));
    if (n.duration_ticks < 1) throw InvalidArgument("duration < 1 at note " + std::to_string(i));
    if (n.onset_tick < 0 || n.onset_tick >= kTicksPerBar * score.n_bars)
      throw InvalidArgument("onset outside the score at note " + std::to_string(i));
    if (static_cast<int>(n.instrument) >= kNumInstruments)
      throw InvalidArgument("instrument out of range at note " + std::to_string(i));
    if (i > 0 && !note_order(score.notes[i - 1], n))
      throw InvalidArgument("notes not strictly sorted at note " + std::to_string(i));
    auto [it, fresh] = sounding_until.try_emplace({n.instrument, n.pitch}, n.end_tick());
    if (!fresh) {
      if (it->second > n.onset_tick) throw InvalidArgument("overlapping re-struck note at " + std::to_string(i));
      it->second = n.end_tick();
    }
  }
}

QuantizedScore normalize(QuantizedScore score) {
  auto& notes = score.notes;
  std::sort(notes.begin(), notes.end(), [](const NoteEvent& a, const NoteEvent& b) {
    if (note_order(a, b)) return true;
    if (note_order(b, a)) return false;
    return a.duration_ticks > b.duration_ticks;
  });
  // Longest duplicate sorts first; drop the rest.
  notes.erase(std::unique(notes.begin(), notes.end(),
                          [](const NoteEvent& a, const NoteEvent& b) { return !note_order(a, b) && !note_order(b, a); }),
              notes.end());
  std::map<std::pair<Instrument, int>, std::size_t> last;
  for (std::size_t i = 0; i < notes.size(); ++i) {
    auto key = std::pair(notes[i].instrument, notes[i].pitch);
    if (auto it = last.find(key); it != last.end()) {
      NoteEvent& prev = notes[it->second];
      if (prev.end_tick() > notes[i].onset_tick) prev.duration_ticks = notes[i].onset_tick - prev.onset_tick;
    }
    last[key] = i;
  }
  for (const auto& n : notes) score.n_bars = std::max(score.n_bars, n.onset_tick / kTicksPerBar + 1);
  return score;
}

std::vector<Instrument> instruments_present(const QuantizedScore& score) {
  std::array<bool, kNumInstruments> seen{};
  for (const auto& n : score.notes) seen[static_cast<int>(n.instrument)] = true;
  std::vector<Instrument> out;
  for (int i = 0; i < kNumInstruments; ++i)
    if (seen[i]) out.push_back(static_cast<Instrument>(i));
  return out;
}

double round_tempo(double bpm) { return std::round(bpm * 100.0) / 100.0; }

}  // namespace cmt

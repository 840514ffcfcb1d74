#include "cmt/tokens.hpp"

#include <algorithm>
#include <array>
#include <map>
#include <set>
#include <tuple>

#include "cmt/error.hpp"

namespace cmt {

CompoundToken CompoundToken::bar(int density) {
  CompoundToken t;
  t.type = TokenType::Rhythm;
  t.beat = kBarBeat;
  t.density = density;
  return t;
}

CompoundToken CompoundToken::tick(int tick, int density, int strength) {
  CompoundToken t;
  t.type = TokenType::Rhythm;
  t.beat = tick;
  t.density = density;
  t.strength = strength;
  return t;
}

CompoundToken CompoundToken::note(Instrument instrument, int pitch, int duration) {
  CompoundToken t;
  t.type = TokenType::Note;
  t.instrument = instrument;
  t.pitch = pitch;
  t.duration = duration;
  return t;
}

CompoundToken CompoundToken::eos() { return {}; }

std::vector<InitialToken> make_prefix(Genre genre, const std::vector<Instrument>& instruments) {
  std::vector<InitialToken> prefix{InitialToken::genre(genre)};
  std::vector<Instrument> sorted = instruments;
  std::sort(sorted.begin(), sorted.end());
  sorted.erase(std::unique(sorted.begin(), sorted.end()), sorted.end());
  for (Instrument i : sorted) prefix.push_back(InitialToken::instrument(i));
  return prefix;
}

std::vector<SimuNote> group_simu_notes(const QuantizedScore& score) {
  std::map<std::tuple<int, int, Instrument>, SimuNote> groups;
  for (const auto& n : score.notes) {
    auto& g = groups[{n.bar(), n.tick_in_bar(), n.instrument}];
    g.bar = n.bar();
    g.tick = n.tick_in_bar();
    g.instrument = n.instrument;
    g.notes.push_back(n);
  }
  std::vector<SimuNote> out;
  out.reserve(groups.size());
  for (auto& [key, g] : groups) out.push_back(std::move(g));
  return out;
}

int bar_density(const QuantizedScore& score, int bar) {
  if (bar < 0 || bar >= score.n_bars) throw InvalidArgument("bar index out of range");
  std::array<bool, kTicksPerBar> occupied{};
  for (const auto& n : score.notes)
    if (n.bar() == bar) occupied[n.tick_in_bar() - 1] = true;
  return static_cast<int>(std::count(occupied.begin(), occupied.end(), true));
}

int tick_strength(const QuantizedScore& score, int bar, int tick) {
  const int onset = bar * kTicksPerBar + tick - 1;
  const auto count = std::count_if(score.notes.begin(), score.notes.end(),
                                   [&](const NoteEvent& n) { return n.onset_tick == onset; });
  return std::min(static_cast<int>(count), kMaxStrength);
}

std::vector<int> density_profile(const QuantizedScore& score) {
  std::vector<std::array<bool, kTicksPerBar>> occupied(score.n_bars);
  for (const auto& n : score.notes) occupied.at(n.bar())[n.tick_in_bar() - 1] = true;
  std::vector<int> out;
  for (const auto& bar : occupied) out.push_back(static_cast<int>(std::count(bar.begin(), bar.end(), true)));
  return out;
}

std::vector<int> strength_profile(const QuantizedScore& score) {
  std::vector<int> out(static_cast<std::size_t>(score.n_bars) * kTicksPerBar, 0);
  for (const auto& n : score.notes) {
    int& s = out.at(n.onset_tick);
    s = std::min(s + 1, kMaxStrength);
  }
  return out;
}

TokenSequence encode(const QuantizedScore& score, Genre genre, const std::vector<Instrument>& instruments) {
  check_score(score);
  if (score.notes.empty()) throw EmptyScoreError();
  const auto present = instruments_present(score);
  auto wanted = instruments;
  std::sort(wanted.begin(), wanted.end());
  wanted.erase(std::unique(wanted.begin(), wanted.end()), wanted.end());
  if (wanted != present) throw InvalidArgument("instrument list must equal the instruments present in the score");

  TokenSequence seq;
  seq.tempo_bpm = score.tempo_bpm;
  seq.prefix = make_prefix(genre, present);

  // Notes are already in (onset, instrument, pitch) order.
  std::size_t i = 0;
  const auto& notes = score.notes;
  for (int bar = 0; bar < score.n_bars; ++bar) {
    const int density = bar_density(score, bar);
    seq.body.push_back(CompoundToken::bar(density));
    int remaining = density;
    while (i < notes.size() && notes[i].bar() == bar) {
      const int onset = notes[i].onset_tick;
      std::size_t j = i;
      while (j < notes.size() && notes[j].onset_tick == onset) ++j;
      const int strength = std::min(static_cast<int>(j - i), kMaxStrength);
      seq.body.push_back(CompoundToken::tick(notes[i].tick_in_bar(), remaining--, strength));
      for (; i < j; ++i)
        seq.body.push_back(
            CompoundToken::note(notes[i].instrument, notes[i].pitch, std::min(notes[i].duration_ticks, kMaxDuration)));
    }
  }
  seq.body.push_back(CompoundToken::eos());
  return seq;
}

TokenSequence encode(const QuantizedScore& score, Genre genre) {
  return encode(score, genre, instruments_present(score));
}

std::string_view to_string(ViolationKind kind) {
  switch (kind) {
    case ViolationKind::Prefix:
      return "prefix";
    case ViolationKind::Structure:
      return "structure";
    case ViolationKind::NonePattern:
      return "none-pattern";
    case ViolationKind::Range:
      return "range";
    case ViolationKind::BeatOrder:
      return "beat-order";
    case ViolationKind::Density:
      return "density";
    case ViolationKind::Strength:
      return "strength";
    case ViolationKind::DuplicateNote:
      return "duplicate-note";
  }
  return "?";
}

namespace {

void check_prefix(const std::vector<InitialToken>& prefix, std::vector<Violation>& out) {
  if (prefix.empty() || prefix[0].kind != InitialToken::Kind::Genre) {
    out.push_back({0, ViolationKind::Prefix, "prefix must start with exactly one genre token"});
    return;
  }
  if (prefix[0].value < 0 || prefix[0].value >= kNumGenres)
    out.push_back({0, ViolationKind::Prefix, "unknown genre"});
  std::set<int> seen;
  for (std::size_t i = 1; i < prefix.size(); ++i) {
    if (prefix[i].kind != InitialToken::Kind::Instrument)
      out.push_back({i, ViolationKind::Prefix, "genre token after the first position"});
    else if (prefix[i].value < 0 || prefix[i].value >= kNumInstruments)
      out.push_back({i, ViolationKind::Prefix, "unknown instrument"});
    else if (!seen.insert(prefix[i].value).second)
      out.push_back({i, ViolationKind::Prefix, "repeated instrument token"});
  }
  if (prefix.size() < 2 || prefix.size() > 1 + kNumInstruments)
    out.push_back({0, ViolationKind::Prefix, "prefix needs 1-5 instrument tokens"});
}

// Returns false when the None pattern is broken (attribute checks are skipped then).
bool check_attributes(const CompoundToken& t, std::size_t i, std::vector<Violation>& out) {
  auto none_error = [&](const char* msg) {
    out.push_back({i, ViolationKind::NonePattern, msg});
    return false;
  };
  auto range_error = [&](const char* msg) { out.push_back({i, ViolationKind::Range, msg}); };
  switch (t.type) {
    case TokenType::Rhythm:
      if (!t.beat || t.instrument || t.pitch || t.duration) return none_error("rhythm token with note attributes");
      if (*t.beat < 0 || *t.beat > kTicksPerBar) range_error("beat out of range");
      if (*t.beat == kBarBeat) {
        if (!t.density || t.strength) return none_error("bar token needs density and no strength");
        if (*t.density < 0 || *t.density > kTicksPerBar) range_error("bar density out of range");
      } else {
        if (!t.density || !t.strength) return none_error("tick token needs density and strength");
        if (*t.density < 1 || *t.density > kTicksPerBar) range_error("tick density out of range");
        if (*t.strength < 1 || *t.strength > kMaxStrength) range_error("strength out of range");
      }
      return true;
    case TokenType::Note:
      if (t.beat || t.density || t.strength || !t.instrument || !t.pitch || !t.duration)
        return none_error("note token with rhythm attributes or missing note attributes");
      if (*t.pitch < 0 || *t.pitch > 127) range_error("pitch out of range");
      if (*t.duration < 1 || *t.duration > kMaxDuration) range_error("duration out of range");
      if (static_cast<int>(*t.instrument) >= kNumInstruments) range_error("instrument out of range");
      return true;
    case TokenType::Eos:
      if (t.beat || t.density || t.strength || t.instrument || t.pitch || t.duration)
        return none_error("EOS token carries attributes");
      return true;
  }
  return false;
}

}  // namespace

std::vector<Violation> validate(const TokenSequence& tokens) {
  std::vector<Violation> out;
  check_prefix(tokens.prefix, out);
  const auto& body = tokens.body;

  std::vector<bool> well_formed(body.size());
  for (std::size_t i = 0; i < body.size(); ++i) well_formed[i] = check_attributes(body[i], i, out);

  // Ticks per bar and notes per tick, counted from the tokens actually present.
  std::vector<int> ticks_in_bar(body.size(), 0);
  std::vector<int> notes_after_tick(body.size(), 0);
  {
    std::size_t bar_at = body.size(), tick_at = body.size();
    for (std::size_t i = 0; i < body.size(); ++i) {
      const auto& t = body[i];
      if (t.type == TokenType::Rhythm && t.beat) {
        if (*t.beat == kBarBeat) {
          bar_at = i;
          tick_at = body.size();
        } else {
          if (bar_at < body.size()) ++ticks_in_bar[bar_at];
          tick_at = i;
        }
      } else if (t.type == TokenType::Note) {
        if (tick_at < body.size()) ++notes_after_tick[tick_at];
      } else {
        bar_at = tick_at = body.size();
      }
    }
  }

  bool in_bar = false, in_tick = false, eos_seen = false;
  int last_tick = 0, bar_ticks = 0, tick_ordinal = 0;
  std::set<std::pair<int, int>> notes_here;
  for (std::size_t i = 0; i < body.size(); ++i) {
    const auto& t = body[i];
    if (eos_seen) {
      out.push_back({i, ViolationKind::Structure, "token after EOS"});
      continue;
    }
    if (!well_formed[i]) continue;
    if (t.is_eos()) {
      eos_seen = true;
      continue;
    }
    if (t.is_bar()) {
      in_bar = true;
      in_tick = false;
      last_tick = 0;
      tick_ordinal = 0;
      bar_ticks = ticks_in_bar[i];
      if (*t.density != bar_ticks)
        out.push_back({i, ViolationKind::Density,
                       "bar density " + std::to_string(*t.density) + " but " + std::to_string(bar_ticks) + " ticks"});
    } else if (t.is_tick()) {
      if (!in_bar) {
        out.push_back({i, ViolationKind::Structure, "tick token before any bar token"});
        continue;
      }
      if (*t.beat <= last_tick) out.push_back({i, ViolationKind::BeatOrder, "tick position does not increase"});
      last_tick = std::max(last_tick, *t.beat);
      in_tick = true;
      notes_here.clear();
      const int expected = bar_ticks - tick_ordinal++;
      if (*t.density != expected)
        out.push_back({i, ViolationKind::Density,
                       "tick density " + std::to_string(*t.density) + ", expected " + std::to_string(expected)});
      const int count = notes_after_tick[i];
      if (*t.strength != std::min(count, kMaxStrength))
        out.push_back({i, ViolationKind::Strength,
                       "strength " + std::to_string(*t.strength) + " but " + std::to_string(count) + " notes"});
    } else if (t.is_note()) {
      if (!in_tick) {
        out.push_back({i, ViolationKind::Structure, "note token before any tick token in its bar"});
        continue;
      }
      if (!notes_here.insert({static_cast<int>(*t.instrument), *t.pitch}).second)
        out.push_back({i, ViolationKind::DuplicateNote, "same instrument and pitch twice at one tick"});
    }
  }
  if (!eos_seen) out.push_back({body.size(), ViolationKind::Structure, "sequence does not end with EOS"});
  std::stable_sort(out.begin(), out.end(), [](const Violation& a, const Violation& b) {
    return std::tuple(a.kind != ViolationKind::Prefix, a.index) < std::tuple(b.kind != ViolationKind::Prefix, b.index);
  });
  return out;
}

QuantizedScore decode(const TokenSequence& tokens, DecodeMode mode) {
  auto violations = validate(tokens);
  for (const auto& v : violations) {
    const bool repairable =
        v.kind == ViolationKind::Density || v.kind == ViolationKind::Strength || v.kind == ViolationKind::DuplicateNote;
    if (mode == DecodeMode::Strict || !repairable) throw GrammarError(std::string(to_string(v.kind)) + ": " + v.message, v.index);
  }

  QuantizedScore score;
  score.tempo_bpm = tokens.tempo_bpm;
  int bar = -1, tick = 0;
  for (const auto& t : tokens.body) {
    if (t.is_eos()) break;
    if (t.is_bar()) {
      ++bar;
      tick = 0;
    } else if (t.is_tick()) {
      tick = *t.beat;
    } else {
      score.notes.push_back({*t.pitch, bar * kTicksPerBar + tick - 1, *t.duration, *t.instrument});
    }
  }
  if (score.notes.empty()) throw EmptyScoreError();
  score.n_bars = std::max(bar + 1, 1);
  return normalize(std::move(score));
}

}  // namespace cmt

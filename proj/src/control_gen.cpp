#include "cmt/control_gen.hpp"

#include <algorithm>
#include <fstream>
#include <json.hpp>
#include <set>

#include "cmt/model/transformer.hpp"

namespace cmt {

using model::Attr;

std::string_view to_string(Replacement r) {
  switch (r) {
    case Replacement::None:
      return "none";
    case Replacement::Density:
      return "density";
    case Replacement::Strength:
      return "strength";
  }
  return "?";
}

std::size_t GenerationTrace::count(Replacement r) const {
  return static_cast<std::size_t>(
      std::count_if(records.begin(), records.end(), [r](const TraceRecord& t) { return t.replaced == r; }));
}

namespace {

void check_degree(double C) {
  if (!(C >= 0 && C <= 1)) throw InvalidArgument("control degree C must be in [0, 1]");
}

}  // namespace

ReplaceOutcome replace_density(const CompoundToken& token, int density_class, double C, std::mt19937_64& rng) {
  check_degree(C);
  if (!token.is_bar()) throw InvalidArgument("density replacement needs a bar token");
  if (density_class < 1 || density_class > video::kDensityClasses) throw InvalidArgument("density class out of range");
  if (!std::bernoulli_distribution(C)(rng)) return {token, false};
  CompoundToken out = token;
  out.density = density_class;
  return {out, true};
}

ReplaceOutcome replace_strength(const CompoundToken& token, int token_bar, const video::RhythmBeat& beat, double C,
                                std::mt19937_64& rng) {
  check_degree(C);
  if (!token.is_tick()) throw InvalidArgument("strength replacement needs a tick token");
  if (beat.bar != token_bar) throw InvalidArgument("visual beat lies in a different bar");
  if (*token.beat < beat.tick) throw InvalidArgument("tick token precedes the visual beat");
  if (beat.strength < 1 || beat.strength > kMaxStrength) throw InvalidArgument("visual beat strength out of range");
  if (!std::bernoulli_distribution(C)(rng)) return {token, false};
  CompoundToken out = token;
  out.beat = beat.tick;
  out.strength = beat.strength;
  return {out, true};
}

namespace {

// Grammar state of the sequence generated so far.
class Grammar {
 public:
  Grammar(const std::vector<Instrument>& instruments, bool guardrail) : guardrail_(guardrail) {
    for (Instrument i : instruments) allowed_instruments_.insert(i);
  }

  int bars() const { return bars_; }
  int ticks_left() const { return ticks_left_; }

  std::vector<bool> allowed(Attr a, const model::TokenIndices& partial) const {
    using namespace model;
    std::vector<bool> m(static_cast<std::size_t>(vocab(a)), false);
    switch (a) {
      case Attr::Type:
        if (bars_ == 0) {
          m[type_index(TokenType::Rhythm)] = true;
        } else if (guardrail_ && in_tick_ && notes_left_ > 0) {
          m[type_index(TokenType::Note)] = true;
        } else if (guardrail_ && ticks_left_ > 0) {
          m[type_index(TokenType::Rhythm)] = true;
        } else {
          m[type_index(TokenType::Rhythm)] = true;
          m[type_index(TokenType::Eos)] = true;
          if (!guardrail_ && in_tick_ && used_.size() < allowed_instruments_.size() * 128)
            m[type_index(TokenType::Note)] = true;
        }
        break;
      case Attr::Beat:
        if (bars_ == 0 || (guardrail_ && ticks_left_ == 0)) {
          m[beat_index(kBarBeat)] = true;
        } else {
          const int hi = guardrail_ ? kTicksPerBar - ticks_left_ + 1 : kTicksPerBar;
          for (int t = last_tick_ + 1; t <= hi; ++t) m[beat_index(t)] = true;
          if (!guardrail_) m[beat_index(kBarBeat)] = true;
        }
        break;
      case Attr::Density: {
        const int lo = partial[1] == beat_index(kBarBeat) ? 0 : 1;
        for (int d = lo; d <= kTicksPerBar; ++d) m[density_index(d)] = true;
        break;
      }
      case Attr::Strength:
        for (int s = 1; s <= kMaxStrength; ++s) m[strength_index(s)] = true;
        break;
      case Attr::Instrument:
        for (Instrument i : allowed_instruments_) {
          int used = 0;
          for (const auto& u : used_) used += u.first == i;
          if (used < 128) m[instrument_index(i)] = true;
        }
        break;
      case Attr::Pitch: {
        const auto inst = static_cast<Instrument>(partial[4] - 1);
        for (int p = 0; p < 128; ++p) m[pitch_index(p)] = !used_.count({inst, p});
        break;
      }
      case Attr::Duration:
        for (int d = 1; d <= kMaxDuration; ++d) m[duration_index(d)] = true;
        break;
    }
    return m;
  }

  // Applies guardrail rewrites that follow from the counters, then advances the state.
  CompoundToken accept(CompoundToken t) {
    if (t.is_bar()) {
      ++bars_;
      ticks_left_ = *t.density;
      last_tick_ = 0;
      in_tick_ = false;
      notes_left_ = 0;
      global_tick_ = static_cast<long>(bars_ - 1) * kTicksPerBar;
    } else if (t.is_tick()) {
      if (guardrail_) t.density = ticks_left_;
      ticks_left_ = std::max(ticks_left_ - 1, 0);
      last_tick_ = *t.beat;
      in_tick_ = true;
      notes_left_ = *t.strength;
      used_.clear();
      global_tick_ = static_cast<long>(bars_ - 1) * kTicksPerBar + *t.beat - 1;
    } else if (t.is_note()) {
      notes_left_ = std::max(notes_left_ - 1, 0);
      used_.insert({*t.instrument, *t.pitch});
    } else {
      global_tick_ = static_cast<long>(bars_) * kTicksPerBar;
    }
    return t;
  }

  // Global tick of the latest accepted token.
  long global_tick() const { return global_tick_; }
  int last_tick() const { return last_tick_; }

 private:
  bool guardrail_;
  std::set<Instrument> allowed_instruments_;
  int bars_ = 0, ticks_left_ = 0, last_tick_ = 0, notes_left_ = 0;
  bool in_tick_ = false;
  long global_tick_ = 0;
  std::set<std::pair<Instrument, int>> used_;
};

// Substream seeds for the sampling and the two Bernoulli controls.
std::mt19937_64 substream(std::uint64_t seed, std::uint64_t stream) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream)};
  return std::mt19937_64(seq);
}

}  // namespace

GenerationResult generate(const model::NextTokenModel& model, const video::VideoRhythm& rhythm,
                          const GenerationConfig& config) {
  video::check_rhythm(rhythm);
  check_degree(config.C);
  if (config.instruments.empty()) throw InvalidArgument("at least one instrument is required");
  if (config.max_tokens < 1) throw InvalidArgument("max_tokens must be positive");

  GenerationResult result;
  result.tokens.prefix = make_prefix(config.genre, config.instruments);
  result.tokens.tempo_bpm = rhythm.tempo_bpm;
  std::vector<Instrument> instruments;
  for (const auto& t : result.tokens.prefix)
    if (t.kind == InitialToken::Kind::Instrument) instruments.push_back(static_cast<Instrument>(t.value));

  auto sample_rng = substream(config.seed, 0);
  auto density_rng = substream(config.seed, 1);
  auto strength_rng = substream(config.seed, 2);

  const int n_beats = rhythm.n_beats;
  auto session = model.start(result.tokens.prefix, n_beats);
  Grammar grammar(instruments, config.count_guardrail);
  std::size_t next_beat = 0;  // earliest visual beat not yet consumed or passed
  const auto& vbeats = rhythm.visual_beats;
  const model::AllowedFn allowed = [&](Attr a, const model::TokenIndices& p) { return grammar.allowed(a, p); };

  for (int step = 0; step < config.max_tokens; ++step) {
    TraceRecord rec;
    rec.step = step;
    rec.sampled = model::sample(*session, config.sampling, sample_rng, allowed);
    CompoundToken token = rec.sampled;

    if (token.is_bar()) {
      const int bar = grammar.bars();
      if (bar * kBeatsPerBar >= n_beats) {
        token = CompoundToken::eos();
        rec.forced_eos = true;
      } else {
        const auto r = replace_density(token, rhythm.bar_density_class[static_cast<std::size_t>(bar)], config.C,
                                       density_rng);
        if (r.replaced) rec.replaced = Replacement::Density;
        token = r.token;
      }
    } else if (token.is_tick()) {
      const int bar = grammar.bars() - 1;
      const long here = static_cast<long>(bar) * kTicksPerBar + *token.beat - 1;
      const long floor_tick = static_cast<long>(bar) * kTicksPerBar + grammar.last_tick() - 1;
      // Beats the sequence has already moved past can no longer be placed.
      while (next_beat < vbeats.size() &&
             (vbeats[next_beat].bar < bar || vbeats[next_beat].global_tick() <= floor_tick))
        ++next_beat;
      if (next_beat < vbeats.size() && here >= vbeats[next_beat].global_tick()) {
        const auto r = replace_strength(token, bar, vbeats[next_beat], config.C, strength_rng);
        if (r.replaced) {
          rec.replaced = Replacement::Strength;
          ++next_beat;
        }
        token = r.token;
      }
    }

    token = grammar.accept(token);
    rec.token = token;
    const long tick = grammar.global_tick();
    rec.beat = static_cast<int>(tick / kTicksPerBeat);
    rec.bin = model::timing_bin(rec.beat, n_beats);
    result.tokens.body.push_back(token);
    result.trace.records.push_back(rec);
    if (token.is_eos()) return result;
    try {
      session->push(token, {rec.beat, rec.bin});
    } catch (const InvalidArgument& e) {
      throw TruncationError(std::string("generation stopped early: ") + e.what(), std::move(result));
    }
  }
  throw TruncationError("no EOS within " + std::to_string(config.max_tokens) + " tokens", std::move(result));
}

namespace {

nlohmann::ordered_json token_json(const CompoundToken& t) {
  auto opt = [](const auto& v) -> nlohmann::json {
    if (!v) return nullptr;
    return *v;
  };
  nlohmann::ordered_json j;
  j["type"] = t.is_eos() ? "EOS" : (t.is_note() ? "NOTE" : "RHYTHM");
  j["beat"] = opt(t.beat);
  j["density"] = opt(t.density);
  j["strength"] = opt(t.strength);
  j["instrument"] = t.instrument ? nlohmann::json(std::string(to_string(*t.instrument))) : nlohmann::json(nullptr);
  j["pitch"] = opt(t.pitch);
  j["duration"] = opt(t.duration);
  return j;
}

}  // namespace

std::string trace_to_jsonl(const GenerationTrace& trace) {
  std::string out;
  for (const auto& r : trace.records) {
    nlohmann::ordered_json j;
    j["schema_version"] = "1.0";
    j["step"] = r.step;
    j["sampled"] = token_json(r.sampled);
    j["token"] = token_json(r.token);
    j["replaced"] = std::string(to_string(r.replaced));
    j["forced_eos"] = r.forced_eos;
    j["beat"] = r.beat;
    j["bin"] = r.bin;
    out += j.dump();
    out += '\n';
  }
  return out;
}

void save_trace(const std::filesystem::path& path, const GenerationTrace& trace) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw IoError("cannot write trace " + path.string());
  f << trace_to_jsonl(trace);
  if (!f) throw IoError("failed writing trace " + path.string());
}

}  // namespace cmt

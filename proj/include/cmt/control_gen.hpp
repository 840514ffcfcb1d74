#pragma once

#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "cmt/error.hpp"
#include "cmt/model/interface.hpp"
#include "cmt/model/sampling.hpp"
#include "cmt/tokens.hpp"
#include "cmt/video_rhythm.hpp"

namespace cmt {

inline constexpr double kDefaultControlDegree = 0.7;
inline constexpr int kDefaultMaxTokens = 10000;

struct GenerationConfig {
  Genre genre = Genre::Pop;
  std::vector<Instrument> instruments = {Instrument::Piano};
  double C = kDefaultControlDegree;
  model::SamplingConfig sampling;
  std::uint64_t seed = 0;
  int max_tokens = kDefaultMaxTokens;
  // Keeps tick counts and note counts consistent with the declared density and strength.
  bool count_guardrail = true;
};

enum class Replacement { None, Density, Strength };
std::string_view to_string(Replacement r);

struct TraceRecord {
  int step = 0;
  CompoundToken sampled;
  CompoundToken token;  // after controller edits
  Replacement replaced = Replacement::None;
  bool forced_eos = false;
  int beat = 0;
  int bin = 0;
};

struct GenerationTrace {
  std::vector<TraceRecord> records;
  std::size_t count(Replacement r) const;
};

struct GenerationResult {
  TokenSequence tokens;
  GenerationTrace trace;
};

// The model did not finish within max_tokens; carries what was generated.
class TruncationError : public Error {
 public:
  TruncationError(const std::string& what, GenerationResult partial) : Error(what), partial_(std::move(partial)) {}
  const GenerationResult& partial() const { return partial_; }

 private:
  GenerationResult partial_;
};

struct ReplaceOutcome {
  CompoundToken token;
  bool replaced = false;
};

// With probability C sets a bar token's density to `density_class` (1..16).
ReplaceOutcome replace_density(const CompoundToken& token, int density_class, double C, std::mt19937_64& rng);

// With probability C moves a tick token of bar `token_bar` onto the visual beat and takes its
// strength. The tick must sit at or after the visual beat, in the same bar.
ReplaceOutcome replace_strength(const CompoundToken& token, int token_bar, const video::RhythmBeat& beat, double C,
                                std::mt19937_64& rng);

// Rhythm-controlled autoregressive generation.
GenerationResult generate(const model::NextTokenModel& model, const video::VideoRhythm& rhythm, const GenerationConfig& config);

std::string trace_to_jsonl(const GenerationTrace& trace);
void save_trace(const std::filesystem::path& path, const GenerationTrace& trace);

}  // namespace cmt

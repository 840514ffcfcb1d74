#include <doctest.h>

#include <json.hpp>
#include <map>
#include <random>
#include <sstream>

#include "cmt/control_gen.hpp"
#include "cmt/error.hpp"
#include "cmt/model/oracle.hpp"
#include "cmt/model/transformer.hpp"
#include "cmt/toy_data.hpp"

using namespace cmt;

namespace {

model::Transformer tiny_model(std::uint64_t seed) {
  model::ModelConfig c;
  c.layers = 1;
  c.heads = 2;
  c.d_model = 16;
  c.d_ff = 16;
  c.dropout = 0;
  return model::Transformer(c, seed);
}

// Bar densities and (global tick -> strength) of the tick tokens in a sequence.
struct Layout {
  std::vector<int> bar_density;
  std::map<long, int> tick_strength;
};

Layout layout(const TokenSequence& t) {
  Layout l;
  for (const auto& tok : t.body) {
    if (tok.is_bar()) l.bar_density.push_back(*tok.density);
    if (tok.is_tick())
      l.tick_strength[static_cast<long>(l.bar_density.size() - 1) * kTicksPerBar + *tok.beat - 1] = *tok.strength;
  }
  return l;
}

video::VideoRhythm fixed_rhythm() {
  video::VideoRhythm r;
  r.tempo_bpm = 120;
  r.fps = 30;
  r.n_bars = 3;
  r.n_beats = 12;
  r.total_frames = 360;
  r.bar_density_class = {3, 6, 1};
  r.visual_beats = {{0, 5, 7}, {1, 2, 4}, {1, 13, 9}, {2, 16, 3}};
  return r;
}

}  // namespace

TEST_CASE("density replacement follows its Bernoulli rate") {
  std::mt19937_64 rng(5);
  const auto bar = CompoundToken::bar(4);
  CHECK(replace_density(bar, 9, 1.0, rng).token == CompoundToken::bar(9));
  CHECK_FALSE(replace_density(bar, 9, 0.0, rng).replaced);
  int hits = 0;
  const int n = 20000;
  for (int i = 0; i < n; ++i) hits += replace_density(bar, 2, 0.3, rng).replaced;
  CHECK(hits / double(n) == doctest::Approx(0.3).epsilon(0.05));
  CHECK_THROWS_AS(replace_density(CompoundToken::eos(), 2, 0.5, rng), InvalidArgument);
  CHECK_THROWS_AS(replace_density(bar, 0, 0.5, rng), InvalidArgument);
  CHECK_THROWS_AS(replace_density(bar, 2, 1.5, rng), InvalidArgument);
}

TEST_CASE("strength replacement moves the tick onto the visual beat") {
  std::mt19937_64 rng(6);
  const auto tick = CompoundToken::tick(9, 3, 2);
  const auto r = replace_strength(tick, 1, {1, 6, 11}, 1.0, rng);
  CHECK(r.replaced);
  CHECK(r.token == CompoundToken::tick(6, 3, 11));
  CHECK(replace_strength(tick, 1, {1, 6, 11}, 0.0, rng).token == tick);
  CHECK_THROWS_AS(replace_strength(tick, 1, {1, 10, 11}, 1.0, rng), InvalidArgument);
  CHECK_THROWS_AS(replace_strength(tick, 0, {1, 6, 11}, 1.0, rng), InvalidArgument);
  CHECK_THROWS_AS(replace_strength(CompoundToken::bar(1), 1, {1, 6, 11}, 1.0, rng), InvalidArgument);
}

TEST_CASE("full control with the oracle reproduces the video rhythm exactly") {
  const model::OracleModel oracle;
  GenerationConfig cfg;
  cfg.C = 1.0;
  cfg.instruments = {Instrument::Piano, Instrument::Guitar};
  const auto r = fixed_rhythm();
  const auto g = generate(oracle, r, cfg);
  CHECK(validate(g.tokens).empty());
  const auto l = layout(g.tokens);
  CHECK(l.bar_density == r.bar_density_class);
  for (const auto& vb : r.visual_beats) {
    REQUIRE(l.tick_strength.count(vb.global_tick()));
    CHECK(l.tick_strength.at(vb.global_tick()) == vb.strength);
  }
  CHECK(g.trace.count(Replacement::Density) == 3);
  CHECK(g.trace.count(Replacement::Strength) == 4);
  CHECK(g.tokens.body.back().is_eos());
  CHECK(g.tokens.tempo_bpm == 120);
}

TEST_CASE("property: full control matches random rhythms") {
  const model::OracleModel oracle;
  std::mt19937_64 rng(12);
  for (int i = 0; i < 40; ++i) {
    const auto r = toy::random_rhythm(rng, 1 + i % 8);
    GenerationConfig cfg;
    cfg.C = 1.0;
    cfg.seed = static_cast<std::uint64_t>(i);
    const auto g = generate(oracle, r, cfg);
    CHECK(validate(g.tokens).empty());
    const auto l = layout(g.tokens);
    CHECK(l.bar_density == r.bar_density_class);
    for (const auto& vb : r.visual_beats) {
      REQUIRE(l.tick_strength.count(vb.global_tick()));
      CHECK(l.tick_strength.at(vb.global_tick()) == vb.strength);
    }
  }
}

TEST_CASE("zero control leaves the model's choices alone") {
  const model::OracleModel oracle({5, 3, 1});
  GenerationConfig cfg;
  cfg.C = 0.0;
  const auto g = generate(oracle, fixed_rhythm(), cfg);
  CHECK(g.trace.count(Replacement::Density) == 0);
  CHECK(g.trace.count(Replacement::Strength) == 0);
  for (const auto& rec : g.trace.records) CHECK(rec.sampled == rec.token);
  CHECK(layout(g.tokens).bar_density == std::vector<int>{5, 5, 5});
}

TEST_CASE("untrained model: grammar, guardrail and hard stop") {
  const auto m = tiny_model(3);
  std::mt19937_64 rng(4);
  for (std::uint64_t seed = 0; seed < 6; ++seed) {
    const auto r = toy::random_rhythm(rng, 2);
    GenerationConfig cfg;
    cfg.seed = seed;
    cfg.instruments = {Instrument::Drums, Instrument::Bass};
    const auto g = generate(m, r, cfg);
    CHECK(validate(g.tokens).empty());
    int bars = 0;
    for (const auto& t : g.tokens.body) bars += t.is_bar();
    CHECK(bars <= r.n_bars);
    CHECK(g.tokens.body.back().is_eos());
    for (const auto& rec : g.trace.records) {
      if (rec.forced_eos) {
        CHECK(rec.sampled.is_bar());
        CHECK(rec.token.is_eos());
        CHECK(bars == r.n_bars);
      }
      if (rec.token.is_note()) {
        const auto inst = *rec.token.instrument;
        CHECK((inst == Instrument::Drums || inst == Instrument::Bass));
      }
    }
    CHECK_NOTHROW(decode(g.tokens));
  }
}

TEST_CASE("generation is reproducible per seed") {
  const auto m = tiny_model(8);
  std::mt19937_64 rng(9);
  const auto r = toy::random_rhythm(rng, 2);
  GenerationConfig cfg;
  cfg.seed = 77;
  const auto a = generate(m, r, cfg);
  const auto b = generate(m, r, cfg);
  CHECK(a.tokens == b.tokens);
  CHECK(trace_to_jsonl(a.trace) == trace_to_jsonl(b.trace));
  cfg.seed = 78;
  CHECK_FALSE(generate(m, r, cfg).tokens == a.tokens);
}

TEST_CASE("token budget exhaustion raises with the partial result") {
  const model::OracleModel oracle;
  GenerationConfig cfg;
  cfg.max_tokens = 5;
  try {
    generate(oracle, fixed_rhythm(), cfg);
    FAIL("expected TruncationError");
  } catch (const TruncationError& e) {
    CHECK(e.partial().tokens.body.size() == 5);
    CHECK(e.partial().trace.records.size() == 5);
  }
  cfg.max_tokens = 0;
  CHECK_THROWS_AS(generate(oracle, fixed_rhythm(), cfg), InvalidArgument);
  cfg.max_tokens = 100;
  cfg.instruments.clear();
  CHECK_THROWS_AS(generate(oracle, fixed_rhythm(), cfg), InvalidArgument);
}

TEST_CASE("trace JSONL lines carry step, tokens and timing") {
  const model::OracleModel oracle;
  GenerationConfig cfg;
  cfg.C = 1.0;
  const auto r = fixed_rhythm();
  const auto g = generate(oracle, r, cfg);
  std::istringstream in(trace_to_jsonl(g.trace));
  std::string line;
  int step = 0;
  while (std::getline(in, line)) {
    const auto j = nlohmann::json::parse(line);
    CHECK(j.at("schema_version") == "1.0");
    CHECK(j.at("step") == step);
    CHECK(j.at("bin") == model::timing_bin(j.at("beat").get<int>(), r.n_beats));
    CHECK(j.contains("sampled"));
    CHECK(j.contains("token"));
    ++step;
  }
  CHECK(step == static_cast<int>(g.trace.records.size()));
}

// Acceptance run: one PASS/FAIL line per criterion, non-zero exit if any fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <iostream>
#include <map>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "cmt/control_gen.hpp"
#include "cmt/corpus.hpp"
#include "cmt/metrics.hpp"
#include "cmt/midi_io.hpp"
#include "cmt/model/oracle.hpp"
#include "cmt/model/trainer.hpp"
#include "cmt/model/transformer.hpp"
#include "cmt/tokens.hpp"
#include "cmt/toy_data.hpp"
#include "cmt/video_rhythm.hpp"
#include "test_util.hpp"

using namespace cmt;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = true;
  std::string detail;

  void require(bool ok, const std::string& what) {
    if (!ok) {
      pass = false;
      detail += (detail.empty() ? "" : "; ") + ("failed: " + what);
    }
  }
  void note(const std::string& s) { detail += (detail.empty() ? "" : "; ") + s; }
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string fmt(double v, int prec = 6) {
  std::ostringstream s;
  s.precision(prec);
  s << v;
  return s.str();
}

// 1. Token and MIDI round trips.
Outcome roundtrip() {
  Outcome o;
  const auto t0 = Clock::now();
  std::mt19937_64 rng(20240501);
  int tok_ok = 0, midi_ok = 0;
  for (int i = 0; i < 500; ++i) {
    const auto s = toy::random_score(rng, 32, kNumInstruments);
    const auto g = static_cast<Genre>(i % kNumGenres);
    tok_ok += decode(encode(s, g)) == s;
    midi_ok += midi::parse(midi::write(s)) == s;
  }
  const double secs = seconds_since(t0);
  o.require(tok_ok == 500, "token round trip " + std::to_string(tok_ok) + "/500");
  o.require(midi_ok == 500, "MIDI round trip " + std::to_string(midi_ok) + "/500");
  o.require(secs < 30, "runtime " + fmt(secs) + " s");
  o.note("tokens " + std::to_string(tok_ok) + "/500, midi " + std::to_string(midi_ok) + "/500, " + fmt(secs, 3) + " s");
  return o;
}

// 2. Frame/beat conversions.
Outcome timing() {
  Outcome o;
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> fps_d(10, 120), tempo_d(40, 220), sec_d(0, 600);
  double worst = 0;
  int frame_exact = 0;
  for (int i = 0; i < 1000; ++i) {
    const double fps = fps_d(rng), tempo = tempo_d(rng);
    const long t = std::lround(sec_d(rng) * fps);
    // Beats on the tick grid survive frame rounding plus tick snapping.
    const double beat = std::round(video::frame_to_beat(static_cast<double>(t), fps, tempo) * 4) / 4;
    const double back = video::frame_to_beat(static_cast<double>(video::beat_to_frame(beat, fps, tempo)), fps, tempo, true);
    const double frame_beats = tempo / (60.0 * fps);
    const double bound = 0.5 * frame_beats + 0.5 / kTicksPerBeat;
    worst = std::max(worst, std::abs(back - beat) / bound);
    frame_exact += video::beat_to_frame(video::frame_to_beat(static_cast<double>(t), fps, tempo), fps, tempo) == t;
  }
  o.require(worst <= 1.0 + 1e-12, "beat round trip exceeds the rounding bound (ratio " + fmt(worst) + ")");
  o.require(frame_exact == 1000, "frame round trip " + std::to_string(frame_exact) + "/1000");
  const double hand = video::frame_to_beat(30, 30, 120);
  o.require(hand == 2.0, "frame_to_beat(30, 30, 120) = " + fmt(hand));
  o.note("worst error/bound " + fmt(worst, 3) + ", hand value " + fmt(hand));
  return o;
}

// 3. Position encodings and embedding width.
Outcome encodings() {
  Outcome o;
  std::mt19937_64 rng(3);
  long groups = 0;
  for (int i = 0; i < 50; ++i) {
    const auto t = encode(toy::random_score(rng, 8), Genre::Pop);
    const auto in = model::make_sequence_input(t);
    // Independent beat bookkeeping: global tick of every token, divided by 4.
    std::vector<int> beat_of;
    int bar = -1, gt = 0;
    for (const auto& tok : t.body) {
      if (tok.is_bar()) gt = 16 * ++bar;
      else if (tok.is_tick()) gt = 16 * bar + *tok.beat - 1;
      else if (tok.is_eos()) gt = 16 * (bar + 1);
      beat_of.push_back(gt / 4);
    }
    const std::size_t p = t.prefix.size();
    std::map<int, model::RowVec> first;
    for (std::size_t k = 0; k < t.body.size(); ++k) {
      const int b = in.positions[p + k].beat;
      if (b != beat_of[k]) o.require(false, "beat of token " + std::to_string(k));
      const auto pe = model::beat_position_encoding(b, 128);
      auto [it, fresh] = first.emplace(beat_of[k], pe);
      if (!fresh && pe != it->second) o.require(false, "encodings differ within a beat");
      groups += fresh;
    }
  }
  o.require(model::timing_bin(0, 37) == 0, "bin(0) != 0");
  o.require(model::timing_bin(37, 37) == 100, "bin(N) != 100");
  const int listed = 32 + 64 + 64 + 64 + 512 + 128 + 32;
  const model::Transformer m(model::ModelConfig::toy(), 1);
  const long width = m.embed_concat(CompoundToken::note(Instrument::Bass, 40, 3)).size();
  o.require(width == 896 && listed == 896, "embedding width " + std::to_string(width));
  o.note(std::to_string(groups) + " beat groups checked, bins 0/100, width " + std::to_string(width));
  return o;
}

// 4. Oracle model under full and zero control.
Outcome oracle_control() {
  Outcome o;
  const model::OracleModel oracle;
  std::mt19937_64 rng(4);
  int exact = 0, clean = 0;
  for (int i = 0; i < 20; ++i) {
    const auto r = toy::random_rhythm(rng, 2 + i % 12);
    GenerationConfig cfg;
    cfg.seed = static_cast<std::uint64_t>(i);
    cfg.instruments = {Instrument::Piano, Instrument::Drums, Instrument::Bass};
    cfg.C = 1.0;
    const auto e = metrics::control_error(generate(oracle, r, cfg).tokens, r);
    exact += e.density_err == 0.0 && e.strength_err == 0.0 && e.time_err == 0.0;
    cfg.C = 0.0;
    const auto g0 = generate(oracle, r, cfg);
    clean += g0.trace.count(Replacement::Density) == 0 && g0.trace.count(Replacement::Strength) == 0;
  }
  o.require(exact == 20, "C=1 exact control " + std::to_string(exact) + "/20");
  o.require(clean == 20, "C=0 replacement-free " + std::to_string(clean) + "/20");
  o.note("C=1 zero error " + std::to_string(exact) + "/20, C=0 no replacements " + std::to_string(clean) + "/20");
  return o;
}

std::vector<TokenSequence> toy_sequences() {
  std::vector<TokenSequence> out;
  for (const auto& p : toy::toy_corpus(7, 20, 4)) out.push_back(encode(p.score, p.genre));
  return out;
}

model::TrainConfig toy_train_config() {
  model::TrainConfig tc;
  tc.epochs = 50;
  tc.seed = 11;
  return tc;
}

// Shared between criteria 5 and 6.
struct ToyRuns {
  model::LossHistory with_attrs, without_attrs;
  double secs_with = 0, secs_without = 0;
};

const ToyRuns& toy_runs() {
  static const ToyRuns runs = [] {
    ToyRuns r;
    const auto corpus = toy_sequences();
    auto t0 = Clock::now();
    model::Transformer a(model::ModelConfig::toy(), 5);
    r.with_attrs = model::train(a, corpus, toy_train_config());
    r.secs_with = seconds_since(t0);
    auto abl_cfg = model::ModelConfig::toy();
    abl_cfg.use_rhythm_attrs = false;
    t0 = Clock::now();
    model::Transformer b(abl_cfg, 5);
    r.without_attrs = model::train(b, corpus, toy_train_config());
    r.secs_without = seconds_since(t0);
    return r;
  }();
  return runs;
}

// 5. Toy training and gradient check.
Outcome toy_training() {
  Outcome o;
  const auto& runs = toy_runs();
  const auto& rows = runs.with_attrs.rows;
  const double first = rows.front().total, last = rows.back().total;
  const double drop = 1.0 - last / first;
  o.require(rows.size() == 51 && rows.back().epoch == 50, "expected epochs 0..50");
  o.require(drop >= 0.5, "loss drop " + fmt(100 * drop, 3) + "%");
  o.require(runs.secs_with < 600, "training took " + fmt(runs.secs_with) + " s");

  testutil::TempDir dir;
  runs.with_attrs.save_csv(dir / "loss.csv");
  const auto csv = testutil::slurp(dir / "loss.csv");
  o.require(std::count(csv.begin(), csv.end(), '\n') == 52 &&
                csv.rfind("epoch,type,beat,density,strength,instrument,pitch,duration,total\n", 0) == 0,
            "per-head CSV layout");

  model::Transformer g(model::ModelConfig::toy(), 9);
  const auto input = model::make_sequence_input(toy_sequences()[3]);
  const auto checks = model::gradient_check(g, input, 32, 13);
  double worst = 0;
  for (const auto& c : checks) worst = std::max(worst, c.rel_error);
  o.require(checks.size() == 32, "gradient check size");
  o.require(worst <= 1e-3, "gradient rel error " + fmt(worst));
  o.note("loss " + fmt(first, 4) + " -> " + fmt(last, 4) + " (" + fmt(100 * drop, 3) + "% drop) in " +
         fmt(runs.secs_with, 3) + " s; grad check max rel err " + fmt(worst, 3));
  return o;
}

// 6. Ablation: beat-head loss at epoch 50.
Outcome ablation() {
  Outcome o;
  const auto& runs = toy_runs();
  const auto beat = static_cast<std::size_t>(model::Attr::Beat);
  const auto with = runs.with_attrs.rows.back().head[beat];
  const auto without = runs.without_attrs.rows.back().head[beat];
  o.require(with && without, "beat head missing");
  if (with && without) {
    o.require(*with < *without, "beat loss with attrs " + fmt(*with) + " not below ablation " + fmt(*without));
    o.note("beat-head loss at epoch 50: with " + fmt(*with, 4) + ", without " + fmt(*without, 4));
  }
  o.require(!runs.without_attrs.rows.back().head[static_cast<std::size_t>(model::Attr::Density)],
            "ablation still trains the density head");
  return o;
}

// 7. Block-matching flow on a translated texture.
Outcome flow() {
  Outcome o;
  const auto a = toy::texture(128, 128, 77);
  const auto f = video::estimate_flow(a, toy::translate(a, 2, 0));
  double sum = 0;
  long n = 0;
  for (int y = 16; y < 112; ++y)
    for (int x = 16; x < 112; ++x) {
      sum += std::hypot(f.at(x, y).dx, f.at(x, y).dy);
      ++n;
    }
  const double mean = sum / static_cast<double>(n);
  const double zero = video::flow_magnitude(video::estimate_flow(a, a));
  o.require(std::abs(mean - 2.0) <= 0.5, "interior magnitude " + fmt(mean));
  o.require(zero == 0.0, "zero-motion magnitude " + fmt(zero));
  o.note("interior mean " + fmt(mean) + ", zero-motion " + fmt(zero));
  return o;
}

// 8. Visual beats from an impulse train.
Outcome visual_beats() {
  Outcome o;
  int hit = 0, total = 0;
  bool snapped = true;
  const std::vector<std::pair<double, double>> settings = {{24, 90}, {30, 112.5}, {20, 75}};
  for (const auto& [fps, tempo] : settings) {
    const double frames_per_tick = fps * 60.0 / tempo / kTicksPerBeat;  // integral for these settings
    std::vector<double> sal(600, 0.0);
    std::map<long, long> expected;  // frame -> global tick
    for (long k = 2; k * 3 * frames_per_tick < 590; ++k) {
      const long frame = std::lround(k * 3 * frames_per_tick);
      sal[static_cast<std::size_t>(frame)] = 1.0;
      expected[frame] = 3 * k;
    }
    const auto beats = video::detect_visual_beats(sal, fps, tempo);
    total += static_cast<int>(expected.size());
    for (const auto& b : beats) {
      const auto it = expected.find(b.frame);
      if (it == expected.end()) continue;
      ++hit;
      snapped &= b.global_tick == it->second;
    }
    o.require(beats.size() == expected.size(), "spurious or missing beats at fps " + fmt(fps));
  }
  const bool empty = video::detect_visual_beats(std::vector<double>(600, 0.0), 30, 120).empty();
  o.require(hit == total, "detected " + std::to_string(hit) + "/" + std::to_string(total));
  o.require(snapped, "tick snapping");
  o.require(empty, "zero saliency produced beats");
  o.note("detected " + std::to_string(hit) + "/" + std::to_string(total) + ", snapping exact, zero input empty");
  return o;
}

QuantizedScore make_score(int bars, const std::vector<NoteEvent>& notes) {
  QuantizedScore s;
  s.n_bars = bars;
  s.notes = notes;
  return normalize(s);
}

// 9. Metric hand cases.
Outcome metric_oracles() {
  Outcome o;
  auto at = [](int bar, int tick, int pitch) { return NoteEvent{pitch, bar * 16 + tick - 1, 1, Instrument::Piano}; };
  const double e0 = metrics::pitch_entropy(make_score(1, {at(0, 1, 62), at(0, 5, 74), at(0, 9, 50)}));
  std::vector<NoteEvent> twelve;
  for (int k = 0; k < 12; ++k) twelve.push_back(at(0, k + 1, 60 + k));
  const double e12 = metrics::pitch_entropy(make_score(1, twelve));
  o.require(e0 == 0.0, "single class entropy " + fmt(e0));
  o.require(std::abs(e12 - 3.5850) <= 1e-4 && std::abs(e12 - std::log2(12.0)) <= 1e-6,
            "uniform entropy " + fmt(e12, 10));

  std::vector<NoteEvent> same, comp;
  for (int b = 0; b < 4; ++b) same.push_back(at(b, 1, 60)), same.push_back(at(b, 7, 64));
  for (int t = 1; t <= 16; ++t) comp.push_back(at(t <= 8 ? 0 : 1, t, 60));
  const double g1 = metrics::grooving_similarity(make_score(4, same));
  const double g0 = metrics::grooving_similarity(make_score(2, comp));
  o.require(g1 == 1.0, "identical bars grooving " + fmt(g1));
  o.require(g0 == 0.0, "complementary bars grooving " + fmt(g0));

  std::vector<NoteEvent> loop;
  for (int b = 0; b < 16; ++b) loop.push_back(at(b, 1 + 4 * (b % 4), 60 + 2 * (b % 4)));
  int lag = 0;
  const double st = metrics::structureness(make_score(16, loop), &lag);
  o.require(std::abs(st - 1.0) <= 1e-12 && lag == 4, "structureness " + fmt(st) + " at lag " + std::to_string(lag));

  const std::vector<double> d_m = {1, 2}, d_v = {1, 4}, s_m = {0, 3, 1, 0}, s_v = {0, 0, 0, 0};
  const double ms = metrics::matching_score(d_m, d_v, s_m, s_v, 1e-15);
  const double ms_default = metrics::matching_score(d_m, d_v, s_m, s_v);
  o.require(std::abs(ms - 0.5) <= 1e-9, "MS " + fmt(ms, 12));
  o.require(std::abs(ms_default - 1.0 / (2.0 + metrics::kMatchEpsilon)) <= 1e-15, "MS with default eps");
  o.note("entropies 0 / " + fmt(e12, 8) + ", grooving 1/0, structureness " + fmt(st) + " at lag " +
         std::to_string(lag) + ", MS " + fmt(ms, 12) + " (default eps " + fmt(ms_default, 12) + ")");
  return o;
}

// Brute-force matching score from raw notes and the rhythm fields.
double brute_ms(const QuantizedScore& s, const video::VideoRhythm& r) {
  std::vector<std::set<int>> occ(static_cast<std::size_t>(s.n_bars));
  std::map<int, int> count;
  for (const auto& n : s.notes) {
    occ[static_cast<std::size_t>(n.onset_tick / 16)].insert(n.onset_tick % 16);
    ++count[n.onset_tick];
  }
  const std::size_t nd = std::min<std::size_t>(occ.size(), r.bar_density_class.size());
  double md = 0;
  for (std::size_t i = 0; i < nd; ++i) md += std::pow(double(occ[i].size()) - r.bar_density_class[i], 2);
  md /= double(nd);
  const long ns = std::min<long>(16L * s.n_bars, 16L * r.n_bars);
  std::map<long, int> sv;
  for (const auto& b : r.visual_beats) sv[b.global_tick()] = b.strength;
  double msq = 0;
  for (const auto& [tick, strength] : sv) {
    if (tick >= ns) continue;
    const double got = count.count(int(tick)) ? std::min(count[int(tick)], 20) : 0;
    msq += (got - strength) * (got - strength);
  }
  msq /= double(ns);
  return 1.0 / (md + msq + 1e-8);
}

// 10. Retrieval with a planted match.
Outcome matching() {
  Outcome o;
  std::mt19937_64 rng(10);
  // Planted piece: every bar occupied, visual beats on some of its onsets.
  QuantizedScore planted;
  do planted = toy::random_score(rng, 8, 3);
  while (std::any_of(density_profile(planted).begin(), density_profile(planted).end(), [](int d) { return d == 0; }) ||
         planted.n_bars < 4);
  video::VideoRhythm r;
  r.n_bars = planted.n_bars;
  r.n_beats = 4 * planted.n_bars;
  r.total_frames = video::beat_to_frame(r.n_beats, r.fps, r.tempo_bpm);
  for (int d : density_profile(planted)) r.bar_density_class.push_back(d);
  std::set<int> onsets;
  for (const auto& n : planted.notes) onsets.insert(n.onset_tick);
  int k = 0;
  for (int t : onsets)
    if (k++ % 2 == 0) r.visual_beats.push_back({t / 16, t % 16 + 1, tick_strength(planted, t / 16, t % 16 + 1)});

  std::vector<corpus::CorpusEntry> entries;
  std::vector<QuantizedScore> scores;
  for (int i = 0; i < 20; ++i) {
    char id[8];
    std::snprintf(id, sizeof id, "e%02d", i);
    scores.push_back(i == 13 ? planted : toy::random_score(rng, 12, 4));
    entries.push_back(corpus::CorpusEntry::make(id, scores.back(), Genre::Pop));
  }
  const auto ranked = corpus::match_top_k(r, entries, 20);
  std::vector<std::pair<double, std::string>> brute;
  for (int i = 0; i < 20; ++i) brute.push_back({brute_ms(scores[i], r), entries[i].id});
  std::sort(brute.begin(), brute.end(), [](const auto& a, const auto& b) {
    return a.first != b.first ? a.first > b.first : a.second < b.second;
  });
  o.require(!ranked.empty() && ranked[0].id == "e13", "planted entry not first");
  o.require(!ranked.empty() && std::abs(ranked[0].score - 1e8) <= 1e-4, "planted MS " + fmt(ranked[0].score, 12));
  bool same = ranked.size() == 20;
  for (std::size_t i = 0; same && i < 20; ++i)
    same = ranked[i].id == brute[i].second && std::abs(ranked[i].score - brute[i].first) <= 1e-9 * brute[i].first;
  o.require(same, "ranking differs from brute force");
  o.note("planted e13 first with MS " + fmt(ranked[0].score, 10) + ", 20-entry ranking equals brute force");
  return o;
}

int shell(const std::string& cmd) {
  const int rc = std::system((cmd + " > /dev/null 2>&1").c_str());
  return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

std::string q(const fs::path& p) { return "'" + p.string() + "'"; }

// 11. Byte-identical CLI outputs across two runs.
Outcome determinism() {
  Outcome o;
  const std::string bin = CMT_BINARY;
  testutil::TempDir dir;
  const fs::path in = dir / "inputs";
  fs::create_directories(in / "corpus");
  fs::create_directories(in / "frames");

  std::string tsv = "id\tgenre\n";
  int i = 0;
  for (const auto& p : toy::toy_corpus(21, 6, 2)) {
    const std::string id = "piece" + std::to_string(i++);
    midi::write_file(in / "corpus" / (id + ".mid"), p.score);
    tsv += id + "\t" + std::string(to_string(p.genre)) + "\n";
  }
  testutil::spit(in / "genres.tsv", tsv);
  std::mt19937_64 rng(11);
  midi::write_file(in / "song.mid", toy::random_score(rng, 6));
  save_cwt(in / "song.cwt", encode(toy::random_score(rng, 6), Genre::Dance));
  const auto base = toy::texture(64, 48, 5);
  for (int f = 0; f < 48; ++f) {
    char name[32];
    std::snprintf(name, sizeof name, "frame_%06d.pgm", f);
    video::write_pgm(in / "frames" / name, toy::translate(base, (f * f / 7) % 6, f % 3));
  }
  testutil::spit(in / "frames" / "manifest.json", "{\"fps\": 24, \"tempo\": 120}");
  testutil::spit(in / "rhythm.json", video::rhythm_to_json(toy::random_rhythm(rng, 3)));
  if (shell(bin + " train " + q(in / "corpus") + " " + q(in / "genres.tsv") + " " + q(in / "m.ckpt") +
            " --epochs 1 --seed 2") != 0 ||
      shell(bin + " ingest " + q(in / "corpus") + " " + q(in / "genres.tsv") + " " + q(in / "c.bin")) != 0) {
    o.require(false, "could not prepare inputs");
    return o;
  }

  struct Cmd {
    std::string name, args;
    std::vector<std::string> outputs;
  };
  const std::string I = in.string() + "/";
  const std::vector<Cmd> cmds = {
      {"tokenize", "tokenize '" + I + "song.mid' OUT/t.cwt --genre rock", {"t.cwt"}},
      {"detokenize", "detokenize '" + I + "song.cwt' OUT/d.mid", {"d.mid"}},
      {"video-features", "video-features '" + I + "frames' OUT/r.json --write-flow-csv OUT/f.csv", {"r.json", "f.csv"}},
      {"ingest", "ingest '" + I + "corpus' '" + I + "genres.tsv' OUT/c.bin --dist OUT/dist.bin", {"c.bin", "dist.bin"}},
      {"train", "train '" + I + "corpus' '" + I + "genres.tsv' OUT/m.ckpt --epochs 2 --seed 4", {"m.ckpt", "m.ckpt.loss.csv"}},
      {"generate",
       "generate '" + I + "m.ckpt' '" + I + "rhythm.json' OUT/g.mid OUT/g.cwt OUT/g.jsonl --seed 9 --instruments piano,drums",
       {"g.mid", "g.cwt", "g.jsonl"}},
      {"match", "match '" + I + "rhythm.json' '" + I + "c.bin' OUT/rank.tsv --k 4", {"rank.tsv"}},
      {"eval", "eval '" + I + "song.cwt' '" + I + "rhythm.json' OUT/rep.json --csv OUT/rep.csv", {"rep.json", "rep.csv"}},
      {"oracle-demo", "oracle-demo '" + I + "rhythm.json' OUT/o.mid --cwt OUT/o.cwt --trace OUT/o.jsonl --C 0.5 --seed 3",
       {"o.mid", "o.cwt", "o.jsonl"}},
  };
  int identical = 0;
  for (const auto& c : cmds) {
    std::vector<std::string> runs;
    bool ok = true;
    for (int run = 0; run < 2; ++run) {
      const fs::path out = dir / (c.name + "_" + std::to_string(run));
      fs::create_directories(out);
      std::string args = c.args;
      for (std::size_t pos; (pos = args.find("OUT/")) != std::string::npos;) args.replace(pos, 4, out.string() + "/");
      const int rc = shell(bin + " " + args);
      ok &= rc == 0;
      std::string blob;
      for (const auto& f : c.outputs) {
        ok &= fs::exists(out / f);
        blob += testutil::slurp(out / f) + '\x1f';
      }
      runs.push_back(blob);
    }
    if (ok && runs[0] == runs[1]) ++identical;
    else o.require(false, c.name + (ok ? " outputs differ" : " did not run cleanly"));
  }
  o.note(std::to_string(identical) + "/" + std::to_string(cmds.size()) + " subcommands byte-identical");
  return o;
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
      {"round trip", roundtrip},           {"timing inverses", timing},
      {"encoding properties", encodings},  {"oracle control", oracle_control},
      {"toy training", toy_training},      {"ablation", ablation},
      {"flow", flow},                      {"visual beats", visual_beats},
      {"metric oracles", metric_oracles},  {"matching", matching},
      {"determinism", determinism},
  };
  int failed = 0;
  for (std::size_t k = 0; k < criteria.size(); ++k) {
    Outcome o;
    try {
      o = criteria[k].second();
    } catch (const std::exception& e) {
      o.pass = false;
      o.detail = std::string("exception: ") + e.what();
    }
    failed += !o.pass;
    std::cout << (o.pass ? "PASS" : "FAIL") << "  criterion " << k + 1 << " (" << criteria[k].first << "): " << o.detail
              << std::endl;
  }
  std::cout << (criteria.size() - failed) << "/" << criteria.size() << " criteria passed" << std::endl;
  return failed == 0 ? 0 : 1;
}

#include "cmt/cli.hpp"

#include <CLI11.hpp>
#include <fstream>
#include <iostream>
#include <sstream>

#include "cmt/control_gen.hpp"
#include "cmt/corpus.hpp"
#include "cmt/error.hpp"
#include "cmt/metrics.hpp"
#include "cmt/midi_io.hpp"
#include "cmt/model/oracle.hpp"
#include "cmt/model/trainer.hpp"
#include "cmt/model/transformer.hpp"
#include "cmt/parallel.hpp"
#include "cmt/tokens.hpp"
#include "cmt/video_rhythm.hpp"

namespace cmt::cli {

namespace fs = std::filesystem;

namespace {

constexpr const char* kSchemas =
    "File schemas: .cwt text '# cwt v1'; rhythm.json schema_version 1.0; trace.jsonl records "
    "schema_version 1.0; report.json schema_version 1.0; checkpoint container version 1; "
    "dist.bin CMTDIST1; corpus cache CMTCORP1.";

void need_file(const std::string& p) {
  if (!fs::is_regular_file(p)) throw IoError("cannot read input file " + p);
}

void need_dir(const std::string& p) {
  if (!fs::is_directory(p)) throw IoError("cannot read input directory " + p);
}

void need_output(const std::string& p) {
  const fs::path parent = fs::path(p).parent_path();
  if (!parent.empty() && !fs::is_directory(parent)) throw IoError("output directory does not exist: " + parent.string());
  if (fs::is_directory(p)) throw IoError("output path is a directory: " + p);
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw IoError("cannot write " + path);
  f << text;
  if (!f) throw IoError("failed writing " + path);
}

Genre genre_arg(const std::string& name) {
  const auto g = parse_genre(name);
  if (!g) throw CLI::ValidationError("--genre", "unknown genre '" + name + "'");
  return *g;
}

std::vector<Instrument> instruments_arg(const std::string& list) {
  std::vector<Instrument> out;
  std::stringstream ss(list);
  for (std::string item; std::getline(ss, item, ',');) {
    const auto i = parse_instrument(item);
    if (!i) throw CLI::ValidationError("--instruments", "unknown instrument '" + item + "'");
    out.push_back(*i);
  }
  if (out.empty()) throw CLI::ValidationError("--instruments", "list is empty");
  return out;
}

// Parse-time checks, so a bad flag is a usage error before any file is touched.
const CLI::Validator kGenreCheck(
    [](std::string& v) { return parse_genre(v) ? std::string() : "unknown genre '" + v + "'"; }, "GENRE");
const CLI::Validator kInstrumentsCheck(
    [](std::string& v) {
      try {
        instruments_arg(v);
        return std::string();
      } catch (const CLI::ValidationError& e) {
        return std::string(e.what());
      }
    },
    "LIST");

std::string genre_names() {
  std::string s;
  for (int g = 0; g < kNumGenres; ++g) s += (g ? ", " : "") + std::string(to_string(static_cast<Genre>(g)));
  return s;
}

struct GenerateFlags {
  std::string genre = "pop";
  std::string instruments = "piano";
  double C = kDefaultControlDegree;
  std::uint64_t seed = 0;
  int max_tokens = kDefaultMaxTokens;
  double top_p = 0.9;
  bool no_guardrail = false;

  void add(CLI::App* app) {
    app->add_option("--genre", genre, "Genre token (" + genre_names() + ")")->capture_default_str()->check(kGenreCheck);
    app->add_option("--instruments", instruments, "Comma list of drums, piano, guitar, bass, strings")
        ->capture_default_str()
        ->check(kInstrumentsCheck);
    app->add_option("--C", C, "Control degree in [0, 1]")->capture_default_str()->check(CLI::Range(0.0, 1.0));
    app->add_option("--seed", seed, "Random seed")->capture_default_str();
    app->add_option("--max-tokens", max_tokens, "Token budget before giving up")->capture_default_str()
        ->check(CLI::PositiveNumber);
    app->add_option("--top-p", top_p, "Nucleus probability mass")->capture_default_str()->check(CLI::Range(1e-9, 1.0));
    app->add_flag("--no-guardrail", no_guardrail, "Let the model choose tick and note counts freely");
  }

  GenerationConfig config() const {
    GenerationConfig c;
    c.genre = genre_arg(genre);
    c.instruments = instruments_arg(instruments);
    c.C = C;
    c.seed = seed;
    c.max_tokens = max_tokens;
    c.sampling.top_p = top_p;
    c.count_guardrail = !no_guardrail;
    return c;
  }
};

void write_generation(const GenerationResult& r, const std::string& mid, const std::string& cwt,
                      const std::string& trace) {
  if (!cwt.empty()) save_cwt(cwt, r.tokens);
  if (!trace.empty()) save_trace(trace, r.trace);
  midi::write_file(mid, decode(r.tokens, DecodeMode::Tolerant));
}

GenerationResult generate_or_partial(const model::NextTokenModel& m, const video::VideoRhythm& rhythm,
                                     const GenerationConfig& cfg, const std::string& cwt, const std::string& trace) {
  try {
    return generate(m, rhythm, cfg);
  } catch (const TruncationError& e) {
    if (!cwt.empty()) save_cwt(cwt, e.partial().tokens);
    if (!trace.empty()) save_trace(trace, e.partial().trace);
    throw;
  }
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Rhythm-controlled multi-track music generation for video"};
  app.name("cmt");
  app.require_subcommand(1, 1);
  app.footer(kSchemas);
  app.set_version_flag("--version", "cmt 1.0");

  // tokenize
  std::string tok_in, tok_out, tok_genre = "pop";
  auto* tokenize = app.add_subcommand("tokenize", "Convert a MIDI file to compound-word tokens (.cwt)");
  tokenize->add_option("input", tok_in, "Input .mid")->required();
  tokenize->add_option("output", tok_out, "Output .cwt")->required();
  tokenize->add_option("--genre", tok_genre, "Genre token (" + genre_names() + ")")
      ->capture_default_str()
      ->check(kGenreCheck);
  tokenize->footer(kSchemas);

  // detokenize
  std::string detok_in, detok_out;
  bool detok_tolerant = false;
  auto* detokenize = app.add_subcommand("detokenize", "Convert a .cwt token file back to MIDI");
  detokenize->add_option("input", detok_in, "Input .cwt")->required();
  detokenize->add_option("output", detok_out, "Output .mid")->required();
  detokenize->add_flag("--tolerant", detok_tolerant, "Ignore density/strength fields that disagree with the notes");
  detokenize->footer(kSchemas);

  // video-features
  std::string vf_dir, vf_out, vf_flow, vf_dist, vf_write_flow;
  std::optional<double> vf_tempo;
  auto* features = app.add_subcommand(
      "video-features", "Extract the rhythm (densities, visual beats) from a directory of PGM frames");
  features->add_option("frames_dir", vf_dir, "Directory with manifest.json and frame_000000.pgm ...")->required();
  features->add_option("output", vf_out, "Output rhythm.json")->required();
  features->add_option("--tempo", vf_tempo, "Tempo in BPM (default: manifest tempo, else 120)")
      ->check(CLI::PositiveNumber);
  features->add_option("--flow-csv", vf_flow, "Use precomputed per-frame magnitudes[,saliency] instead of frames");
  features->add_option("--dist", vf_dist, "Density distribution (dist.bin) from a corpus; default uniform");
  features->add_option("--write-flow-csv", vf_write_flow, "Also save the computed motion features");
  features->footer(kSchemas);

  // ingest
  std::string ing_dir, ing_tsv, ing_cache, ing_dist;
  auto* ingest = app.add_subcommand("ingest", "Build the corpus cache (and optionally dist.bin) from MIDI files");
  ingest->add_option("corpus_dir", ing_dir, "Directory of .mid files")->required();
  ingest->add_option("genres", ing_tsv, "TSV with header id<TAB>genre")->required();
  ingest->add_option("cache", ing_cache, "Output corpus cache")->required();
  ingest->add_option("--dist", ing_dist, "Also write the density distribution here");
  ingest->footer(kSchemas);

  // train
  std::string tr_dir, tr_tsv, tr_ckpt, tr_loss;
  bool tr_toy = false, tr_full = false, tr_ablate = false;
  model::TrainConfig tr_cfg;
  auto* train = app.add_subcommand("train", "Train the sequence model on a MIDI corpus");
  train->add_option("corpus_dir", tr_dir, "Directory of .mid files")->required();
  train->add_option("genres", tr_tsv, "TSV with header id<TAB>genre")->required();
  train->add_option("checkpoint", tr_ckpt, "Output checkpoint")->required();
  auto* toy_flag = train->add_flag("--toy", tr_toy, "Toy model: 2 layers, d_model 128 (default)");
  train->add_flag("--paper-scale", tr_full, "Full model: 12 layers, d_model 512")->excludes(toy_flag);
  train->add_option("--epochs", tr_cfg.epochs, "Training epochs")->capture_default_str()->check(CLI::NonNegativeNumber);
  train->add_option("--seed", tr_cfg.seed, "Random seed")->capture_default_str();
  train->add_option("--lr", tr_cfg.learning_rate, "Adam learning rate")->capture_default_str()
      ->check(CLI::PositiveNumber);
  train->add_option("--batch", tr_cfg.batch_size, "Sequences per update")->capture_default_str()
      ->check(CLI::PositiveNumber);
  train->add_option("--loss-csv", tr_loss, "Per-head loss history (default: <checkpoint>.loss.csv)");
  train->add_flag("--no-rhythm-attrs", tr_ablate, "Ablation: drop density and strength from inputs and loss");
  train->footer(kSchemas);

  // generate
  std::string gen_ckpt, gen_rhythm, gen_mid, gen_cwt, gen_trace;
  GenerateFlags gen_flags;
  auto* generate_cmd = app.add_subcommand("generate", "Generate music for a video rhythm with a trained model");
  generate_cmd->add_option("checkpoint", gen_ckpt, "Checkpoint from train")->required();
  generate_cmd->add_option("rhythm", gen_rhythm, "rhythm.json from video-features")->required();
  generate_cmd->add_option("out_mid", gen_mid, "Output .mid")->required();
  generate_cmd->add_option("out_cwt", gen_cwt, "Output .cwt")->required();
  generate_cmd->add_option("trace", gen_trace, "Output trace.jsonl")->required();
  gen_flags.add(generate_cmd);
  generate_cmd->footer(kSchemas);

  // match
  std::string m_rhythm, m_cache, m_out;
  std::size_t m_k = 5;
  auto* match = app.add_subcommand("match", "Rank corpus pieces by matching score against a video rhythm");
  match->add_option("rhythm", m_rhythm, "rhythm.json")->required();
  match->add_option("cache", m_cache, "Corpus cache from ingest")->required();
  match->add_option("output", m_out, "Output ranking.tsv (rank, id, score)")->required();
  match->add_option("--k", m_k, "Entries to keep")->capture_default_str()->check(CLI::PositiveNumber);
  match->footer(kSchemas);

  // eval
  std::vector<std::string> ev_args;
  std::string ev_csv, ev_id;
  auto* eval = app.add_subcommand("eval", "Objective metrics for a token file: in.cwt [rhythm.json] report.json");
  eval->add_option("files", ev_args, "in.cwt [rhythm.json] report.json")->required()->expected(2, 3);
  eval->add_option("--csv", ev_csv, "Also write a one-row CSV");
  eval->add_option("--id", ev_id, "Row id for --csv (default: input file stem)");
  eval->footer(kSchemas);

  // oracle-demo
  std::string od_rhythm, od_mid, od_cwt, od_trace;
  GenerateFlags od_flags;
  auto* oracle = app.add_subcommand("oracle-demo", "Run the controller against the rule-based oracle model");
  oracle->add_option("rhythm", od_rhythm, "rhythm.json")->required();
  oracle->add_option("out_mid", od_mid, "Output .mid")->required();
  oracle->add_option("--cwt", od_cwt, "Also write the tokens");
  oracle->add_option("--trace", od_trace, "Also write the trace");
  od_flags.add(oracle);
  oracle->footer(kSchemas);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kOk;
  } catch (const CLI::CallForVersion&) {
    out << app.version() << '\n';
    return kOk;
  } catch (const CLI::ParseError& e) {
    err << "cmt: usage error: " << e.what() << '\n';
    return kUsage;
  }

  try {
    if (tokenize->parsed()) {
      need_file(tok_in);
      need_output(tok_out);
      const Genre g = genre_arg(tok_genre);
      save_cwt(tok_out, encode(midi::read_file(tok_in), g));
    } else if (detokenize->parsed()) {
      need_file(detok_in);
      need_output(detok_out);
      midi::write_file(detok_out, decode(load_cwt(detok_in), detok_tolerant ? DecodeMode::Tolerant : DecodeMode::Strict));
    } else if (features->parsed()) {
      need_dir(vf_dir);
      if (!vf_flow.empty()) need_file(vf_flow);
      if (!vf_dist.empty()) need_file(vf_dist);
      need_output(vf_out);
      if (!vf_write_flow.empty()) need_output(vf_write_flow);
      const auto manifest = video::read_manifest(vf_dir);
      const double tempo = vf_tempo.value_or(manifest.tempo.value_or(video::kDefaultTempo));
      const auto dist = vf_dist.empty() ? video::DensityDistribution::uniform() : video::load_distribution(vf_dist);
      video::MotionFeatures mf;
      long frames = 0;
      if (!vf_flow.empty()) {
        mf = video::read_flow_csv(vf_flow);
        frames = static_cast<long>(mf.magnitudes.size()) + 1;
      } else {
        const auto images = video::read_frames(vf_dir);
        mf = video::motion_features(images, worker_threads());
        frames = static_cast<long>(images.size());
      }
      if (!vf_write_flow.empty()) video::write_flow_csv(vf_write_flow, mf);
      video::save_rhythm(vf_out, video::build_video_rhythm(mf, frames, manifest.fps, tempo, dist));
    } else if (ingest->parsed()) {
      need_dir(ing_dir);
      need_file(ing_tsv);
      need_output(ing_cache);
      if (!ing_dist.empty()) need_output(ing_dist);
      const auto c = corpus::ingest(ing_dir, ing_tsv, worker_threads());
      for (const auto& w : c.warnings) err << "cmt: warning: skipped " << w << '\n';
      corpus::save_cache(ing_cache, c);
      if (!ing_dist.empty()) video::save_distribution(ing_dist, c.distribution);
      out << c.entries.size() << " entries, " << c.warnings.size() << " skipped\n";
    } else if (train->parsed()) {
      need_dir(tr_dir);
      need_file(tr_tsv);
      need_output(tr_ckpt);
      if (tr_loss.empty()) tr_loss = tr_ckpt + ".loss.csv";
      need_output(tr_loss);
      const auto c = corpus::ingest(tr_dir, tr_tsv, worker_threads());
      for (const auto& w : c.warnings) err << "cmt: warning: skipped " << w << '\n';
      model::ModelConfig mc = tr_full ? model::ModelConfig::full() : model::ModelConfig::toy();
      mc.use_rhythm_attrs = !tr_ablate;
      std::vector<TokenSequence> seqs;
      for (const auto& e : c.entries) seqs.push_back(e.tokens);
      model::Transformer m(mc, tr_cfg.seed);
      const auto history = model::train(m, seqs, tr_cfg, [&](const model::LossRow& r) {
        out << "epoch " << r.epoch << " loss " << r.total << '\n';
      });
      m.save(tr_ckpt);
      history.save_csv(tr_loss);
    } else if (generate_cmd->parsed()) {
      need_file(gen_ckpt);
      need_file(gen_rhythm);
      for (const auto* p : {&gen_mid, &gen_cwt, &gen_trace}) need_output(*p);
      const auto cfg = gen_flags.config();
      const auto m = model::Transformer::load(gen_ckpt);
      const auto rhythm = video::load_rhythm(gen_rhythm);
      write_generation(generate_or_partial(m, rhythm, cfg, gen_cwt, gen_trace), gen_mid, gen_cwt, gen_trace);
    } else if (match->parsed()) {
      need_file(m_rhythm);
      need_file(m_cache);
      need_output(m_out);
      const auto rhythm = video::load_rhythm(m_rhythm);
      const auto c = corpus::load_cache(m_cache);
      std::ostringstream tsv;
      tsv.precision(17);
      tsv << "rank\tid\tscore\n";
      std::size_t rank = 1;
      for (const auto& mt : corpus::match_top_k(rhythm, c.entries, m_k)) tsv << rank++ << '\t' << mt.id << '\t' << mt.score << '\n';
      write_text(m_out, tsv.str());
    } else if (eval->parsed()) {
      const std::string in = ev_args.front(), report = ev_args.back();
      need_file(in);
      std::optional<video::VideoRhythm> rhythm;
      if (ev_args.size() == 3) {
        need_file(ev_args[1]);
        rhythm = video::load_rhythm(ev_args[1]);
      }
      need_output(report);
      if (!ev_csv.empty()) need_output(ev_csv);
      const auto r = metrics::evaluate(load_cwt(in), rhythm ? &*rhythm : nullptr);
      write_text(report, metrics::report_to_json(r));
      if (!ev_csv.empty())
        write_text(ev_csv, metrics::report_csv_header() +
                               metrics::report_csv_row(ev_id.empty() ? fs::path(in).stem().string() : ev_id, r));
    } else if (oracle->parsed()) {
      need_file(od_rhythm);
      need_output(od_mid);
      if (!od_cwt.empty()) need_output(od_cwt);
      if (!od_trace.empty()) need_output(od_trace);
      const auto cfg = od_flags.config();
      const auto rhythm = video::load_rhythm(od_rhythm);
      const model::OracleModel m;
      write_generation(generate_or_partial(m, rhythm, cfg, od_cwt, od_trace), od_mid, od_cwt, od_trace);
    }
  } catch (const CLI::ValidationError& e) {
    err << "cmt: usage error: " << e.what() << '\n';
    return kUsage;
  } catch (const IoError& e) {
    err << "cmt: io error: " << e.what() << '\n';
    return kIo;
  } catch (const ParseError& e) {
    err << "cmt: format error: " << e.what() << '\n';
    return kSchema;
  } catch (const SchemaError& e) {
    err << "cmt: schema error: " << e.what() << '\n';
    return kSchema;
  } catch (const Error& e) {
    err << "cmt: error: " << e.what() << '\n';
    return kDomain;
  } catch (const std::exception& e) {
    err << "cmt: internal error: " << e.what() << '\n';
    return kInternal;
  }
  return kOk;
}

}  // namespace cmt::cli

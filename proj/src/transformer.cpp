#include "cmt/model/transformer.hpp"

#include <cmath>
#include <json.hpp>

#include "cmt/error.hpp"

namespace cmt::model {

using nlohmann::json;

ModelConfig ModelConfig::toy() { return {}; }

ModelConfig ModelConfig::full() {
  ModelConfig c;
  c.layers = 12;
  c.heads = 8;
  c.d_model = 512;
  c.d_ff = 2048;
  return c;
}

std::string config_to_json(const ModelConfig& c) {
  json j = {{"schema_version", "1.0"},     {"layers", c.layers},         {"heads", c.heads},
            {"d_model", c.d_model},        {"d_ff", c.d_ff},             {"dropout", c.dropout},
            {"max_len", c.max_len},        {"timing_bins", c.timing_bins}, {"use_rhythm_attrs", c.use_rhythm_attrs},
            {"use_beat_timing", c.use_beat_timing}};
  return j.dump();
}

ModelConfig config_from_json(const std::string& text) {
  try {
    const json j = json::parse(text);
    const std::string version = j.at("schema_version").get<std::string>();
    if (version.substr(0, version.find('.')) != "1") throw SchemaError("unsupported model config version " + version);
    ModelConfig c;
    c.layers = j.at("layers").get<int>();
    c.heads = j.at("heads").get<int>();
    c.d_model = j.at("d_model").get<int>();
    c.d_ff = j.at("d_ff").get<int>();
    c.dropout = j.at("dropout").get<double>();
    c.max_len = j.at("max_len").get<int>();
    c.timing_bins = j.at("timing_bins").get<int>();
    c.use_rhythm_attrs = j.at("use_rhythm_attrs").get<bool>();
    c.use_beat_timing = j.at("use_beat_timing").get<bool>();
    return c;
  } catch (const json::exception& e) {
    throw SchemaError(std::string("model config: ") + e.what());
  }
}

int timing_bin(double beat, int n_beats, int bins, bool* clamped) {
  if (n_beats <= 0) throw InvalidArgument("n_beats must be positive");
  if (beat < 0) throw InvalidArgument("beat must be non-negative");
  const bool over = beat > n_beats;
  if (clamped) *clamped = over;
  return over ? bins : static_cast<int>(std::lround(bins * beat / n_beats));
}

RowVec beat_position_encoding(int beat, int d_model) {
  const int b[1] = {beat};
  return ops::sinusoid(b, d_model).row(0);
}

SequenceInput make_sequence_input(const TokenSequence& tokens) {
  int bars = 0;
  for (const auto& t : tokens.body) bars += t.is_bar();
  return make_sequence_input(tokens, std::max(1, bars * kBeatsPerBar));
}

SequenceInput make_sequence_input(const TokenSequence& tokens, int n_beats) {
  SequenceInput in{tokens.prefix, tokens.body, {}};
  in.positions.assign(tokens.prefix.size(), Position{0, 0});
  int bar = -1, global_tick = 0;
  for (const auto& t : tokens.body) {
    if (t.is_bar()) {
      ++bar;
      global_tick = bar * kTicksPerBar;
    } else if (t.is_tick()) {
      global_tick = std::max(bar, 0) * kTicksPerBar + *t.beat - 1;
    } else if (t.is_eos()) {
      global_tick = (bar + 1) * kTicksPerBar;
    }
    const int beat = global_tick / kTicksPerBeat;
    in.positions.push_back({beat, timing_bin(beat, n_beats)});
  }
  return in;
}

namespace {

Mat random_normal(long rows, long cols, double stddev, std::mt19937_64& rng) {
  std::normal_distribution<double> nd(0.0, stddev);
  Mat m(rows, cols);
  for (long i = 0; i < m.size(); ++i) m.data()[i] = static_cast<double>(static_cast<float>(nd(rng)));
  return m;
}

Mat xavier(long in, long out, std::mt19937_64& rng) {
  const double a = std::sqrt(6.0 / static_cast<double>(in + out));
  std::uniform_real_distribution<double> ud(-a, a);
  Mat m(in, out);
  for (long i = 0; i < m.size(); ++i) m.data()[i] = static_cast<double>(static_cast<float>(ud(rng)));
  return m;
}

}  // namespace

void round_to_float(Param& p) {
  for (long i = 0; i < p.value.size(); ++i) p.value.data()[i] = static_cast<double>(static_cast<float>(p.value.data()[i]));
}

Transformer::Transformer(const ModelConfig& config, std::uint64_t seed) : config_(config) {
  if (config.d_model % config.heads != 0) throw InvalidArgument("d_model must be divisible by heads");
  if (config.layers < 1 || config.d_model < 2 || config.d_ff < 1) throw InvalidArgument("bad model dimensions");
  std::mt19937_64 rng(seed);
  const long d = config.d_model;
  auto add = [&](std::string name, Mat value) { params_.emplace_back(std::move(name), std::move(value)); };
  for (int a = 0; a < kNumAttrs; ++a)
    add("emb." + std::string(attr_name(static_cast<Attr>(a))), random_normal(kVocabSize[a], kEmbedDims[a], 0.02, rng));
  add("emb.initial", random_normal(kInitialVocab, d, 0.02, rng));
  add("emb.timing", random_normal(config.timing_bins + 1, d, 0.02, rng));
  add("in.w", xavier(embed_width_total(), d, rng));
  add("in.b", Mat::Zero(1, d));
  for (int l = 0; l < config.layers; ++l) {
    const std::string p = "layer" + std::to_string(l) + ".";
    add(p + "ln1.g", Mat::Ones(1, d));
    add(p + "ln1.b", Mat::Zero(1, d));
    for (const char* n : {"q", "k", "v", "o"}) {
      add(p + n + ".w", xavier(d, d, rng));
      add(p + n + ".b", Mat::Zero(1, d));
    }
    add(p + "ln2.g", Mat::Ones(1, d));
    add(p + "ln2.b", Mat::Zero(1, d));
    add(p + "ff1.w", xavier(d, config.d_ff, rng));
    add(p + "ff1.b", Mat::Zero(1, config.d_ff));
    add(p + "ff2.w", xavier(config.d_ff, d, rng));
    add(p + "ff2.b", Mat::Zero(1, d));
  }
  add("lnf.g", Mat::Ones(1, d));
  add("lnf.b", Mat::Zero(1, d));
  add("head.type.w", xavier(d, kVocabSize[0], rng));
  add("head.type.b", Mat::Zero(1, kVocabSize[0]));
  add("head.cat.w", xavier(d + kEmbedDims[0], d, rng));
  add("head.cat.b", Mat::Zero(1, d));
  for (int a = 1; a < kNumAttrs; ++a) {
    const std::string n = "head." + std::string(attr_name(static_cast<Attr>(a)));
    add(n + ".w", xavier(d, kVocabSize[a], rng));
    add(n + ".b", Mat::Zero(1, kVocabSize[a]));
  }
  bind();
}

Transformer::Transformer(const Transformer& other) : config_(other.config_), params_(other.params_) { bind(); }

Transformer& Transformer::operator=(const Transformer& other) {
  if (this != &other) {
    config_ = other.config_;
    params_ = other.params_;
    bind();
  }
  return *this;
}

Transformer::Transformer(Transformer&& other) noexcept : config_(other.config_), params_(std::move(other.params_)) {
  bind();
}

Transformer& Transformer::operator=(Transformer&& other) noexcept {
  config_ = other.config_;
  params_ = std::move(other.params_);
  bind();
  return *this;
}

Param& Transformer::param(const std::string& name) {
  for (auto& p : params_)
    if (p.name == name) return p;
  throw InvalidArgument("no parameter named " + name);
}

void Transformer::bind() {
  if (params_.empty()) return;
  for (int a = 0; a < kNumAttrs; ++a) embed_[a] = &param("emb." + std::string(attr_name(static_cast<Attr>(a))));
  initial_ = &param("emb.initial");
  timing_ = &param("emb.timing");
  in_w_ = &param("in.w");
  in_b_ = &param("in.b");
  layers_.clear();
  for (int l = 0; l < config_.layers; ++l) {
    const std::string p = "layer" + std::to_string(l) + ".";
    layers_.push_back({&param(p + "ln1.g"), &param(p + "ln1.b"), &param(p + "q.w"), &param(p + "q.b"),
                       &param(p + "k.w"), &param(p + "k.b"), &param(p + "v.w"), &param(p + "v.b"),
                       &param(p + "o.w"), &param(p + "o.b"), &param(p + "ln2.g"), &param(p + "ln2.b"),
                       &param(p + "ff1.w"), &param(p + "ff1.b"), &param(p + "ff2.w"), &param(p + "ff2.b")});
  }
  lnf_g_ = &param("lnf.g");
  lnf_b_ = &param("lnf.b");
  type_w_ = &param("head.type.w");
  type_b_ = &param("head.type.b");
  cat_w_ = &param("head.cat.w");
  cat_b_ = &param("head.cat.b");
  for (int a = 1; a < kNumAttrs; ++a) {
    const std::string n = "head." + std::string(attr_name(static_cast<Attr>(a)));
    head_w_[a] = &param(n + ".w");
    head_b_[a] = &param(n + ".b");
  }
}

std::vector<Param*> Transformer::params() {
  std::vector<Param*> out;
  for (auto& p : params_) out.push_back(&p);
  return out;
}

std::vector<const Param*> Transformer::params() const {
  std::vector<const Param*> out;
  for (const auto& p : params_) out.push_back(&p);
  return out;
}

std::size_t Transformer::parameter_count() const {
  std::size_t n = 0;
  for (const auto& p : params_) n += static_cast<std::size_t>(p.value.size());
  return n;
}

TokenIndices Transformer::input_indices(const CompoundToken& token) const {
  TokenIndices idx = to_indices(token);
  if (!config_.use_rhythm_attrs) {
    idx[static_cast<int>(Attr::Density)] = 0;
    idx[static_cast<int>(Attr::Strength)] = 0;
  }
  return idx;
}

RowVec Transformer::embed_concat(const CompoundToken& token) const {
  const TokenIndices idx = input_indices(token);
  RowVec out(embed_width_total());
  long at = 0;
  for (int a = 0; a < kNumAttrs; ++a) {
    out.segment(at, kEmbedDims[a]) = embed_[a]->value.row(idx[a]);
    at += kEmbedDims[a];
  }
  return out;
}

RowVec Transformer::embed_token(const CompoundToken& token) const {
  return embed_concat(token) * in_w_->value + in_b_->value.row(0);
}

RowVec Transformer::timing_embedding(int bin) const {
  if (bin < 0 || bin > config_.timing_bins) throw InvalidArgument("timing bin out of range");
  return timing_->value.row(bin);
}

Tape::Var Transformer::embed_rows(Tape& tape, const SequenceInput& input) const {
  std::vector<Tape::Var> parts;
  if (!input.prefix.empty()) {
    std::vector<int> rows;
    for (const auto& t : input.prefix) rows.push_back(initial_index(t));
    parts.push_back(tape.gather(*initial_, rows));
  }
  if (!input.body.empty()) {
    std::array<std::vector<int>, kNumAttrs> cols;
    for (const auto& t : input.body) {
      const TokenIndices idx = input_indices(t);
      for (int a = 0; a < kNumAttrs; ++a) cols[a].push_back(idx[a]);
    }
    std::vector<Tape::Var> attrs;
    for (int a = 0; a < kNumAttrs; ++a) attrs.push_back(tape.gather(*embed_[a], cols[a]));
    parts.push_back(tape.linear(tape.concat_cols(attrs), *in_w_, in_b_));
  }
  return parts.size() == 1 ? parts[0] : tape.concat_rows(parts);
}

Tape::Var Transformer::encode(Tape& tape, const SequenceInput& input, bool training, std::mt19937_64* rng) const {
  const std::size_t n = input.rows();
  if (n == 0) throw InvalidArgument("empty model input");
  if (static_cast<int>(n) > config_.max_len)
    throw InvalidArgument("sequence of " + std::to_string(n) + " rows exceeds max length " + std::to_string(config_.max_len));
  if (input.positions.size() != n) throw InvalidArgument("one position per input row required");
  if (training && !rng) throw InvalidArgument("training forward needs an rng");
  const double drop = training ? config_.dropout : 0.0;

  Tape::Var x = embed_rows(tape, input);
  std::vector<int> beats, bins;
  for (const auto& p : input.positions) {
    beats.push_back(p.beat);
    bins.push_back(p.bin);
  }
  x = tape.add(x, tape.constant(ops::sinusoid(beats, config_.d_model)));
  if (config_.use_beat_timing) x = tape.add(x, tape.gather(*timing_, bins));
  if (training) x = tape.dropout(x, drop, *rng);

  for (const Layer& L : layers_) {
    Tape::Var a = tape.layer_norm(x, *L.ln1_g, *L.ln1_b);
    Tape::Var q = tape.linear(a, *L.wq, L.bq);
    Tape::Var k = tape.linear(a, *L.wk, L.bk);
    Tape::Var v = tape.linear(a, *L.wv, L.bv);
    Tape::Var att = tape.linear(tape.causal_attention(q, k, v, config_.heads), *L.wo, L.bo);
    if (training) att = tape.dropout(att, drop, *rng);
    x = tape.add(x, att);
    Tape::Var f = tape.layer_norm(x, *L.ln2_g, *L.ln2_b);
    f = tape.linear(tape.gelu(tape.linear(f, *L.w1, L.b1)), *L.w2, L.b2);
    if (training) f = tape.dropout(f, drop, *rng);
    x = tape.add(x, f);
  }
  return tape.layer_norm(x, *lnf_g_, *lnf_b_);
}

int Transformer::count_targets(const SequenceInput& input) const {
  int count = 0;
  for (const auto& t : input.body) {
    const TokenIndices idx = to_indices(t);
    for (int a = 0; a < kNumAttrs; ++a) {
      if (!config_.use_rhythm_attrs && (a == static_cast<int>(Attr::Density) || a == static_cast<int>(Attr::Strength)))
        continue;
      if (a == 0 || idx[a] != 0) ++count;
    }
  }
  return count;
}

LossTerms Transformer::loss(Tape& tape, const SequenceInput& input, bool training, std::mt19937_64* rng,
                            double scale) const {
  if (input.prefix.empty()) throw InvalidArgument("sequence needs initial tokens");
  if (input.body.empty()) throw InvalidArgument("sequence needs at least one target token");
  const Tape::Var h = encode(tape, input, training, rng);
  const long p = static_cast<long>(input.prefix.size());
  const long targets = static_cast<long>(input.body.size());
  // Row p-1+i predicts body token i.
  const Tape::Var hp = tape.slice_rows(h, p - 1, targets);

  std::array<std::vector<int>, kNumAttrs> tgt;
  for (const auto& t : input.body) {
    const TokenIndices idx = to_indices(t);
    for (int a = 0; a < kNumAttrs; ++a) tgt[a].push_back(idx[a]);
  }

  LossTerms out;
  std::vector<Tape::Var> terms;
  auto add_head = [&](int a, Tape::Var logits) {
    std::vector<double> w(targets, 0.0);
    for (long i = 0; i < targets; ++i) w[i] = (a == 0 || tgt[a][i] != 0) ? 1.0 : 0.0;
    const Tape::Var ce_raw = tape.cross_entropy(logits, tgt[a], w, 1.0);
    out.head_sum[a] = tape.value(ce_raw)(0, 0);
    out.head_count[a] = static_cast<int>(std::count(w.begin(), w.end(), 1.0));
    terms.push_back(tape.cross_entropy(logits, tgt[a], w, scale));
  };
  add_head(0, tape.linear(hp, *type_w_, type_b_));
  const Tape::Var type_emb = tape.gather(*embed_[0], tgt[0]);
  const Tape::Var parts[2] = {hp, type_emb};
  const Tape::Var y = tape.linear(tape.concat_cols(parts), *cat_w_, cat_b_);
  for (int a = 1; a < kNumAttrs; ++a) {
    if (!config_.use_rhythm_attrs && (a == static_cast<int>(Attr::Density) || a == static_cast<int>(Attr::Strength)))
      continue;
    add_head(a, tape.linear(y, *head_w_[a], head_b_[a]));
  }
  out.total = tape.sum(terms);
  return out;
}

Mat Transformer::hidden(const SequenceInput& input) const {
  Tape tape;
  return tape.value(encode(tape, input, false, nullptr));
}

std::vector<double> Transformer::type_logits(const RowVec& h) const {
  const RowVec z = h * type_w_->value + type_b_->value.row(0);
  return {z.data(), z.data() + z.size()};
}

AttributeLogits Transformer::attribute_logits(const RowVec& h, TokenType type) const {
  RowVec cat(h.size() + kEmbedDims[0]);
  cat << h, embed_[0]->value.row(type_index(type));
  const RowVec y = cat * cat_w_->value + cat_b_->value.row(0);
  AttributeLogits out;
  out[Attr::Type] = type_logits(h);
  for (int a = 1; a < kNumAttrs; ++a) {
    const RowVec z = y * head_w_[a]->value + head_b_[a]->value.row(0);
    out.logits[a].assign(z.data(), z.data() + z.size());
  }
  return out;
}

RowVec Transformer::step_layers(const RowVec& x_in, std::vector<Mat>& keys, std::vector<Mat>& values, long row) const {
  RowVec x = x_in;
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    const Layer& L = layers_[l];
    const Mat a = ops::layer_norm(x, *L.ln1_g, *L.ln1_b);
    const Mat q = a * L.wq->value + L.bq->value;
    keys[l].row(row) = a * L.wk->value + L.bk->value;
    values[l].row(row) = a * L.wv->value + L.bv->value;
    const Mat att = ops::attention(q, keys[l].topRows(row + 1), values[l].topRows(row + 1), config_.heads, row);
    x += att * L.wo->value + L.bo->value;
    const Mat f = ops::layer_norm(x, *L.ln2_g, *L.ln2_b);
    x += ops::gelu(f * L.w1->value + L.b1->value) * L.w2->value + L.b2->value;
  }
  return ops::layer_norm(x, *lnf_g_, *lnf_b_).row(0);
}

class TransformerSession : public ModelSession {
 public:
  TransformerSession(const Transformer& model, const std::vector<InitialToken>& prefix) : model_(model) {
    const long cap = 256;
    keys_.assign(model.layers_.size(), Mat(cap, model.config_.d_model));
    values_.assign(model.layers_.size(), Mat(cap, model.config_.d_model));
    if (prefix.empty()) throw InvalidArgument("generation needs initial tokens");
    for (const auto& t : prefix) {
      RowVec x = model_.initial_->value.row(initial_index(t));
      advance(std::move(x), Position{0, 0});
    }
  }

  void push(const CompoundToken& token, const Position& position) override {
    advance(model_.embed_token(token), position);
  }

  std::vector<double> type_logits() override { return model_.type_logits(last_); }
  AttributeLogits attribute_logits(TokenType type) override { return model_.attribute_logits(last_, type); }

 private:
  void advance(RowVec x, const Position& pos) {
    if (rows_ >= model_.config_.max_len) throw InvalidArgument("sequence exceeds the model's max length");
    x += beat_position_encoding(pos.beat, model_.config_.d_model);
    if (model_.config_.use_beat_timing) x += model_.timing_embedding(pos.bin);
    if (rows_ == keys_[0].rows()) {
      for (auto* cache : {&keys_, &values_})
        for (auto& m : *cache) m.conservativeResize(m.rows() * 2, Eigen::NoChange);
    }
    last_ = model_.step_layers(x, keys_, values_, rows_);
    ++rows_;
  }

  const Transformer& model_;
  std::vector<Mat> keys_, values_;
  long rows_ = 0;
  RowVec last_;
};

std::unique_ptr<ModelSession> Transformer::start(const std::vector<InitialToken>& prefix, int) const {
  return std::make_unique<TransformerSession>(*this, prefix);
}

}  // namespace cmt::model

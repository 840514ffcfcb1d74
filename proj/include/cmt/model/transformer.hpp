#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <random>
#include <string>
#include <vector>

#include "cmt/model/autograd.hpp"
#include "cmt/model/interface.hpp"

namespace cmt::model {

inline constexpr int kTimingBins = 100;
inline constexpr int kMaxSequenceLength = 10000;

struct ModelConfig {
  int layers = 2;
  int heads = 4;
  int d_model = 128;
  int d_ff = 512;
  double dropout = 0.1;
  int max_len = kMaxSequenceLength;
  int timing_bins = kTimingBins;
  bool use_rhythm_attrs = true;  // density and strength in inputs and loss
  bool use_beat_timing = true;

  static ModelConfig toy();
  static ModelConfig full();
  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

std::string config_to_json(const ModelConfig& config);
ModelConfig config_from_json(const std::string& text);

// round(bins * beat / n_beats), clamped to `bins`; `clamped` reports beat > n_beats.
int timing_bin(double beat, int n_beats, int bins = kTimingBins, bool* clamped = nullptr);

// Sinusoidal encoding indexed by beat number.
RowVec beat_position_encoding(int beat, int d_model);

// Model input: initial tokens, compound tokens and one Position per row (prefix rows first).
struct SequenceInput {
  std::vector<InitialToken> prefix;
  std::vector<CompoundToken> body;
  std::vector<Position> positions;

  std::size_t rows() const { return prefix.size() + body.size(); }
};

// Positions for a training sequence; its total beat count is 4 * (number of bars).
SequenceInput make_sequence_input(const TokenSequence& tokens);
SequenceInput make_sequence_input(const TokenSequence& tokens, int n_beats);

struct LossTerms {
  Tape::Var total = -1;
  std::array<double, kNumAttrs> head_sum{};  // unscaled CE sums
  std::array<int, kNumAttrs> head_count{};
};

class Transformer : public NextTokenModel {
 public:
  Transformer(const ModelConfig& config, std::uint64_t seed);
  Transformer(const Transformer& other);
  Transformer& operator=(const Transformer& other);
  Transformer(Transformer&& other) noexcept;
  Transformer& operator=(Transformer&& other) noexcept;

  const ModelConfig& config() const { return config_; }
  std::vector<Param*> params();
  std::vector<const Param*> params() const;
  std::size_t parameter_count() const;
  Param& param(const std::string& name);

  // Concatenated attribute embeddings before projection, and the projected x_i.
  RowVec embed_concat(const CompoundToken& token) const;
  RowVec embed_token(const CompoundToken& token) const;
  RowVec timing_embedding(int bin) const;

  // Unmasked (position, head) pairs contributing to the loss of one sequence.
  int count_targets(const SequenceInput& input) const;

  // Teacher-forced loss graph. CE terms are multiplied by `scale` (1 / batch target count).
  LossTerms loss(Tape& tape, const SequenceInput& input, bool training, std::mt19937_64* rng, double scale) const;

  // Eval-mode final hidden states, one row per input row.
  Mat hidden(const SequenceInput& input) const;
  std::vector<double> type_logits(const RowVec& h) const;
  AttributeLogits attribute_logits(const RowVec& h, TokenType type) const;

  std::unique_ptr<ModelSession> start(const std::vector<InitialToken>& prefix, int n_beats) const override;

  void save(const std::filesystem::path& path) const;
  static Transformer load(const std::filesystem::path& path);

 private:
  Tape::Var encode(Tape& tape, const SequenceInput& input, bool training, std::mt19937_64* rng) const;
  Tape::Var embed_rows(Tape& tape, const SequenceInput& input) const;
  RowVec step_layers(const RowVec& x, std::vector<Mat>& keys, std::vector<Mat>& values, long row) const;
  TokenIndices input_indices(const CompoundToken& token) const;

  friend class TransformerSession;
  Transformer() = default;

  ModelConfig config_;
  // Mutable so const forward passes can hand parameters to the tape; only the trainer writes.
  mutable std::vector<Param> params_;
  std::array<Param*, kNumAttrs> embed_{};
  Param* initial_ = nullptr;
  Param* timing_ = nullptr;
  Param* in_w_ = nullptr;
  Param* in_b_ = nullptr;
  struct Layer {
    Param *ln1_g, *ln1_b, *wq, *bq, *wk, *bk, *wv, *bv, *wo, *bo, *ln2_g, *ln2_b, *w1, *b1, *w2, *b2;
  };
  std::vector<Layer> layers_;
  Param *lnf_g_ = nullptr, *lnf_b_ = nullptr;
  Param *type_w_ = nullptr, *type_b_ = nullptr;
  Param *cat_w_ = nullptr, *cat_b_ = nullptr;
  std::array<Param*, kNumAttrs> head_w_{};
  std::array<Param*, kNumAttrs> head_b_{};

  void bind();
};

// Rounds every parameter to float32 precision (checkpoints store float32).
void round_to_float(Param& p);

}  // namespace cmt::model

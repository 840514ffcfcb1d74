#pragma once

#include <array>
#include <memory>
#include <vector>

#include "cmt/model/vocab.hpp"
#include "cmt/tokens.hpp"

namespace cmt::model {

// Where a token sits in time: its beat number (all tokens of one beat share it) and the
// beat-timing bin of that beat relative to the target length.
struct Position {
  int beat = 0;
  int bin = 0;
};

// One logit vector per attribute, sized by kVocabSize. Entries a model did not produce are empty.
struct AttributeLogits {
  std::array<std::vector<double>, kNumAttrs> logits;

  std::vector<double>& operator[](Attr a) { return logits[static_cast<int>(a)]; }
  const std::vector<double>& operator[](Attr a) const { return logits[static_cast<int>(a)]; }
};

// Incremental next-token prediction over a growing sequence. Prediction is two-stage:
// the token type first, then the remaining attributes conditioned on that type.
class ModelSession {
 public:
  virtual ~ModelSession() = default;
  virtual void push(const CompoundToken& token, const Position& position) = 0;
  virtual std::vector<double> type_logits() = 0;
  virtual AttributeLogits attribute_logits(TokenType type) = 0;
};

class NextTokenModel {
 public:
  virtual ~NextTokenModel() = default;
  // `n_beats` is the target length; the prefix sits at beat 0, bin 0.
  virtual std::unique_ptr<ModelSession> start(const std::vector<InitialToken>& prefix, int n_beats) const = 0;
};

}  // namespace cmt::model

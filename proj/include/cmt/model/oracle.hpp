#pragma once

#include "cmt/model/interface.hpp"

namespace cmt::model {

// Rule-based stand-in for a trained model. It reads the tokens pushed so far (including any
// controller edits) and puts all probability on one continuation:
//   - each bar token is followed by exactly `density` tick tokens, each tick token by exactly
//     `strength` notes;
//   - the k-th remaining tick of a bar is proposed as late as the remaining count allows, so
//     every pending visual beat is reached before the bar runs out;
//   - notes cycle through the prefix instruments with pitches 60, 61, ...;
//   - EOS once the bars cover the target beat count.
struct OracleConfig {
  int bar_density = 4;
  int tick_strength = 2;
  int note_duration = 2;
};

class OracleModel : public NextTokenModel {
 public:
  explicit OracleModel(OracleConfig config = {});
  std::unique_ptr<ModelSession> start(const std::vector<InitialToken>& prefix, int n_beats) const override;

 private:
  OracleConfig config_;
};

}  // namespace cmt::model

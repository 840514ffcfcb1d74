#include "cmt/model/oracle.hpp"

#include <algorithm>

#include "cmt/error.hpp"

namespace cmt::model {

namespace {

constexpr double kOff = -1e9;

std::vector<double> one_hot(int size, int index) {
  std::vector<double> v(static_cast<std::size_t>(size), kOff);
  v[static_cast<std::size_t>(index)] = 0.0;
  return v;
}

class OracleSession : public ModelSession {
 public:
  OracleSession(const OracleConfig& config, const std::vector<InitialToken>& prefix, int n_beats)
      : config_(config), n_beats_(n_beats) {
    for (const auto& t : prefix)
      if (t.kind == InitialToken::Kind::Instrument) instruments_.push_back(static_cast<Instrument>(t.value));
    if (instruments_.empty()) instruments_.push_back(Instrument::Piano);
  }

  void push(const CompoundToken& t, const Position&) override {
    if (t.is_bar()) {
      ++bars_;
      ticks_left_ = t.density.value_or(0);
      last_tick_ = 0;
      notes_left_ = 0;
    } else if (t.is_tick()) {
      ticks_left_ = std::max(ticks_left_ - 1, 0);
      last_tick_ = *t.beat;
      notes_left_ = t.strength.value_or(0);
      notes_at_tick_ = 0;
    } else if (t.is_note()) {
      notes_left_ = std::max(notes_left_ - 1, 0);
      ++notes_at_tick_;
    }
  }

  std::vector<double> type_logits() override { return one_hot(vocab(Attr::Type), type_index(planned_type())); }

  AttributeLogits attribute_logits(TokenType type) override {
    TokenIndices idx{};
    idx[0] = type_index(type);
    if (type == TokenType::Rhythm) {
      if (bars_ > 0 && ticks_left_ > 0) {
        const int tick = std::clamp(std::max(last_tick_ + 1, kTicksPerBar - ticks_left_ + 1), 1, kTicksPerBar);
        idx[1] = beat_index(tick);
        idx[2] = density_index(ticks_left_);
        idx[3] = strength_index(config_.tick_strength);
      } else {
        idx[1] = beat_index(kBarBeat);
        idx[2] = density_index(config_.bar_density);
      }
    } else if (type == TokenType::Note) {
      const auto n = static_cast<int>(instruments_.size());
      idx[4] = instrument_index(instruments_[static_cast<std::size_t>(notes_at_tick_ % n)]);
      idx[5] = pitch_index(std::min(60 + notes_at_tick_, 127));
      idx[6] = duration_index(config_.note_duration);
    }
    AttributeLogits out;
    out[Attr::Type] = type_logits();
    for (int a = 1; a < kNumAttrs; ++a) out.logits[a] = one_hot(kVocabSize[a], idx[a]);
    return out;
  }

 private:
  TokenType planned_type() const {
    if (bars_ == 0) return TokenType::Rhythm;
    if (notes_left_ > 0) return TokenType::Note;
    if (ticks_left_ > 0) return TokenType::Rhythm;
    return bars_ * kBeatsPerBar >= n_beats_ ? TokenType::Eos : TokenType::Rhythm;
  }

  OracleConfig config_;
  int n_beats_;
  std::vector<Instrument> instruments_;
  int bars_ = 0, ticks_left_ = 0, last_tick_ = 0, notes_left_ = 0, notes_at_tick_ = 0;
};

}  // namespace

OracleModel::OracleModel(OracleConfig config) : config_(config) {
  if (config.bar_density < 0 || config.bar_density > kTicksPerBar) throw InvalidArgument("oracle density out of range");
  if (config.tick_strength < 1 || config.tick_strength > kMaxStrength)
    throw InvalidArgument("oracle strength out of range");
  if (config.note_duration < 1 || config.note_duration > kMaxDuration)
    throw InvalidArgument("oracle duration out of range");
}

std::unique_ptr<ModelSession> OracleModel::start(const std::vector<InitialToken>& prefix, int n_beats) const {
  if (n_beats < 1) throw InvalidArgument("n_beats must be positive");
  return std::make_unique<OracleSession>(config_, prefix, n_beats);
}

}  // namespace cmt::model

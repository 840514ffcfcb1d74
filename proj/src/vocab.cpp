#include "cmt/error.hpp"
#include "cmt/model/vocab.hpp"

namespace cmt::model {

std::string_view attr_name(Attr a) {
  switch (a) {
    case Attr::Type:
      return "type";
    case Attr::Beat:
      return "beat";
    case Attr::Density:
      return "density";
    case Attr::Strength:
      return "strength";
    case Attr::Instrument:
      return "instrument";
    case Attr::Pitch:
      return "pitch";
    case Attr::Duration:
      return "duration";
  }
  return "?";
}

TokenIndices to_indices(const CompoundToken& t) {
  TokenIndices idx{};
  idx[0] = type_index(t.type);
  if (t.beat) idx[1] = beat_index(*t.beat);
  if (t.density) idx[2] = density_index(*t.density);
  if (t.strength) idx[3] = strength_index(*t.strength);
  if (t.instrument) idx[4] = instrument_index(*t.instrument);
  if (t.pitch) idx[5] = pitch_index(*t.pitch);
  if (t.duration) idx[6] = duration_index(*t.duration);
  for (int a = 0; a < kNumAttrs; ++a)
    if (idx[a] < 0 || idx[a] >= kVocabSize[a])
      throw InvalidArgument("attribute " + std::string(attr_name(static_cast<Attr>(a))) + " outside its vocabulary");
  if ((t.strength && *t.strength < 1) || (t.duration && *t.duration < 1))
    throw InvalidArgument("strength/duration must be >= 1");
  return idx;
}

CompoundToken from_indices(const TokenIndices& idx) {
  CompoundToken t;
  if (idx[0] < 1 || idx[0] > 3) throw InvalidArgument("type index has no token type");
  t.type = static_cast<TokenType>(idx[0] - 1);
  if (idx[1]) t.beat = idx[1] - 1;
  if (idx[2]) t.density = idx[2] - 1;
  if (idx[3]) t.strength = idx[3];
  if (idx[4]) t.instrument = static_cast<Instrument>(idx[4] - 1);
  if (idx[5]) t.pitch = idx[5] - 1;
  if (idx[6]) t.duration = idx[6];
  return t;
}

int initial_index(const InitialToken& t) {
  return t.kind == InitialToken::Kind::Genre ? t.value : kNumGenres + t.value;
}

}  // namespace cmt::model

#pragma once

#include <array>
#include <functional>
#include <random>
#include <span>
#include <vector>

#include "cmt/model/interface.hpp"

namespace cmt::model {

struct SamplingConfig {
  // Per attribute, in Attr order. A temperature of 0 means argmax.
  std::array<double, kNumAttrs> temperature = {1.0, 1.0, 1.0, 1.0, 1.0, 1.2, 1.0};
  double top_p = 0.9;
};

// Probabilities after temperature scaling and masking, cut to the nucleus and renormalized.
// `allowed` may be empty (everything allowed). Throws InvalidArgument when nothing has
// finite logit among the allowed entries.
std::vector<double> sampling_distribution(std::span<const double> logits, double temperature, double top_p,
                                          const std::vector<bool>& allowed = {});

int sample_index(std::span<const double> logits, double temperature, double top_p, std::mt19937_64& rng,
                 const std::vector<bool>& allowed = {});

// Allowed indices for attribute `a` given the attributes chosen so far (type first, then
// beat, density, strength, instrument, pitch, duration). Empty result = no restriction.
using AllowedFn = std::function<std::vector<bool>(Attr a, const TokenIndices& partial)>;

// Two-stage sampling: the type, then the attributes its None pattern requires.
// Attributes a type does not use come out as None regardless of the logits.
CompoundToken sample(const std::vector<double>& type_logits,
                     const std::function<AttributeLogits(TokenType)>& attribute_logits, const SamplingConfig& config,
                     std::mt19937_64& rng, const AllowedFn& allowed = {});

CompoundToken sample(ModelSession& session, const SamplingConfig& config, std::mt19937_64& rng,
                     const AllowedFn& allowed = {});

// Whether a token of this type (and beat, for rhythm tokens) carries attribute `a`.
bool attribute_required(Attr a, const TokenIndices& partial);

}  // namespace cmt::model

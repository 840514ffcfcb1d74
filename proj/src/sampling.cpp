#include "cmt/model/sampling.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "cmt/error.hpp"

namespace cmt::model {

std::vector<double> sampling_distribution(std::span<const double> logits, double temperature, double top_p,
                                          const std::vector<bool>& allowed) {
  if (logits.empty()) throw InvalidArgument("empty logits");
  if (!allowed.empty() && allowed.size() != logits.size()) throw InvalidArgument("mask size does not match logits");
  if (temperature < 0 || std::isnan(temperature)) throw InvalidArgument("temperature must be >= 0");
  if (!(top_p > 0 && top_p <= 1)) throw InvalidArgument("nucleus p must be in (0, 1]");

  const std::size_t n = logits.size();
  auto ok = [&](std::size_t i) { return (allowed.empty() || allowed[i]) && std::isfinite(logits[i]); };
  double best = -std::numeric_limits<double>::infinity();
  std::size_t arg = n;
  for (std::size_t i = 0; i < n; ++i)
    if (ok(i) && logits[i] > best) best = logits[i], arg = i;
  if (arg == n) throw InvalidArgument("degenerate logits: no allowed entry is finite");

  std::vector<double> p(n, 0.0);
  if (temperature == 0) {
    p[arg] = 1.0;
    return p;
  }
  double z = 0;
  for (std::size_t i = 0; i < n; ++i)
    if (ok(i)) z += p[i] = std::exp((logits[i] - best) / temperature);
  for (double& v : p) v /= z;
  if (top_p >= 1) return p;

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return p[a] > p[b]; });
  double mass = 0;
  std::size_t keep = 0;
  while (keep < n && p[order[keep]] > 0) {
    mass += p[order[keep++]];
    if (mass >= top_p) break;
  }
  std::vector<double> q(n, 0.0);
  for (std::size_t k = 0; k < keep; ++k) q[order[k]] = p[order[k]] / mass;
  return q;
}

int sample_index(std::span<const double> logits, double temperature, double top_p, std::mt19937_64& rng,
                 const std::vector<bool>& allowed) {
  const auto p = sampling_distribution(logits, temperature, top_p, allowed);
  if (temperature == 0) return static_cast<int>(std::max_element(p.begin(), p.end()) - p.begin());
  const double u = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
  double acc = 0;
  int last = 0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (p[i] <= 0) continue;
    acc += p[i];
    last = static_cast<int>(i);
    if (u < acc) return last;
  }
  return last;
}

bool attribute_required(Attr a, const TokenIndices& partial) {
  const int type = partial[0];
  switch (a) {
    case Attr::Type:
      return true;
    case Attr::Beat:
    case Attr::Density:
      return type == type_index(TokenType::Rhythm);
    case Attr::Strength:
      return type == type_index(TokenType::Rhythm) && partial[1] != beat_index(kBarBeat);
    case Attr::Instrument:
    case Attr::Pitch:
    case Attr::Duration:
      return type == type_index(TokenType::Note);
  }
  return false;
}

CompoundToken sample(const std::vector<double>& type_logits,
                     const std::function<AttributeLogits(TokenType)>& attribute_logits, const SamplingConfig& config,
                     std::mt19937_64& rng, const AllowedFn& allowed) {
  TokenIndices idx{};
  auto mask_for = [&](Attr a, std::size_t size) {
    std::vector<bool> m = allowed ? allowed(a, idx) : std::vector<bool>{};
    if (m.empty()) m.assign(size, true);
    if (m.size() != size) throw InvalidArgument("mask size does not match vocabulary");
    m[0] = false;  // required attributes never sample None
    return m;
  };
  if (type_logits.size() != static_cast<std::size_t>(vocab(Attr::Type))) throw InvalidArgument("bad type logits size");
  idx[0] = sample_index(type_logits, config.temperature[0], config.top_p, rng, mask_for(Attr::Type, type_logits.size()));
  const auto type = static_cast<TokenType>(idx[0] - 1);
  const AttributeLogits logits = attribute_logits(type);
  for (int a = 1; a < kNumAttrs; ++a) {
    const auto attr = static_cast<Attr>(a);
    if (!attribute_required(attr, idx)) continue;
    const auto& l = logits.logits[a];
    if (l.size() != static_cast<std::size_t>(kVocabSize[a]))
      throw InvalidArgument("bad logits size for " + std::string(attr_name(attr)));
    idx[a] = sample_index(l, config.temperature[a], config.top_p, rng, mask_for(attr, l.size()));
  }
  return from_indices(idx);
}

CompoundToken sample(ModelSession& session, const SamplingConfig& config, std::mt19937_64& rng,
                     const AllowedFn& allowed) {
  return sample(
      session.type_logits(), [&](TokenType t) { return session.attribute_logits(t); }, config, rng, allowed);
}

}  // namespace cmt::model

#include "cmt/metrics.hpp"

#include <cmath>
#include <json.hpp>
#include <map>
#include <set>
#include <sstream>

#include "cmt/error.hpp"

namespace cmt::metrics {

namespace {

double entropy_bits(const std::array<double, 12>& hist) {
  double total = 0;
  for (double h : hist) total += h;
  double e = 0;
  for (double h : hist)
    if (h > 0) e -= h / total * std::log2(h / total);
  return e;
}

}  // namespace

double pitch_entropy(const QuantizedScore& score, int window_bars) {
  if (window_bars < 0) throw InvalidArgument("window must be non-negative");
  const int span = window_bars == 0 ? std::max(score.n_bars, 1) : window_bars;
  std::map<int, std::array<double, 12>> windows;
  for (const auto& n : score.notes)
    if (n.instrument != Instrument::Drums) windows[n.bar() / span][static_cast<std::size_t>(n.pitch % 12)] += 1;
  if (windows.empty()) throw InvalidArgument("pitch entropy needs at least one non-drum note");
  double sum = 0;
  for (const auto& [w, hist] : windows) sum += entropy_bits(hist);
  return sum / static_cast<double>(windows.size());
}

std::array<bool, kTicksPerBar> onset_pattern(const QuantizedScore& score, int bar) {
  std::array<bool, kTicksPerBar> g{};
  for (const auto& n : score.notes)
    if (n.bar() == bar) g[static_cast<std::size_t>(n.tick_in_bar() - 1)] = true;
  return g;
}

double grooving_similarity(const QuantizedScore& score) {
  if (score.n_bars < 2) throw InvalidArgument("grooving similarity needs at least 2 bars");
  std::vector<std::array<bool, kTicksPerBar>> g;
  for (int b = 0; b < score.n_bars; ++b) g.push_back(onset_pattern(score, b));
  double sum = 0;
  long pairs = 0;
  for (std::size_t a = 0; a < g.size(); ++a)
    for (std::size_t b = a + 1; b < g.size(); ++b) {
      int hamming = 0;
      for (int j = 0; j < kTicksPerBar; ++j) hamming += g[a][j] != g[b][j];
      sum += 1.0 - hamming / static_cast<double>(kTicksPerBar);
      ++pairs;
    }
  return sum / static_cast<double>(pairs);
}

double structureness(const QuantizedScore& score, int* best_lag) {
  const int bars = score.n_bars;
  if (bars < 8) throw InvalidArgument("structureness needs at least 8 bars");
  constexpr int kDims = kTicksPerBar + 12;
  std::vector<std::array<double, kDims>> f(static_cast<std::size_t>(bars));
  for (const auto& n : score.notes) {
    auto& v = f[static_cast<std::size_t>(n.bar())];
    v[static_cast<std::size_t>(n.tick_in_bar() - 1)] = 1.0;
    if (n.instrument != Instrument::Drums) v[kTicksPerBar + static_cast<std::size_t>(n.pitch % 12)] += 1.0;
  }
  for (auto& v : f) {
    for (auto [lo, hi] : {std::pair{0, kTicksPerBar}, std::pair{kTicksPerBar, kDims}}) {
      double norm = 0;
      for (int i = lo; i < hi; ++i) norm += v[i] * v[i];
      if (norm > 0)
        for (int i = lo; i < hi; ++i) v[i] /= std::sqrt(norm);
    }
  }
  auto sim = [&](int a, int b) {
    double dot = 0, na = 0, nb = 0;
    for (int i = 0; i < kDims; ++i) {
      dot += f[a][i] * f[b][i];
      na += f[a][i] * f[a][i];
      nb += f[b][i] * f[b][i];
    }
    if (na == 0 && nb == 0) return 1.0;
    if (na == 0 || nb == 0) return 0.0;
    return std::clamp(dot / std::sqrt(na * nb), 0.0, 1.0);
  };
  double best = -1;
  int arg = kMinStructureLag;
  for (int lag = kMinStructureLag; lag <= std::min(kMaxStructureLag, bars - 1); ++lag) {
    double s = 0;
    for (int i = 0; i + lag < bars; ++i) s += sim(i, i + lag);
    s /= bars - lag;
    if (s > best) best = s, arg = lag;
  }
  if (best_lag) *best_lag = arg;
  return best;
}

double matching_score(std::span<const double> d_m, std::span<const double> d_v, std::span<const double> s_m,
                      std::span<const double> s_v, double eps) {
  if (!(eps > 0)) throw InvalidArgument("matching epsilon must be positive");
  const std::size_t nd = std::min(d_m.size(), d_v.size());
  const std::size_t ns = std::min(s_m.size(), s_v.size());
  if (nd == 0 || ns == 0) throw InvalidArgument("matching score needs non-empty vectors");
  double mse_d = 0, mse_s = 0;
  for (std::size_t i = 0; i < nd; ++i) mse_d += (d_m[i] - d_v[i]) * (d_m[i] - d_v[i]);
  for (std::size_t i = 0; i < ns; ++i) {
    const double masked = s_v[i] > 0 ? s_m[i] : 0.0;
    mse_s += (masked - s_v[i]) * (masked - s_v[i]);
  }
  return 1.0 / (mse_d / static_cast<double>(nd) + mse_s / static_cast<double>(ns) + eps);
}

ControlError control_error(const TokenSequence& tokens, const video::VideoRhythm& rhythm) {
  std::vector<int> density;                 // tick tokens per bar
  std::map<long, int> strength;             // notes following the tick tokens at a global tick
  long simu_notes = 0, notes = 0;
  long tick_at = -1;
  std::set<Instrument> tick_instruments;
  for (const auto& t : tokens.body) {
    if (t.is_eos()) break;
    if (t.is_bar()) {
      density.push_back(0);
      tick_at = -1;
    } else if (t.is_tick() && !density.empty()) {
      ++density.back();
      tick_at = static_cast<long>(density.size() - 1) * kTicksPerBar + *t.beat - 1;
      strength[tick_at] += 0;
      tick_instruments.clear();
    } else if (t.is_note() && tick_at >= 0) {
      ++strength[tick_at];
      ++notes;
      if (t.instrument && tick_instruments.insert(*t.instrument).second) ++simu_notes;
    }
  }
  const double bars = static_cast<double>(density.size());
  const double per_bar = bars > 0 && simu_notes > 0 ? simu_notes / bars : 1.0;
  const double per_simu = simu_notes > 0 ? static_cast<double>(notes) / static_cast<double>(simu_notes) : 1.0;

  ControlError e;
  double d2 = 0;
  for (std::size_t m = 0; m < rhythm.bar_density_class.size(); ++m) {
    const double realized = m < density.size() ? density[m] : 0;
    d2 += std::pow(realized - rhythm.bar_density_class[m], 2);
  }
  e.density_err = std::sqrt(d2) / per_bar;
  double s2 = 0;
  for (const auto& b : rhythm.visual_beats) {
    const auto it = strength.find(b.global_tick());
    const double realized = it == strength.end() ? 0.0 : std::min(it->second, kMaxStrength);
    s2 += std::pow(realized - b.strength, 2);
  }
  e.strength_err = std::sqrt(s2) / per_simu;
  // Rhythms built by hand may carry no frame count; their beat total is then the length.
  const double video = rhythm.total_frames > 0 ? rhythm.exact_beats() : static_cast<double>(rhythm.n_beats);
  e.time_err = std::abs(bars * kBeatsPerBar - video) / video;
  return e;
}

MetricReport evaluate(const TokenSequence& tokens, const video::VideoRhythm* rhythm) {
  MetricReport r;
  const QuantizedScore score = decode(tokens, DecodeMode::Tolerant);
  r.n_bars = score.n_bars;
  r.n_notes = score.notes.size();
  for (const auto& n : score.notes)
    if (n.instrument != Instrument::Drums) {
      r.pitch_entropy = pitch_entropy(score);
      break;
    }
  if (score.n_bars >= 2) r.grooving_similarity = grooving_similarity(score);
  if (score.n_bars >= 8) r.structureness = structureness(score);
  if (rhythm) r.control = control_error(tokens, *rhythm);
  return r;
}

std::string report_to_json(const MetricReport& r) {
  auto opt = [](const std::optional<double>& v) { return v ? nlohmann::json(*v) : nlohmann::json(nullptr); };
  nlohmann::ordered_json j;
  j["schema_version"] = "1.0";
  j["n_bars"] = r.n_bars;
  j["n_notes"] = r.n_notes;
  j["pitch_entropy"] = opt(r.pitch_entropy);
  j["grooving_similarity"] = opt(r.grooving_similarity);
  j["structureness"] = opt(r.structureness);
  if (r.control)
    j["control_error"] = {{"density", r.control->density_err},
                          {"strength", r.control->strength_err},
                          {"time", r.control->time_err}};
  else
    j["control_error"] = nullptr;
  return j.dump(2) + "\n";
}

std::string report_csv_header() {
  return "id,n_bars,n_notes,pitch_entropy,grooving_similarity,structureness,density_err,strength_err,time_err\n";
}

std::string report_csv_row(const std::string& id, const MetricReport& r) {
  std::ostringstream out;
  out.precision(9);
  auto opt = [&](const std::optional<double>& v) {
    out << ',';
    if (v) out << *v;
  };
  out << id << ',' << r.n_bars << ',' << r.n_notes;
  opt(r.pitch_entropy);
  opt(r.grooving_similarity);
  opt(r.structureness);
  opt(r.control ? std::optional(r.control->density_err) : std::nullopt);
  opt(r.control ? std::optional(r.control->strength_err) : std::nullopt);
  opt(r.control ? std::optional(r.control->time_err) : std::nullopt);
  out << '\n';
  return out.str();
}

}  // namespace cmt::metrics

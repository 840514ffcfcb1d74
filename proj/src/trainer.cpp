#include "cmt/model/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

namespace cmt::model {

std::string LossHistory::to_csv() const {
  std::ostringstream out;
  out << "epoch";
  for (int a = 0; a < kNumAttrs; ++a) out << ',' << attr_name(static_cast<Attr>(a));
  out << ",total\n";
  out.precision(9);
  for (const auto& r : rows) {
    out << r.epoch;
    for (const auto& h : r.head) {
      out << ',';
      if (h) out << *h;
    }
    out << ',' << r.total << '\n';
  }
  return out.str();
}

void LossHistory::save_csv(const std::filesystem::path& path) const {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw IoError("cannot write loss history " + path.string());
  f << to_csv();
}

namespace {

struct Accumulator {
  std::array<double, kNumAttrs> sum{};
  std::array<long, kNumAttrs> count{};

  void add(const LossTerms& t) {
    for (int a = 0; a < kNumAttrs; ++a) {
      sum[a] += t.head_sum[a];
      count[a] += t.head_count[a];
    }
  }

  LossRow row(int epoch, const ModelConfig& cfg) const {
    LossRow r;
    r.epoch = epoch;
    double s = 0;
    long c = 0;
    for (int a = 0; a < kNumAttrs; ++a) {
      const bool trained = cfg.use_rhythm_attrs || (a != static_cast<int>(Attr::Density) && a != static_cast<int>(Attr::Strength));
      if (!trained) continue;
      r.head[a] = count[a] ? sum[a] / static_cast<double>(count[a]) : 0.0;
      s += sum[a];
      c += count[a];
    }
    r.total = c ? s / static_cast<double>(c) : 0.0;
    return r;
  }
};

void check_finite(double v, const std::string& where) {
  if (!std::isfinite(v)) throw TrainingError("non-finite loss " + where);
}

}  // namespace

LossRow evaluate(const Transformer& model, const std::vector<SequenceInput>& inputs) {
  Accumulator acc;
  for (const auto& in : inputs) {
    Tape tape;
    acc.add(model.loss(tape, in, false, nullptr, 1.0));
  }
  return acc.row(0, model.config());
}

LossHistory train(Transformer& model, const std::vector<TokenSequence>& corpus, const TrainConfig& config,
                  const EpochCallback& on_epoch) {
  if (corpus.empty()) throw InvalidArgument("training corpus is empty");
  if (config.epochs < 0 || config.batch_size < 1 || !(config.learning_rate > 0))
    throw InvalidArgument("bad training configuration");
  std::vector<SequenceInput> inputs;
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    inputs.push_back(make_sequence_input(corpus[i]));
    if (static_cast<int>(inputs.back().rows()) > model.config().max_len)
      throw InvalidArgument("training sequence " + std::to_string(i) + " exceeds the max length");
  }

  std::mt19937_64 order_rng(config.seed);
  std::mt19937_64 dropout_rng(config.seed ^ 0x9e3779b97f4a7c15ULL);
  auto params = model.params();
  for (Param* p : params) {
    p->reset_grad();
    p->adam_m = Mat::Zero(p->value.rows(), p->value.cols());
    p->adam_v = Mat::Zero(p->value.rows(), p->value.cols());
  }

  LossHistory history;
  auto record = [&](int epoch) {
    LossRow row = evaluate(model, inputs);
    row.epoch = epoch;
    check_finite(row.total, "in evaluation after epoch " + std::to_string(epoch));
    history.rows.push_back(row);
    if (on_epoch) on_epoch(row);
  };
  record(0);

  long step = 0;
  std::vector<std::size_t> order(inputs.size());
  std::iota(order.begin(), order.end(), 0);
  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), order_rng);
    for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(config.batch_size)) {
      const std::size_t end = std::min(order.size(), start + static_cast<std::size_t>(config.batch_size));
      int targets = 0;
      for (std::size_t k = start; k < end; ++k) targets += model.count_targets(inputs[order[k]]);
      if (targets == 0) continue;
      for (std::size_t k = start; k < end; ++k) {
        Tape tape;
        const LossTerms t = model.loss(tape, inputs[order[k]], true, &dropout_rng, 1.0 / targets);
        check_finite(tape.value(t.total)(0, 0),
                     "at epoch " + std::to_string(epoch) + ", sequence " + std::to_string(order[k]));
        tape.backward(t.total);
      }
      ++step;
      const double c1 = 1.0 - std::pow(config.beta1, static_cast<double>(step));
      const double c2 = 1.0 - std::pow(config.beta2, static_cast<double>(step));
      for (Param* p : params) {
        if (!p->grad.allFinite()) throw TrainingError("non-finite gradient in " + p->name);
        p->adam_m = config.beta1 * p->adam_m + (1 - config.beta1) * p->grad;
        p->adam_v = config.beta2 * p->adam_v + (1 - config.beta2) * p->grad.cwiseProduct(p->grad);
        p->value.array() -= config.learning_rate * (p->adam_m.array() / c1) /
                            ((p->adam_v.array() / c2).sqrt() + config.adam_eps);
        round_to_float(*p);
        p->grad.setZero();
      }
    }
    record(epoch);
  }
  return history;
}

std::vector<GradCheckEntry> gradient_check(Transformer& model, const SequenceInput& input, int count,
                                           std::uint64_t seed, double step) {
  auto params = model.params();
  for (Param* p : params) p->reset_grad();
  const int targets = model.count_targets(input);
  if (targets == 0) throw InvalidArgument("input has no loss targets");
  const double scale = 1.0 / targets;
  auto loss_value = [&] {
    Tape tape;
    const LossTerms t = model.loss(tape, input, false, nullptr, scale);
    return tape.value(t.total)(0, 0);
  };
  {
    Tape tape;
    const LossTerms t = model.loss(tape, input, false, nullptr, scale);
    tape.backward(t.total);
  }

  std::vector<std::pair<Param*, long>> live;
  for (Param* p : params)
    for (long i = 0; i < p->grad.size(); ++i)
      if (std::abs(p->grad.data()[i]) > 1e-12) live.emplace_back(p, i);
  if (live.empty()) throw InvalidArgument("no parameter receives gradient");

  std::mt19937_64 rng(seed);
  std::vector<GradCheckEntry> out;
  for (int k = 0; k < count; ++k) {
    auto [p, i] = live[std::uniform_int_distribution<std::size_t>(0, live.size() - 1)(rng)];
    double& w = p->value.data()[i];
    const double saved = w;
    w = saved + step;
    const double up = loss_value();
    w = saved - step;
    const double down = loss_value();
    w = saved;
    GradCheckEntry e{p->name, i, p->grad.data()[i], (up - down) / (2 * step), 0};
    e.rel_error = std::abs(e.analytic - e.numeric) / std::max({std::abs(e.analytic), std::abs(e.numeric), 1e-8});
    out.push_back(e);
  }
  for (Param* p : params) p->reset_grad();
  return out;
}

}  // namespace cmt::model

#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "cmt/error.hpp"
#include "cmt/model/transformer.hpp"

namespace cmt::model {

struct TrainConfig {
  int epochs = 50;
  double learning_rate = 1e-4;
  int batch_size = 1;
  std::uint64_t seed = 0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
};

// Eval-mode teacher-forced losses over the whole corpus. Heads the model does not train
// (the ablation drops density and strength) are nullopt.
struct LossRow {
  int epoch = 0;  // 0 = before training
  std::array<std::optional<double>, kNumAttrs> head{};
  double total = 0;  // mean over all unmasked (position, head) pairs
};

struct LossHistory {
  std::vector<LossRow> rows;
  std::string to_csv() const;
  void save_csv(const std::filesystem::path& path) const;
};

class TrainingError : public Error {
 public:
  using Error::Error;
};

// Mean teacher-forced loss of `model` over `inputs` with dropout disabled.
LossRow evaluate(const Transformer& model, const std::vector<SequenceInput>& inputs);

using EpochCallback = std::function<void(const LossRow&)>;

// Adam on the mean cross-entropy over unmasked attribute positions of each batch. Each
// sequence uses its own bar count for the beat-timing encoding.
LossHistory train(Transformer& model, const std::vector<TokenSequence>& corpus, const TrainConfig& config,
                  const EpochCallback& on_epoch = {});

struct GradCheckEntry {
  std::string param;
  long index = 0;
  double analytic = 0;
  double numeric = 0;
  double rel_error = 0;
};

// Compares backprop gradients of the eval-mode loss with central differences on `count`
// randomly chosen scalars that receive gradient.
std::vector<GradCheckEntry> gradient_check(Transformer& model, const SequenceInput& input, int count,
                                           std::uint64_t seed, double step = 1e-5);

}  // namespace cmt::model

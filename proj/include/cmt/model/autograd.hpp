#pragma once

#include <Eigen/Core>
#include <functional>
#include <random>
#include <span>
#include <string>
#include <vector>

namespace cmt::model {

using Mat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using RowVec = Eigen::Matrix<double, 1, Eigen::Dynamic>;

// A trainable tensor with its gradient accumulator and Adam moments.
struct Param {
  std::string name;
  Mat value;
  Mat grad;
  Mat adam_m;
  Mat adam_v;

  Param() = default;
  Param(std::string n, Mat v) : name(std::move(n)), value(std::move(v)) { reset_grad(); }
  void reset_grad() { grad = Mat::Zero(value.rows(), value.cols()); }
};

// Shared math used both by the tape ops and by the tape-free incremental decoder.
namespace ops {
Mat layer_norm(const Mat& x, const Param& gamma, const Param& beta, Mat* normalized = nullptr,
               RowVec* inv_std = nullptr);
Mat gelu(const Mat& x);
double gelu_grad(double x);
// Causal multi-head attention of q over the first `keys` rows of k/v, with query row r
// allowed to see keys <= key_offset + r.
Mat attention(const Mat& q, const Mat& k, const Mat& v, int heads, long key_offset,
              std::vector<Mat>* probs = nullptr);
Mat sinusoid(std::span<const int> positions, int d_model);
}  // namespace ops

// Reverse-mode tape over row-major matrices.
class Tape {
 public:
  using Var = int;

  Var constant(Mat value);
  // n x dim rows of `table` selected by `rows`.
  Var gather(Param& table, std::span<const int> rows);
  Var linear(Var x, Param& weight, Param* bias);
  Var add(Var a, Var b);
  Var concat_cols(std::span<const Var> parts);
  Var concat_rows(std::span<const Var> parts);
  Var slice_rows(Var x, long begin, long count);
  Var layer_norm(Var x, Param& gamma, Param& beta);
  Var gelu(Var x);
  Var dropout(Var x, double rate, std::mt19937_64& rng);
  Var causal_attention(Var q, Var k, Var v, int heads);
  // scale * sum_i weight_i * CE(softmax(logits_i), target_i); rows with weight 0 are skipped.
  Var cross_entropy(Var logits, std::span<const int> targets, std::span<const double> weights, double scale);
  Var sum(std::span<const Var> scalars);

  const Mat& value(Var v) const { return nodes_[v].value; }
  void backward(Var scalar);
  std::size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    Mat value;
    Mat grad;
    std::function<void()> backward;
  };
  Var push(Mat value, std::function<void()> backward = {});
  Mat& grad(Var v);

  std::vector<Node> nodes_;
};

}  // namespace cmt::model

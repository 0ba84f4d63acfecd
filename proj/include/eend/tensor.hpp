#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "eend/errors.hpp"

namespace eend {

// Dense row-major matrix of 64-bit floats. Everything the model touches is a
// matrix, a row vector (1xD) or a scalar (1x1), so the core stays strictly
// two-dimensional.
class Tensor {
 public:
  Tensor() = default;
  Tensor(std::size_t rows, std::size_t cols)
      : rows_(rows), cols_(cols), data_(rows * cols, 0.0) {}
  Tensor(std::size_t rows, std::size_t cols, std::vector<double> values);

  static Tensor zeros(std::size_t rows, std::size_t cols) { return Tensor(rows, cols); }
  static Tensor full(std::size_t rows, std::size_t cols, double v);
  static Tensor identity(std::size_t n);
  static Tensor scalar(double v) { return Tensor(1, 1, {v}); }

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t size() const { return data_.size(); }
  std::vector<std::size_t> shape() const { return {rows_, cols_}; }
  bool same_shape(const Tensor& o) const { return rows_ == o.rows_ && cols_ == o.cols_; }

  double& at(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double at(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }
  double* row_ptr(std::size_t r) { return data_.data() + r * cols_; }
  const double* row_ptr(std::size_t r) const { return data_.data() + r * cols_; }

  std::vector<double>& data() { return data_; }
  const std::vector<double>& data() const { return data_; }

  double item() const;  // value of a 1x1 tensor
  bool all_finite() const;
  double max_abs_diff(const Tensor& o) const;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

// One recorded operation in the computation graph. Nodes are created by the
// op builders below and linked through `parents`; `backprop` pushes this
// node's gradient into the parents' gradient buffers.
struct Node {
  Tensor value;
  Tensor grad;
  bool requires_grad = false;  // leaf parameter
  bool consumed = false;       // a backward pass already ran through here
  std::vector<std::shared_ptr<Node>> parents;
  std::function<void(Node&)> backprop;
  std::string name;

  bool is_leaf() const { return parents.empty(); }
  void ensure_grad() {
    if (grad.size() != value.size()) grad = Tensor::zeros(value.rows(), value.cols());
  }
};

// Shared handle to a graph node. Cheap to copy; ops take and return Values.
class Value {
 public:
  Value() = default;
  explicit Value(std::shared_ptr<Node> n) : node_(std::move(n)) {}

  static Value constant(Tensor t);
  static Value parameter(Tensor t, std::string name = "");

  bool defined() const { return node_ != nullptr; }
  const Tensor& val() const { return node_->value; }
  const Tensor& grad() const { return node_->grad; }
  Tensor& mutable_grad() { return node_->grad; }
  bool requires_grad() const { return node_->requires_grad; }
  const std::string& name() const { return node_->name; }
  std::shared_ptr<Node> node() const { return node_; }

  std::size_t rows() const { return node_->value.rows(); }
  std::size_t cols() const { return node_->value.cols(); }

  void zero_grad() { node_->grad = Tensor::zeros(rows(), cols()); }

 private:
  std::shared_ptr<Node> node_;
};

// While a guard is alive, op builders skip recording parents/backprop and the
// graph degenerates to plain forward evaluation.
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;
};
bool grad_enabled();

// Reverse-mode pass from a scalar root. Visits every reachable node exactly
// once in reverse topological order, accumulating into leaf gradients.
// Throws GraphError if the graph was already consumed by a prior backward.
void backward(const Value& root);

// ---- differentiable ops -------------------------------------------------

Value matmul(const Value& a, const Value& b);
Value matmul_nt_scaled(const Value& a, const Value& b, double s);  // s * (a . b^T)
Value add(const Value& a, const Value& b);            // same shape
Value add_rowvec(const Value& a, const Value& v);     // v is 1 x cols, broadcast over rows
Value sub(const Value& a, const Value& b);
Value mul(const Value& a, const Value& b);            // elementwise
Value scale(const Value& a, double c);
Value transpose(const Value& a);
Value sigmoid(const Value& a);
Value tanh(const Value& a);
Value relu(const Value& a);
Value softmax_rows(const Value& a);
Value slice_rows(const Value& a, std::size_t r0, std::size_t r1);
Value slice_cols(const Value& a, std::size_t c0, std::size_t c1);
Value concat_rows(const std::vector<Value>& parts);
Value concat_cols(const std::vector<Value>& parts);
Value sum(const Value& a);                            // 1x1

// Identity forward; backward stops here, so gradients never reach the
// ancestors of the marked value.
Value stop_gradient(const Value& a);

// Summed binary cross entropy sum{-y log p - (1-y) log(1-p)} with p clamped
// to [1e-7, 1 - 1e-7] before the logs. Targets are constants in {0,1}.
Value bce_sum(const Tensor& targets, const Value& p);

// Row-wise layer normalization with affine transform; variance epsilon 1e-5.
Value layer_norm(const Value& x, const Value& gain, const Value& bias);

struct LstmParams {
  Value w_ih;  // D_in x 4H, gate order (input, forget, cell, output)
  Value w_hh;  // H x 4H
  Value b;     // 1 x 4H
  std::size_t hidden() const { return w_hh.rows(); }
};

struct LstmState {
  Value h;  // 1 x H
  Value c;  // 1 x H
};

// Standard LSTM cell recursion; x is 1 x D_in.
LstmState lstm_cell(const Value& x, const LstmState& state, const LstmParams& p);

// Whole-sequence LSTM fused into one graph node: consumes the rows of
// `inputs` (T x D_in) in the given visit order from a zero initial state and
// returns [h_T | c_T] as 1 x 2H. Forward/backward are hand-rolled
// backpropagation-through-time; unit tests pin it to the step-by-step
// lstm_cell route.
Value lstm_sequence_final(const Value& inputs, const std::vector<std::size_t>& order,
                          const LstmParams& p);

struct AttentionParams {
  Value wq, bq;  // D x D, 1 x D
  Value wk, bk;
  Value wv, bv;
  Value wo, bo;
};

// Scaled dot-product attention over rows of x (T x D), per head, concatenated
// and projected. No positional information anywhere.
Value multi_head_self_attention(const Value& x, const AttentionParams& p, std::size_t num_heads);

}  // namespace eend

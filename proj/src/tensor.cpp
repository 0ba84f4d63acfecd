#include "eend/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_map>
#include <utility>

namespace eend {

namespace {

thread_local int g_no_grad_depth = 0;

void check_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (!a.same_shape(b)) {
    throw DimensionError(std::string(op) + ": shape mismatch " +
                         std::to_string(a.rows()) + "x" + std::to_string(a.cols()) + " vs " +
                         std::to_string(b.rows()) + "x" + std::to_string(b.cols()));
  }
}

// C += alpha * A * B, all row-major. k-contiguous inner loops so the compiler
// can vectorize; these three kernels carry the whole training workload.
// Batching four rank-1 updates per pass roughly halves the traffic on C.
void gemm_nn(const Tensor& a, const Tensor& b, Tensor& c, double alpha = 1.0) {
  const std::size_t n = a.rows(), k = a.cols(), m = b.cols();
  for (std::size_t i = 0; i < n; ++i) {
    const double* arow = a.row_ptr(i);
    double* crow = c.row_ptr(i);
    std::size_t p = 0;
    for (; p + 4 <= k; p += 4) {
      const double a0 = alpha * arow[p], a1 = alpha * arow[p + 1];
      const double a2 = alpha * arow[p + 2], a3 = alpha * arow[p + 3];
      if (a0 == 0.0 && a1 == 0.0 && a2 == 0.0 && a3 == 0.0) continue;
      const double* b0 = b.row_ptr(p);
      const double* b1 = b.row_ptr(p + 1);
      const double* b2 = b.row_ptr(p + 2);
      const double* b3 = b.row_ptr(p + 3);
      for (std::size_t j = 0; j < m; ++j)
        crow[j] += a0 * b0[j] + a1 * b1[j] + a2 * b2[j] + a3 * b3[j];
    }
    for (; p < k; ++p) {
      const double av = alpha * arow[p];
      if (av == 0.0) continue;
      const double* brow = b.row_ptr(p);
      for (std::size_t j = 0; j < m; ++j) crow[j] += av * brow[j];
    }
  }
}

// Four accumulators break the serial FP dependency chain; the fixed
// summation order keeps results deterministic.
double dot(const double* a, const double* b, std::size_t n) {
  double s0 = 0.0, s1 = 0.0, s2 = 0.0, s3 = 0.0;
  std::size_t p = 0;
  for (; p + 4 <= n; p += 4) {
    s0 += a[p] * b[p];
    s1 += a[p + 1] * b[p + 1];
    s2 += a[p + 2] * b[p + 2];
    s3 += a[p + 3] * b[p + 3];
  }
  for (; p < n; ++p) s0 += a[p] * b[p];
  return (s0 + s1) + (s2 + s3);
}

// C += alpha * A * B^T
void gemm_nt(const Tensor& a, const Tensor& b, Tensor& c, double alpha = 1.0) {
  const std::size_t n = a.rows(), k = a.cols(), m = b.rows();
  for (std::size_t i = 0; i < n; ++i) {
    const double* arow = a.row_ptr(i);
    double* crow = c.row_ptr(i);
    for (std::size_t j = 0; j < m; ++j) {
      crow[j] += alpha * dot(arow, b.row_ptr(j), k);
    }
  }
}

// C += alpha * A^T * B
void gemm_tn(const Tensor& a, const Tensor& b, Tensor& c, double alpha = 1.0) {
  const std::size_t k = a.rows(), n = a.cols(), m = b.cols();
  std::size_t p = 0;
  for (; p + 4 <= k; p += 4) {
    const double* a0 = a.row_ptr(p);
    const double* a1 = a.row_ptr(p + 1);
    const double* a2 = a.row_ptr(p + 2);
    const double* a3 = a.row_ptr(p + 3);
    const double* b0 = b.row_ptr(p);
    const double* b1 = b.row_ptr(p + 1);
    const double* b2 = b.row_ptr(p + 2);
    const double* b3 = b.row_ptr(p + 3);
    for (std::size_t i = 0; i < n; ++i) {
      const double v0 = alpha * a0[i], v1 = alpha * a1[i];
      const double v2 = alpha * a2[i], v3 = alpha * a3[i];
      if (v0 == 0.0 && v1 == 0.0 && v2 == 0.0 && v3 == 0.0) continue;
      double* crow = c.row_ptr(i);
      for (std::size_t j = 0; j < m; ++j)
        crow[j] += v0 * b0[j] + v1 * b1[j] + v2 * b2[j] + v3 * b3[j];
    }
  }
  for (; p < k; ++p) {
    const double* arow = a.row_ptr(p);
    const double* brow = b.row_ptr(p);
    for (std::size_t i = 0; i < n; ++i) {
      const double av = alpha * arow[i];
      if (av == 0.0) continue;
      double* crow = c.row_ptr(i);
      for (std::size_t j = 0; j < m; ++j) crow[j] += av * brow[j];
    }
  }
}

std::shared_ptr<Node> make_node(Tensor value, std::vector<std::shared_ptr<Node>> parents,
                                std::function<void(Node&)> backprop) {
  auto n = std::make_shared<Node>();
  n->value = std::move(value);
  if (grad_enabled()) {
    bool any_grad_path = false;
    for (const auto& p : parents) {
      if (p->requires_grad || !p->is_leaf()) {
        any_grad_path = true;
        break;
      }
    }
    if (any_grad_path) {
      n->parents = std::move(parents);
      n->backprop = std::move(backprop);
    }
  }
  return n;
}

}  // namespace

Tensor::Tensor(std::size_t rows, std::size_t cols, std::vector<double> values)
    : rows_(rows), cols_(cols), data_(std::move(values)) {
  if (data_.size() != rows_ * cols_) {
    throw DimensionError("Tensor: data length " + std::to_string(data_.size()) +
                         " does not match shape " + std::to_string(rows_) + "x" +
                         std::to_string(cols_));
  }
}

Tensor Tensor::full(std::size_t rows, std::size_t cols, double v) {
  Tensor t(rows, cols);
  std::fill(t.data_.begin(), t.data_.end(), v);
  return t;
}

Tensor Tensor::identity(std::size_t n) {
  Tensor t(n, n);
  for (std::size_t i = 0; i < n; ++i) t.at(i, i) = 1.0;
  return t;
}

double Tensor::item() const {
  if (size() != 1) throw DimensionError("item: tensor is not a scalar");
  return data_[0];
}

bool Tensor::all_finite() const {
  for (double v : data_)
    if (!std::isfinite(v)) return false;
  return true;
}

double Tensor::max_abs_diff(const Tensor& o) const {
  check_same_shape(*this, o, "max_abs_diff");
  double m = 0.0;
  for (std::size_t i = 0; i < data_.size(); ++i)
    m = std::max(m, std::abs(data_[i] - o.data_[i]));
  return m;
}

NoGradGuard::NoGradGuard() { ++g_no_grad_depth; }
NoGradGuard::~NoGradGuard() { --g_no_grad_depth; }
bool grad_enabled() { return g_no_grad_depth == 0; }

Value Value::constant(Tensor t) {
  auto n = std::make_shared<Node>();
  n->value = std::move(t);
  return Value(std::move(n));
}

Value Value::parameter(Tensor t, std::string name) {
  auto n = std::make_shared<Node>();
  n->value = std::move(t);
  n->requires_grad = true;
  n->name = std::move(name);
  n->ensure_grad();
  return Value(std::move(n));
}

void backward(const Value& root) {
  if (!root.defined()) throw GraphError("backward: undefined root");
  if (root.val().size() != 1) throw GraphError("backward: root must be a scalar");
  Node* root_node = root.node().get();
  if (root_node->consumed) {
    throw GraphError("backward: graph already consumed; rebuild the forward pass first");
  }

  // Iterative DFS; LSTM graphs chain thousands of nodes deep.
  std::vector<Node*> topo;
  std::vector<std::pair<Node*, std::size_t>> stack;
  stack.emplace_back(root_node, 0);
  // visited: 1 = on stack, 2 = finished
  std::unordered_map<Node*, int> state;
  state.reserve(1024);
  state[root_node] = 1;
  while (!stack.empty()) {
    auto& [node, idx] = stack.back();
    if (idx < node->parents.size()) {
      Node* parent = node->parents[idx].get();
      ++idx;
      auto it = state.find(parent);
      if (it == state.end()) {
        state[parent] = 1;
        stack.emplace_back(parent, 0);
      }
    } else {
      state[node] = 2;
      topo.push_back(node);
      stack.pop_back();
    }
  }

  for (Node* n : topo) {
    if (!n->is_leaf() || n->requires_grad) n->ensure_grad();
  }
  root_node->grad.data()[0] = 1.0;

  for (auto it = topo.rbegin(); it != topo.rend(); ++it) {
    Node* n = *it;
    if (n->backprop) n->backprop(*n);
    if (!n->is_leaf()) n->consumed = true;
  }
}

// ---- op builders ---------------------------------------------------------

Value matmul(const Value& a, const Value& b) {
  if (a.cols() != b.rows()) {
    throw DimensionError("matmul: inner dimensions disagree (" + std::to_string(a.cols()) +
                         " vs " + std::to_string(b.rows()) + ")");
  }
  Tensor out(a.rows(), b.cols());
  gemm_nn(a.val(), b.val(), out);
  auto an = a.node(), bn = b.node();
  return Value(make_node(std::move(out), {an, bn}, [an, bn](Node& self) {
    if (an->requires_grad || !an->is_leaf()) gemm_nt(self.grad, bn->value, an->grad);
    if (bn->requires_grad || !bn->is_leaf()) gemm_tn(an->value, self.grad, bn->grad);
  }));
}

Value matmul_nt_scaled(const Value& a, const Value& b, double s) {
  if (a.cols() != b.cols()) {
    throw DimensionError("matmul_nt_scaled: inner dimensions disagree (" +
                         std::to_string(a.cols()) + " vs " + std::to_string(b.cols()) + ")");
  }
  Tensor out(a.rows(), b.rows());
  gemm_nt(a.val(), b.val(), out, s);
  auto an = a.node(), bn = b.node();
  return Value(make_node(std::move(out), {an, bn}, [an, bn, s](Node& self) {
    if (an->requires_grad || !an->is_leaf()) gemm_nn(self.grad, bn->value, an->grad, s);
    if (bn->requires_grad || !bn->is_leaf()) gemm_tn(self.grad, an->value, bn->grad, s);
  }));
}

Value add(const Value& a, const Value& b) {
  check_same_shape(a.val(), b.val(), "add");
  Tensor out = a.val();
  const auto& bd = b.val().data();
  for (std::size_t i = 0; i < bd.size(); ++i) out.data()[i] += bd[i];
  auto an = a.node(), bn = b.node();
  return Value(make_node(std::move(out), {an, bn}, [an, bn](Node& self) {
    const auto& g = self.grad.data();
    if (an->requires_grad || !an->is_leaf())
      for (std::size_t i = 0; i < g.size(); ++i) an->grad.data()[i] += g[i];
    if (bn->requires_grad || !bn->is_leaf())
      for (std::size_t i = 0; i < g.size(); ++i) bn->grad.data()[i] += g[i];
  }));
}

Value add_rowvec(const Value& a, const Value& v) {
  if (v.rows() != 1 || v.cols() != a.cols()) {
    throw DimensionError("add_rowvec: vector must be 1x" + std::to_string(a.cols()));
  }
  Tensor out = a.val();
  const double* vd = v.val().row_ptr(0);
  for (std::size_t r = 0; r < out.rows(); ++r) {
    double* row = out.row_ptr(r);
    for (std::size_t c = 0; c < out.cols(); ++c) row[c] += vd[c];
  }
  auto an = a.node(), vn = v.node();
  return Value(make_node(std::move(out), {an, vn}, [an, vn](Node& self) {
    if (an->requires_grad || !an->is_leaf())
      for (std::size_t i = 0; i < self.grad.size(); ++i)
        an->grad.data()[i] += self.grad.data()[i];
    if (vn->requires_grad || !vn->is_leaf()) {
      double* vg = vn->grad.row_ptr(0);
      for (std::size_t r = 0; r < self.grad.rows(); ++r) {
        const double* grow = self.grad.row_ptr(r);
        for (std::size_t c = 0; c < self.grad.cols(); ++c) vg[c] += grow[c];
      }
    }
  }));
}

Value sub(const Value& a, const Value& b) {
  check_same_shape(a.val(), b.val(), "sub");
  Tensor out = a.val();
  for (std::size_t i = 0; i < out.size(); ++i) out.data()[i] -= b.val().data()[i];
  auto an = a.node(), bn = b.node();
  return Value(make_node(std::move(out), {an, bn}, [an, bn](Node& self) {
    const auto& g = self.grad.data();
    if (an->requires_grad || !an->is_leaf())
      for (std::size_t i = 0; i < g.size(); ++i) an->grad.data()[i] += g[i];
    if (bn->requires_grad || !bn->is_leaf())
      for (std::size_t i = 0; i < g.size(); ++i) bn->grad.data()[i] -= g[i];
  }));
}

Value mul(const Value& a, const Value& b) {
  check_same_shape(a.val(), b.val(), "mul");
  Tensor out = a.val();
  for (std::size_t i = 0; i < out.size(); ++i) out.data()[i] *= b.val().data()[i];
  auto an = a.node(), bn = b.node();
  return Value(make_node(std::move(out), {an, bn}, [an, bn](Node& self) {
    const auto& g = self.grad.data();
    if (an->requires_grad || !an->is_leaf())
      for (std::size_t i = 0; i < g.size(); ++i) an->grad.data()[i] += g[i] * bn->value.data()[i];
    if (bn->requires_grad || !bn->is_leaf())
      for (std::size_t i = 0; i < g.size(); ++i) bn->grad.data()[i] += g[i] * an->value.data()[i];
  }));
}

Value scale(const Value& a, double c) {
  Tensor out = a.val();
  for (double& v : out.data()) v *= c;
  auto an = a.node();
  return Value(make_node(std::move(out), {an}, [an, c](Node& self) {
    for (std::size_t i = 0; i < self.grad.size(); ++i)
      an->grad.data()[i] += c * self.grad.data()[i];
  }));
}

Value transpose(const Value& a) {
  Tensor out(a.cols(), a.rows());
  for (std::size_t r = 0; r < a.rows(); ++r)
    for (std::size_t c = 0; c < a.cols(); ++c) out.at(c, r) = a.val().at(r, c);
  auto an = a.node();
  return Value(make_node(std::move(out), {an}, [an](Node& self) {
    for (std::size_t r = 0; r < self.grad.rows(); ++r)
      for (std::size_t c = 0; c < self.grad.cols(); ++c)
        an->grad.at(c, r) += self.grad.at(r, c);
  }));
}

Value sigmoid(const Value& a) {
  Tensor out = a.val();
  for (double& v : out.data()) v = 1.0 / (1.0 + std::exp(-v));
  auto an = a.node();
  return Value(make_node(std::move(out), {an}, [an](Node& self) {
    for (std::size_t i = 0; i < self.grad.size(); ++i) {
      double s = self.value.data()[i];
      an->grad.data()[i] += self.grad.data()[i] * s * (1.0 - s);
    }
  }));
}

Value tanh(const Value& a) {
  Tensor out = a.val();
  for (double& v : out.data()) v = std::tanh(v);
  auto an = a.node();
  return Value(make_node(std::move(out), {an}, [an](Node& self) {
    for (std::size_t i = 0; i < self.grad.size(); ++i) {
      double t = self.value.data()[i];
      an->grad.data()[i] += self.grad.data()[i] * (1.0 - t * t);
    }
  }));
}

Value relu(const Value& a) {
  Tensor out = a.val();
  for (double& v : out.data()) v = v > 0.0 ? v : 0.0;
  auto an = a.node();
  return Value(make_node(std::move(out), {an}, [an](Node& self) {
    for (std::size_t i = 0; i < self.grad.size(); ++i)
      if (an->value.data()[i] > 0.0) an->grad.data()[i] += self.grad.data()[i];
  }));
}

Value softmax_rows(const Value& a) {
  Tensor out = a.val();
  for (std::size_t r = 0; r < out.rows(); ++r) {
    double* row = out.row_ptr(r);
    double mx = row[0];
    for (std::size_t c = 1; c < out.cols(); ++c) mx = std::max(mx, row[c]);
    double sum = 0.0;
    for (std::size_t c = 0; c < out.cols(); ++c) {
      row[c] = std::exp(row[c] - mx);
      sum += row[c];
    }
    for (std::size_t c = 0; c < out.cols(); ++c) row[c] /= sum;
  }
  auto an = a.node();
  return Value(make_node(std::move(out), {an}, [an](Node& self) {
    for (std::size_t r = 0; r < self.value.rows(); ++r) {
      const double* y = self.value.row_ptr(r);
      const double* gy = self.grad.row_ptr(r);
      double dot = 0.0;
      for (std::size_t c = 0; c < self.value.cols(); ++c) dot += y[c] * gy[c];
      double* gx = an->grad.row_ptr(r);
      for (std::size_t c = 0; c < self.value.cols(); ++c) gx[c] += y[c] * (gy[c] - dot);
    }
  }));
}

Value slice_rows(const Value& a, std::size_t r0, std::size_t r1) {
  if (r0 > r1 || r1 > a.rows()) throw DimensionError("slice_rows: range out of bounds");
  Tensor out(r1 - r0, a.cols());
  for (std::size_t r = r0; r < r1; ++r)
    for (std::size_t c = 0; c < a.cols(); ++c) out.at(r - r0, c) = a.val().at(r, c);
  auto an = a.node();
  return Value(make_node(std::move(out), {an}, [an, r0](Node& self) {
    for (std::size_t r = 0; r < self.grad.rows(); ++r)
      for (std::size_t c = 0; c < self.grad.cols(); ++c)
        an->grad.at(r0 + r, c) += self.grad.at(r, c);
  }));
}

Value slice_cols(const Value& a, std::size_t c0, std::size_t c1) {
  if (c0 > c1 || c1 > a.cols()) throw DimensionError("slice_cols: range out of bounds");
  Tensor out(a.rows(), c1 - c0);
  for (std::size_t r = 0; r < a.rows(); ++r)
    for (std::size_t c = c0; c < c1; ++c) out.at(r, c - c0) = a.val().at(r, c);
  auto an = a.node();
  return Value(make_node(std::move(out), {an}, [an, c0](Node& self) {
    for (std::size_t r = 0; r < self.grad.rows(); ++r)
      for (std::size_t c = 0; c < self.grad.cols(); ++c)
        an->grad.at(r, c0 + c) += self.grad.at(r, c);
  }));
}

Value concat_rows(const std::vector<Value>& parts) {
  if (parts.empty()) throw DimensionError("concat_rows: no parts");
  std::size_t cols = parts[0].cols(), rows = 0;
  for (const auto& p : parts) {
    if (p.cols() != cols) throw DimensionError("concat_rows: column mismatch");
    rows += p.rows();
  }
  Tensor out(rows, cols);
  std::size_t r = 0;
  std::vector<std::shared_ptr<Node>> parents;
  parents.reserve(parts.size());
  for (const auto& p : parts) {
    for (std::size_t i = 0; i < p.rows(); ++i)
      for (std::size_t c = 0; c < cols; ++c) out.at(r + i, c) = p.val().at(i, c);
    r += p.rows();
    parents.push_back(p.node());
  }
  auto ps = parents;
  return Value(make_node(std::move(out), std::move(parents), [ps](Node& self) {
    std::size_t r0 = 0;
    for (const auto& p : ps) {
      if (p->requires_grad || !p->is_leaf()) {
        for (std::size_t i = 0; i < p->value.rows(); ++i)
          for (std::size_t c = 0; c < p->value.cols(); ++c)
            p->grad.at(i, c) += self.grad.at(r0 + i, c);
      }
      r0 += p->value.rows();
    }
  }));
}

Value concat_cols(const std::vector<Value>& parts) {
  if (parts.empty()) throw DimensionError("concat_cols: no parts");
  std::size_t rows = parts[0].rows(), cols = 0;
  for (const auto& p : parts) {
    if (p.rows() != rows) throw DimensionError("concat_cols: row mismatch");
    cols += p.cols();
  }
  Tensor out(rows, cols);
  std::size_t c0 = 0;
  std::vector<std::shared_ptr<Node>> parents;
  parents.reserve(parts.size());
  for (const auto& p : parts) {
    for (std::size_t r = 0; r < rows; ++r)
      for (std::size_t c = 0; c < p.cols(); ++c) out.at(r, c0 + c) = p.val().at(r, c);
    c0 += p.cols();
    parents.push_back(p.node());
  }
  auto ps = parents;
  return Value(make_node(std::move(out), std::move(parents), [ps](Node& self) {
    std::size_t c0 = 0;
    for (const auto& p : ps) {
      if (p->requires_grad || !p->is_leaf()) {
        for (std::size_t r = 0; r < p->value.rows(); ++r)
          for (std::size_t c = 0; c < p->value.cols(); ++c)
            p->grad.at(r, c) += self.grad.at(r, c0 + c);
      }
      c0 += p->value.cols();
    }
  }));
}

Value sum(const Value& a) {
  double s = 0.0;
  for (double v : a.val().data()) s += v;
  auto an = a.node();
  return Value(make_node(Tensor::scalar(s), {an}, [an](Node& self) {
    double g = self.grad.data()[0];
    for (double& v : an->grad.data()) v += g;
  }));
}

Value stop_gradient(const Value& a) {
  // Recorded with no parents: the backward pass never reaches the ancestors.
  auto n = std::make_shared<Node>();
  n->value = a.val();
  return Value(std::move(n));
}

Value bce_sum(const Tensor& targets, const Value& p) {
  check_same_shape(targets, p.val(), "bce_sum");
  constexpr double kEps = 1e-7;
  double loss = 0.0;
  const auto& pd = p.val().data();
  for (std::size_t i = 0; i < pd.size(); ++i) {
    double pc = std::clamp(pd[i], kEps, 1.0 - kEps);
    double y = targets.data()[i];
    loss += -y * std::log(pc) - (1.0 - y) * std::log(1.0 - pc);
  }
  auto pn = p.node();
  Tensor y = targets;
  return Value(make_node(Tensor::scalar(loss), {pn}, [pn, y, kEps](Node& self) {
    double g = self.grad.data()[0];
    for (std::size_t i = 0; i < y.size(); ++i) {
      double pv = pn->value.data()[i];
      if (pv <= kEps || pv >= 1.0 - kEps) continue;  // clamp region: flat
      pn->grad.data()[i] += g * (pv - y.data()[i]) / (pv * (1.0 - pv));
    }
  }));
}

Value layer_norm(const Value& x, const Value& gain, const Value& bias) {
  const std::size_t d = x.cols();
  if (d == 0) throw DimensionError("layer_norm: empty rows");
  if (gain.rows() != 1 || gain.cols() != d || bias.rows() != 1 || bias.cols() != d)
    throw DimensionError("layer_norm: gain/bias must be 1x" + std::to_string(d));
  constexpr double kEps = 1e-5;

  Tensor out(x.rows(), d);
  Tensor xhat(x.rows(), d);
  std::vector<double> inv_std(x.rows());
  for (std::size_t r = 0; r < x.rows(); ++r) {
    const double* row = x.val().row_ptr(r);
    double mean = 0.0;
    for (std::size_t c = 0; c < d; ++c) mean += row[c];
    mean /= static_cast<double>(d);
    double var = 0.0;
    for (std::size_t c = 0; c < d; ++c) {
      double dv = row[c] - mean;
      var += dv * dv;
    }
    var /= static_cast<double>(d);
    double inv = 1.0 / std::sqrt(var + kEps);
    inv_std[r] = inv;
    for (std::size_t c = 0; c < d; ++c) {
      double xh = (row[c] - mean) * inv;
      xhat.at(r, c) = xh;
      out.at(r, c) = gain.val().data()[c] * xh + bias.val().data()[c];
    }
  }
  auto xn = x.node(), gn = gain.node(), bn = bias.node();
  return Value(make_node(std::move(out), {xn, gn, bn},
                         [xn, gn, bn, xhat, inv_std, d](Node& self) {
    for (std::size_t r = 0; r < xhat.rows(); ++r) {
      const double* gy = self.grad.row_ptr(r);
      const double* xh = xhat.row_ptr(r);
      if (gn->requires_grad || !gn->is_leaf())
        for (std::size_t c = 0; c < d; ++c) gn->grad.data()[c] += gy[c] * xh[c];
      if (bn->requires_grad || !bn->is_leaf())
        for (std::size_t c = 0; c < d; ++c) bn->grad.data()[c] += gy[c];
      if (xn->requires_grad || !xn->is_leaf()) {
        double mean_dxhat = 0.0, mean_dxhat_xhat = 0.0;
        std::vector<double> dxhat(d);
        for (std::size_t c = 0; c < d; ++c) {
          dxhat[c] = gy[c] * gn->value.data()[c];
          mean_dxhat += dxhat[c];
          mean_dxhat_xhat += dxhat[c] * xh[c];
        }
        mean_dxhat /= static_cast<double>(d);
        mean_dxhat_xhat /= static_cast<double>(d);
        double* gx = xn->grad.row_ptr(r);
        for (std::size_t c = 0; c < d; ++c)
          gx[c] += inv_std[r] * (dxhat[c] - mean_dxhat - xh[c] * mean_dxhat_xhat);
      }
    }
  }));
}

LstmState lstm_cell(const Value& x, const LstmState& state, const LstmParams& p) {
  const std::size_t hidden = p.hidden();
  if (p.w_ih.cols() != 4 * hidden || p.b.cols() != 4 * hidden)
    throw DimensionError("lstm_cell: parameter shapes disagree");
  if (x.cols() != p.w_ih.rows() || state.h.cols() != hidden || state.c.cols() != hidden)
    throw DimensionError("lstm_cell: input/state shapes disagree with parameters");

  Value gates = add_rowvec(add(matmul(x, p.w_ih), matmul(state.h, p.w_hh)), p.b);
  Value gi = sigmoid(slice_cols(gates, 0, hidden));
  Value gf = sigmoid(slice_cols(gates, hidden, 2 * hidden));
  Value gc = tanh(slice_cols(gates, 2 * hidden, 3 * hidden));
  Value go = sigmoid(slice_cols(gates, 3 * hidden, 4 * hidden));
  Value c_next = add(mul(gf, state.c), mul(gi, gc));
  Value h_next = mul(go, tanh(c_next));
  return {h_next, c_next};
}

Value lstm_sequence_final(const Value& inputs, const std::vector<std::size_t>& order,
                          const LstmParams& p) {
  const std::size_t t_len = order.size();
  const std::size_t d_in = inputs.cols();
  const std::size_t hidden = p.hidden();
  if (t_len == 0) throw InputError("lstm_sequence_final: empty sequence");
  if (p.w_ih.rows() != d_in || p.w_ih.cols() != 4 * hidden || p.b.cols() != 4 * hidden)
    throw DimensionError("lstm_sequence_final: parameter shapes disagree");
  for (std::size_t t : order)
    if (t >= inputs.rows()) throw InputError("lstm_sequence_final: order index out of range");

  const Tensor& x = inputs.val();
  const Tensor& w_ih = p.w_ih.val();
  const Tensor& w_hh = p.w_hh.val();
  const Tensor& bias = p.b.val();

  // Saved activations for backpropagation through time. h/c keep the initial
  // zero state in row 0; gates/tanh(c) are per step.
  auto gates = std::make_shared<Tensor>(t_len, 4 * hidden);
  auto hs = std::make_shared<Tensor>(t_len + 1, hidden);
  auto cs = std::make_shared<Tensor>(t_len + 1, hidden);
  auto tcs = std::make_shared<Tensor>(t_len, hidden);

  std::vector<double> z(4 * hidden);
  for (std::size_t step = 0; step < t_len; ++step) {
    const double* xrow = x.row_ptr(order[step]);
    const double* hprev = hs->row_ptr(step);
    for (std::size_t j = 0; j < 4 * hidden; ++j) z[j] = bias.data()[j];
    for (std::size_t i = 0; i < d_in; ++i) {
      const double xv = xrow[i];
      if (xv == 0.0) continue;
      const double* wrow = w_ih.row_ptr(i);
      for (std::size_t j = 0; j < 4 * hidden; ++j) z[j] += xv * wrow[j];
    }
    for (std::size_t i = 0; i < hidden; ++i) {
      const double hv = hprev[i];
      if (hv == 0.0) continue;
      const double* wrow = w_hh.row_ptr(i);
      for (std::size_t j = 0; j < 4 * hidden; ++j) z[j] += hv * wrow[j];
    }
    double* grow = gates->row_ptr(step);
    double* crow = cs->row_ptr(step + 1);
    double* hrow = hs->row_ptr(step + 1);
    double* tcrow = tcs->row_ptr(step);
    const double* cprev = cs->row_ptr(step);
    for (std::size_t j = 0; j < hidden; ++j) {
      double gi = 1.0 / (1.0 + std::exp(-z[j]));
      double gf = 1.0 / (1.0 + std::exp(-z[hidden + j]));
      double gc = std::tanh(z[2 * hidden + j]);
      double go = 1.0 / (1.0 + std::exp(-z[3 * hidden + j]));
      grow[j] = gi;
      grow[hidden + j] = gf;
      grow[2 * hidden + j] = gc;
      grow[3 * hidden + j] = go;
      crow[j] = gf * cprev[j] + gi * gc;
      tcrow[j] = std::tanh(crow[j]);
      hrow[j] = go * tcrow[j];
    }
  }

  Tensor out(1, 2 * hidden);
  for (std::size_t j = 0; j < hidden; ++j) {
    out.at(0, j) = hs->at(t_len, j);
    out.at(0, hidden + j) = cs->at(t_len, j);
  }

  auto xn = inputs.node();
  auto wi = p.w_ih.node(), wh = p.w_hh.node(), bn = p.b.node();
  std::vector<std::size_t> ord = order;
  return Value(make_node(
      std::move(out), {xn, wi, wh, bn},
      [xn, wi, wh, bn, gates, hs, cs, tcs, ord, hidden, d_in](Node& self) {
        const std::size_t t_len = ord.size();
        std::vector<double> dh(hidden), dc(hidden), dz(4 * hidden), dh_prev(hidden);
        for (std::size_t j = 0; j < hidden; ++j) {
          dh[j] = self.grad.at(0, j);
          dc[j] = self.grad.at(0, hidden + j);
        }
        const bool need_dx = xn->requires_grad || !xn->is_leaf();
        for (std::size_t step = t_len; step-- > 0;) {
          const double* grow = gates->row_ptr(step);
          const double* cprev = cs->row_ptr(step);
          const double* tcrow = tcs->row_ptr(step);
          for (std::size_t j = 0; j < hidden; ++j) {
            double gi = grow[j], gf = grow[hidden + j], gc = grow[2 * hidden + j],
                   go = grow[3 * hidden + j];
            double dct = dc[j] + dh[j] * go * (1.0 - tcrow[j] * tcrow[j]);
            double do_ = dh[j] * tcrow[j];
            dz[j] = dct * gc * gi * (1.0 - gi);
            dz[hidden + j] = dct * cprev[j] * gf * (1.0 - gf);
            dz[2 * hidden + j] = dct * gi * (1.0 - gc * gc);
            dz[3 * hidden + j] = do_ * go * (1.0 - go);
            dc[j] = dct * gf;
          }
          // parameter gradients: rank-1 updates with x_t and h_{t-1}
          if (wi->requires_grad || !wi->is_leaf()) {
            const double* xrow = xn->value.row_ptr(ord[step]);
            for (std::size_t i = 0; i < d_in; ++i) {
              const double xv = xrow[i];
              if (xv == 0.0) continue;
              double* wg = wi->grad.row_ptr(i);
              for (std::size_t j = 0; j < 4 * hidden; ++j) wg[j] += xv * dz[j];
            }
          }
          if (wh->requires_grad || !wh->is_leaf()) {
            const double* hprev = hs->row_ptr(step);
            for (std::size_t i = 0; i < hidden; ++i) {
              const double hv = hprev[i];
              if (hv == 0.0) continue;
              double* wg = wh->grad.row_ptr(i);
              for (std::size_t j = 0; j < 4 * hidden; ++j) wg[j] += hv * dz[j];
            }
          }
          if (bn->requires_grad || !bn->is_leaf()) {
            double* bg = bn->grad.row_ptr(0);
            for (std::size_t j = 0; j < 4 * hidden; ++j) bg[j] += dz[j];
          }
          if (need_dx) {
            double* xg = xn->grad.row_ptr(ord[step]);
            for (std::size_t i = 0; i < d_in; ++i)
              xg[i] += dot(wi->value.row_ptr(i), dz.data(), 4 * hidden);
          }
          for (std::size_t i = 0; i < hidden; ++i)
            dh_prev[i] = dot(wh->value.row_ptr(i), dz.data(), 4 * hidden);
          dh = dh_prev;
        }
      }));
}

Value multi_head_self_attention(const Value& x, const AttentionParams& p,
                                std::size_t num_heads) {
  const std::size_t d = x.cols();
  if (num_heads == 0 || d % num_heads != 0)
    throw ConfigError("multi_head_self_attention: embedding dim " + std::to_string(d) +
                      " not divisible by " + std::to_string(num_heads) + " heads");
  const std::size_t dh = d / num_heads;
  const double inv_sqrt_dh = 1.0 / std::sqrt(static_cast<double>(dh));

  Value q = add_rowvec(matmul(x, p.wq), p.bq);
  Value k = add_rowvec(matmul(x, p.wk), p.bk);
  Value v = add_rowvec(matmul(x, p.wv), p.bv);

  std::vector<Value> heads;
  heads.reserve(num_heads);
  for (std::size_t h = 0; h < num_heads; ++h) {
    Value qh = slice_cols(q, h * dh, (h + 1) * dh);
    Value kh = slice_cols(k, h * dh, (h + 1) * dh);
    Value vh = slice_cols(v, h * dh, (h + 1) * dh);
    Value weights = softmax_rows(matmul_nt_scaled(qh, kh, inv_sqrt_dh));
    heads.push_back(matmul(weights, vh));
  }
  Value ctx = num_heads == 1 ? heads[0] : concat_cols(heads);
  return add_rowvec(matmul(ctx, p.wo), p.bo);
}

}  // namespace eend

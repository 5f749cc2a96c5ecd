// Dense rank-1..3 tensor with a reverse-mode gradient tape and Adam.
//
// Tensors are value types over shared storage. A Tensor is off-tape until it
// is watched on a Tape (leaf) or produced by an op whose inputs are on a
// tape. Gradients live in the tape and are read back per tensor after
// backward(). A tensor participates in at most one live tape at a time; the
// binding dissolves when the tape is destroyed.
#pragma once

#include <cstdint>
#include <functional>
#include <initializer_list>
#include <memory>
#include <vector>

#include "tagg/common.hpp"
#include "tagg/rng.hpp"

namespace tagg {

class Tape;

namespace detail {
// Shared between copies of a tensor; tape==nullptr once the tape is gone.
struct TapeLink {
  Tape* tape = nullptr;
  int node = -1;
};
}  // namespace detail

class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(std::vector<int> shape);
  static Tensor full(std::vector<int> shape, double value);
  static Tensor from(std::vector<int> shape, std::vector<double> values);
  static Tensor scalar(double value);

  const std::vector<int>& shape() const { return shape_; }
  int rank() const { return static_cast<int>(shape_.size()); }
  int extent(int axis) const { return shape_[static_cast<size_t>(axis)]; }
  int64_t size() const;
  bool empty() const { return !data_; }

  double* data() { return data_->data(); }
  const double* data() const { return data_->data(); }
  const std::vector<double>& values() const { return *data_; }

  // Scalar payload; throws unless size() == 1.
  double item() const;
  // Row-major element access for tests and glue code.
  double at(std::initializer_list<int> idx) const;

  bool on_tape() const;
  Tape* tape() const;
  int node() const;
  bool is_leaf() const { return leaf_; }
  // True for tensors watched as tape leaves.
  bool requires_grad() const { return leaf_ && on_tape(); }

 private:
  std::vector<int> shape_;
  std::shared_ptr<std::vector<double>> data_;
  std::shared_ptr<detail::TapeLink> link_;
  bool leaf_ = false;

  friend class Tape;
};

class Tape {
 public:
  using BackFn = std::function<void(Tape&, int self)>;

  Tape() = default;
  ~Tape();
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  // Registers `t` as a differentiable leaf of this tape (in place). Throws if
  // the tensor already participates in a live tape.
  void watch(Tensor& t);

  // Reverse pass from a scalar loss. Callable once per tape.
  void backward(const Tensor& loss);
  bool consumed() const { return consumed_; }

  // Gradient of `t` (zeros if the loss never reached it). Requires backward()
  // to have run and `t` to be on this tape.
  Tensor grad(const Tensor& t) const;

  // --- op plumbing ---
  // Tape shared by the given tensors; nullptr if all off-tape. Throws if two
  // tensors are bound to different live tapes.
  static Tape* common_tape(std::initializer_list<const Tensor*> ts);
  int make_node(BackFn back);
  void bind(Tensor& t, int node, bool leaf = false);
  static int node_on(const Tape* tape, const Tensor& t);

  // Gradient buffer of a node, zero-initialized to `n` on first touch.
  std::vector<double>& grad_buf(int node, int64_t n);
  const std::vector<double>* grad_ptr(int node) const;

 private:
  struct Node {
    BackFn back;  // empty for leaves and constants
  };
  std::vector<Node> nodes_;
  std::vector<std::vector<double>> grads_;
  std::vector<std::shared_ptr<detail::TapeLink>> links_;
  bool consumed_ = false;
};

// ---------------------------------------------------------------------------
// Ops. Each is differentiable: results carry tape nodes whenever an input is
// on a tape; off-tape inputs act as constants.
// ---------------------------------------------------------------------------

Tensor add(const Tensor& a, const Tensor& b);        // same shape
Tensor sub(const Tensor& a, const Tensor& b);        // same shape
Tensor mul(const Tensor& a, const Tensor& b);        // elementwise, same shape
Tensor scale(const Tensor& a, double s);
Tensor matmul(const Tensor& a, const Tensor& b);     // [m,k]x[k,n] or [m,k]x[k]
Tensor transpose(const Tensor& a);                   // rank 2
Tensor reshape(const Tensor& a, std::vector<int> shape);
Tensor concat(const std::vector<Tensor>& xs, int axis);
Tensor softmax(const Tensor& a, int axis);           // rank 1 or 2, stable
Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias);
Tensor relu(const Tensor& a);
Tensor sigmoid(const Tensor& a);
Tensor tanh_t(const Tensor& a);
Tensor max_over_axis(const Tensor& a, int axis);     // rank 2 -> rank 1
Tensor sum(const Tensor& a);                         // -> scalar
Tensor dropout(const Tensor& a, double rate, bool training, Rng& rng);
Tensor cross_entropy(const Tensor& logits, int target);  // rank 1 -> scalar
// Adds `v` to every row of `m` ([r,c] + [c]).
Tensor add_rowvec(const Tensor& m, const Tensor& v);
// Stacks `n` copies of a rank-1 vector into an [n, len] matrix.
Tensor tile_rows(const Tensor& v, int n);

// Uniform init in +-sqrt(6 / (fan_in + fan_out)) for a [rows, cols] map,
// fan_in = cols, fan_out = rows.
Tensor xavier_uniform(int rows, int cols, Rng& rng);

// ---------------------------------------------------------------------------
// Adam with bias correction.
// ---------------------------------------------------------------------------

struct AdamState {
  double lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  int64_t step = 0;
  std::vector<std::vector<double>> m;  // aligned with the parameter list
  std::vector<std::vector<double>> v;

  void init(const std::vector<Tensor*>& params);
  bool initialized() const { return !m.empty(); }
};

void adam_step(const std::vector<Tensor*>& params,
               const std::vector<Tensor>& grads, AdamState& state);

}  // namespace tagg

#include "tagg/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

namespace tagg {

namespace {

int64_t shape_size(const std::vector<int>& shape) {
  if (shape.empty() || shape.size() > 3) {
    throw DimError("tensor rank must be 1..3, got " + shape_str(shape));
  }
  int64_t n = 1;
  for (int e : shape) {
    if (e <= 0) throw DimError("non-positive extent in shape " + shape_str(shape));
    n *= e;
  }
  return n;
}

void axpy(std::vector<double>& acc, const double* g, int64_t n) {
  for (int64_t i = 0; i < n; ++i) acc[static_cast<size_t>(i)] += g[i];
}

}  // namespace

// --- Tensor -----------------------------------------------------------------

Tensor Tensor::zeros(std::vector<int> shape) { return full(std::move(shape), 0.0); }

Tensor Tensor::full(std::vector<int> shape, double value) {
  Tensor t;
  const int64_t n = shape_size(shape);
  t.shape_ = std::move(shape);
  t.data_ = std::make_shared<std::vector<double>>(static_cast<size_t>(n), value);
  return t;
}

Tensor Tensor::from(std::vector<int> shape, std::vector<double> values) {
  const int64_t n = shape_size(shape);
  if (n != static_cast<int64_t>(values.size())) {
    throw DimError("data length " + std::to_string(values.size()) +
                   " does not match shape " + shape_str(shape));
  }
  Tensor t;
  t.shape_ = std::move(shape);
  t.data_ = std::make_shared<std::vector<double>>(std::move(values));
  return t;
}

Tensor Tensor::scalar(double value) { return from({1}, {value}); }

int64_t Tensor::size() const {
  int64_t n = 1;
  for (int e : shape_) n *= e;
  return shape_.empty() ? 0 : n;
}

double Tensor::item() const {
  if (size() != 1) throw std::invalid_argument("item() on non-scalar tensor " + shape_str(shape_));
  return (*data_)[0];
}

double Tensor::at(std::initializer_list<int> idx) const {
  if (static_cast<int>(idx.size()) != rank()) {
    throw std::invalid_argument("index rank mismatch");
  }
  int64_t flat = 0;
  int axis = 0;
  for (int i : idx) {
    flat = flat * shape_[static_cast<size_t>(axis)] + i;
    ++axis;
  }
  return (*data_)[static_cast<size_t>(flat)];
}

bool Tensor::on_tape() const { return link_ && link_->tape != nullptr; }
Tape* Tensor::tape() const { return link_ ? link_->tape : nullptr; }
int Tensor::node() const { return link_ ? link_->node : -1; }

// --- Tape -------------------------------------------------------------------

Tape::~Tape() {
  for (auto& l : links_) l->tape = nullptr;
}

void Tape::watch(Tensor& t) {
  if (t.empty()) throw std::invalid_argument("cannot watch an empty tensor");
  if (t.on_tape()) {
    throw std::logic_error("tensor already participates in a live tape");
  }
  bind(t, make_node({}), /*leaf=*/true);
}

int Tape::make_node(BackFn back) {
  nodes_.push_back(Node{std::move(back)});
  grads_.emplace_back();
  return static_cast<int>(nodes_.size()) - 1;
}

void Tape::bind(Tensor& t, int node, bool leaf) {
  auto link = std::make_shared<detail::TapeLink>();
  link->tape = this;
  link->node = node;
  links_.push_back(link);
  t.link_ = std::move(link);
  t.leaf_ = leaf;
}

Tape* Tape::common_tape(std::initializer_list<const Tensor*> ts) {
  Tape* found = nullptr;
  for (const Tensor* t : ts) {
    if (!t->on_tape()) continue;
    if (found && found != t->tape()) {
      throw std::logic_error("operation mixes tensors from two live tapes");
    }
    found = t->tape();
  }
  return found;
}

int Tape::node_on(const Tape* tape, const Tensor& t) {
  return (tape && t.on_tape() && t.tape() == tape) ? t.node() : -1;
}

std::vector<double>& Tape::grad_buf(int node, int64_t n) {
  auto& g = grads_[static_cast<size_t>(node)];
  if (g.empty()) g.assign(static_cast<size_t>(n), 0.0);
  return g;
}

const std::vector<double>* Tape::grad_ptr(int node) const {
  const auto& g = grads_[static_cast<size_t>(node)];
  return g.empty() ? nullptr : &g;
}

void Tape::backward(const Tensor& loss) {
  if (consumed_) throw std::logic_error("backward() already ran on this tape");
  if (!loss.on_tape() || loss.tape() != this) {
    throw std::invalid_argument("loss is not on this tape");
  }
  if (loss.size() != 1) {
    throw std::invalid_argument("backward() requires a scalar loss, got " +
                                shape_str(loss.shape()));
  }
  grads_[static_cast<size_t>(loss.node())] = {1.0};
  for (int id = static_cast<int>(nodes_.size()) - 1; id >= 0; --id) {
    if (grads_[static_cast<size_t>(id)].empty()) continue;
    if (nodes_[static_cast<size_t>(id)].back) nodes_[static_cast<size_t>(id)].back(*this, id);
  }
  consumed_ = true;
}

Tensor Tape::grad(const Tensor& t) const {
  if (!t.on_tape() || t.tape() != this) {
    throw std::invalid_argument("tensor is not on this tape");
  }
  if (!consumed_) throw std::logic_error("grad() before backward()");
  const auto& g = grads_[static_cast<size_t>(t.node())];
  if (g.empty()) return Tensor::zeros(t.shape());
  return Tensor::from(t.shape(), g);
}

// --- op helpers --------------------------------------------------------------

namespace {

// Records `out` on the tape shared by the inputs (if any) with the given
// backward closure factory. The factory receives the input node ids.
template <typename MakeBack>
void record(Tensor& out, std::initializer_list<const Tensor*> inputs, MakeBack make) {
  Tape* tp = Tape::common_tape(inputs);
  if (!tp) return;
  std::vector<int> in_nodes;
  for (const Tensor* t : inputs) in_nodes.push_back(Tape::node_on(tp, *t));
  tp->bind(out, tp->make_node(make(std::move(in_nodes))));
}

void check_same_shape(const Tensor& a, const Tensor& b, const char* opname) {
  if (a.shape() != b.shape()) {
    throw DimError(std::string(opname) + ": shape mismatch " + shape_str(a.shape()) +
                   " vs " + shape_str(b.shape()));
  }
}

}  // namespace

// --- elementwise -------------------------------------------------------------

Tensor add(const Tensor& a, const Tensor& b) {
  check_same_shape(a, b, "add");
  const int64_t n = a.size();
  std::vector<double> out(static_cast<size_t>(n));
  for (int64_t i = 0; i < n; ++i) out[static_cast<size_t>(i)] = a.data()[i] + b.data()[i];
  Tensor r = Tensor::from(a.shape(), std::move(out));
  record(r, {&a, &b}, [n](std::vector<int> in) {
    return [=](Tape& t, int self) {
      const auto& go = *t.grad_ptr(self);
      if (in[0] >= 0) axpy(t.grad_buf(in[0], n), go.data(), n);
      if (in[1] >= 0) axpy(t.grad_buf(in[1], n), go.data(), n);
    };
  });
  return r;
}

Tensor sub(const Tensor& a, const Tensor& b) {
  check_same_shape(a, b, "sub");
  const int64_t n = a.size();
  std::vector<double> out(static_cast<size_t>(n));
  for (int64_t i = 0; i < n; ++i) out[static_cast<size_t>(i)] = a.data()[i] - b.data()[i];
  Tensor r = Tensor::from(a.shape(), std::move(out));
  record(r, {&a, &b}, [n](std::vector<int> in) {
    return [=](Tape& t, int self) {
      const auto& go = *t.grad_ptr(self);
      if (in[0] >= 0) axpy(t.grad_buf(in[0], n), go.data(), n);
      if (in[1] >= 0) {
        auto& g = t.grad_buf(in[1], n);
        for (int64_t i = 0; i < n; ++i) g[static_cast<size_t>(i)] -= go[static_cast<size_t>(i)];
      }
    };
  });
  return r;
}

Tensor mul(const Tensor& a, const Tensor& b) {
  check_same_shape(a, b, "mul");
  const int64_t n = a.size();
  std::vector<double> out(static_cast<size_t>(n));
  for (int64_t i = 0; i < n; ++i) out[static_cast<size_t>(i)] = a.data()[i] * b.data()[i];
  Tensor r = Tensor::from(a.shape(), std::move(out));
  auto av = a.values();
  auto bv = b.values();
  record(r, {&a, &b}, [n, av = std::move(av), bv = std::move(bv)](std::vector<int> in) {
    return [=](Tape& t, int self) {
      const auto& go = *t.grad_ptr(self);
      if (in[0] >= 0) {
        auto& g = t.grad_buf(in[0], n);
        for (int64_t i = 0; i < n; ++i)
          g[static_cast<size_t>(i)] += go[static_cast<size_t>(i)] * bv[static_cast<size_t>(i)];
      }
      if (in[1] >= 0) {
        auto& g = t.grad_buf(in[1], n);
        for (int64_t i = 0; i < n; ++i)
          g[static_cast<size_t>(i)] += go[static_cast<size_t>(i)] * av[static_cast<size_t>(i)];
      }
    };
  });
  return r;
}

Tensor scale(const Tensor& a, double s) {
  const int64_t n = a.size();
  std::vector<double> out(static_cast<size_t>(n));
  for (int64_t i = 0; i < n; ++i) out[static_cast<size_t>(i)] = a.data()[i] * s;
  Tensor r = Tensor::from(a.shape(), std::move(out));
  record(r, {&a}, [n, s](std::vector<int> in) {
    return [=](Tape& t, int self) {
      const auto& go = *t.grad_ptr(self);
      if (in[0] >= 0) {
        auto& g = t.grad_buf(in[0], n);
        for (int64_t i = 0; i < n; ++i) g[static_cast<size_t>(i)] += go[static_cast<size_t>(i)] * s;
      }
    };
  });
  return r;
}

// --- linear algebra ----------------------------------------------------------

Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.rank() != 2 || (b.rank() != 2 && b.rank() != 1)) {
    throw DimError("matmul: expects [m,k]x[k,n] or [m,k]x[k], got " +
                   shape_str(a.shape()) + " and " + shape_str(b.shape()));
  }
  const int m = a.extent(0), k = a.extent(1);
  const bool vec = b.rank() == 1;
  const int kb = b.extent(0);
  const int n = vec ? 1 : b.extent(1);
  if (k != kb) {
    throw DimError("matmul: inner extents differ, " + shape_str(a.shape()) + " vs " +
                   shape_str(b.shape()));
  }
  std::vector<double> out(static_cast<size_t>(m) * n, 0.0);
  for (int i = 0; i < m; ++i) {
    for (int p = 0; p < k; ++p) {
      const double av = a.data()[i * k + p];
      for (int j = 0; j < n; ++j) out[static_cast<size_t>(i * n + j)] += av * b.data()[p * n + j];
    }
  }
  Tensor r = vec ? Tensor::from({m}, std::move(out)) : Tensor::from({m, n}, std::move(out));
  auto av = a.values();
  auto bv = b.values();
  record(r, {&a, &b}, [=, av = std::move(av), bv = std::move(bv)](std::vector<int> in) {
    return [=](Tape& t, int self) {
      const auto& go = *t.grad_ptr(self);
      if (in[0] >= 0) {  // dA = dC * B^T
        auto& g = t.grad_buf(in[0], static_cast<int64_t>(m) * k);
        for (int i = 0; i < m; ++i)
          for (int p = 0; p < k; ++p) {
            double acc = 0.0;
            for (int j = 0; j < n; ++j)
              acc += go[static_cast<size_t>(i * n + j)] * bv[static_cast<size_t>(p * n + j)];
            g[static_cast<size_t>(i * k + p)] += acc;
          }
      }
      if (in[1] >= 0) {  // dB = A^T * dC
        auto& g = t.grad_buf(in[1], static_cast<int64_t>(k) * n);
        for (int p = 0; p < k; ++p)
          for (int j = 0; j < n; ++j) {
            double acc = 0.0;
            for (int i = 0; i < m; ++i)
              acc += av[static_cast<size_t>(i * k + p)] * go[static_cast<size_t>(i * n + j)];
            g[static_cast<size_t>(p * n + j)] += acc;
          }
      }
    };
  });
  return r;
}

Tensor transpose(const Tensor& a) {
  if (a.rank() != 2) throw DimError("transpose: rank-2 required, got " + shape_str(a.shape()));
  const int r0 = a.extent(0), c0 = a.extent(1);
  std::vector<double> out(static_cast<size_t>(r0) * c0);
  for (int i = 0; i < r0; ++i)
    for (int j = 0; j < c0; ++j) out[static_cast<size_t>(j * r0 + i)] = a.data()[i * c0 + j];
  Tensor r = Tensor::from({c0, r0}, std::move(out));
  record(r, {&a}, [r0, c0](std::vector<int> in) {
    return [=](Tape& t, int self) {
      const auto& go = *t.grad_ptr(self);
      if (in[0] >= 0) {
        auto& g = t.grad_buf(in[0], static_cast<int64_t>(r0) * c0);
        for (int i = 0; i < r0; ++i)
          for (int j = 0; j < c0; ++j)
            g[static_cast<size_t>(i * c0 + j)] += go[static_cast<size_t>(j * r0 + i)];
      }
    };
  });
  return r;
}

Tensor reshape(const Tensor& a, std::vector<int> shape) {
  if (shape_size(shape) != a.size()) {
    throw DimError("reshape: size mismatch " + shape_str(a.shape()) + " -> " + shape_str(shape));
  }
  const int64_t n = a.size();
  Tensor r = Tensor::from(std::move(shape), a.values());
  record(r, {&a}, [n](std::vector<int> in) {
    return [=](Tape& t, int self) {
      const auto& go = *t.grad_ptr(self);
      if (in[0] >= 0) axpy(t.grad_buf(in[0], n), go.data(), n);
    };
  });
  return r;
}

Tensor concat(const std::vector<Tensor>& xs, int axis) {
  if (xs.empty()) throw std::invalid_argument("concat: empty input list");
  const int rank = xs[0].rank();
  if (axis < 0 || axis >= rank) throw std::invalid_argument("concat: bad axis");
  for (const Tensor& x : xs) {
    if (x.rank() != rank) throw DimError("concat: mixed ranks");
    for (int ax = 0; ax < rank; ++ax) {
      if (ax != axis && x.extent(ax) != xs[0].extent(ax)) {
        throw DimError("concat: extent mismatch on axis " + std::to_string(ax) + ": " +
                       shape_str(x.shape()) + " vs " + shape_str(xs[0].shape()));
      }
    }
  }
  std::vector<int> out_shape = xs[0].shape();
  int total = 0;
  for (const Tensor& x : xs) total += x.extent(axis);
  out_shape[static_cast<size_t>(axis)] = total;

  // Treat the array as [outer, axis, inner].
  int64_t outer = 1, inner = 1;
  for (int ax = 0; ax < axis; ++ax) outer *= xs[0].extent(ax);
  for (int ax = axis + 1; ax < rank; ++ax) inner *= xs[0].extent(ax);

  std::vector<double> out(static_cast<size_t>(outer) * total * inner);
  std::vector<int> offsets;
  int off = 0;
  for (const Tensor& x : xs) {
    offsets.push_back(off);
    const int ext = x.extent(axis);
    for (int64_t o = 0; o < outer; ++o)
      for (int e = 0; e < ext; ++e)
        std::memcpy(&out[static_cast<size_t>((o * total + off + e) * inner)],
                    &x.data()[(o * ext + e) * inner], sizeof(double) * static_cast<size_t>(inner));
    off += ext;
  }
  Tensor r = Tensor::from(std::move(out_shape), std::move(out));

  std::vector<const Tensor*> ptrs;
  for (const Tensor& x : xs) ptrs.push_back(&x);
  Tape* tp = nullptr;
  for (const Tensor& x : xs) {
    Tape* one = Tape::common_tape({&x});
    if (one && tp && one != tp) throw std::logic_error("concat mixes tensors from two live tapes");
    if (one) tp = one;
  }
  if (tp) {
    std::vector<int> in_nodes;
    std::vector<int> exts;
    for (const Tensor& x : xs) {
      in_nodes.push_back(Tape::node_on(tp, x));
      exts.push_back(x.extent(axis));
    }
    tp->bind(r, tp->make_node([=](Tape& t, int self) {
      const auto& go = *t.grad_ptr(self);
      for (size_t s = 0; s < in_nodes.size(); ++s) {
        if (in_nodes[s] < 0) continue;
        const int ext = exts[s];
        auto& g = t.grad_buf(in_nodes[s], outer * ext * inner);
        for (int64_t o = 0; o < outer; ++o)
          for (int e = 0; e < ext; ++e)
            for (int64_t i = 0; i < inner; ++i)
              g[static_cast<size_t>((o * ext + e) * inner + i)] +=
                  go[static_cast<size_t>((o * total + offsets[s] + e) * inner + i)];
      }
    }));
  }
  return r;
}

// --- nonlinear ---------------------------------------------------------------

namespace {

// softmax over the inner-most stride pattern: `rows` independent groups of
// `len` values with stride `stride`, starting at base r*row_stride.
void softmax_groups(const double* x, double* y, int rows, int len, int64_t row_stride,
                    int64_t stride) {
  for (int r = 0; r < rows; ++r) {
    const double* xr = x + r * row_stride;
    double* yr = y + r * row_stride;
    double mx = xr[0];
    for (int i = 1; i < len; ++i) mx = std::max(mx, xr[i * stride]);
    double total = 0.0;
    for (int i = 0; i < len; ++i) {
      const double e = std::exp(xr[i * stride] - mx);
      yr[i * stride] = e;
      total += e;
    }
    for (int i = 0; i < len; ++i) yr[i * stride] /= total;
  }
}

}  // namespace

Tensor softmax(const Tensor& a, int axis) {
  if (a.rank() != 1 && a.rank() != 2) {
    throw DimError("softmax: rank 1 or 2 required, got " + shape_str(a.shape()));
  }
  if (axis < 0 || axis >= a.rank()) throw std::invalid_argument("softmax: bad axis");
  std::vector<double> out(static_cast<size_t>(a.size()));
  int rows, len;
  int64_t row_stride, stride;
  if (a.rank() == 1) {
    rows = 1; len = a.extent(0); row_stride = 0; stride = 1;
  } else if (axis == 1) {
    rows = a.extent(0); len = a.extent(1); row_stride = len; stride = 1;
  } else {
    rows = a.extent(1); len = a.extent(0); row_stride = 1; stride = a.extent(1);
  }
  softmax_groups(a.data(), out.data(), rows, len, row_stride, stride);
  Tensor r = Tensor::from(a.shape(), std::move(out));
  auto sv = r.values();
  record(r, {&a}, [=, sv = std::move(sv)](std::vector<int> in) {
    return [=](Tape& t, int self) {
      if (in[0] < 0) return;
      const auto& go = *t.grad_ptr(self);
      auto& g = t.grad_buf(in[0], static_cast<int64_t>(sv.size()));
      for (int r2 = 0; r2 < rows; ++r2) {
        const int64_t base = r2 * row_stride;
        double dot = 0.0;
        for (int i = 0; i < len; ++i) {
          const auto idx = static_cast<size_t>(base + i * stride);
          dot += go[idx] * sv[idx];
        }
        for (int i = 0; i < len; ++i) {
          const auto idx = static_cast<size_t>(base + i * stride);
          g[idx] += sv[idx] * (go[idx] - dot);
        }
      }
    };
  });
  return r;
}

Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias) {
  if (x.rank() != 1 && x.rank() != 2) {
    throw DimError("layer_norm: rank 1 or 2 required, got " + shape_str(x.shape()));
  }
  const int feat = x.extent(x.rank() - 1);
  if (gain.rank() != 1 || gain.extent(0) != feat || bias.rank() != 1 || bias.extent(0) != feat) {
    throw DimError("layer_norm: gain/bias must be rank-1 of extent " + std::to_string(feat));
  }
  const int rows = x.rank() == 1 ? 1 : x.extent(0);
  constexpr double kEps = 1e-5;

  std::vector<double> out(static_cast<size_t>(x.size()));
  std::vector<double> xhat(static_cast<size_t>(x.size()));
  std::vector<double> inv_std(static_cast<size_t>(rows));
  for (int r = 0; r < rows; ++r) {
    const double* xr = x.data() + static_cast<int64_t>(r) * feat;
    double mean = 0.0;
    for (int i = 0; i < feat; ++i) mean += xr[i];
    mean /= feat;
    double var = 0.0;
    for (int i = 0; i < feat; ++i) {
      const double d = xr[i] - mean;
      var += d * d;
    }
    var /= feat;
    const double inv = 1.0 / std::sqrt(var + kEps);
    inv_std[static_cast<size_t>(r)] = inv;
    for (int i = 0; i < feat; ++i) {
      const auto idx = static_cast<size_t>(static_cast<int64_t>(r) * feat + i);
      xhat[idx] = (xr[i] - mean) * inv;
      out[idx] = gain.data()[i] * xhat[idx] + bias.data()[i];
    }
  }
  Tensor res = Tensor::from(x.shape(), std::move(out));
  auto gv = gain.values();
  record(res, {&x, &gain, &bias},
         [=, xhat = std::move(xhat), inv_std = std::move(inv_std),
          gv = std::move(gv)](std::vector<int> in) {
    return [=](Tape& t, int self) {
      const auto& go = *t.grad_ptr(self);
      for (int r = 0; r < rows; ++r) {
        const int64_t base = static_cast<int64_t>(r) * feat;
        if (in[0] >= 0) {
          auto& gx = t.grad_buf(in[0], static_cast<int64_t>(rows) * feat);
          double mean_dxh = 0.0, mean_dxh_xh = 0.0;
          for (int i = 0; i < feat; ++i) {
            const auto idx = static_cast<size_t>(base + i);
            const double dxh = go[idx] * gv[static_cast<size_t>(i)];
            mean_dxh += dxh;
            mean_dxh_xh += dxh * xhat[idx];
          }
          mean_dxh /= feat;
          mean_dxh_xh /= feat;
          for (int i = 0; i < feat; ++i) {
            const auto idx = static_cast<size_t>(base + i);
            const double dxh = go[idx] * gv[static_cast<size_t>(i)];
            gx[idx] += inv_std[static_cast<size_t>(r)] *
                       (dxh - mean_dxh - xhat[idx] * mean_dxh_xh);
          }
        }
        if (in[1] >= 0) {
          auto& gg = t.grad_buf(in[1], feat);
          for (int i = 0; i < feat; ++i) {
            const auto idx = static_cast<size_t>(base + i);
            gg[static_cast<size_t>(i)] += go[idx] * xhat[idx];
          }
        }
        if (in[2] >= 0) {
          auto& gb = t.grad_buf(in[2], feat);
          for (int i = 0; i < feat; ++i)
            gb[static_cast<size_t>(i)] += go[static_cast<size_t>(base + i)];
        }
      }
    };
  });
  return res;
}

Tensor relu(const Tensor& a) {
  const int64_t n = a.size();
  std::vector<double> out(static_cast<size_t>(n));
  for (int64_t i = 0; i < n; ++i) out[static_cast<size_t>(i)] = std::max(0.0, a.data()[i]);
  Tensor r = Tensor::from(a.shape(), std::move(out));
  auto av = a.values();
  record(r, {&a}, [n, av = std::move(av)](std::vector<int> in) {
    return [=](Tape& t, int self) {
      if (in[0] < 0) return;
      const auto& go = *t.grad_ptr(self);
      auto& g = t.grad_buf(in[0], n);
      for (int64_t i = 0; i < n; ++i)
        if (av[static_cast<size_t>(i)] > 0.0) g[static_cast<size_t>(i)] += go[static_cast<size_t>(i)];
    };
  });
  return r;
}

Tensor sigmoid(const Tensor& a) {
  const int64_t n = a.size();
  std::vector<double> out(static_cast<size_t>(n));
  for (int64_t i = 0; i < n; ++i) out[static_cast<size_t>(i)] = 1.0 / (1.0 + std::exp(-a.data()[i]));
  Tensor r = Tensor::from(a.shape(), std::move(out));
  auto sv = r.values();
  record(r, {&a}, [n, sv = std::move(sv)](std::vector<int> in) {
    return [=](Tape& t, int self) {
      if (in[0] < 0) return;
      const auto& go = *t.grad_ptr(self);
      auto& g = t.grad_buf(in[0], n);
      for (int64_t i = 0; i < n; ++i) {
        const double s = sv[static_cast<size_t>(i)];
        g[static_cast<size_t>(i)] += go[static_cast<size_t>(i)] * s * (1.0 - s);
      }
    };
  });
  return r;
}

Tensor tanh_t(const Tensor& a) {
  const int64_t n = a.size();
  std::vector<double> out(static_cast<size_t>(n));
  for (int64_t i = 0; i < n; ++i) out[static_cast<size_t>(i)] = std::tanh(a.data()[i]);
  Tensor r = Tensor::from(a.shape(), std::move(out));
  auto tv = r.values();
  record(r, {&a}, [n, tv = std::move(tv)](std::vector<int> in) {
    return [=](Tape& t, int self) {
      if (in[0] < 0) return;
      const auto& go = *t.grad_ptr(self);
      auto& g = t.grad_buf(in[0], n);
      for (int64_t i = 0; i < n; ++i) {
        const double th = tv[static_cast<size_t>(i)];
        g[static_cast<size_t>(i)] += go[static_cast<size_t>(i)] * (1.0 - th * th);
      }
    };
  });
  return r;
}

Tensor max_over_axis(const Tensor& a, int axis) {
  if (a.rank() != 2) throw DimError("max_over_axis: rank-2 required, got " + shape_str(a.shape()));
  if (axis != 0 && axis != 1) throw std::invalid_argument("max_over_axis: bad axis");
  const int rows = a.extent(0), cols = a.extent(1);
  const int keep = axis == 0 ? cols : rows;
  const int red = axis == 0 ? rows : cols;
  std::vector<double> out(static_cast<size_t>(keep));
  std::vector<int> arg(static_cast<size_t>(keep), 0);
  for (int k = 0; k < keep; ++k) {
    double best = axis == 0 ? a.data()[k] : a.data()[k * cols];
    int bi = 0;
    for (int i = 1; i < red; ++i) {
      const double v = axis == 0 ? a.data()[i * cols + k] : a.data()[k * cols + i];
      if (v > best) {  // strict: ties route to the lowest index
        best = v;
        bi = i;
      }
    }
    out[static_cast<size_t>(k)] = best;
    arg[static_cast<size_t>(k)] = bi;
  }
  Tensor r = Tensor::from({keep}, std::move(out));
  record(r, {&a}, [=, arg = std::move(arg)](std::vector<int> in) {
    return [=](Tape& t, int self) {
      if (in[0] < 0) return;
      const auto& go = *t.grad_ptr(self);
      auto& g = t.grad_buf(in[0], static_cast<int64_t>(rows) * cols);
      for (int k = 0; k < keep; ++k) {
        const int i = arg[static_cast<size_t>(k)];
        const int64_t idx = axis == 0 ? static_cast<int64_t>(i) * cols + k
                                      : static_cast<int64_t>(k) * cols + i;
        g[static_cast<size_t>(idx)] += go[static_cast<size_t>(k)];
      }
    };
  });
  return r;
}

Tensor sum(const Tensor& a) {
  const int64_t n = a.size();
  double total = 0.0;
  for (int64_t i = 0; i < n; ++i) total += a.data()[i];
  Tensor r = Tensor::scalar(total);
  record(r, {&a}, [n](std::vector<int> in) {
    return [=](Tape& t, int self) {
      if (in[0] < 0) return;
      const double go = (*t.grad_ptr(self))[0];
      auto& g = t.grad_buf(in[0], n);
      for (int64_t i = 0; i < n; ++i) g[static_cast<size_t>(i)] += go;
    };
  });
  return r;
}

Tensor dropout(const Tensor& a, double rate, bool training, Rng& rng) {
  if (rate < 0.0 || rate >= 1.0) {
    throw std::invalid_argument("dropout: rate must be in [0,1), got " + std::to_string(rate));
  }
  if (!training || rate == 0.0) return a;  // identity, rng untouched
  const int64_t n = a.size();
  const double inv_keep = 1.0 / (1.0 - rate);
  std::vector<double> mask(static_cast<size_t>(n));
  std::vector<double> out(static_cast<size_t>(n));
  for (int64_t i = 0; i < n; ++i) {
    const double m = rng.uniform() >= rate ? inv_keep : 0.0;
    mask[static_cast<size_t>(i)] = m;
    out[static_cast<size_t>(i)] = a.data()[i] * m;
  }
  Tensor r = Tensor::from(a.shape(), std::move(out));
  record(r, {&a}, [n, mask = std::move(mask)](std::vector<int> in) {
    return [=](Tape& t, int self) {
      if (in[0] < 0) return;
      const auto& go = *t.grad_ptr(self);
      auto& g = t.grad_buf(in[0], n);
      for (int64_t i = 0; i < n; ++i)
        g[static_cast<size_t>(i)] += go[static_cast<size_t>(i)] * mask[static_cast<size_t>(i)];
    };
  });
  return r;
}

Tensor cross_entropy(const Tensor& logits, int target) {
  if (logits.rank() != 1) {
    throw DimError("cross_entropy: rank-1 logits required, got " + shape_str(logits.shape()));
  }
  const int n = logits.extent(0);
  if (target < 0 || target >= n) {
    throw std::invalid_argument("cross_entropy: target " + std::to_string(target) +
                                " out of range for " + std::to_string(n) + " classes");
  }
  double mx = logits.data()[0];
  for (int i = 1; i < n; ++i) mx = std::max(mx, logits.data()[i]);
  double total = 0.0;
  for (int i = 0; i < n; ++i) total += std::exp(logits.data()[i] - mx);
  const double loss = std::log(total) + mx - logits.data()[target];
  Tensor r = Tensor::scalar(loss);
  std::vector<double> soft(static_cast<size_t>(n));
  for (int i = 0; i < n; ++i) soft[static_cast<size_t>(i)] = std::exp(logits.data()[i] - mx) / total;
  record(r, {&logits}, [n, target, soft = std::move(soft)](std::vector<int> in) {
    return [=](Tape& t, int self) {
      if (in[0] < 0) return;
      const double go = (*t.grad_ptr(self))[0];
      auto& g = t.grad_buf(in[0], n);
      for (int i = 0; i < n; ++i) {
        g[static_cast<size_t>(i)] +=
            go * (soft[static_cast<size_t>(i)] - (i == target ? 1.0 : 0.0));
      }
    };
  });
  return r;
}

Tensor add_rowvec(const Tensor& m, const Tensor& v) {
  if (m.rank() != 2 || v.rank() != 1 || v.extent(0) != m.extent(1)) {
    throw DimError("add_rowvec: need [r,c] + [c], got " + shape_str(m.shape()) + " and " +
                   shape_str(v.shape()));
  }
  const int rows = m.extent(0), cols = m.extent(1);
  std::vector<double> out(static_cast<size_t>(rows) * cols);
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < cols; ++c)
      out[static_cast<size_t>(r * cols + c)] = m.data()[r * cols + c] + v.data()[c];
  Tensor res = Tensor::from(m.shape(), std::move(out));
  record(res, {&m, &v}, [rows, cols](std::vector<int> in) {
    return [=](Tape& t, int self) {
      const auto& go = *t.grad_ptr(self);
      if (in[0] >= 0) axpy(t.grad_buf(in[0], static_cast<int64_t>(rows) * cols), go.data(),
                           static_cast<int64_t>(rows) * cols);
      if (in[1] >= 0) {
        auto& g = t.grad_buf(in[1], cols);
        for (int r = 0; r < rows; ++r)
          for (int c = 0; c < cols; ++c) g[static_cast<size_t>(c)] += go[static_cast<size_t>(r * cols + c)];
      }
    };
  });
  return res;
}

Tensor tile_rows(const Tensor& v, int n) {
  if (v.rank() != 1) throw DimError("tile_rows: rank-1 required, got " + shape_str(v.shape()));
  if (n < 1) throw std::invalid_argument("tile_rows: n must be >= 1");
  const int len = v.extent(0);
  std::vector<double> out(static_cast<size_t>(n) * len);
  for (int r = 0; r < n; ++r)
    std::memcpy(&out[static_cast<size_t>(r) * len], v.data(), sizeof(double) * static_cast<size_t>(len));
  Tensor res = Tensor::from({n, len}, std::move(out));
  record(res, {&v}, [n, len](std::vector<int> in) {
    return [=](Tape& t, int self) {
      if (in[0] < 0) return;
      const auto& go = *t.grad_ptr(self);
      auto& g = t.grad_buf(in[0], len);
      for (int r = 0; r < n; ++r)
        for (int c = 0; c < len; ++c) g[static_cast<size_t>(c)] += go[static_cast<size_t>(r * len + c)];
    };
  });
  return res;
}

Tensor xavier_uniform(int rows, int cols, Rng& rng) {
  const double bound = std::sqrt(6.0 / (rows + cols));
  std::vector<double> vals(static_cast<size_t>(rows) * cols);
  for (auto& v : vals) v = rng.uniform(-bound, bound);
  return Tensor::from({rows, cols}, std::move(vals));
}

// --- Adam --------------------------------------------------------------------

void AdamState::init(const std::vector<Tensor*>& params) {
  m.clear();
  v.clear();
  for (const Tensor* p : params) {
    m.emplace_back(static_cast<size_t>(p->size()), 0.0);
    v.emplace_back(static_cast<size_t>(p->size()), 0.0);
  }
  step = 0;
}

void adam_step(const std::vector<Tensor*>& params, const std::vector<Tensor>& grads,
               AdamState& state) {
  if (!state.initialized()) state.init(params);
  if (params.size() != grads.size() || params.size() != state.m.size()) {
    throw DimError("adam_step: parameter/gradient/state counts differ");
  }
  ++state.step;
  const double bc1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step));
  for (size_t p = 0; p < params.size(); ++p) {
    Tensor& w = *params[p];
    const Tensor& g = grads[p];
    if (w.shape() != g.shape() || state.m[p].size() != static_cast<size_t>(w.size())) {
      throw DimError("adam_step: shape mismatch for parameter " + std::to_string(p) + ": " +
                     shape_str(w.shape()) + " vs " + shape_str(g.shape()));
    }
    auto& m = state.m[p];
    auto& v = state.v[p];
    for (int64_t i = 0; i < w.size(); ++i) {
      const auto idx = static_cast<size_t>(i);
      m[idx] = state.beta1 * m[idx] + (1.0 - state.beta1) * g.data()[i];
      v[idx] = state.beta2 * v[idx] + (1.0 - state.beta2) * g.data()[i] * g.data()[i];
      const double mhat = m[idx] / bc1;
      const double vhat = v[idx] / bc2;
      w.data()[i] -= state.lr * mhat / (std::sqrt(vhat) + state.eps);
    }
  }
}

}  // namespace tagg

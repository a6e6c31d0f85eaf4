#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <memory>
#include <numeric>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "mrrg/rng.hpp"

namespace mrrg {

using Shape = std::vector<std::size_t>;

inline std::string shape_str(const Shape& s) {
  std::string out = "(";
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (i) out += ",";
    out += std::to_string(s[i]);
  }
  out += ")";
  return out;
}

struct ShapeError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

namespace detail {

struct TensorNode {
  Shape shape;
  std::vector<double> values;
  std::vector<double> grad;  // sized lazily by Tape::backward
  bool requires_grad = false;
  bool leaf = true;
};

// C(M,N) = opA(M,K) * opB(K,N), where A is stored as (K,M) when trans_a
// and B as (N,K) when trans_b. Accumulates into c when acc is set.
inline void matmul_kernel(const double* a, const double* b, double* c,
                          std::size_t m, std::size_t k, std::size_t n,
                          bool trans_a, bool trans_b, bool acc) {
  if (!acc) std::fill(c, c + m * n, 0.0);
  if (!trans_a && !trans_b) {
    if (n == 1) {
      // matvec: one dot product per row
      for (std::size_t i = 0; i < m; ++i) {
        const double* arow = a + i * k;
        double s = 0.0;
        for (std::size_t p = 0; p < k; ++p) s += arow[p] * b[p];
        c[i] += s;
      }
      return;
    }
    for (std::size_t i = 0; i < m; ++i) {
      const double* arow = a + i * k;
      double* crow = c + i * n;
      for (std::size_t p = 0; p < k; ++p) {
        const double aip = arow[p];
        const double* brow = b + p * n;
        for (std::size_t j = 0; j < n; ++j) crow[j] += aip * brow[j];
      }
    }
  } else if (!trans_a && trans_b) {
    for (std::size_t i = 0; i < m; ++i) {
      const double* arow = a + i * k;
      double* crow = c + i * n;
      for (std::size_t j = 0; j < n; ++j) {
        const double* brow = b + j * k;
        double s = 0.0;
        for (std::size_t p = 0; p < k; ++p) s += arow[p] * brow[p];
        crow[j] += s;
      }
    }
  } else if (trans_a && !trans_b) {
    if (n == 1) {
      for (std::size_t p = 0; p < k; ++p) {
        const double* arow = a + p * m;
        const double bp = b[p];
        for (std::size_t i = 0; i < m; ++i) c[i] += arow[i] * bp;
      }
      return;
    }
    for (std::size_t p = 0; p < k; ++p) {
      const double* arow = a + p * m;
      const double* brow = b + p * n;
      for (std::size_t i = 0; i < m; ++i) {
        const double api = arow[i];
        double* crow = c + i * n;
        for (std::size_t j = 0; j < n; ++j) crow[j] += api * brow[j];
      }
    }
  } else {
    for (std::size_t i = 0; i < m; ++i) {
      double* crow = c + i * n;
      for (std::size_t j = 0; j < n; ++j) {
        const double* brow = b + j * k;
        double s = 0.0;
        for (std::size_t p = 0; p < k; ++p) s += a[p * m + i] * brow[p];
        crow[j] += s;
      }
    }
  }
}

}  // namespace detail

// Dense float64 tensor with handle semantics: copies share the node, which
// is what ties forward results to their gradient slots.
class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(Shape shape) {
    Tensor t;
    t.node_ = std::make_shared<detail::TensorNode>();
    std::size_t n = numel_of(shape);
    t.node_->shape = std::move(shape);
    t.node_->values.assign(n, 0.0);
    return t;
  }

  static Tensor from(Shape shape, std::vector<double> values) {
    if (numel_of(shape) != values.size())
      throw ShapeError("tensor: " + std::to_string(values.size()) +
                       " values do not fill shape " + shape_str(shape));
    Tensor t;
    t.node_ = std::make_shared<detail::TensorNode>();
    t.node_->shape = std::move(shape);
    t.node_->values = std::move(values);
    return t;
  }

  static Tensor scalar(double v) { return from({1}, {v}); }

  // trainable parameter, uniform init in [-bound, bound]
  static Tensor param(Shape shape, Rng& rng, double bound) {
    Tensor t = zeros(std::move(shape));
    for (double& v : t.values()) v = rng.uniform(-bound, bound);
    t.node_->requires_grad = true;
    return t;
  }

  static Tensor param_zeros(Shape shape) {
    Tensor t = zeros(std::move(shape));
    t.node_->requires_grad = true;
    return t;
  }

  bool defined() const { return node_ != nullptr; }
  const Shape& shape() const { return node_->shape; }
  std::size_t rank() const { return node_->shape.size(); }
  std::size_t numel() const { return node_->values.size(); }
  std::size_t dim(std::size_t i) const { return node_->shape[i]; }

  std::vector<double>& values() { return node_->values; }
  const std::vector<double>& values() const { return node_->values; }
  double item() const {
    if (numel() != 1) throw std::invalid_argument("item: tensor is not scalar");
    return node_->values[0];
  }

  // gradient of the last backward pass; empty vector means zero everywhere
  const std::vector<double>& grad() const { return node_->grad; }
  double grad_at(std::size_t i) const {
    return node_->grad.empty() ? 0.0 : node_->grad[i];
  }

  bool requires_grad() const { return node_->requires_grad; }
  void set_requires_grad(bool b) { node_->requires_grad = b; }
  bool is_leaf() const { return node_->leaf; }

  bool all_finite() const {
    for (double v : node_->values)
      if (!std::isfinite(v)) return false;
    return true;
  }

  std::shared_ptr<detail::TensorNode> node() const { return node_; }

  static std::size_t numel_of(const Shape& s) {
    std::size_t n = 1;
    for (std::size_t e : s) n *= e;
    return n;
  }

 private:
  std::shared_ptr<detail::TensorNode> node_;
};

// Ordered record of the forward computation. backward() replays it once in
// reverse, accumulating d(output)/d(node) into every touched node's grad.
class Tape {
 public:
  Tape() = default;
  explicit Tape(bool recording) : recording_(recording) {}

  bool recording() const { return recording_; }

  void record(std::vector<std::shared_ptr<detail::TensorNode>> nodes,
              std::function<void()> step) {
    if (!recording_) return;
    ops_.push_back(Op{std::move(nodes), std::move(step)});
  }

  std::size_t num_ops() const { return ops_.size(); }

  void backward(const Tensor& output) {
    if (output.numel() != 1)
      throw std::invalid_argument("backward: output must be scalar, got shape " +
                                  shape_str(output.shape()));
    for (auto& op : ops_)
      for (auto& n : op.nodes) n->grad.assign(n->values.size(), 0.0);
    auto out = output.node();
    out->grad.assign(1, 0.0);
    out->grad[0] = 1.0;
    for (auto it = ops_.rbegin(); it != ops_.rend(); ++it) it->step();
  }

 private:
  struct Op {
    std::vector<std::shared_ptr<detail::TensorNode>> nodes;
    std::function<void()> step;
  };
  std::vector<Op> ops_;
  bool recording_ = true;
};

namespace detail {

inline bool wants_grad(const std::shared_ptr<TensorNode>& n) {
  return n->requires_grad || !n->leaf;
}

inline Tensor make_result(Shape shape) {
  Tensor t = Tensor::zeros(std::move(shape));
  t.node()->leaf = false;
  return t;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Primitive ops. Each op computes forward values and records one backward
// step on the tape.
// ---------------------------------------------------------------------------

// matmul over rank-1/rank-2 operands. Vectors act as a row (lhs) or a
// column (rhs); transpose flags apply to matrices only.
inline Tensor matmul(Tape& tape, const Tensor& a, const Tensor& b,
                     bool trans_a = false, bool trans_b = false) {
  if (a.rank() == 1 && trans_a)
    throw ShapeError("matmul: cannot transpose rank-1 lhs");
  if (b.rank() == 1 && trans_b)
    throw ShapeError("matmul: cannot transpose rank-1 rhs");
  if (a.rank() > 2 || b.rank() > 2 || a.rank() == 0 || b.rank() == 0)
    throw ShapeError("matmul: expects rank 1 or 2, got " + shape_str(a.shape()) +
                     " and " + shape_str(b.shape()));

  const std::size_t m = a.rank() == 1 ? 1 : (trans_a ? a.dim(1) : a.dim(0));
  const std::size_t k = a.rank() == 1 ? a.dim(0) : (trans_a ? a.dim(0) : a.dim(1));
  const std::size_t k2 = b.rank() == 1 ? b.dim(0) : (trans_b ? b.dim(1) : b.dim(0));
  const std::size_t n = b.rank() == 1 ? 1 : (trans_b ? b.dim(0) : b.dim(1));
  if (k != k2)
    throw ShapeError("matmul: inner extents differ for shapes " +
                     shape_str(a.shape()) + " and " + shape_str(b.shape()));

  Shape out_shape;
  if (a.rank() == 2 && b.rank() == 2)
    out_shape = {m, n};
  else if (a.rank() == 1 && b.rank() == 2)
    out_shape = {n};
  else if (a.rank() == 2 && b.rank() == 1)
    out_shape = {m};
  else
    out_shape = {1};

  Tensor c = detail::make_result(std::move(out_shape));
  detail::matmul_kernel(a.values().data(), b.values().data(), c.values().data(),
                        m, k, n, trans_a, trans_b, false);

  auto an = a.node(), bn = b.node(), cn = c.node();
  tape.record({an, bn, cn}, [an, bn, cn, m, k, n, trans_a, trans_b]() {
    const double* dc = cn->grad.data();
    if (detail::wants_grad(an)) {
      if (!trans_a) {
        // dA(m,k) = dC(m,n) * opB^T(n,k)
        detail::matmul_kernel(dc, bn->values.data(), an->grad.data(), m, n, k,
                              false, !trans_b, true);
      } else {
        // A stored (k,m): dA = opB(k,n) * dC^T(n,m)
        detail::matmul_kernel(bn->values.data(), dc, an->grad.data(), k, n, m,
                              trans_b, true, true);
      }
    }
    if (detail::wants_grad(bn)) {
      if (!trans_b) {
        // dB(k,n) = opA^T(k,m) * dC(m,n)
        detail::matmul_kernel(an->values.data(), dc, bn->grad.data(), k, m, n,
                              !trans_a, false, true);
      } else {
        // B stored (n,k): dB = dC^T(n,m) * opA(m,k)
        detail::matmul_kernel(dc, an->values.data(), bn->grad.data(), n, m, k,
                              true, trans_a, true);
      }
    }
  });
  return c;
}

// add: same-shape elementwise, or matrix + row bias (m,n)+(n)
inline Tensor add(Tape& tape, const Tensor& a, const Tensor& b) {
  const bool bias = a.rank() == 2 && b.rank() == 1 && a.dim(1) == b.dim(0);
  if (!bias && a.shape() != b.shape())
    throw ShapeError("add: shapes " + shape_str(a.shape()) + " and " +
                     shape_str(b.shape()) + " do not match");
  Tensor c = detail::make_result(a.shape());
  const auto& av = a.values();
  const auto& bv = b.values();
  auto& cv = c.values();
  if (bias) {
    const std::size_t rows = a.dim(0), cols = a.dim(1);
    for (std::size_t i = 0; i < rows; ++i)
      for (std::size_t j = 0; j < cols; ++j) cv[i * cols + j] = av[i * cols + j] + bv[j];
  } else {
    for (std::size_t i = 0; i < cv.size(); ++i) cv[i] = av[i] + bv[i];
  }
  auto an = a.node(), bn = b.node(), cn = c.node();
  tape.record({an, bn, cn}, [an, bn, cn, bias]() {
    const auto& dc = cn->grad;
    if (detail::wants_grad(an))
      for (std::size_t i = 0; i < dc.size(); ++i) an->grad[i] += dc[i];
    if (detail::wants_grad(bn)) {
      if (bias) {
        const std::size_t cols = bn->values.size();
        const std::size_t rows = dc.size() / cols;
        for (std::size_t i = 0; i < rows; ++i)
          for (std::size_t j = 0; j < cols; ++j) bn->grad[j] += dc[i * cols + j];
      } else {
        for (std::size_t i = 0; i < dc.size(); ++i) bn->grad[i] += dc[i];
      }
    }
  });
  return c;
}

// adds v_i to every element of row i
inline Tensor add_colvec(Tape& tape, const Tensor& a, const Tensor& v) {
  if (a.rank() != 2 || v.rank() != 1 || a.dim(0) != v.dim(0))
    throw ShapeError("add_colvec: shapes " + shape_str(a.shape()) + " and " +
                     shape_str(v.shape()) + " do not match");
  Tensor c = detail::make_result(a.shape());
  const std::size_t rows = a.dim(0), cols = a.dim(1);
  for (std::size_t i = 0; i < rows; ++i)
    for (std::size_t j = 0; j < cols; ++j)
      c.values()[i * cols + j] = a.values()[i * cols + j] + v.values()[i];
  auto an = a.node(), vn = v.node(), cn = c.node();
  tape.record({an, vn, cn}, [an, vn, cn, rows, cols]() {
    const auto& dc = cn->grad;
    if (detail::wants_grad(an))
      for (std::size_t i = 0; i < dc.size(); ++i) an->grad[i] += dc[i];
    if (detail::wants_grad(vn))
      for (std::size_t i = 0; i < rows; ++i)
        for (std::size_t j = 0; j < cols; ++j) vn->grad[i] += dc[i * cols + j];
  });
  return c;
}

// mul: same-shape elementwise, or scale by a 1-element tensor (either side)
inline Tensor mul(Tape& tape, const Tensor& a, const Tensor& b) {
  const bool a_scalar = a.numel() == 1 && b.numel() != 1;
  const bool b_scalar = b.numel() == 1 && a.numel() != 1;
  const bool both_single = a.numel() == 1 && b.numel() == 1;
  if (!a_scalar && !b_scalar && !both_single && a.shape() != b.shape())
    throw ShapeError("mul: shapes " + shape_str(a.shape()) + " and " +
                     shape_str(b.shape()) + " do not match");
  const Tensor& big = a_scalar ? b : a;
  Tensor c = detail::make_result(big.shape());
  const auto& av = a.values();
  const auto& bv = b.values();
  auto& cv = c.values();
  if (a_scalar) {
    for (std::size_t i = 0; i < cv.size(); ++i) cv[i] = av[0] * bv[i];
  } else if (b_scalar) {
    for (std::size_t i = 0; i < cv.size(); ++i) cv[i] = av[i] * bv[0];
  } else {
    for (std::size_t i = 0; i < cv.size(); ++i) cv[i] = av[i] * bv[i];
  }
  auto an = a.node(), bn = b.node(), cn = c.node();
  tape.record({an, bn, cn}, [an, bn, cn, a_scalar, b_scalar]() {
    const auto& dc = cn->grad;
    if (detail::wants_grad(an)) {
      if (a_scalar) {
        double s = 0.0;
        for (std::size_t i = 0; i < dc.size(); ++i) s += dc[i] * bn->values[i];
        an->grad[0] += s;
      } else if (b_scalar) {
        for (std::size_t i = 0; i < dc.size(); ++i) an->grad[i] += dc[i] * bn->values[0];
      } else {
        for (std::size_t i = 0; i < dc.size(); ++i) an->grad[i] += dc[i] * bn->values[i];
      }
    }
    if (detail::wants_grad(bn)) {
      if (b_scalar) {
        double s = 0.0;
        for (std::size_t i = 0; i < dc.size(); ++i) s += dc[i] * an->values[i];
        bn->grad[0] += s;
      } else if (a_scalar) {
        for (std::size_t i = 0; i < dc.size(); ++i) bn->grad[i] += dc[i] * an->values[0];
      } else {
        for (std::size_t i = 0; i < dc.size(); ++i) bn->grad[i] += dc[i] * an->values[i];
      }
    }
  });
  return c;
}

inline Tensor scale(Tape& tape, const Tensor& a, double s) {
  return mul(tape, a, Tensor::scalar(s));
}

// concat of rank-1 tensors into one rank-1 tensor
inline Tensor concat(Tape& tape, const std::vector<Tensor>& parts) {
  if (parts.empty()) throw std::invalid_argument("concat: no parts");
  std::size_t total = 0;
  for (const auto& p : parts) {
    if (p.rank() != 1)
      throw ShapeError("concat: expects rank-1 parts, got " + shape_str(p.shape()));
    total += p.numel();
  }
  Tensor c = detail::make_result({total});
  std::size_t off = 0;
  for (const auto& p : parts) {
    std::copy(p.values().begin(), p.values().end(), c.values().begin() + off);
    off += p.numel();
  }
  std::vector<std::shared_ptr<detail::TensorNode>> nodes;
  nodes.reserve(parts.size() + 1);
  for (const auto& p : parts) nodes.push_back(p.node());
  auto cn = c.node();
  nodes.push_back(cn);
  auto part_nodes = nodes;
  part_nodes.pop_back();
  tape.record(std::move(nodes), [part_nodes, cn]() {
    std::size_t off = 0;
    for (const auto& pn : part_nodes) {
      if (detail::wants_grad(pn))
        for (std::size_t i = 0; i < pn->values.size(); ++i)
          pn->grad[i] += cn->grad[off + i];
      off += pn->values.size();
    }
  });
  return c;
}

// stack rank-1 tensors of equal length as matrix rows
inline Tensor stack_rows(Tape& tape, const std::vector<Tensor>& rows) {
  if (rows.empty()) throw std::invalid_argument("stack_rows: no rows");
  const std::size_t cols = rows[0].numel();
  for (const auto& r : rows)
    if (r.rank() != 1 || r.numel() != cols)
      throw ShapeError("stack_rows: rows must share shape, got " +
                       shape_str(r.shape()));
  Tensor c = detail::make_result({rows.size(), cols});
  for (std::size_t i = 0; i < rows.size(); ++i)
    std::copy(rows[i].values().begin(), rows[i].values().end(),
              c.values().begin() + i * cols);
  std::vector<std::shared_ptr<detail::TensorNode>> nodes;
  for (const auto& r : rows) nodes.push_back(r.node());
  auto cn = c.node();
  nodes.push_back(cn);
  auto row_nodes = nodes;
  row_nodes.pop_back();
  tape.record(std::move(nodes), [row_nodes, cn, cols]() {
    for (std::size_t i = 0; i < row_nodes.size(); ++i) {
      const auto& rn = row_nodes[i];
      if (!detail::wants_grad(rn)) continue;
      for (std::size_t j = 0; j < cols; ++j) rn->grad[j] += cn->grad[i * cols + j];
    }
  });
  return c;
}

// contiguous slice of a rank-1 tensor
inline Tensor slice(Tape& tape, const Tensor& a, std::size_t start, std::size_t len) {
  if (a.rank() != 1 || start + len > a.numel())
    throw ShapeError("slice: [" + std::to_string(start) + "," +
                     std::to_string(start + len) + ") out of range for " +
                     shape_str(a.shape()));
  Tensor c = detail::make_result({len});
  std::copy(a.values().begin() + start, a.values().begin() + start + len,
            c.values().begin());
  auto an = a.node(), cn = c.node();
  tape.record({an, cn}, [an, cn, start, len]() {
    if (!detail::wants_grad(an)) return;
    for (std::size_t i = 0; i < len; ++i) an->grad[start + i] += cn->grad[i];
  });
  return c;
}

// row i of a matrix as a rank-1 tensor
inline Tensor row(Tape& tape, const Tensor& a, std::size_t i) {
  if (a.rank() != 2 || i >= a.dim(0))
    throw ShapeError("row: index " + std::to_string(i) + " out of range for " +
                     shape_str(a.shape()));
  const std::size_t cols = a.dim(1);
  Tensor c = detail::make_result({cols});
  std::copy(a.values().begin() + i * cols, a.values().begin() + (i + 1) * cols,
            c.values().begin());
  auto an = a.node(), cn = c.node();
  tape.record({an, cn}, [an, cn, i, cols]() {
    if (!detail::wants_grad(an)) return;
    for (std::size_t j = 0; j < cols; ++j) an->grad[i * cols + j] += cn->grad[j];
  });
  return c;
}

// mean over rows: (m,n) -> (n)
inline Tensor mean_rows(Tape& tape, const Tensor& a) {
  if (a.rank() != 2)
    throw ShapeError("mean_rows: expects rank-2, got " + shape_str(a.shape()));
  const std::size_t rows = a.dim(0), cols = a.dim(1);
  if (rows == 0) throw std::invalid_argument("mean_rows: empty matrix");
  Tensor c = detail::make_result({cols});
  for (std::size_t i = 0; i < rows; ++i)
    for (std::size_t j = 0; j < cols; ++j) c.values()[j] += a.values()[i * cols + j];
  for (double& v : c.values()) v /= static_cast<double>(rows);
  auto an = a.node(), cn = c.node();
  tape.record({an, cn}, [an, cn, rows, cols]() {
    if (!detail::wants_grad(an)) return;
    const double inv = 1.0 / static_cast<double>(rows);
    for (std::size_t i = 0; i < rows; ++i)
      for (std::size_t j = 0; j < cols; ++j) an->grad[i * cols + j] += cn->grad[j] * inv;
  });
  return c;
}

inline Tensor mean_all(Tape& tape, const Tensor& a) {
  if (a.numel() == 0) throw std::invalid_argument("mean_all: empty tensor");
  Tensor c = detail::make_result({1});
  double s = 0.0;
  for (double v : a.values()) s += v;
  c.values()[0] = s / static_cast<double>(a.numel());
  auto an = a.node(), cn = c.node();
  tape.record({an, cn}, [an, cn]() {
    if (!detail::wants_grad(an)) return;
    const double g = cn->grad[0] / static_cast<double>(an->values.size());
    for (double& d : an->grad) d += g;
  });
  return c;
}

// max over axis 1: (m,n) -> (m); gradient routes to the first argmax per row
inline Tensor row_max(Tape& tape, const Tensor& a) {
  if (a.rank() != 2 || a.dim(1) == 0)
    throw ShapeError("row_max: expects non-empty rank-2, got " + shape_str(a.shape()));
  const std::size_t rows = a.dim(0), cols = a.dim(1);
  Tensor c = detail::make_result({rows});
  auto argmax = std::make_shared<std::vector<std::size_t>>(rows);
  for (std::size_t i = 0; i < rows; ++i) {
    std::size_t best = 0;
    double bv = a.values()[i * cols];
    for (std::size_t j = 1; j < cols; ++j) {
      double v = a.values()[i * cols + j];
      if (v > bv) {
        bv = v;
        best = j;
      }
    }
    c.values()[i] = bv;
    (*argmax)[i] = best;
  }
  auto an = a.node(), cn = c.node();
  tape.record({an, cn}, [an, cn, argmax, cols]() {
    if (!detail::wants_grad(an)) return;
    for (std::size_t i = 0; i < argmax->size(); ++i)
      an->grad[i * cols + (*argmax)[i]] += cn->grad[i];
  });
  return c;
}

namespace detail {

inline void softmax_inplace(const double* x, double* y, std::size_t n) {
  double mx = x[0];
  for (std::size_t i = 1; i < n; ++i) mx = std::max(mx, x[i]);
  double sum = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    y[i] = std::exp(x[i] - mx);
    sum += y[i];
  }
  for (std::size_t i = 0; i < n; ++i) y[i] /= sum;
}

}  // namespace detail

// numerically stable softmax of a rank-1 tensor
inline Tensor softmax(Tape& tape, const Tensor& a) {
  if (a.rank() != 1 || a.numel() == 0)
    throw std::invalid_argument("softmax: expects non-empty vector, got " +
                                shape_str(a.defined() ? a.shape() : Shape{}));
  const std::size_t n = a.numel();
  Tensor c = detail::make_result({n});
  detail::softmax_inplace(a.values().data(), c.values().data(), n);
  auto an = a.node(), cn = c.node();
  tape.record({an, cn}, [an, cn]() {
    if (!detail::wants_grad(an)) return;
    const auto& y = cn->values;
    const auto& dy = cn->grad;
    double dot = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) dot += dy[i] * y[i];
    for (std::size_t i = 0; i < y.size(); ++i) an->grad[i] += y[i] * (dy[i] - dot);
  });
  return c;
}

// row-wise softmax of a matrix
inline Tensor softmax_rows(Tape& tape, const Tensor& a) {
  if (a.rank() != 2 || a.dim(1) == 0)
    throw std::invalid_argument("softmax_rows: expects non-empty rank-2, got " +
                                shape_str(a.shape()));
  const std::size_t rows = a.dim(0), cols = a.dim(1);
  Tensor c = detail::make_result({rows, cols});
  for (std::size_t i = 0; i < rows; ++i)
    detail::softmax_inplace(a.values().data() + i * cols,
                            c.values().data() + i * cols, cols);
  auto an = a.node(), cn = c.node();
  tape.record({an, cn}, [an, cn, rows, cols]() {
    if (!detail::wants_grad(an)) return;
    for (std::size_t i = 0; i < rows; ++i) {
      const double* y = cn->values.data() + i * cols;
      const double* dy = cn->grad.data() + i * cols;
      double dot = 0.0;
      for (std::size_t j = 0; j < cols; ++j) dot += dy[j] * y[j];
      for (std::size_t j = 0; j < cols; ++j)
        an->grad[i * cols + j] += y[j] * (dy[j] - dot);
    }
  });
  return c;
}

inline Tensor sigmoid(Tape& tape, const Tensor& a) {
  Tensor c = detail::make_result(a.shape());
  for (std::size_t i = 0; i < a.numel(); ++i) {
    double x = a.values()[i];
    c.values()[i] = x >= 0.0 ? 1.0 / (1.0 + std::exp(-x))
                             : std::exp(x) / (1.0 + std::exp(x));
  }
  auto an = a.node(), cn = c.node();
  tape.record({an, cn}, [an, cn]() {
    if (!detail::wants_grad(an)) return;
    for (std::size_t i = 0; i < cn->values.size(); ++i) {
      double y = cn->values[i];
      an->grad[i] += cn->grad[i] * y * (1.0 - y);
    }
  });
  return c;
}

inline Tensor tanh_op(Tape& tape, const Tensor& a) {
  Tensor c = detail::make_result(a.shape());
  for (std::size_t i = 0; i < a.numel(); ++i) c.values()[i] = std::tanh(a.values()[i]);
  auto an = a.node(), cn = c.node();
  tape.record({an, cn}, [an, cn]() {
    if (!detail::wants_grad(an)) return;
    for (std::size_t i = 0; i < cn->values.size(); ++i) {
      double y = cn->values[i];
      an->grad[i] += cn->grad[i] * (1.0 - y * y);
    }
  });
  return c;
}

inline Tensor relu(Tape& tape, const Tensor& a) {
  Tensor c = detail::make_result(a.shape());
  for (std::size_t i = 0; i < a.numel(); ++i)
    c.values()[i] = a.values()[i] > 0.0 ? a.values()[i] : 0.0;
  auto an = a.node(), cn = c.node();
  tape.record({an, cn}, [an, cn]() {
    if (!detail::wants_grad(an)) return;
    for (std::size_t i = 0; i < cn->values.size(); ++i)
      if (an->values[i] > 0.0) an->grad[i] += cn->grad[i];
  });
  return c;
}

// rows of an embedding table: (V,d) gathered by ids -> (len(ids), d).
// A frozen table (requires_grad off) keeps exactly-zero gradients.
inline Tensor embedding_lookup(Tape& tape, const Tensor& table,
                               const std::vector<std::size_t>& ids) {
  if (table.rank() != 2)
    throw ShapeError("embedding_lookup: table must be rank-2, got " +
                     shape_str(table.shape()));
  if (ids.empty()) throw std::invalid_argument("embedding_lookup: no ids");
  const std::size_t v = table.dim(0), d = table.dim(1);
  for (std::size_t id : ids)
    if (id >= v)
      throw std::invalid_argument("embedding_lookup: id " + std::to_string(id) +
                                  " outside table of " + std::to_string(v));
  Tensor c = detail::make_result({ids.size(), d});
  for (std::size_t i = 0; i < ids.size(); ++i)
    std::copy(table.values().begin() + ids[i] * d,
              table.values().begin() + (ids[i] + 1) * d,
              c.values().begin() + i * d);
  auto tn = table.node(), cn = c.node();
  auto ids_copy = std::make_shared<std::vector<std::size_t>>(ids);
  tape.record({tn, cn}, [tn, cn, ids_copy, d]() {
    if (!tn->requires_grad) return;  // frozen table: gradient stays zero
    for (std::size_t i = 0; i < ids_copy->size(); ++i) {
      const std::size_t id = (*ids_copy)[i];
      for (std::size_t j = 0; j < d; ++j)
        tn->grad[id * d + j] += cn->grad[i * d + j];
    }
  });
  return c;
}

// cross-entropy of a logit vector against a gold index:
// logsumexp(logits) - logits[gold]
inline Tensor cross_entropy(Tape& tape, const Tensor& logits, std::size_t gold) {
  if (logits.rank() != 1 || logits.numel() == 0)
    throw std::invalid_argument("cross_entropy: expects non-empty logit vector");
  if (gold >= logits.numel())
    throw std::invalid_argument("cross_entropy: gold index " + std::to_string(gold) +
                                " out of range " + std::to_string(logits.numel()));
  const std::size_t n = logits.numel();
  const auto& x = logits.values();
  double mx = x[0];
  for (std::size_t i = 1; i < n; ++i) mx = std::max(mx, x[i]);
  double sum = 0.0;
  for (std::size_t i = 0; i < n; ++i) sum += std::exp(x[i] - mx);
  Tensor c = detail::make_result({1});
  c.values()[0] = mx + std::log(sum) - x[gold];
  auto an = logits.node(), cn = c.node();
  tape.record({an, cn}, [an, cn, gold]() {
    if (!detail::wants_grad(an)) return;
    const std::size_t n = an->values.size();
    std::vector<double> p(n);
    detail::softmax_inplace(an->values.data(), p.data(), n);
    const double g = cn->grad[0];
    for (std::size_t i = 0; i < n; ++i)
      an->grad[i] += g * (p[i] - (i == gold ? 1.0 : 0.0));
  });
  return c;
}

// W*x + b
inline Tensor affine(Tape& tape, const Tensor& x, const Tensor& w, const Tensor& b) {
  return add(tape, matmul(tape, w, x), b);
}

// -log prob[gold] on an already-normalized distribution (reporting form;
// training uses cross_entropy on logits)
inline double nll(const std::vector<double>& prob, std::size_t gold) {
  if (gold >= prob.size())
    throw std::invalid_argument("nll: gold index " + std::to_string(gold) +
                                " out of range " + std::to_string(prob.size()));
  return -std::log(prob[gold]);
}

// ---------------------------------------------------------------------------
// Gradient checking: analytic backward vs central finite differences.
// ---------------------------------------------------------------------------

struct GradCheckReport {
  double max_rel_error = 0.0;
  std::string worst_param;
  std::size_t worst_index = 0;
  double worst_analytic = 0.0;
  double worst_numeric = 0.0;
  std::size_t checked = 0;
};

// f builds the forward computation on the given tape and returns a scalar.
// Every sampled component of every param is perturbed by +-eps; relative
// error uses |a-n| / max(|a|, |n|, 1e-8).
inline GradCheckReport grad_check(
    const std::function<Tensor(Tape&)>& f,
    const std::vector<std::pair<std::string, Tensor>>& params, double eps = 1e-5,
    std::size_t max_per_tensor = 0) {
  if (eps <= 0.0) throw std::invalid_argument("grad_check: eps must be positive");
  Tape tape;
  Tensor out = f(tape);
  tape.backward(out);

  std::vector<std::vector<double>> analytic;
  analytic.reserve(params.size());
  for (const auto& [name, p] : params) {
    std::vector<double> g(p.numel());
    for (std::size_t i = 0; i < g.size(); ++i) g[i] = p.grad_at(i);
    analytic.push_back(std::move(g));
  }

  GradCheckReport report;
  for (std::size_t pi = 0; pi < params.size(); ++pi) {
    Tensor p = params[pi].second;
    const std::size_t n = p.numel();
    std::size_t stride = 1;
    if (max_per_tensor > 0 && n > max_per_tensor) stride = n / max_per_tensor;
    for (std::size_t i = 0; i < n; i += stride) {
      const double saved = p.values()[i];
      p.values()[i] = saved + eps;
      Tape t_plus(false);
      const double f_plus = f(t_plus).item();
      p.values()[i] = saved - eps;
      Tape t_minus(false);
      const double f_minus = f(t_minus).item();
      p.values()[i] = saved;
      const double numeric = (f_plus - f_minus) / (2.0 * eps);
      const double a = analytic[pi][i];
      const double rel = std::abs(a - numeric) /
                         std::max({std::abs(a), std::abs(numeric), 1e-8});
      ++report.checked;
      if (rel > report.max_rel_error) {
        report.max_rel_error = rel;
        report.worst_param = params[pi].first;
        report.worst_index = i;
        report.worst_analytic = a;
        report.worst_numeric = numeric;
      }
    }
  }
  return report;
}

}  // namespace mrrg

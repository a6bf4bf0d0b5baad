// Reverse-mode automatic differentiation on an eager tape.
//
// A Tensor is a value-semantics handle onto a shared node holding shape,
// values, and (for differentiable nodes) a gradient buffer.  Ops live on
// Tape; each op computes its result eagerly and, when some input requires
// gradients, records a closure that propagates the result's gradient back
// into its inputs.  backward() seeds the loss gradient with 1.0 and runs the
// recorded closures in reverse order, touching each exactly once.  Gradients
// accumulate additively; leaf gradients persist across tapes until
// ParamStore::sgd_step (or zero_grads) clears them.
#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "chunkforge/common.hpp"

namespace chunkforge {

namespace detail {

inline std::string shape_str(const std::vector<std::size_t>& shape) {
  std::string s = "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i > 0) s += "x";
    s += std::to_string(shape[i]);
  }
  return s + "]";
}

inline std::size_t shape_size(const std::vector<std::size_t>& shape) {
  std::size_t n = 1;
  for (std::size_t d : shape) n *= d;
  return n;
}

}  // namespace detail

class Tensor {
 public:
  Tensor() = default;

  Tensor(std::vector<std::size_t> shape, std::vector<double> values,
         bool requires_grad = false) {
    for (std::size_t d : shape) {
      if (d == 0) {
        throw DomainError("tensor shape " + detail::shape_str(shape) +
                          " has a zero dimension");
      }
    }
    if (shape.empty()) throw DomainError("tensor shape must have rank >= 1");
    if (detail::shape_size(shape) != values.size()) {
      throw DimensionError("tensor shape " + detail::shape_str(shape) +
                           " does not match value count " +
                           std::to_string(values.size()));
    }
    node_ = std::make_shared<Node>();
    node_->shape = std::move(shape);
    node_->values = std::move(values);
    node_->requires_grad = requires_grad;
    if (requires_grad) node_->grad.assign(node_->values.size(), 0.0);
  }

  static Tensor zeros(std::vector<std::size_t> shape,
                      bool requires_grad = false) {
    std::vector<double> v(detail::shape_size(shape), 0.0);
    return Tensor(std::move(shape), std::move(v), requires_grad);
  }

  static Tensor scalar(double value, bool requires_grad = false) {
    return Tensor({1}, {value}, requires_grad);
  }

  static Tensor vector(std::vector<double> values, bool requires_grad = false) {
    std::size_t n = values.size();
    return Tensor({n}, std::move(values), requires_grad);
  }

  static Tensor matrix(std::size_t rows, std::size_t cols,
                       std::vector<double> values, bool requires_grad = false) {
    return Tensor({rows, cols}, std::move(values), requires_grad);
  }

  bool defined() const { return node_ != nullptr; }
  const std::vector<std::size_t>& shape() const { return node_->shape; }
  std::size_t rank() const { return node_->shape.size(); }
  std::size_t size() const { return node_->values.size(); }

  std::size_t rows() const {
    require_rank(2, "rows()");
    return node_->shape[0];
  }
  std::size_t cols() const {
    require_rank(2, "cols()");
    return node_->shape[1];
  }

  // Handle semantics: a const Tensor is a const handle onto mutable storage,
  // like a shared_ptr.  Ops and the optimizer write through these.
  std::vector<double>& values() const { return node_->values; }
  std::vector<double>& grad() const {
    if (!node_->requires_grad) {
      throw StateError("gradient requested for a tensor that does not require it");
    }
    return node_->grad;
  }

  bool requires_grad() const { return node_->requires_grad; }

  double item() const {
    if (size() != 1) {
      throw DimensionError("item() on tensor of shape " +
                           detail::shape_str(node_->shape));
    }
    return node_->values[0];
  }

  double at(std::size_t i) const { return node_->values.at(i); }
  double at(std::size_t r, std::size_t c) const {
    require_rank(2, "at(r,c)");
    return node_->values.at(r * cols() + c);
  }

  void zero_grad() const {
    if (node_->requires_grad) node_->grad.assign(node_->values.size(), 0.0);
  }

  bool same_node(const Tensor& other) const { return node_ == other.node_; }

 private:
  struct Node {
    std::vector<std::size_t> shape;
    std::vector<double> values;
    std::vector<double> grad;  // allocated iff requires_grad
    bool requires_grad = false;
  };

  void require_rank(std::size_t r, const char* what) const {
    if (node_->shape.size() != r) {
      throw DimensionError(std::string(what) + " on tensor of shape " +
                           detail::shape_str(node_->shape));
    }
  }

  std::shared_ptr<Node> node_;
};

// Eager op recorder.  One Tape per training step; dropping the tape frees the
// graph while leaves owned elsewhere (ParamStore) survive.
class Tape {
 public:
  std::size_t size() const { return entries_.size(); }

  // out = a @ b for rank-2 a [m x k], b [k x n].
  Tensor matmul(const Tensor& a, const Tensor& b) {
    require_rank(a, 2, "matmul lhs");
    require_rank(b, 2, "matmul rhs");
    if (a.cols() != b.rows()) {
      throw DimensionError("matmul " + detail::shape_str(a.shape()) + " x " +
                           detail::shape_str(b.shape()));
    }
    std::size_t m = a.rows(), k = a.cols(), n = b.cols();
    std::vector<double> out(m * n, 0.0);
    const auto& av = a.values();
    const auto& bv = b.values();
    for (std::size_t i = 0; i < m; ++i) {
      for (std::size_t l = 0; l < k; ++l) {
        double ail = av[i * k + l];
        for (std::size_t j = 0; j < n; ++j) out[i * n + j] += ail * bv[l * n + j];
      }
    }
    Tensor res({m, n}, std::move(out), needs_grad({a, b}));
    if (res.requires_grad()) {
      record(res, [a, b, res, m, k, n] {
        const auto& go = res.grad();
        if (a.requires_grad()) {
          auto& ga = a.grad();
          const auto& bv2 = b.values();
          for (std::size_t i = 0; i < m; ++i)
            for (std::size_t l = 0; l < k; ++l) {
              double s = 0.0;
              for (std::size_t j = 0; j < n; ++j)
                s += go[i * n + j] * bv2[l * n + j];
              ga[i * k + l] += s;
            }
        }
        if (b.requires_grad()) {
          auto& gb = b.grad();
          const auto& av2 = a.values();
          for (std::size_t l = 0; l < k; ++l)
            for (std::size_t j = 0; j < n; ++j) {
              double s = 0.0;
              for (std::size_t i = 0; i < m; ++i)
                s += av2[i * k + l] * go[i * n + j];
              gb[l * n + j] += s;
            }
        }
      });
    }
    return res;
  }

  // out = m @ v for rank-2 m [r x c], rank-1 v [c].
  Tensor matvec(const Tensor& m, const Tensor& v) {
    require_rank(m, 2, "matvec lhs");
    require_rank(v, 1, "matvec rhs");
    if (m.cols() != v.size()) {
      throw DimensionError("matvec " + detail::shape_str(m.shape()) + " x " +
                           detail::shape_str(v.shape()));
    }
    std::size_t r = m.rows(), c = m.cols();
    std::vector<double> out(r, 0.0);
    const auto& mv = m.values();
    const auto& vv = v.values();
    for (std::size_t i = 0; i < r; ++i) {
      double s = 0.0;
      for (std::size_t j = 0; j < c; ++j) s += mv[i * c + j] * vv[j];
      out[i] = s;
    }
    Tensor res({r}, std::move(out), needs_grad({m, v}));
    if (res.requires_grad()) {
      record(res, [m, v, res, r, c] {
        const auto& go = res.grad();
        if (m.requires_grad()) {
          auto& gm = m.grad();
          const auto& vv2 = v.values();
          for (std::size_t i = 0; i < r; ++i)
            for (std::size_t j = 0; j < c; ++j) gm[i * c + j] += go[i] * vv2[j];
        }
        if (v.requires_grad()) {
          auto& gv = v.grad();
          const auto& mv2 = m.values();
          for (std::size_t j = 0; j < c; ++j) {
            double s = 0.0;
            for (std::size_t i = 0; i < r; ++i) s += mv2[i * c + j] * go[i];
            gv[j] += s;
          }
        }
      });
    }
    return res;
  }

  Tensor add(const Tensor& a, const Tensor& b) {
    require_same_shape(a, b, "add");
    std::vector<double> out(a.size());
    for (std::size_t i = 0; i < out.size(); ++i)
      out[i] = a.values()[i] + b.values()[i];
    Tensor res(a.shape(), std::move(out), needs_grad({a, b}));
    if (res.requires_grad()) {
      record(res, [a, b, res] {
        const auto& go = res.grad();
        if (a.requires_grad()) {
          auto& ga = a.grad();
          for (std::size_t i = 0; i < go.size(); ++i) ga[i] += go[i];
        }
        if (b.requires_grad()) {
          auto& gb = b.grad();
          for (std::size_t i = 0; i < go.size(); ++i) gb[i] += go[i];
        }
      });
    }
    return res;
  }

  Tensor add(const Tensor& a, const Tensor& b, const Tensor& c) {
    return add(add(a, b), c);
  }

  // Elementwise product.
  Tensor mul(const Tensor& a, const Tensor& b) {
    require_same_shape(a, b, "mul");
    std::vector<double> out(a.size());
    for (std::size_t i = 0; i < out.size(); ++i)
      out[i] = a.values()[i] * b.values()[i];
    Tensor res(a.shape(), std::move(out), needs_grad({a, b}));
    if (res.requires_grad()) {
      record(res, [a, b, res] {
        const auto& go = res.grad();
        if (a.requires_grad()) {
          auto& ga = a.grad();
          const auto& bv = b.values();
          for (std::size_t i = 0; i < go.size(); ++i) ga[i] += go[i] * bv[i];
        }
        if (b.requires_grad()) {
          auto& gb = b.grad();
          const auto& av = a.values();
          for (std::size_t i = 0; i < go.size(); ++i) gb[i] += go[i] * av[i];
        }
      });
    }
    return res;
  }

  Tensor scale(const Tensor& a, double c) {
    std::vector<double> out(a.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.values()[i] * c;
    Tensor res(a.shape(), std::move(out), a.requires_grad());
    if (res.requires_grad()) {
      record(res, [a, res, c] {
        const auto& go = res.grad();
        auto& ga = a.grad();
        for (std::size_t i = 0; i < go.size(); ++i) ga[i] += go[i] * c;
      });
    }
    return res;
  }

  Tensor sigmoid(const Tensor& a) {
    std::vector<double> out(a.size());
    for (std::size_t i = 0; i < out.size(); ++i) {
      double x = a.values()[i];
      // Evaluate on the non-overflowing branch.
      if (x >= 0.0) {
        double z = std::exp(-x);
        out[i] = 1.0 / (1.0 + z);
      } else {
        double z = std::exp(x);
        out[i] = z / (1.0 + z);
      }
    }
    Tensor res(a.shape(), std::move(out), a.requires_grad());
    if (res.requires_grad()) {
      record(res, [a, res] {
        const auto& go = res.grad();
        const auto& y = res.values();
        auto& ga = a.grad();
        for (std::size_t i = 0; i < go.size(); ++i)
          ga[i] += go[i] * y[i] * (1.0 - y[i]);
      });
    }
    return res;
  }

  Tensor tanh(const Tensor& a) {
    std::vector<double> out(a.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::tanh(a.values()[i]);
    Tensor res(a.shape(), std::move(out), a.requires_grad());
    if (res.requires_grad()) {
      record(res, [a, res] {
        const auto& go = res.grad();
        const auto& y = res.values();
        auto& ga = a.grad();
        for (std::size_t i = 0; i < go.size(); ++i)
          ga[i] += go[i] * (1.0 - y[i] * y[i]);
      });
    }
    return res;
  }

  // Max-subtracted softmax over a vector; outputs are strictly positive and
  // sum to 1 within 1e-12.
  Tensor softmax(const Tensor& a) {
    require_rank(a, 1, "softmax");
    if (a.size() == 0) throw DomainError("softmax of empty vector");
    const auto& av = a.values();
    double mx = av[0];
    for (double x : av) mx = std::max(mx, x);
    std::vector<double> out(a.size());
    double sum = 0.0;
    for (std::size_t i = 0; i < out.size(); ++i) {
      out[i] = std::exp(av[i] - mx);
      sum += out[i];
    }
    // Floor far below any probability that matters keeps the outputs
    // strictly positive even when exp underflows; the mass it adds is
    // orders of magnitude under the 1e-12 normalization tolerance.
    for (double& x : out) x = std::max(x / sum, 1e-300);
    Tensor res(a.shape(), std::move(out), a.requires_grad());
    if (res.requires_grad()) {
      record(res, [a, res] {
        const auto& go = res.grad();
        const auto& y = res.values();
        auto& ga = a.grad();
        double s = 0.0;
        for (std::size_t j = 0; j < go.size(); ++j) s += go[j] * y[j];
        for (std::size_t i = 0; i < go.size(); ++i)
          ga[i] += y[i] * (go[i] - s);
      });
    }
    return res;
  }

  // Negative log-likelihood of the gold index under an already-normalized
  // distribution.  The probability is clamped below at 1e-12 in both the
  // value and the gradient, so the gradient at the gold coordinate is always
  // finite and nonzero.
  Tensor cross_entropy(const Tensor& probs, std::size_t gold) {
    require_rank(probs, 1, "cross_entropy");
    if (gold >= probs.size()) {
      throw IndexError("cross_entropy gold index " + std::to_string(gold) +
                       " out of range for " + std::to_string(probs.size()) +
                       " classes");
    }
    double p = std::max(probs.values()[gold], 1e-12);
    Tensor res({1}, {-std::log(p)}, probs.requires_grad());
    if (res.requires_grad()) {
      record(res, [probs, res, gold] {
        double g = res.grad()[0];
        double pc = std::max(probs.values()[gold], 1e-12);
        probs.grad()[gold] += -g / pc;
      });
    }
    return res;
  }

  Tensor dot(const Tensor& a, const Tensor& b) {
    require_rank(a, 1, "dot lhs");
    require_rank(b, 1, "dot rhs");
    require_same_shape(a, b, "dot");
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a.values()[i] * b.values()[i];
    Tensor res({1}, {s}, needs_grad({a, b}));
    if (res.requires_grad()) {
      record(res, [a, b, res] {
        double g = res.grad()[0];
        if (a.requires_grad()) {
          auto& ga = a.grad();
          const auto& bv = b.values();
          for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += g * bv[i];
        }
        if (b.requires_grad()) {
          auto& gb = b.grad();
          const auto& av = a.values();
          for (std::size_t i = 0; i < gb.size(); ++i) gb[i] += g * av[i];
        }
      });
    }
    return res;
  }

  // Mean over the rows of a rank-2 tensor [l x d] -> [d].
  Tensor average_rows(const Tensor& m) {
    require_rank(m, 2, "average_rows");
    std::size_t l = m.rows(), d = m.cols();
    std::vector<double> out(d, 0.0);
    const auto& mv = m.values();
    for (std::size_t r = 0; r < l; ++r)
      for (std::size_t c = 0; c < d; ++c) out[c] += mv[r * d + c];
    double inv = 1.0 / static_cast<double>(l);
    for (double& x : out) x *= inv;
    Tensor res({d}, std::move(out), m.requires_grad());
    if (res.requires_grad()) {
      record(res, [m, res, l, d, inv] {
        const auto& go = res.grad();
        auto& gm = m.grad();
        for (std::size_t r = 0; r < l; ++r)
          for (std::size_t c = 0; c < d; ++c) gm[r * d + c] += go[c] * inv;
      });
    }
    return res;
  }

  // Columnwise max over a rank-2 tensor [t x m] -> [m].  Ties route the
  // gradient to the first (lowest-index) maximal row.
  Tensor max_over_time(const Tensor& m) {
    require_rank(m, 2, "max_over_time");
    std::size_t t = m.rows(), w = m.cols();
    std::vector<double> out(w);
    std::vector<std::size_t> arg(w, 0);
    const auto& mv = m.values();
    for (std::size_t c = 0; c < w; ++c) {
      double best = mv[c];
      std::size_t bi = 0;
      for (std::size_t r = 1; r < t; ++r) {
        if (mv[r * w + c] > best) {  // strict: keeps first index on ties
          best = mv[r * w + c];
          bi = r;
        }
      }
      out[c] = best;
      arg[c] = bi;
    }
    Tensor res({w}, std::move(out), m.requires_grad());
    if (res.requires_grad()) {
      record(res, [m, res, arg, w] {
        const auto& go = res.grad();
        auto& gm = m.grad();
        for (std::size_t c = 0; c < w; ++c) gm[arg[c] * w + c] += go[c];
      });
    }
    return res;
  }

  // Concatenation of rank-1 tensors.
  Tensor concat(const std::vector<Tensor>& parts) {
    if (parts.empty()) throw DomainError("concat of zero tensors");
    std::size_t total = 0;
    for (const Tensor& p : parts) {
      require_rank(p, 1, "concat part");
      total += p.size();
    }
    std::vector<double> out;
    out.reserve(total);
    bool rg = false;
    for (const Tensor& p : parts) {
      out.insert(out.end(), p.values().begin(), p.values().end());
      rg = rg || p.requires_grad();
    }
    Tensor res({total}, std::move(out), rg);
    if (rg) {
      record(res, [parts, res] {
        const auto& go = res.grad();
        std::size_t off = 0;
        for (const Tensor& p : parts) {
          if (p.requires_grad()) {
            auto& gp = p.grad();
            for (std::size_t i = 0; i < gp.size(); ++i) gp[i] += go[off + i];
          }
          off += p.size();
        }
      });
    }
    return res;
  }

  Tensor concat(const Tensor& a, const Tensor& b) { return concat(std::vector<Tensor>{a, b}); }

  // Stack rank-1 tensors of equal width into a rank-2 tensor [n x d].
  Tensor stack_rows(const std::vector<Tensor>& rows) {
    if (rows.empty()) throw DomainError("stack_rows of zero tensors");
    std::size_t d = rows[0].size();
    bool rg = false;
    for (const Tensor& r : rows) {
      require_rank(r, 1, "stack_rows row");
      if (r.size() != d) {
        throw DimensionError("stack_rows width mismatch: " +
                             detail::shape_str(r.shape()) + " vs [" +
                             std::to_string(d) + "]");
      }
      rg = rg || r.requires_grad();
    }
    std::vector<double> out;
    out.reserve(rows.size() * d);
    for (const Tensor& r : rows)
      out.insert(out.end(), r.values().begin(), r.values().end());
    Tensor res({rows.size(), d}, std::move(out), rg);
    if (rg) {
      record(res, [rows, res, d] {
        const auto& go = res.grad();
        for (std::size_t i = 0; i < rows.size(); ++i) {
          if (!rows[i].requires_grad()) continue;
          auto& gr = rows[i].grad();
          for (std::size_t c = 0; c < d; ++c) gr[c] += go[i * d + c];
        }
      });
    }
    return res;
  }

  // Row lookup into a rank-2 table [n x d] -> [d]; the backward pass
  // accumulates into just that row (sparse embedding update).
  Tensor select_row(const Tensor& table, std::size_t row) {
    require_rank(table, 2, "select_row");
    if (row >= table.rows()) {
      throw IndexError("select_row index " + std::to_string(row) +
                       " out of range for " + std::to_string(table.rows()) +
                       " rows");
    }
    std::size_t d = table.cols();
    std::vector<double> out(table.values().begin() + row * d,
                            table.values().begin() + (row + 1) * d);
    Tensor res({d}, std::move(out), table.requires_grad());
    if (res.requires_grad()) {
      record(res, [table, res, row, d] {
        const auto& go = res.grad();
        auto& gt = table.grad();
        for (std::size_t c = 0; c < d; ++c) gt[row * d + c] += go[c];
      });
    }
    return res;
  }

  // Seed d(loss)/d(loss) = 1 and sweep the whole tape once in reverse.
  // Entries not on the path from the loss propagate zeros, which is a no-op
  // under additive accumulation.  Intermediate (tape-produced) gradients are
  // cleared first, so repeated sweeps accumulate only into leaves.
  void backward(const Tensor& loss) {
    if (!loss.defined()) throw DomainError("backward on an undefined tensor");
    if (loss.size() != 1) {
      throw DomainError("backward requires a scalar loss, got shape " +
                        detail::shape_str(loss.shape()));
    }
    for (const Entry& e : entries_) e.out.zero_grad();
    if (loss.requires_grad()) loss.grad()[0] += 1.0;
    for (auto it = entries_.rbegin(); it != entries_.rend(); ++it) it->fn();
  }

 private:
  static bool needs_grad(std::initializer_list<Tensor> ts) {
    for (const Tensor& t : ts)
      if (t.requires_grad()) return true;
    return false;
  }

  static void require_rank(const Tensor& t, std::size_t r, const char* what) {
    if (t.rank() != r) {
      throw DimensionError(std::string(what) + ": expected rank " +
                           std::to_string(r) + ", got shape " +
                           detail::shape_str(t.shape()));
    }
  }

  static void require_same_shape(const Tensor& a, const Tensor& b,
                                 const char* what) {
    if (a.shape() != b.shape()) {
      throw DimensionError(std::string(what) + " shape mismatch: " +
                           detail::shape_str(a.shape()) + " vs " +
                           detail::shape_str(b.shape()));
    }
  }

  struct Entry {
    Tensor out;
    std::function<void()> fn;
  };

  void record(const Tensor& out, std::function<void()> fn) {
    entries_.push_back({out, std::move(fn)});
  }

  std::vector<Entry> entries_;
};

// Named trainable leaves plus the SGD step counter.  Iteration order is the
// map order (lexicographic by name), which keeps every whole-store walk
// deterministic.
class ParamStore {
 public:
  Tensor create(const std::string& name, std::vector<std::size_t> shape,
                Rng& rng, double lo = -0.08, double hi = 0.08) {
    std::vector<double> v(detail::shape_size(shape));
    for (double& x : v) x = rng.uniform(lo, hi);
    return insert(name, Tensor(std::move(shape), std::move(v), true));
  }

  Tensor create_full(const std::string& name, std::vector<std::size_t> shape,
                     double fill) {
    std::vector<double> v(detail::shape_size(shape), fill);
    return insert(name, Tensor(std::move(shape), std::move(v), true));
  }

  Tensor create_zeros(const std::string& name, std::vector<std::size_t> shape) {
    return create_full(name, std::move(shape), 0.0);
  }

  // A frozen block participates in the forward pass but receives no
  // gradients and is skipped by the optimizer and by gradient checks.
  Tensor create_frozen(const std::string& name, std::vector<std::size_t> shape,
                       std::vector<double> values) {
    return insert(name, Tensor(std::move(shape), std::move(values), false));
  }

  bool has(const std::string& name) const { return params_.count(name) > 0; }

  Tensor get(const std::string& name) const {
    auto it = params_.find(name);
    if (it == params_.end()) throw StateError("no parameter named '" + name + "'");
    return it->second;
  }

  const std::map<std::string, Tensor>& all() const { return params_; }

  std::size_t step() const { return step_; }
  void set_step(std::size_t s) { step_ = s; }

  std::size_t total_size() const {
    std::size_t n = 0;
    for (const auto& [name, t] : params_) n += t.size();
    return n;
  }

  // Learning rate schedule: lr_t = lr0 / (1 + decay * step), with the step
  // count as of entry to this call.  Applies w -= lr_t * grad to every
  // unfrozen parameter, zeroes gradients, then increments the step.
  void sgd_step(double lr0, double decay) {
    if (lr0 <= 0.0) throw DomainError("sgd_step requires lr0 > 0");
    if (decay < 0.0) throw DomainError("sgd_step requires decay >= 0");
    double lr = lr0 / (1.0 + decay * static_cast<double>(step_));
    for (auto& [name, t] : params_) {
      if (!t.requires_grad()) continue;
      auto& v = t.values();
      auto& g = t.grad();
      for (std::size_t i = 0; i < v.size(); ++i) {
        v[i] -= lr * g[i];
        g[i] = 0.0;
      }
    }
    ++step_;
  }

  double current_lr(double lr0, double decay) const {
    return lr0 / (1.0 + decay * static_cast<double>(step_));
  }

  void zero_grads() {
    for (auto& [name, t] : params_)
      if (t.requires_grad()) t.zero_grad();
  }

  std::map<std::string, std::vector<double>> snapshot() const {
    std::map<std::string, std::vector<double>> snap;
    for (const auto& [name, t] : params_) snap[name] = t.values();
    return snap;
  }

  void restore(const std::map<std::string, std::vector<double>>& snap) {
    for (const auto& [name, vals] : snap) {
      Tensor t = get(name);
      if (t.size() != vals.size()) {
        throw DimensionError("restore of '" + name + "': stored " +
                             std::to_string(vals.size()) + " values for a " +
                             std::to_string(t.size()) + "-element tensor");
      }
      t.values() = vals;
    }
  }

 private:
  Tensor insert(const std::string& name, Tensor t) {
    auto [it, ok] = params_.emplace(name, std::move(t));
    if (!ok) throw StateError("duplicate parameter name '" + name + "'");
    return it->second;
  }

  std::map<std::string, Tensor> params_;
  std::size_t step_ = 0;
};

// ----------------------------- gradient checking -----------------------------

struct GradCheckOptions {
  double epsilon = 1e-5;
  // 0 = check every coordinate; otherwise sample this many per parameter.
  std::size_t max_coords_per_param = 0;
  std::uint64_t sample_seed = 12345;
  // Relative error uses max(|ad|, |fd|, denom_floor) as the denominator, so
  // coordinates with gradients below the floor are compared absolutely.
  // Whole-model checks raise this to ~1e-6: central differences on a loss of
  // order 1 carry ~1e-11 of rounding noise, which a 1e-8 floor would magnify
  // into apparent errors of 1e-3 on near-zero gradients.
  double denom_floor = 1e-8;
};

struct GradCheckResult {
  double max_rel_err = 0.0;
  std::map<std::string, double> per_param;   // worst relative error per block
  std::vector<std::string> skipped;          // frozen blocks
};

// Compares reverse-mode gradients of f against central finite differences,
// coordinate by coordinate.  f must rebuild its graph from the store on every
// call; parameter values are restored exactly afterwards.
inline GradCheckResult finite_diff_check_detail(
    ParamStore& store, const std::function<Tensor(Tape&)>& f,
    GradCheckOptions opt = {}) {
  store.zero_grads();
  std::map<std::string, std::vector<double>> analytic;
  {
    Tape tape;
    Tensor loss = f(tape);
    tape.backward(loss);
    for (const auto& [name, t] : store.all())
      if (t.requires_grad()) analytic[name] = t.grad();
  }

  auto eval = [&]() {
    Tape tape;
    return f(tape).item();
  };

  Rng rng(opt.sample_seed);
  GradCheckResult result;
  for (const auto& [name, t] : store.all()) {
    if (!t.requires_grad()) {
      result.skipped.push_back(name);
      continue;
    }
    std::vector<std::size_t> coords;
    if (opt.max_coords_per_param == 0 || t.size() <= opt.max_coords_per_param) {
      coords.resize(t.size());
      for (std::size_t i = 0; i < t.size(); ++i) coords[i] = i;
    } else {
      for (std::size_t i = 0; i < opt.max_coords_per_param; ++i)
        coords.push_back(rng.below(t.size()));
    }
    double worst = 0.0;
    auto& v = t.values();
    for (std::size_t c : coords) {
      double orig = v[c];
      v[c] = orig + opt.epsilon;
      double up = eval();
      v[c] = orig - opt.epsilon;
      double down = eval();
      v[c] = orig;
      double fd = (up - down) / (2.0 * opt.epsilon);
      double ad = analytic[name][c];
      double rel = std::abs(ad - fd) /
                   std::max({std::abs(ad), std::abs(fd), opt.denom_floor});
      worst = std::max(worst, rel);
    }
    result.per_param[name] = worst;
    result.max_rel_err = std::max(result.max_rel_err, worst);
  }
  store.zero_grads();
  return result;
}

inline double finite_diff_check(ParamStore& store,
                                const std::function<Tensor(Tape&)>& f,
                                GradCheckOptions opt = {}) {
  return finite_diff_check_detail(store, f, opt).max_rel_err;
}

}  // namespace chunkforge

#pragma once

// Reverse-mode automatic differentiation on dense row-major tensors.
// Templated on the scalar type: float for training, double for the
// finite-difference gradient checks.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <memory>
#include <numeric>
#include <random>
#include <string>
#include <unordered_set>
#include <vector>

#include "ontosim/errors.hpp"

namespace ontosim::ad {

// Disables graph recording (inference / embedding export).
class NoGradGuard {
 public:
  NoGradGuard() : previous_(enabled_ref()) { enabled_ref() = false; }
  ~NoGradGuard() { enabled_ref() = previous_; }
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;
  static bool grad_enabled() { return enabled_ref(); }

 private:
  static bool& enabled_ref() {
    thread_local bool enabled = true;
    return enabled;
  }
  bool previous_;
};

template <typename S>
struct Node {
  std::vector<size_t> shape;
  std::vector<S> values;
  std::vector<S> grad;
  bool requires_grad = false;
  std::string name;
  std::vector<std::shared_ptr<Node<S>>> parents;
  std::function<void()> backward_fn;

  size_t numel() const { return values.size(); }
  bool is_leaf() const { return !backward_fn; }
  void ensure_grad() {
    if (grad.size() != values.size()) grad.assign(values.size(), S(0));
  }
};

template <typename S>
class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(std::vector<size_t> shape, bool requires_grad = false) {
    return filled(std::move(shape), S(0), requires_grad);
  }

  static Tensor filled(std::vector<size_t> shape, S value, bool requires_grad = false) {
    size_t n = 1;
    for (size_t d : shape) n *= d;
    return from_values(std::move(shape), std::vector<S>(n, value), requires_grad);
  }

  static Tensor from_values(std::vector<size_t> shape, std::vector<S> values,
                            bool requires_grad = false) {
    size_t n = 1;
    for (size_t d : shape) n *= d;
    if (n != values.size()) {
      throw DataError("tensor shape does not match value count");
    }
    Tensor t;
    t.node_ = std::make_shared<Node<S>>();
    t.node_->shape = std::move(shape);
    t.node_->values = std::move(values);
    t.node_->requires_grad = requires_grad;
    if (requires_grad) t.node_->ensure_grad();
    return t;
  }

  static Tensor scalar(S value) { return from_values({1}, {value}); }

  bool defined() const { return node_ != nullptr; }
  const std::vector<size_t>& shape() const { return node_->shape; }
  size_t numel() const { return node_->numel(); }
  size_t rows() const { return node_->shape.at(0); }
  size_t cols() const { return node_->shape.at(1); }
  bool requires_grad() const { return node_->requires_grad; }

  std::vector<S>& values() { return node_->values; }
  const std::vector<S>& values() const { return node_->values; }
  std::vector<S>& grad() {
    node_->ensure_grad();
    return node_->grad;
  }
  const std::string& name() const { return node_->name; }
  void set_name(std::string name) { node_->name = std::move(name); }

  S item() const {
    if (numel() != 1) throw DataError("item() on non-scalar tensor");
    return node_->values[0];
  }

  void zero_grad() {
    if (node_->requires_grad) node_->grad.assign(node_->values.size(), S(0));
  }

  // Reverse-mode pass from a scalar. Intermediate gradients are reset per
  // call; leaf parameter gradients accumulate across calls.
  void backward() const {
    if (numel() != 1) {
      throw DataError("backward() requires a scalar loss");
    }
    if (node_->is_leaf() && !node_->requires_grad) {
      throw DataError("backward() on a value detached from any computation");
    }
    std::vector<Node<S>*> topo;
    std::unordered_set<Node<S>*> visited;
    std::vector<std::pair<Node<S>*, size_t>> stack;
    stack.emplace_back(node_.get(), 0);
    visited.insert(node_.get());
    while (!stack.empty()) {
      auto& [n, idx] = stack.back();
      if (idx < n->parents.size()) {
        Node<S>* parent = n->parents[idx].get();
        ++idx;
        if (visited.insert(parent).second) {
          stack.emplace_back(parent, 0);
        }
      } else {
        topo.push_back(n);
        stack.pop_back();
      }
    }
    for (Node<S>* n : topo) {
      if (!n->is_leaf()) {
        n->grad.assign(n->values.size(), S(0));
      } else if (n->requires_grad) {
        n->ensure_grad();
      }
    }
    node_->ensure_grad();
    node_->grad[0] += S(1);
    for (auto it = topo.rbegin(); it != topo.rend(); ++it) {
      if ((*it)->backward_fn) (*it)->backward_fn();
    }
  }

  Tensor detach() const {
    return from_values(node_->shape, node_->values, false);
  }

  std::shared_ptr<Node<S>> node() const { return node_; }

 private:
  std::shared_ptr<Node<S>> node_;
};

namespace detail {

template <typename S>
Tensor<S> make_op(std::vector<size_t> shape, std::vector<S> values,
                  std::vector<Tensor<S>> inputs,
                  const std::function<std::function<void()>(Node<S>*)>& make_backward) {
  Tensor<S> out = Tensor<S>::from_values(std::move(shape), std::move(values));
  bool track = NoGradGuard::grad_enabled();
  if (track) {
    bool any = false;
    for (const auto& in : inputs) {
      if (in.node()->requires_grad) any = true;
    }
    track = any;
  }
  if (track) {
    Node<S>* raw = out.node().get();
    raw->requires_grad = true;
    for (const auto& in : inputs) raw->parents.push_back(in.node());
    raw->backward_fn = make_backward(raw);
  }
  return out;
}

template <typename S>
void accumulate(Node<S>* node, const std::vector<S>& delta) {
  if (!node->requires_grad) return;
  node->ensure_grad();
  for (size_t i = 0; i < delta.size(); ++i) node->grad[i] += delta[i];
}

}  // namespace detail

// --- elementwise -------------------------------------------------------------

template <typename S>
Tensor<S> add(const Tensor<S>& a, const Tensor<S>& b) {
  if (a.shape() != b.shape()) throw DataError("add: shape mismatch");
  std::vector<S> out(a.numel());
  for (size_t i = 0; i < out.size(); ++i) out[i] = a.values()[i] + b.values()[i];
  auto an = a.node();
  auto bn = b.node();
  return detail::make_op<S>(a.shape(), std::move(out), {a, b},
                            [an, bn](Node<S>* o) {
                              return [o, a = an.get(), b = bn.get()]() {
                                detail::accumulate(a, o->grad);
                                detail::accumulate(b, o->grad);
                              };
                            });
}

template <typename S>
Tensor<S> sub(const Tensor<S>& a, const Tensor<S>& b) {
  if (a.shape() != b.shape()) throw DataError("sub: shape mismatch");
  std::vector<S> out(a.numel());
  for (size_t i = 0; i < out.size(); ++i) out[i] = a.values()[i] - b.values()[i];
  auto an = a.node();
  auto bn = b.node();
  return detail::make_op<S>(a.shape(), std::move(out), {a, b},
                            [an, bn](Node<S>* o) {
                              return [o, a = an.get(), b = bn.get()]() {
                                detail::accumulate(a, o->grad);
                                if (b->requires_grad) {
                                  b->ensure_grad();
                                  for (size_t i = 0; i < o->grad.size(); ++i) {
                                    b->grad[i] -= o->grad[i];
                                  }
                                }
                              };
                            });
}

template <typename S>
Tensor<S> mul(const Tensor<S>& a, const Tensor<S>& b) {
  if (a.shape() != b.shape()) throw DataError("mul: shape mismatch");
  std::vector<S> out(a.numel());
  for (size_t i = 0; i < out.size(); ++i) out[i] = a.values()[i] * b.values()[i];
  auto an = a.node();
  auto bn = b.node();
  return detail::make_op<S>(a.shape(), std::move(out), {a, b},
                            [an, bn](Node<S>* o) {
                              return [o, a = an.get(), b = bn.get()]() {
                                if (a->requires_grad) {
                                  a->ensure_grad();
                                  for (size_t i = 0; i < o->grad.size(); ++i) {
                                    a->grad[i] += o->grad[i] * b->values[i];
                                  }
                                }
                                if (b->requires_grad) {
                                  b->ensure_grad();
                                  for (size_t i = 0; i < o->grad.size(); ++i) {
                                    b->grad[i] += o->grad[i] * a->values[i];
                                  }
                                }
                              };
                            });
}

template <typename S>
Tensor<S> scale(const Tensor<S>& a, S factor) {
  std::vector<S> out(a.numel());
  for (size_t i = 0; i < out.size(); ++i) out[i] = a.values()[i] * factor;
  auto an = a.node();
  return detail::make_op<S>(a.shape(), std::move(out), {a},
                            [an, factor](Node<S>* o) {
                              return [o, a = an.get(), factor]() {
                                if (!a->requires_grad) return;
                                a->ensure_grad();
                                for (size_t i = 0; i < o->grad.size(); ++i) {
                                  a->grad[i] += o->grad[i] * factor;
                                }
                              };
                            });
}

template <typename S>
Tensor<S> add_scalar(const Tensor<S>& a, S constant) {
  std::vector<S> out(a.numel());
  for (size_t i = 0; i < out.size(); ++i) out[i] = a.values()[i] + constant;
  auto an = a.node();
  return detail::make_op<S>(a.shape(), std::move(out), {a},
                            [an](Node<S>* o) {
                              return [o, a = an.get()]() { detail::accumulate(a, o->grad); };
                            });
}

template <typename S>
Tensor<S> relu(const Tensor<S>& a) {
  std::vector<S> out(a.numel());
  for (size_t i = 0; i < out.size(); ++i) out[i] = a.values()[i] > S(0) ? a.values()[i] : S(0);
  auto an = a.node();
  return detail::make_op<S>(a.shape(), std::move(out), {a},
                            [an](Node<S>* o) {
                              return [o, a = an.get()]() {
                                if (!a->requires_grad) return;
                                a->ensure_grad();
                                for (size_t i = 0; i < o->grad.size(); ++i) {
                                  if (a->values[i] > S(0)) a->grad[i] += o->grad[i];
                                }
                              };
                            });
}

// Inverted dropout; identity when disabled or p == 0.
template <typename S>
Tensor<S> dropout(const Tensor<S>& a, double p, std::mt19937_64& rng, bool enabled) {
  if (!enabled || p <= 0.0) return a;
  if (p >= 1.0) throw DataError("dropout probability must be < 1");
  std::vector<S> mask(a.numel());
  std::uniform_real_distribution<double> uniform(0.0, 1.0);
  S keep_scale = S(1.0 / (1.0 - p));
  for (size_t i = 0; i < mask.size(); ++i) {
    mask[i] = uniform(rng) < p ? S(0) : keep_scale;
  }
  std::vector<S> out(a.numel());
  for (size_t i = 0; i < out.size(); ++i) out[i] = a.values()[i] * mask[i];
  auto an = a.node();
  return detail::make_op<S>(a.shape(), std::move(out), {a},
                            [an, mask = std::move(mask)](Node<S>* o) {
                              return [o, a = an.get(), mask]() {
                                if (!a->requires_grad) return;
                                a->ensure_grad();
                                for (size_t i = 0; i < o->grad.size(); ++i) {
                                  a->grad[i] += o->grad[i] * mask[i];
                                }
                              };
                            });
}

// --- shape ops ---------------------------------------------------------------

template <typename S>
Tensor<S> transpose(const Tensor<S>& a) {
  size_t r = a.rows(), c = a.cols();
  std::vector<S> out(a.numel());
  for (size_t i = 0; i < r; ++i) {
    for (size_t j = 0; j < c; ++j) out[j * r + i] = a.values()[i * c + j];
  }
  auto an = a.node();
  return detail::make_op<S>({c, r}, std::move(out), {a},
                            [an, r, c](Node<S>* o) {
                              return [o, a = an.get(), r, c]() {
                                if (!a->requires_grad) return;
                                a->ensure_grad();
                                for (size_t i = 0; i < r; ++i) {
                                  for (size_t j = 0; j < c; ++j) {
                                    a->grad[i * c + j] += o->grad[j * r + i];
                                  }
                                }
                              };
                            });
}

template <typename S>
Tensor<S> slice_rows(const Tensor<S>& a, size_t start, size_t len) {
  size_t c = a.cols();
  if (start + len > a.rows()) throw DataError("slice_rows out of range");
  std::vector<S> out(len * c);
  std::copy_n(a.values().begin() + static_cast<long>(start * c), len * c, out.begin());
  auto an = a.node();
  return detail::make_op<S>({len, c}, std::move(out), {a},
                            [an, start, len, c](Node<S>* o) {
                              return [o, a = an.get(), start, len, c]() {
                                if (!a->requires_grad) return;
                                a->ensure_grad();
                                for (size_t i = 0; i < len * c; ++i) {
                                  a->grad[start * c + i] += o->grad[i];
                                }
                              };
                            });
}

template <typename S>
Tensor<S> slice_cols(const Tensor<S>& a, size_t start, size_t len) {
  size_t r = a.rows(), c = a.cols();
  if (start + len > c) throw DataError("slice_cols out of range");
  std::vector<S> out(r * len);
  for (size_t i = 0; i < r; ++i) {
    std::copy_n(a.values().begin() + static_cast<long>(i * c + start), len,
                out.begin() + static_cast<long>(i * len));
  }
  auto an = a.node();
  return detail::make_op<S>({r, len}, std::move(out), {a},
                            [an, start, len, r, c](Node<S>* o) {
                              return [o, a = an.get(), start, len, r, c]() {
                                if (!a->requires_grad) return;
                                a->ensure_grad();
                                for (size_t i = 0; i < r; ++i) {
                                  for (size_t j = 0; j < len; ++j) {
                                    a->grad[i * c + start + j] += o->grad[i * len + j];
                                  }
                                }
                              };
                            });
}

template <typename S>
Tensor<S> concat_rows(const std::vector<Tensor<S>>& parts) {
  if (parts.empty()) throw DataError("concat_rows on empty list");
  size_t c = parts[0].cols();
  size_t total_rows = 0;
  for (const auto& p : parts) {
    if (p.cols() != c) throw DataError("concat_rows: column mismatch");
    total_rows += p.rows();
  }
  std::vector<S> out;
  out.reserve(total_rows * c);
  for (const auto& p : parts) {
    out.insert(out.end(), p.values().begin(), p.values().end());
  }
  std::vector<size_t> offsets;
  size_t acc = 0;
  for (const auto& p : parts) {
    offsets.push_back(acc);
    acc += p.numel();
  }
  return detail::make_op<S>({total_rows, c}, std::move(out), parts,
                            [offsets](Node<S>* o) {
                              return [o, offsets]() {
                                for (size_t k = 0; k < o->parents.size(); ++k) {
                                  Node<S>* p = o->parents[k].get();
                                  if (!p->requires_grad) continue;
                                  p->ensure_grad();
                                  for (size_t i = 0; i < p->values.size(); ++i) {
                                    p->grad[i] += o->grad[offsets[k] + i];
                                  }
                                }
                              };
                            });
}

template <typename S>
Tensor<S> concat_cols(const std::vector<Tensor<S>>& parts) {
  if (parts.empty()) throw DataError("concat_cols on empty list");
  size_t r = parts[0].rows();
  size_t total_cols = 0;
  for (const auto& p : parts) {
    if (p.rows() != r) throw DataError("concat_cols: row mismatch");
    total_cols += p.cols();
  }
  std::vector<S> out(r * total_cols);
  std::vector<size_t> col_offsets;
  {
    size_t acc = 0;
    for (const auto& p : parts) {
      col_offsets.push_back(acc);
      acc += p.cols();
    }
  }
  for (size_t k = 0; k < parts.size(); ++k) {
    size_t pc = parts[k].cols();
    for (size_t i = 0; i < r; ++i) {
      std::copy_n(parts[k].values().begin() + static_cast<long>(i * pc), pc,
                  out.begin() + static_cast<long>(i * total_cols + col_offsets[k]));
    }
  }
  return detail::make_op<S>({r, total_cols}, std::move(out), parts,
                            [col_offsets, r, total_cols](Node<S>* o) {
                              return [o, col_offsets, r, total_cols]() {
                                for (size_t k = 0; k < o->parents.size(); ++k) {
                                  Node<S>* p = o->parents[k].get();
                                  if (!p->requires_grad) continue;
                                  p->ensure_grad();
                                  size_t pc = p->shape[1];
                                  for (size_t i = 0; i < r; ++i) {
                                    for (size_t j = 0; j < pc; ++j) {
                                      p->grad[i * pc + j] +=
                                          o->grad[i * total_cols + col_offsets[k] + j];
                                    }
                                  }
                                }
                              };
                            });
}

// Gathers rows of a 2-D tensor (embedding lookup and masked-row selection).
template <typename S>
Tensor<S> gather_rows(const Tensor<S>& a, const std::vector<size_t>& indices) {
  size_t c = a.cols();
  std::vector<S> out(indices.size() * c);
  for (size_t i = 0; i < indices.size(); ++i) {
    if (indices[i] >= a.rows()) throw DataError("gather_rows index out of range");
    std::copy_n(a.values().begin() + static_cast<long>(indices[i] * c), c,
                out.begin() + static_cast<long>(i * c));
  }
  auto an = a.node();
  return detail::make_op<S>({indices.size(), c}, std::move(out), {a},
                            [an, indices, c](Node<S>* o) {
                              return [o, a = an.get(), indices, c]() {
                                if (!a->requires_grad) return;
                                a->ensure_grad();
                                for (size_t i = 0; i < indices.size(); ++i) {
                                  for (size_t j = 0; j < c; ++j) {
                                    a->grad[indices[i] * c + j] += o->grad[i * c + j];
                                  }
                                }
                              };
                            });
}

// --- linear algebra ----------------------------------------------------------

template <typename S>
Tensor<S> matmul(const Tensor<S>& a, const Tensor<S>& b) {
  size_t m = a.rows(), k = a.cols();
  if (b.rows() != k) throw DataError("matmul: inner dimension mismatch");
  size_t n = b.cols();
  std::vector<S> out(m * n, S(0));
  const S* av = a.values().data();
  const S* bv = b.values().data();
  for (size_t i = 0; i < m; ++i) {
    for (size_t p = 0; p < k; ++p) {
      S aip = av[i * k + p];
      if (aip == S(0)) continue;
      const S* brow = bv + p * n;
      S* orow = out.data() + i * n;
      for (size_t j = 0; j < n; ++j) orow[j] += aip * brow[j];
    }
  }
  auto an = a.node();
  auto bn = b.node();
  return detail::make_op<S>(
      {m, n}, std::move(out), {a, b}, [an, bn, m, k, n](Node<S>* o) {
        return [o, a = an.get(), b = bn.get(), m, k, n]() {
          const S* g = o->grad.data();
          if (a->requires_grad) {
            a->ensure_grad();
            // dA = dC * B^T
            for (size_t i = 0; i < m; ++i) {
              for (size_t j = 0; j < n; ++j) {
                S gij = g[i * n + j];
                if (gij == S(0)) continue;
                const S* brow = b->values.data();
                for (size_t p = 0; p < k; ++p) {
                  a->grad[i * k + p] += gij * brow[p * n + j];
                }
              }
            }
          }
          if (b->requires_grad) {
            b->ensure_grad();
            // dB = A^T * dC
            for (size_t i = 0; i < m; ++i) {
              for (size_t p = 0; p < k; ++p) {
                S aip = a->values[i * k + p];
                if (aip == S(0)) continue;
                const S* grow = g + i * n;
                S* brow = b->grad.data() + p * n;
                for (size_t j = 0; j < n; ++j) brow[j] += aip * grow[j];
              }
            }
          }
        };
      });
}

// Adds a length-c vector to every row of an r x c matrix.
template <typename S>
Tensor<S> add_rowvec(const Tensor<S>& a, const Tensor<S>& v) {
  size_t r = a.rows(), c = a.cols();
  if (v.numel() != c) throw DataError("add_rowvec: vector length mismatch");
  std::vector<S> out(a.numel());
  for (size_t i = 0; i < r; ++i) {
    for (size_t j = 0; j < c; ++j) out[i * c + j] = a.values()[i * c + j] + v.values()[j];
  }
  auto an = a.node();
  auto vn = v.node();
  return detail::make_op<S>(a.shape(), std::move(out), {a, v},
                            [an, vn, r, c](Node<S>* o) {
                              return [o, a = an.get(), v = vn.get(), r, c]() {
                                if (a->requires_grad) detail::accumulate(a, o->grad);
                                if (v->requires_grad) {
                                  v->ensure_grad();
                                  for (size_t i = 0; i < r; ++i) {
                                    for (size_t j = 0; j < c; ++j) {
                                      v->grad[j] += o->grad[i * c + j];
                                    }
                                  }
                                }
                              };
                            });
}

// Row-wise softmax; when keep is given, positions with keep[j] == 0 receive
// probability exactly 0 and rows renormalize over kept positions.
template <typename S>
Tensor<S> softmax_rows(const Tensor<S>& a, const std::vector<char>* keep = nullptr) {
  size_t r = a.rows(), c = a.cols();
  if (keep != nullptr && keep->size() != c) throw DataError("softmax_rows: mask length mismatch");
  std::vector<S> out(a.numel(), S(0));
  for (size_t i = 0; i < r; ++i) {
    S maxv = std::numeric_limits<S>::lowest();
    bool any = false;
    for (size_t j = 0; j < c; ++j) {
      if (keep != nullptr && (*keep)[j] == 0) continue;
      maxv = std::max(maxv, a.values()[i * c + j]);
      any = true;
    }
    if (!any) continue;
    S denom = S(0);
    for (size_t j = 0; j < c; ++j) {
      if (keep != nullptr && (*keep)[j] == 0) continue;
      S e = std::exp(a.values()[i * c + j] - maxv);
      out[i * c + j] = e;
      denom += e;
    }
    for (size_t j = 0; j < c; ++j) out[i * c + j] /= denom;
  }
  auto an = a.node();
  std::vector<S> probs = out;  // cached for backward
  return detail::make_op<S>(a.shape(), std::move(out), {a},
                            [an, probs = std::move(probs), r, c](Node<S>* o) {
                              return [o, a = an.get(), probs, r, c]() {
                                if (!a->requires_grad) return;
                                a->ensure_grad();
                                for (size_t i = 0; i < r; ++i) {
                                  S dot = S(0);
                                  for (size_t j = 0; j < c; ++j) {
                                    dot += o->grad[i * c + j] * probs[i * c + j];
                                  }
                                  for (size_t j = 0; j < c; ++j) {
                                    a->grad[i * c + j] +=
                                        probs[i * c + j] * (o->grad[i * c + j] - dot);
                                  }
                                }
                              };
                            });
}

// Row-wise layer normalization with learned gain/bias vectors.
template <typename S>
Tensor<S> layer_norm_rows(const Tensor<S>& a, const Tensor<S>& gamma, const Tensor<S>& beta,
                          S eps = S(1e-5)) {
  size_t r = a.rows(), c = a.cols();
  if (gamma.numel() != c || beta.numel() != c) throw DataError("layer_norm: vector mismatch");
  std::vector<S> out(a.numel());
  std::vector<S> xhat(a.numel());
  std::vector<S> inv_std(r);
  for (size_t i = 0; i < r; ++i) {
    S mean = S(0);
    for (size_t j = 0; j < c; ++j) mean += a.values()[i * c + j];
    mean /= S(c);
    S var = S(0);
    for (size_t j = 0; j < c; ++j) {
      S d = a.values()[i * c + j] - mean;
      var += d * d;
    }
    var /= S(c);
    inv_std[i] = S(1) / std::sqrt(var + eps);
    for (size_t j = 0; j < c; ++j) {
      xhat[i * c + j] = (a.values()[i * c + j] - mean) * inv_std[i];
      out[i * c + j] = xhat[i * c + j] * gamma.values()[j] + beta.values()[j];
    }
  }
  auto an = a.node();
  auto gn = gamma.node();
  auto bn = beta.node();
  return detail::make_op<S>(
      a.shape(), std::move(out), {a, gamma, beta},
      [an, gn, bn, xhat = std::move(xhat), inv_std = std::move(inv_std), r, c](Node<S>* o) {
        return [o, a = an.get(), gamma = gn.get(), beta = bn.get(), xhat, inv_std, r, c]() {
          for (size_t i = 0; i < r; ++i) {
            const S* g = o->grad.data() + i * c;
            if (gamma->requires_grad) {
              gamma->ensure_grad();
              for (size_t j = 0; j < c; ++j) gamma->grad[j] += g[j] * xhat[i * c + j];
            }
            if (beta->requires_grad) {
              beta->ensure_grad();
              for (size_t j = 0; j < c; ++j) beta->grad[j] += g[j];
            }
            if (a->requires_grad) {
              a->ensure_grad();
              S mean_gy = S(0), mean_gyx = S(0);
              for (size_t j = 0; j < c; ++j) {
                S gy = g[j] * gamma->values[j];
                mean_gy += gy;
                mean_gyx += gy * xhat[i * c + j];
              }
              mean_gy /= S(c);
              mean_gyx /= S(c);
              for (size_t j = 0; j < c; ++j) {
                S gy = g[j] * gamma->values[j];
                a->grad[i * c + j] +=
                    (gy - mean_gy - xhat[i * c + j] * mean_gyx) * inv_std[i];
              }
            }
          }
        };
      });
}

// --- reductions and losses ---------------------------------------------------

template <typename S>
Tensor<S> sum_all(const Tensor<S>& a) {
  S total = std::accumulate(a.values().begin(), a.values().end(), S(0));
  auto an = a.node();
  return detail::make_op<S>({1}, {total}, {a},
                            [an](Node<S>* o) {
                              return [o, a = an.get()]() {
                                if (!a->requires_grad) return;
                                a->ensure_grad();
                                for (auto& g : a->grad) g += o->grad[0];
                              };
                            });
}

template <typename S>
Tensor<S> mean_all(const Tensor<S>& a) {
  if (a.numel() == 0) throw DataError("mean_all on empty tensor");
  return scale(sum_all(a), S(1) / S(a.numel()));
}

// Mean cross-entropy of row-wise logits against integer labels.
template <typename S>
Tensor<S> cross_entropy_rows(const Tensor<S>& logits, const std::vector<size_t>& labels) {
  size_t r = logits.rows(), c = logits.cols();
  if (labels.size() != r) throw DataError("cross_entropy: label count mismatch");
  std::vector<S> probs(logits.numel());
  S total = S(0);
  for (size_t i = 0; i < r; ++i) {
    if (labels[i] >= c) throw DataError("cross_entropy: label out of range");
    const S* row = logits.values().data() + i * c;
    S maxv = *std::max_element(row, row + c);
    S denom = S(0);
    for (size_t j = 0; j < c; ++j) denom += std::exp(row[j] - maxv);
    S lse = maxv + std::log(denom);
    for (size_t j = 0; j < c; ++j) probs[i * c + j] = std::exp(row[j] - lse);
    total += lse - row[labels[i]];
  }
  total /= S(r);
  auto ln = logits.node();
  return detail::make_op<S>(
      {1}, {total}, {logits},
      [ln, probs = std::move(probs), labels, r, c](Node<S>* o) {
        return [o, l = ln.get(), probs, labels, r, c]() {
          if (!l->requires_grad) return;
          l->ensure_grad();
          S g = o->grad[0] / S(r);
          for (size_t i = 0; i < r; ++i) {
            for (size_t j = 0; j < c; ++j) {
              S delta = probs[i * c + j] - (j == labels[i] ? S(1) : S(0));
              l->grad[i * c + j] += g * delta;
            }
          }
        };
      });
}

// Per-sample-weighted cross-entropy: sum_i w_{y_i} * ce_i / sum_i w_{y_i}.
template <typename S>
Tensor<S> weighted_cross_entropy_rows(const Tensor<S>& logits, const std::vector<size_t>& labels,
                                      const std::vector<S>& class_weights) {
  size_t r = logits.rows(), c = logits.cols();
  if (labels.size() != r) throw DataError("cross_entropy: label count mismatch");
  if (class_weights.size() != c) throw DataError("cross_entropy: weight count mismatch");
  std::vector<S> probs(logits.numel());
  S total = S(0);
  S weight_sum = S(0);
  for (size_t i = 0; i < r; ++i) {
    if (labels[i] >= c) throw DataError("cross_entropy: label out of range");
    const S* row = logits.values().data() + i * c;
    S maxv = *std::max_element(row, row + c);
    S denom = S(0);
    for (size_t j = 0; j < c; ++j) denom += std::exp(row[j] - maxv);
    S lse = maxv + std::log(denom);
    for (size_t j = 0; j < c; ++j) probs[i * c + j] = std::exp(row[j] - lse);
    total += class_weights[labels[i]] * (lse - row[labels[i]]);
    weight_sum += class_weights[labels[i]];
  }
  S norm = weight_sum > S(0) ? weight_sum : S(1);
  total /= norm;
  auto ln = logits.node();
  return detail::make_op<S>(
      {1}, {total}, {logits},
      [ln, probs = std::move(probs), labels, class_weights, norm, r, c](Node<S>* o) {
        return [o, l = ln.get(), probs, labels, class_weights, norm, r, c]() {
          if (!l->requires_grad) return;
          l->ensure_grad();
          for (size_t i = 0; i < r; ++i) {
            S g = o->grad[0] * class_weights[labels[i]] / norm;
            for (size_t j = 0; j < c; ++j) {
              S delta = probs[i * c + j] - (j == labels[i] ? S(1) : S(0));
              l->grad[i * c + j] += g * delta;
            }
          }
        };
      });
}

// Class-weighted binary cross-entropy with logits, averaged over all entries.
// targets and class weights are plain data; column j uses class_weights[j].
template <typename S>
Tensor<S> bce_with_logits(const Tensor<S>& logits, const std::vector<S>& targets,
                          const std::vector<S>& class_weights) {
  size_t r = logits.rows(), c = logits.cols();
  if (targets.size() != logits.numel()) throw DataError("bce: target count mismatch");
  if (class_weights.size() != c) throw DataError("bce: weight count mismatch");
  S total = S(0);
  for (size_t i = 0; i < r; ++i) {
    for (size_t j = 0; j < c; ++j) {
      S l = logits.values()[i * c + j];
      S t = targets[i * c + j];
      S loss = std::max(l, S(0)) - l * t + std::log1p(std::exp(-std::fabs(l)));
      total += class_weights[j] * loss;
    }
  }
  total /= S(r * c);
  auto ln = logits.node();
  return detail::make_op<S>(
      {1}, {total}, {logits},
      [ln, targets, class_weights, r, c](Node<S>* o) {
        return [o, l = ln.get(), targets, class_weights, r, c]() {
          if (!l->requires_grad) return;
          l->ensure_grad();
          S g = o->grad[0] / S(r * c);
          for (size_t i = 0; i < r; ++i) {
            for (size_t j = 0; j < c; ++j) {
              S lv = l->values[i * c + j];
              S sig = S(1) / (S(1) + std::exp(-lv));
              l->grad[i * c + j] += g * class_weights[j] * (sig - targets[i * c + j]);
            }
          }
        };
      });
}

// Euclidean distances between row pairs of one matrix: out[t] = ||x[I_t] - x[J_t]||.
template <typename S>
Tensor<S> euclidean_distance_pairs(const Tensor<S>& x, const std::vector<size_t>& idx_a,
                                   const std::vector<size_t>& idx_b) {
  if (idx_a.size() != idx_b.size()) throw DataError("distance pairs: index length mismatch");
  size_t c = x.cols();
  size_t t = idx_a.size();
  std::vector<S> out(t);
  for (size_t i = 0; i < t; ++i) {
    if (idx_a[i] >= x.rows() || idx_b[i] >= x.rows()) {
      throw DataError("distance pairs: index out of range");
    }
    S acc = S(0);
    const S* ra = x.values().data() + idx_a[i] * c;
    const S* rb = x.values().data() + idx_b[i] * c;
    for (size_t j = 0; j < c; ++j) {
      S d = ra[j] - rb[j];
      acc += d * d;
    }
    out[i] = std::sqrt(acc);
  }
  auto xn = x.node();
  std::vector<S> dists = out;
  return detail::make_op<S>(
      {t}, std::move(out), {x},
      [xn, idx_a, idx_b, dists = std::move(dists), c](Node<S>* o) {
        return [o, x = xn.get(), idx_a, idx_b, dists, c]() {
          if (!x->requires_grad) return;
          x->ensure_grad();
          const S eps = S(1e-12);
          for (size_t i = 0; i < idx_a.size(); ++i) {
            if (dists[i] <= eps) continue;  // subgradient 0 at coincident points
            S coeff = o->grad[i] / dists[i];
            const S* ra = x->values.data() + idx_a[i] * c;
            const S* rb = x->values.data() + idx_b[i] * c;
            S* ga = x->grad.data() + idx_a[i] * c;
            S* gb = x->grad.data() + idx_b[i] * c;
            for (size_t j = 0; j < c; ++j) {
              S d = coeff * (ra[j] - rb[j]);
              ga[j] += d;
              gb[j] -= d;
            }
          }
        };
      });
}

}  // namespace ontosim::ad

#pragma once

#include <functional>
#include <memory>
#include <unordered_set>
#include <vector>

#include "lcmae/mat.hpp"

namespace lcmae {

// Reverse-mode tape over Mat nodes. Graphs are built per forward pass;
// parameters are long-lived root nodes owned by a ParamStore.
template <typename S>
struct Node {
  Mat<S> val;
  Mat<S> grad;  // allocated on first accumulate
  bool requires_grad = false;
  std::vector<std::shared_ptr<Node>> parents;
  std::function<void(Node&)> backward;  // pulls this->grad into parents

  void accumulate(const Mat<S>& g) {
    if (!requires_grad) return;
    if (grad.size() == 0) grad = Mat<S>(val.rows, val.cols);
    if (!grad.same_shape(g)) throw ShapeError("grad accumulate: shape mismatch");
    for (size_t i = 0; i < grad.size(); ++i) grad.d[i] += g.d[i];
  }
  void zero_grad() { grad = Mat<S>(); }
};

template <typename S>
using Var = std::shared_ptr<Node<S>>;

template <typename S>
Var<S> constant(Mat<S> m) {
  auto n = std::make_shared<Node<S>>();
  n->val = std::move(m);
  n->requires_grad = false;
  return n;
}

template <typename S>
Var<S> parameter(Mat<S> m) {
  auto n = std::make_shared<Node<S>>();
  n->val = std::move(m);
  n->requires_grad = true;
  return n;
}

namespace detail {

template <typename S>
Var<S> make_op(Mat<S> val, std::vector<Var<S>> parents,
               std::function<void(Node<S>&)> backward) {
  auto n = std::make_shared<Node<S>>();
  n->val = std::move(val);
  n->parents = std::move(parents);
  for (const auto& p : n->parents) n->requires_grad |= p->requires_grad;
  if (n->requires_grad) n->backward = std::move(backward);
  return n;
}

// Iterative post-order over parents; result is topologically sorted with
// roots first.
template <typename S>
std::vector<Node<S>*> topo_order(const Var<S>& root) {
  std::vector<Node<S>*> order;
  std::unordered_set<Node<S>*> visited;
  std::vector<std::pair<Node<S>*, size_t>> stack;
  stack.push_back({root.get(), 0});
  visited.insert(root.get());
  while (!stack.empty()) {
    auto& [node, idx] = stack.back();
    if (idx < node->parents.size()) {
      Node<S>* p = node->parents[idx++].get();
      if (p->requires_grad && !visited.count(p)) {
        visited.insert(p);
        stack.push_back({p, 0});
      }
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }
  return order;
}

}  // namespace detail

// Backpropagate from a scalar root.
template <typename S>
void backward(const Var<S>& root) {
  if (root->val.rows != 1 || root->val.cols != 1)
    throw ContractError("backward: root must be a scalar");
  if (!root->requires_grad) return;
  auto order = detail::topo_order(root);
  root->accumulate(Mat<S>::filled(1, 1, S(1)));
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node<S>* n = *it;
    if (n->backward && n->grad.size() != 0) n->backward(*n);
  }
}

// ---- elementwise / linear ops ----

template <typename S>
Var<S> add(Var<S> a, Var<S> b) {
  if (!a->val.same_shape(b->val)) throw ShapeError("add: shape mismatch");
  Mat<S> v = a->val;
  for (size_t i = 0; i < v.size(); ++i) v.d[i] += b->val.d[i];
  return detail::make_op<S>(std::move(v), {a, b}, [a, b](Node<S>& self) {
    a->accumulate(self.grad);
    b->accumulate(self.grad);
  });
}

template <typename S>
Var<S> sub(Var<S> a, Var<S> b) {
  if (!a->val.same_shape(b->val)) throw ShapeError("sub: shape mismatch");
  Mat<S> v = a->val;
  for (size_t i = 0; i < v.size(); ++i) v.d[i] -= b->val.d[i];
  return detail::make_op<S>(std::move(v), {a, b}, [a, b](Node<S>& self) {
    a->accumulate(self.grad);
    if (b->requires_grad) {
      Mat<S> g = self.grad;
      for (auto& x : g.d) x = -x;
      b->accumulate(g);
    }
  });
}

template <typename S>
Var<S> scale(Var<S> a, S s) {
  Mat<S> v = a->val;
  for (auto& x : v.d) x *= s;
  return detail::make_op<S>(std::move(v), {a}, [a, s](Node<S>& self) {
    Mat<S> g = self.grad;
    for (auto& x : g.d) x *= s;
    a->accumulate(g);
  });
}

// Broadcast-add a 1 x n row vector to every row.
template <typename S>
Var<S> add_rowvec(Var<S> a, Var<S> r) {
  if (r->val.rows != 1 || r->val.cols != a->val.cols)
    throw ShapeError("add_rowvec: bias shape mismatch");
  Mat<S> v = a->val;
  for (int i = 0; i < v.rows; ++i)
    for (int j = 0; j < v.cols; ++j) v(i, j) += r->val(0, j);
  return detail::make_op<S>(std::move(v), {a, r}, [a, r](Node<S>& self) {
    a->accumulate(self.grad);
    if (r->requires_grad) {
      Mat<S> g(1, self.grad.cols);
      for (int i = 0; i < self.grad.rows; ++i)
        for (int j = 0; j < self.grad.cols; ++j) g(0, j) += self.grad(i, j);
      r->accumulate(g);
    }
  });
}

template <typename S>
Var<S> matmul(Var<S> a, Var<S> b) {
  Mat<S> v = matmul(a->val, b->val);
  return detail::make_op<S>(std::move(v), {a, b}, [a, b](Node<S>& self) {
    if (a->requires_grad) a->accumulate(matmul_nt(self.grad, b->val));
    if (b->requires_grad) b->accumulate(matmul_tn(a->val, self.grad));
  });
}

// a * b^T
template <typename S>
Var<S> matmul_nt(Var<S> a, Var<S> b) {
  Mat<S> v = matmul_nt(a->val, b->val);
  return detail::make_op<S>(std::move(v), {a, b}, [a, b](Node<S>& self) {
    if (a->requires_grad) a->accumulate(matmul(self.grad, b->val));
    if (b->requires_grad) b->accumulate(matmul_tn(self.grad, a->val));
  });
}

template <typename S>
Var<S> softmax_rows(Var<S> a) {
  Mat<S> p = softmax_rows(a->val);
  return detail::make_op<S>(
      Mat<S>(p), {a}, [a, p](Node<S>& self) {
        // dx = p .* (g - rowsum(g .* p))
        Mat<S> g(p.rows, p.cols);
        for (int i = 0; i < p.rows; ++i) {
          S dot = S(0);
          for (int j = 0; j < p.cols; ++j) dot += self.grad(i, j) * p(i, j);
          for (int j = 0; j < p.cols; ++j)
            g(i, j) = p(i, j) * (self.grad(i, j) - dot);
        }
        a->accumulate(g);
      });
}

template <typename S>
Var<S> gelu(Var<S> a) {
  Mat<S> v = a->val;
  for (auto& x : v.d) {
    double xd = static_cast<double>(x);
    x = static_cast<S>(0.5 * xd * (1.0 + std::erf(xd / M_SQRT2)));
  }
  return detail::make_op<S>(std::move(v), {a}, [a](Node<S>& self) {
    Mat<S> g = self.grad;
    for (size_t i = 0; i < g.size(); ++i) {
      double x = static_cast<double>(a->val.d[i]);
      double d = 0.5 * (1.0 + std::erf(x / M_SQRT2)) +
                 x * std::exp(-0.5 * x * x) / std::sqrt(2.0 * M_PI);
      g.d[i] = static_cast<S>(static_cast<double>(g.d[i]) * d);
    }
    a->accumulate(g);
  });
}

// Per-row layer normalization with learnable scale/offset (1 x d each).
template <typename S>
Var<S> layer_norm(Var<S> x, Var<S> gamma, Var<S> beta, S eps) {
  const int n = x->val.rows, d = x->val.cols;
  if (gamma->val.cols != d || beta->val.cols != d)
    throw ShapeError("layer_norm: scale/offset width mismatch");
  Mat<S> xhat(n, d);
  std::vector<S> inv_std(n);
  for (int i = 0; i < n; ++i) {
    S mean = S(0);
    for (int j = 0; j < d; ++j) mean += x->val(i, j);
    mean /= S(d);
    S var = S(0);
    for (int j = 0; j < d; ++j) {
      S c = x->val(i, j) - mean;
      var += c * c;
    }
    var /= S(d);
    S is = S(1) / std::sqrt(var + eps);
    inv_std[i] = is;
    for (int j = 0; j < d; ++j) xhat(i, j) = (x->val(i, j) - mean) * is;
  }
  Mat<S> v(n, d);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < d; ++j)
      v(i, j) = xhat(i, j) * gamma->val(0, j) + beta->val(0, j);
  return detail::make_op<S>(
      std::move(v), {x, gamma, beta},
      [x, gamma, beta, xhat, inv_std](Node<S>& self) {
        const int n = xhat.rows, d = xhat.cols;
        if (gamma->requires_grad) {
          Mat<S> dg(1, d);
          for (int i = 0; i < n; ++i)
            for (int j = 0; j < d; ++j) dg(0, j) += self.grad(i, j) * xhat(i, j);
          gamma->accumulate(dg);
        }
        if (beta->requires_grad) {
          Mat<S> db(1, d);
          for (int i = 0; i < n; ++i)
            for (int j = 0; j < d; ++j) db(0, j) += self.grad(i, j);
          beta->accumulate(db);
        }
        if (x->requires_grad) {
          Mat<S> dx(n, d);
          for (int i = 0; i < n; ++i) {
            S m1 = S(0), m2 = S(0);  // means of h and h.*xhat, h = g.*gamma
            for (int j = 0; j < d; ++j) {
              S h = self.grad(i, j) * gamma->val(0, j);
              m1 += h;
              m2 += h * xhat(i, j);
            }
            m1 /= S(d);
            m2 /= S(d);
            for (int j = 0; j < d; ++j) {
              S h = self.grad(i, j) * gamma->val(0, j);
              dx(i, j) = (h - m1 - xhat(i, j) * m2) * inv_std[i];
            }
          }
          x->accumulate(dx);
        }
      });
}

// ---- slicing / assembly ----

template <typename S>
Var<S> slice_rows(Var<S> a, int r0, int count) {
  if (r0 < 0 || count < 0 || r0 + count > a->val.rows)
    throw ShapeError("slice_rows: out of range");
  Mat<S> v(count, a->val.cols);
  std::copy_n(a->val.data() + static_cast<size_t>(r0) * a->val.cols,
              v.size(), v.data());
  return detail::make_op<S>(std::move(v), {a}, [a, r0, count](Node<S>& self) {
    Mat<S> g(a->val.rows, a->val.cols);
    std::copy_n(self.grad.data(), self.grad.size(),
                g.data() + static_cast<size_t>(r0) * g.cols);
    a->accumulate(g);
  });
}

template <typename S>
Var<S> slice_cols(Var<S> a, int c0, int count) {
  if (c0 < 0 || count < 0 || c0 + count > a->val.cols)
    throw ShapeError("slice_cols: out of range");
  Mat<S> v(a->val.rows, count);
  for (int i = 0; i < v.rows; ++i)
    for (int j = 0; j < count; ++j) v(i, j) = a->val(i, c0 + j);
  return detail::make_op<S>(std::move(v), {a}, [a, c0, count](Node<S>& self) {
    Mat<S> g(a->val.rows, a->val.cols);
    for (int i = 0; i < g.rows; ++i)
      for (int j = 0; j < count; ++j) g(i, c0 + j) = self.grad(i, j);
    a->accumulate(g);
  });
}

template <typename S>
Var<S> concat_rows(const std::vector<Var<S>>& parts) {
  if (parts.empty()) throw ShapeError("concat_rows: empty");
  int cols = parts[0]->val.cols, rows = 0;
  for (const auto& p : parts) {
    if (p->val.cols != cols) throw ShapeError("concat_rows: width mismatch");
    rows += p->val.rows;
  }
  Mat<S> v(rows, cols);
  int at = 0;
  for (const auto& p : parts) {
    std::copy_n(p->val.data(), p->val.size(),
                v.data() + static_cast<size_t>(at) * cols);
    at += p->val.rows;
  }
  return detail::make_op<S>(std::move(v), parts, [parts](Node<S>& self) {
    int at = 0;
    for (const auto& p : parts) {
      if (p->requires_grad) {
        Mat<S> g(p->val.rows, p->val.cols);
        std::copy_n(self.grad.data() + static_cast<size_t>(at) * g.cols,
                    g.size(), g.data());
        p->accumulate(g);
      }
      at += p->val.rows;
    }
  });
}

template <typename S>
Var<S> concat_cols(const std::vector<Var<S>>& parts) {
  if (parts.empty()) throw ShapeError("concat_cols: empty");
  int rows = parts[0]->val.rows, cols = 0;
  for (const auto& p : parts) {
    if (p->val.rows != rows) throw ShapeError("concat_cols: height mismatch");
    cols += p->val.cols;
  }
  Mat<S> v(rows, cols);
  int at = 0;
  for (const auto& p : parts) {
    for (int i = 0; i < rows; ++i)
      for (int j = 0; j < p->val.cols; ++j) v(i, at + j) = p->val(i, j);
    at += p->val.cols;
  }
  return detail::make_op<S>(std::move(v), parts, [parts](Node<S>& self) {
    int at = 0;
    for (const auto& p : parts) {
      if (p->requires_grad) {
        Mat<S> g(p->val.rows, p->val.cols);
        for (int i = 0; i < g.rows; ++i)
          for (int j = 0; j < g.cols; ++j) g(i, j) = self.grad(i, at + j);
        p->accumulate(g);
      }
      at += p->val.cols;
    }
  });
}

// out[i] = a[idx[i]]; repeated indices accumulate on backward.
template <typename S>
Var<S> gather_rows(Var<S> a, std::vector<int> idx) {
  Mat<S> v(static_cast<int>(idx.size()), a->val.cols);
  for (size_t i = 0; i < idx.size(); ++i) {
    if (idx[i] < 0 || idx[i] >= a->val.rows)
      throw ShapeError("gather_rows: index out of range");
    std::copy_n(a->val.data() + static_cast<size_t>(idx[i]) * a->val.cols,
                a->val.cols, v.data() + i * a->val.cols);
  }
  return detail::make_op<S>(std::move(v), {a}, [a, idx](Node<S>& self) {
    Mat<S> g(a->val.rows, a->val.cols);
    for (size_t i = 0; i < idx.size(); ++i)
      for (int j = 0; j < g.cols; ++j) g(idx[i], j) += self.grad(static_cast<int>(i), j);
    a->accumulate(g);
  });
}

// Full-length sequence from visible rows: out[slots[i]] = visible[i], every
// other row is the fill row (shared mask token).
template <typename S>
Var<S> scatter_rows(Var<S> visible, std::vector<int> slots, int total, Var<S> fill) {
  if (static_cast<int>(slots.size()) != visible->val.rows)
    throw ShapeError("scatter_rows: slot count != visible rows");
  if (fill->val.rows != 1 || fill->val.cols != visible->val.cols)
    throw ShapeError("scatter_rows: fill row shape mismatch");
  const int d = visible->val.cols;
  Mat<S> v(total, d);
  std::vector<char> taken(total, 0);
  for (size_t i = 0; i < slots.size(); ++i) {
    int s = slots[i];
    if (s < 0 || s >= total || taken[s])
      throw ShapeError("scatter_rows: bad slot");
    taken[s] = 1;
    std::copy_n(visible->val.data() + i * d, d, v.data() + static_cast<size_t>(s) * d);
  }
  for (int r = 0; r < total; ++r)
    if (!taken[r]) std::copy_n(fill->val.data(), d, v.data() + static_cast<size_t>(r) * d);
  return detail::make_op<S>(
      std::move(v), {visible, fill}, [visible, slots, total, fill, d](Node<S>& self) {
        std::vector<char> taken(total, 0);
        for (int s : slots) taken[s] = 1;
        if (visible->requires_grad) {
          Mat<S> g(visible->val.rows, d);
          for (size_t i = 0; i < slots.size(); ++i)
            for (int j = 0; j < d; ++j) g(static_cast<int>(i), j) = self.grad(slots[i], j);
          visible->accumulate(g);
        }
        if (fill->requires_grad) {
          Mat<S> g(1, d);
          for (int r = 0; r < total; ++r)
            if (!taken[r])
              for (int j = 0; j < d; ++j) g(0, j) += self.grad(r, j);
          fill->accumulate(g);
        }
      });
}

// Replace one row; used to re-insert the fused class token.
template <typename S>
Var<S> set_row(Var<S> a, int row, Var<S> value) {
  if (value->val.rows != 1 || value->val.cols != a->val.cols)
    throw ShapeError("set_row: value shape mismatch");
  if (row < 0 || row >= a->val.rows) throw ShapeError("set_row: out of range");
  Mat<S> v = a->val;
  std::copy_n(value->val.data(), v.cols, v.data() + static_cast<size_t>(row) * v.cols);
  return detail::make_op<S>(std::move(v), {a, value}, [a, value, row](Node<S>& self) {
    if (a->requires_grad) {
      Mat<S> g = self.grad;
      for (int j = 0; j < g.cols; ++j) g(row, j) = S(0);
      a->accumulate(g);
    }
    if (value->requires_grad) {
      Mat<S> g(1, self.grad.cols);
      for (int j = 0; j < g.cols; ++j) g(0, j) = self.grad(row, j);
      value->accumulate(g);
    }
  });
}

template <typename S>
Var<S> mean_all(Var<S> a) {
  S m = S(0);
  for (S v : a->val.d) m += v;
  m /= S(a->val.size());
  Mat<S> v(1, 1);
  v(0, 0) = m;
  return detail::make_op<S>(std::move(v), {a}, [a](Node<S>& self) {
    S g = self.grad(0, 0) / S(a->val.size());
    a->accumulate(Mat<S>::filled(a->val.rows, a->val.cols, g));
  });
}

// Mean squared error between pred rows and fixed targets, averaged over the
// rows listed in scope. per_row (all rows) is a plain side value.
template <typename S>
struct RowMseResult {
  Var<S> loss;
  std::vector<S> per_row;
};

template <typename S>
RowMseResult<S> row_mse(Var<S> pred, const Mat<S>& target, const std::vector<int>& scope) {
  if (!pred->val.same_shape(target)) throw ShapeError("row_mse: shape mismatch");
  if (scope.empty()) throw ContractError("row_mse: empty scope");
  const int n = pred->val.rows, d = pred->val.cols;
  std::vector<S> per_row(n, S(0));
  for (int i = 0; i < n; ++i) {
    S s = S(0);
    for (int j = 0; j < d; ++j) {
      S e = pred->val(i, j) - target(i, j);
      s += e * e;
    }
    per_row[i] = s / S(d);
  }
  S loss = S(0);
  for (int r : scope) {
    if (r < 0 || r >= n) throw ShapeError("row_mse: scope index out of range");
    loss += per_row[r];
  }
  loss /= S(scope.size());
  Mat<S> v(1, 1);
  v(0, 0) = loss;
  auto node = detail::make_op<S>(
      std::move(v), {pred}, [pred, target, scope, n, d](Node<S>& self) {
        S g = self.grad(0, 0) * S(2) / (S(d) * S(scope.size()));
        Mat<S> dp(n, d);
        for (int r : scope)
          for (int j = 0; j < d; ++j)
            dp(r, j) = g * (pred->val(r, j) - target(r, j));
        pred->accumulate(dp);
      });
  return {node, std::move(per_row)};
}

}  // namespace lcmae

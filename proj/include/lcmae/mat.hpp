#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <vector>

#include "lcmae/common.hpp"

namespace lcmae {

// Multiply/add counters, accumulated by the routines below as they run.
// attention is the subset spent inside attention blocks (score, softmax and
// value aggregation plus their projections); see nn.hpp AttentionFlopScope.
namespace flops {

inline uint64_t& total_ref() {
  thread_local uint64_t n = 0;
  return n;
}
inline uint64_t& attention_ref() {
  thread_local uint64_t n = 0;
  return n;
}
inline void add(uint64_t n) { total_ref() += n; }
inline uint64_t total() { return total_ref(); }
inline uint64_t attention() { return attention_ref(); }
inline void reset() {
  total_ref() = 0;
  attention_ref() = 0;
}

}  // namespace flops

// Dense row-major matrix. Row vectors are 1 x n.
template <typename S>
struct Mat {
  int rows = 0;
  int cols = 0;
  std::vector<S> d;

  Mat() = default;
  Mat(int r, int c) : rows(r), cols(c), d(static_cast<size_t>(r) * c, S(0)) {
    if (r < 0 || c < 0) throw ShapeError("Mat: negative dimension");
  }

  static Mat zeros(int r, int c) { return Mat(r, c); }
  static Mat filled(int r, int c, S v) {
    Mat m(r, c);
    std::fill(m.d.begin(), m.d.end(), v);
    return m;
  }

  size_t size() const { return d.size(); }
  S* data() { return d.data(); }
  const S* data() const { return d.data(); }

  S& operator()(int r, int c) { return d[static_cast<size_t>(r) * cols + c]; }
  S operator()(int r, int c) const { return d[static_cast<size_t>(r) * cols + c]; }

  bool same_shape(const Mat& o) const { return rows == o.rows && cols == o.cols; }

  bool all_finite() const {
    for (S v : d)
      if (!std::isfinite(static_cast<double>(v))) return false;
    return true;
  }

  template <typename T>
  Mat<T> cast() const {
    Mat<T> out(rows, cols);
    for (size_t i = 0; i < d.size(); ++i) out.d[i] = static_cast<T>(d[i]);
    return out;
  }
};

template <typename S>
using EMat = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

template <typename S>
Eigen::Map<EMat<S>> emap(Mat<S>& m) {
  return Eigen::Map<EMat<S>>(m.data(), m.rows, m.cols);
}
template <typename S>
Eigen::Map<const EMat<S>> emap(const Mat<S>& m) {
  return Eigen::Map<const EMat<S>>(m.data(), m.rows, m.cols);
}

// c = a * b
template <typename S>
Mat<S> matmul(const Mat<S>& a, const Mat<S>& b) {
  if (a.cols != b.rows) throw ShapeError("matmul: inner dimensions differ");
  Mat<S> c(a.rows, b.cols);
  emap(c).noalias() = emap(a) * emap(b);
  flops::add(2ull * a.rows * a.cols * b.cols);
  return c;
}

// c = a * b^T
template <typename S>
Mat<S> matmul_nt(const Mat<S>& a, const Mat<S>& b) {
  if (a.cols != b.cols) throw ShapeError("matmul_nt: inner dimensions differ");
  Mat<S> c(a.rows, b.rows);
  emap(c).noalias() = emap(a) * emap(b).transpose();
  flops::add(2ull * a.rows * a.cols * b.rows);
  return c;
}

// c = a^T * b
template <typename S>
Mat<S> matmul_tn(const Mat<S>& a, const Mat<S>& b) {
  if (a.rows != b.rows) throw ShapeError("matmul_tn: inner dimensions differ");
  Mat<S> c(a.cols, b.cols);
  emap(c).noalias() = emap(a).transpose() * emap(b);
  flops::add(2ull * a.cols * a.rows * b.cols);
  return c;
}

// Row-wise softmax with max subtraction; counted as 5 ops per entry.
template <typename S>
Mat<S> softmax_rows(const Mat<S>& x) {
  Mat<S> p(x.rows, x.cols);
  for (int r = 0; r < x.rows; ++r) {
    const S* in = x.data() + static_cast<size_t>(r) * x.cols;
    S* out = p.data() + static_cast<size_t>(r) * x.cols;
    S mx = in[0];
    for (int c = 1; c < x.cols; ++c) mx = std::max(mx, in[c]);
    S sum = S(0);
    for (int c = 0; c < x.cols; ++c) {
      out[c] = std::exp(in[c] - mx);
      sum += out[c];
    }
    S inv = S(1) / sum;
    for (int c = 0; c < x.cols; ++c) out[c] *= inv;
  }
  flops::add(5ull * x.rows * x.cols);
  return p;
}

}  // namespace lcmae

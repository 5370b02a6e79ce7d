#pragma once

#include <map>
#include <string>

#include "lcmae/autodiff.hpp"

namespace lcmae {

struct TransformerConfig {
  int embed_dim = 64;
  int depth = 4;
  int n_heads = 4;
  int mlp_ratio = 4;

  int head_dim() const { return embed_dim / n_heads; }
  void validate() const;
};

constexpr double kLayerNormEps = 1e-6;
constexpr double kInitStd = 0.02;

// Ordered sequence of embedding vectors, optionally led by a class token.
template <typename S>
struct TokenSeq {
  Var<S> tokens;  // (n [+1]) x embed_dim
  bool has_class_token = false;
  int grid_rows = 0;
  int grid_cols = 0;

  int n_patch_tokens() const {
    return tokens->val.rows - (has_class_token ? 1 : 0);
  }
};

// All learnable arrays keyed by a stable path string, e.g.
// "lidar_enc.block3.attn.w_q". Values are the autodiff root nodes.
template <typename S>
class ParamStore {
 public:
  Var<S>& create(const std::string& key, Mat<S> init) {
    auto [it, fresh] = params_.emplace(key, parameter(std::move(init)));
    if (!fresh) throw ContractError("ParamStore: duplicate key " + key);
    return it->second;
  }
  const Var<S>& at(const std::string& key) const {
    auto it = params_.find(key);
    if (it == params_.end()) throw ContractError("ParamStore: missing key " + key);
    return it->second;
  }
  bool has(const std::string& key) const { return params_.count(key) != 0; }
  std::vector<std::string> keys() const {
    std::vector<std::string> k;
    k.reserve(params_.size());
    for (const auto& [key, _] : params_) k.push_back(key);
    return k;
  }
  size_t size() const { return params_.size(); }
  void zero_grads() {
    for (auto& [_, v] : params_) v->zero_grad();
  }
  auto begin() { return params_.begin(); }
  auto end() { return params_.end(); }
  auto begin() const { return params_.begin(); }
  auto end() const { return params_.end(); }

  template <typename T>
  ParamStore<T> cast() const {
    ParamStore<T> out;
    for (const auto& [key, v] : params_) out.create(key, v->val.template cast<T>());
    return out;
  }

 private:
  std::map<std::string, Var<S>> params_;
};

// Per-key init stream so the inventory order never affects values.
template <typename S>
Mat<S> trunc_normal_init(int rows, int cols, uint64_t seed, const std::string& key) {
  SplitMix64 rng(mix64(seed ^ fnv1a64(key)));
  Mat<S> m(rows, cols);
  for (auto& v : m.d) v = static_cast<S>(rng.truncated_normal(kInitStd));
  return m;
}

template <typename S>
struct AttentionParams {
  Var<S> w_q, b_q, w_k, w_v, w_o, b_o;
  Var<S> b_k, b_v;  // null when the K/V projections are bias-free
};

template <typename S>
struct BlockParams {
  Var<S> norm1_scale, norm1_offset;
  AttentionParams<S> attn;
  Var<S> norm2_scale, norm2_offset;
  Var<S> mlp_w1, mlp_b1, mlp_w2, mlp_b2;
};

template <typename S>
void add_attention_params(ParamStore<S>& ps, const std::string& prefix, int dim,
                          bool kv_bias, uint64_t seed) {
  ps.create(prefix + ".w_q", trunc_normal_init<S>(dim, dim, seed, prefix + ".w_q"));
  ps.create(prefix + ".b_q", Mat<S>(1, dim));
  ps.create(prefix + ".w_k", trunc_normal_init<S>(dim, dim, seed, prefix + ".w_k"));
  ps.create(prefix + ".w_v", trunc_normal_init<S>(dim, dim, seed, prefix + ".w_v"));
  ps.create(prefix + ".w_o", trunc_normal_init<S>(dim, dim, seed, prefix + ".w_o"));
  ps.create(prefix + ".b_o", Mat<S>(1, dim));
  if (kv_bias) {
    ps.create(prefix + ".b_k", Mat<S>(1, dim));
    ps.create(prefix + ".b_v", Mat<S>(1, dim));
  }
}

template <typename S>
AttentionParams<S> attention_params(const ParamStore<S>& ps, const std::string& prefix) {
  AttentionParams<S> p;
  p.w_q = ps.at(prefix + ".w_q");
  p.b_q = ps.at(prefix + ".b_q");
  p.w_k = ps.at(prefix + ".w_k");
  p.w_v = ps.at(prefix + ".w_v");
  p.w_o = ps.at(prefix + ".w_o");
  p.b_o = ps.at(prefix + ".b_o");
  if (ps.has(prefix + ".b_k")) {
    p.b_k = ps.at(prefix + ".b_k");
    p.b_v = ps.at(prefix + ".b_v");
  }
  return p;
}

template <typename S>
void add_block_params(ParamStore<S>& ps, const std::string& prefix,
                      const TransformerConfig& cfg, uint64_t seed) {
  const int d = cfg.embed_dim, hidden = cfg.mlp_ratio * cfg.embed_dim;
  ps.create(prefix + ".norm1.scale", Mat<S>::filled(1, d, S(1)));
  ps.create(prefix + ".norm1.offset", Mat<S>(1, d));
  add_attention_params(ps, prefix + ".attn", d, true, seed);
  ps.create(prefix + ".norm2.scale", Mat<S>::filled(1, d, S(1)));
  ps.create(prefix + ".norm2.offset", Mat<S>(1, d));
  ps.create(prefix + ".mlp.w1", trunc_normal_init<S>(d, hidden, seed, prefix + ".mlp.w1"));
  ps.create(prefix + ".mlp.b1", Mat<S>(1, hidden));
  ps.create(prefix + ".mlp.w2", trunc_normal_init<S>(hidden, d, seed, prefix + ".mlp.w2"));
  ps.create(prefix + ".mlp.b2", Mat<S>(1, d));
}

template <typename S>
BlockParams<S> block_params(const ParamStore<S>& ps, const std::string& prefix) {
  BlockParams<S> p;
  p.norm1_scale = ps.at(prefix + ".norm1.scale");
  p.norm1_offset = ps.at(prefix + ".norm1.offset");
  p.attn = attention_params(ps, prefix + ".attn");
  p.norm2_scale = ps.at(prefix + ".norm2.scale");
  p.norm2_offset = ps.at(prefix + ".norm2.offset");
  p.mlp_w1 = ps.at(prefix + ".mlp.w1");
  p.mlp_b1 = ps.at(prefix + ".mlp.b1");
  p.mlp_w2 = ps.at(prefix + ".mlp.w2");
  p.mlp_b2 = ps.at(prefix + ".mlp.b2");
  return p;
}

// Blocks plus final norm.
template <typename S>
void add_encoder_params(ParamStore<S>& ps, const std::string& prefix,
                        const TransformerConfig& cfg, uint64_t seed) {
  cfg.validate();
  for (int i = 0; i < cfg.depth; ++i)
    add_block_params(ps, prefix + ".block" + std::to_string(i), cfg, seed);
  ps.create(prefix + ".final_norm.scale", Mat<S>::filled(1, cfg.embed_dim, S(1)));
  ps.create(prefix + ".final_norm.offset", Mat<S>(1, cfg.embed_dim));
}

namespace flops {
// Attributes everything counted inside the scope to the attention counter.
struct AttentionScope {
  uint64_t start;
  AttentionScope() : start(total()) {}
  ~AttentionScope() { attention_ref() += total() - start; }
};
}  // namespace flops

// softmax(Q K^T / sqrt(head_dim)) V per head, concatenated, then the output
// projection. Self-attention is queries == keys_values.
template <typename S>
Var<S> multi_head_attention(Var<S> queries, Var<S> keys_values,
                            const AttentionParams<S>& p, int n_heads,
                            const std::string& path = "attn") {
  const int d = p.w_q->val.cols;
  if (queries->val.cols != p.w_q->val.rows || keys_values->val.cols != p.w_k->val.rows)
    throw ShapeError(path + ": token width does not match projections");
  if (d % n_heads != 0) throw ShapeError(path + ": embed_dim not divisible by heads");
  flops::AttentionScope scope;
  const int hd = d / n_heads;
  Var<S> q = add_rowvec(matmul(queries, p.w_q), p.b_q);
  Var<S> k = matmul(keys_values, p.w_k);
  if (p.b_k) k = add_rowvec(k, p.b_k);
  Var<S> v = matmul(keys_values, p.w_v);
  if (p.b_v) v = add_rowvec(v, p.b_v);
  std::vector<Var<S>> heads;
  heads.reserve(n_heads);
  const S inv_sqrt = S(1) / static_cast<S>(std::sqrt(static_cast<double>(hd)));
  for (int h = 0; h < n_heads; ++h) {
    Var<S> qh = slice_cols(q, h * hd, hd);
    Var<S> kh = slice_cols(k, h * hd, hd);
    Var<S> vh = slice_cols(v, h * hd, hd);
    Var<S> scores = scale(matmul_nt(qh, kh), inv_sqrt);
    heads.push_back(matmul(softmax_rows(scores), vh));
  }
  Var<S> out = add_rowvec(matmul(concat_cols(heads), p.w_o), p.b_o);
  if (!out->val.all_finite())
    throw NumericalError(path + ": non-finite attention output");
  return out;
}

template <typename S>
Var<S> mlp_forward(Var<S> x, const BlockParams<S>& p) {
  return add_rowvec(matmul(gelu(add_rowvec(matmul(x, p.mlp_w1), p.mlp_b1)), p.mlp_w2),
                    p.mlp_b2);
}

// Pre-norm residual block.
template <typename S>
Var<S> transformer_block(Var<S> x, const BlockParams<S>& p, int n_heads,
                         const std::string& path = "block") {
  Var<S> n1 = layer_norm(x, p.norm1_scale, p.norm1_offset, S(kLayerNormEps));
  x = add(x, multi_head_attention(n1, n1, p.attn, n_heads, path + ".attn"));
  Var<S> n2 = layer_norm(x, p.norm2_scale, p.norm2_offset, S(kLayerNormEps));
  x = add(x, mlp_forward(n2, p));
  if (!x->val.all_finite()) throw NumericalError(path + ": non-finite block output");
  return x;
}

// depth blocks followed by the final normalization; length-preserving.
template <typename S>
Var<S> encode(Var<S> x, const ParamStore<S>& ps, const std::string& prefix,
              const TransformerConfig& cfg) {
  for (int i = 0; i < cfg.depth; ++i) {
    std::string bp = prefix + ".block" + std::to_string(i);
    x = transformer_block(x, block_params(ps, bp), cfg.n_heads, bp);
  }
  return layer_norm(x, ps.at(prefix + ".final_norm.scale"),
                    ps.at(prefix + ".final_norm.offset"), S(kLayerNormEps));
}

// Fixed 2D sine-cosine positional table, one row per grid slot in row-major
// order. First half of the channels encodes the row, second half the column.
template <typename S>
Mat<S> positional_embedding(int grid_rows, int grid_cols, int embed_dim) {
  if (embed_dim % 4 != 0)
    throw ShapeError("positional_embedding: embed_dim must be divisible by 4");
  const int half = embed_dim / 2, quarter = embed_dim / 4;
  std::vector<double> omega(quarter);
  for (int i = 0; i < quarter; ++i)
    omega[i] = 1.0 / std::pow(10000.0, static_cast<double>(i) / quarter);
  Mat<S> table(grid_rows * grid_cols, embed_dim);
  for (int r = 0; r < grid_rows; ++r)
    for (int c = 0; c < grid_cols; ++c) {
      S* row = table.data() + static_cast<size_t>(r * grid_cols + c) * embed_dim;
      for (int i = 0; i < quarter; ++i) {
        row[i] = static_cast<S>(std::sin(r * omega[i]));
        row[quarter + i] = static_cast<S>(std::cos(r * omega[i]));
        row[half + i] = static_cast<S>(std::sin(c * omega[i]));
        row[half + quarter + i] = static_cast<S>(std::cos(c * omega[i]));
      }
    }
  return table;
}

}  // namespace lcmae

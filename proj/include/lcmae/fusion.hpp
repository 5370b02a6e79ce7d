#pragma once

#include "lcmae/nn.hpp"

namespace lcmae {

// Token-to-sequence cross-attention: the LiDAR class token is the only
// query; keys and values come from [cls; camera tokens]. Each block adds the
// attention output back onto the class token (skip connection).
struct FusionConfig {
  int embed_dim = 64;
  int depth = 2;
  int n_heads = 4;
  bool bias_free_kv = true;  // keeps zero camera tokens exactly inert

  void validate() const {
    if (embed_dim < 1 || embed_dim % n_heads != 0)
      throw ContractError("FusionConfig: embed_dim must be divisible by n_heads");
    if (depth < 1) throw ContractError("FusionConfig: depth must be >= 1");
  }
};

template <typename S>
void add_fusion_params(ParamStore<S>& ps, const std::string& prefix, int decoder_dim,
                       int camera_dim, const FusionConfig& cfg, uint64_t seed) {
  ps.create(prefix + ".in.w",
            trunc_normal_init<S>(decoder_dim, cfg.embed_dim, seed, prefix + ".in.w"));
  ps.create(prefix + ".cam.w",
            trunc_normal_init<S>(camera_dim, cfg.embed_dim, seed, prefix + ".cam.w"));
  ps.create(prefix + ".out.w",
            trunc_normal_init<S>(cfg.embed_dim, decoder_dim, seed, prefix + ".out.w"));
  for (int i = 0; i < cfg.depth; ++i)
    add_attention_params(ps, prefix + ".block" + std::to_string(i) + ".attn",
                         cfg.embed_dim, !cfg.bias_free_kv, seed);
}

// lidar_cls 1 x d, camera_tokens n x d (n may be 0; rows may be all-zero in
// ablation mode). Blocks are applied sequentially, each consuming the
// previous fused token as the new query and first KV row.
template <typename S>
Var<S> cross_attention_fuse(Var<S> lidar_cls, Var<S> camera_tokens,
                            const ParamStore<S>& ps, const std::string& prefix,
                            const FusionConfig& cfg) {
  cfg.validate();
  if (lidar_cls->val.rows != 1 || lidar_cls->val.cols != cfg.embed_dim)
    throw ShapeError("cross_attention_fuse: class token must be 1 x embed_dim");
  if (camera_tokens->val.rows > 0 && camera_tokens->val.cols != cfg.embed_dim)
    throw ShapeError("cross_attention_fuse: camera token width mismatch");
  Var<S> cls = lidar_cls;
  for (int i = 0; i < cfg.depth; ++i) {
    std::string bp = prefix + ".block" + std::to_string(i) + ".attn";
    Var<S> kv = camera_tokens->val.rows > 0
                    ? concat_rows<S>({cls, camera_tokens})
                    : cls;
    cls = add(cls, multi_head_attention(cls, kv, attention_params(ps, bp),
                                        cfg.n_heads, bp));
  }
  return cls;
}

// Replaces the class-token slot of a full-length decoder sequence with the
// fused token; patch tokens pass through unchanged. Width adapters (decoder
// -> fusion, camera -> fusion, fusion -> decoder) are bias-free learned maps
// stored under <prefix>.in.w / .cam.w / .out.w.
template <typename S>
TokenSeq<S> fuse_into_sequence(const TokenSeq<S>& decoder_tokens, Var<S> camera_tokens,
                               const ParamStore<S>& ps, const std::string& prefix,
                               const FusionConfig& cfg) {
  if (!decoder_tokens.has_class_token)
    throw ContractError("fuse_into_sequence: sequence has no class token");
  Var<S> cls = slice_rows(decoder_tokens.tokens, 0, 1);
  Var<S> cls_f = matmul(cls, ps.at(prefix + ".in.w"));
  Var<S> cam_f = camera_tokens->val.rows > 0
                     ? matmul(camera_tokens, ps.at(prefix + ".cam.w"))
                     : constant(Mat<S>(0, cfg.embed_dim));
  Var<S> fused = cross_attention_fuse(cls_f, cam_f, ps, prefix, cfg);
  Var<S> back = matmul(fused, ps.at(prefix + ".out.w"));
  TokenSeq<S> out = decoder_tokens;
  out.tokens = set_row(decoder_tokens.tokens, 0, back);
  return out;
}

}  // namespace lcmae

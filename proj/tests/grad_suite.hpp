#pragma once

#include <string>
#include <vector>

#include "gradcheck.hpp"
#include "lcmae/fusion.hpp"
#include "lcmae/mae_model.hpp"

namespace gradsuite {

using namespace lcmae;
using gradcheck::check;
using gradcheck::project;
using gradcheck::random_mat;

struct OpReport {
  std::string name;
  int instances = 0;
  int coords = 0;
  double max_rel = 0.0;
  double tol = 1e-4;

  bool pass() const { return max_rel < tol; }
};

namespace detail {

inline Var<double> leaf(int r, int c, SplitMix64& rng, double lo = -1.0,
                        double hi = 1.0) {
  return parameter(random_mat(r, c, rng, lo, hi));
}

template <typename F>
OpReport run_op(const std::string& name, int instances, SplitMix64& rng, F&& one,
                double tol = 1e-4) {
  OpReport rep;
  rep.name = name;
  rep.instances = instances;
  rep.tol = tol;
  for (int i = 0; i < instances; ++i) {
    gradcheck::Result r = one(rng);
    rep.max_rel = std::max(rep.max_rel, r.max_rel);
    rep.coords += r.coords;
  }
  return rep;
}

}  // namespace detail

inline std::vector<OpReport> run_op_grad_suite(int instances, uint64_t seed = 2024) {
  SplitMix64 rng(seed);
  std::vector<OpReport> out;
  auto run = [&](const std::string& name, auto&& one, double tol = 1e-4) {
    out.push_back(detail::run_op(name, instances, rng, one, tol));
  };

  run("add", [](SplitMix64& rng) {
    int m = 1 + static_cast<int>(rng.below(5)), n = 1 + static_cast<int>(rng.below(5));
    auto a = detail::leaf(m, n, rng), b = detail::leaf(m, n, rng);
    auto L = random_mat(1, m, rng);
    auto R = random_mat(n, 1, rng);
    return check({a, b}, [&] { return project(add(a, b), L, R); }, rng);
  });

  run("sub", [](SplitMix64& rng) {
    int m = 1 + static_cast<int>(rng.below(5)), n = 1 + static_cast<int>(rng.below(5));
    auto a = detail::leaf(m, n, rng), b = detail::leaf(m, n, rng);
    auto L = random_mat(1, m, rng);
    auto R = random_mat(n, 1, rng);
    return check({a, b}, [&] { return project(sub(a, b), L, R); }, rng);
  });

  run("scale", [](SplitMix64& rng) {
    int m = 1 + static_cast<int>(rng.below(5)), n = 1 + static_cast<int>(rng.below(5));
    double s = rng.uniform(-2.0, 2.0);
    auto a = detail::leaf(m, n, rng);
    auto L = random_mat(1, m, rng);
    auto R = random_mat(n, 1, rng);
    return check({a}, [&] { return project(scale(a, s), L, R); }, rng);
  });

  run("add_rowvec", [](SplitMix64& rng) {
    int m = 1 + static_cast<int>(rng.below(5)), n = 1 + static_cast<int>(rng.below(5));
    auto a = detail::leaf(m, n, rng), r = detail::leaf(1, n, rng);
    auto L = random_mat(1, m, rng);
    auto R = random_mat(n, 1, rng);
    return check({a, r}, [&] { return project(add_rowvec(a, r), L, R); }, rng);
  });

  run("matmul", [](SplitMix64& rng) {
    int m = 1 + static_cast<int>(rng.below(5)), k = 1 + static_cast<int>(rng.below(5)),
        n = 1 + static_cast<int>(rng.below(5));
    auto a = detail::leaf(m, k, rng), b = detail::leaf(k, n, rng);
    auto L = random_mat(1, m, rng);
    auto R = random_mat(n, 1, rng);
    return check({a, b}, [&] { return project(matmul(a, b), L, R); }, rng);
  });

  run("matmul_nt", [](SplitMix64& rng) {
    int m = 1 + static_cast<int>(rng.below(5)), k = 1 + static_cast<int>(rng.below(5)),
        n = 1 + static_cast<int>(rng.below(5));
    auto a = detail::leaf(m, k, rng), b = detail::leaf(n, k, rng);
    auto L = random_mat(1, m, rng);
    auto R = random_mat(n, 1, rng);
    return check({a, b}, [&] { return project(matmul_nt(a, b), L, R); }, rng);
  });

  run("softmax_rows", [](SplitMix64& rng) {
    int m = 1 + static_cast<int>(rng.below(4)), n = 2 + static_cast<int>(rng.below(5));
    auto a = detail::leaf(m, n, rng, -3.0, 3.0);
    auto L = random_mat(1, m, rng);
    auto R = random_mat(n, 1, rng);
    return check({a}, [&] { return project(softmax_rows(a), L, R); }, rng);
  });

  run("gelu", [](SplitMix64& rng) {
    int m = 1 + static_cast<int>(rng.below(4)), n = 1 + static_cast<int>(rng.below(6));
    auto a = detail::leaf(m, n, rng, -3.0, 3.0);
    auto L = random_mat(1, m, rng);
    auto R = random_mat(n, 1, rng);
    return check({a}, [&] { return project(gelu(a), L, R); }, rng);
  });

  run("layer_norm", [](SplitMix64& rng) {
    int m = 1 + static_cast<int>(rng.below(4)), d = 2 + static_cast<int>(rng.below(7));
    auto x = detail::leaf(m, d, rng);
    auto g = detail::leaf(1, d, rng, 0.5, 1.5);
    auto b = detail::leaf(1, d, rng, -0.5, 0.5);
    auto L = random_mat(1, m, rng);
    auto R = random_mat(d, 1, rng);
    return check({x, g, b},
                 [&] { return project(layer_norm(x, g, b, 1e-6), L, R); }, rng);
  });

  run("slice_rows", [](SplitMix64& rng) {
    int m = 3 + static_cast<int>(rng.below(4)), n = 1 + static_cast<int>(rng.below(5));
    int r0 = static_cast<int>(rng.below(static_cast<uint64_t>(m - 1)));
    int cnt = 1 + static_cast<int>(rng.below(static_cast<uint64_t>(m - r0)));
    auto a = detail::leaf(m, n, rng);
    auto L = random_mat(1, cnt, rng);
    auto R = random_mat(n, 1, rng);
    return check({a}, [&] { return project(slice_rows(a, r0, cnt), L, R); }, rng);
  });

  run("slice_cols", [](SplitMix64& rng) {
    int m = 1 + static_cast<int>(rng.below(4)), n = 3 + static_cast<int>(rng.below(5));
    int c0 = static_cast<int>(rng.below(static_cast<uint64_t>(n - 1)));
    int cnt = 1 + static_cast<int>(rng.below(static_cast<uint64_t>(n - c0)));
    auto a = detail::leaf(m, n, rng);
    auto L = random_mat(1, m, rng);
    auto R = random_mat(cnt, 1, rng);
    return check({a}, [&] { return project(slice_cols(a, c0, cnt), L, R); }, rng);
  });

  run("concat_rows", [](SplitMix64& rng) {
    int n = 1 + static_cast<int>(rng.below(5));
    int m1 = 1 + static_cast<int>(rng.below(3)), m2 = 1 + static_cast<int>(rng.below(3));
    auto a = detail::leaf(m1, n, rng), b = detail::leaf(m2, n, rng);
    auto L = random_mat(1, m1 + m2, rng);
    auto R = random_mat(n, 1, rng);
    return check({a, b},
                 [&] { return project(concat_rows<double>({a, b}), L, R); }, rng);
  });

  run("concat_cols", [](SplitMix64& rng) {
    int m = 1 + static_cast<int>(rng.below(5));
    int n1 = 1 + static_cast<int>(rng.below(3)), n2 = 1 + static_cast<int>(rng.below(3));
    auto a = detail::leaf(m, n1, rng), b = detail::leaf(m, n2, rng);
    auto L = random_mat(1, m, rng);
    auto R = random_mat(n1 + n2, 1, rng);
    return check({a, b},
                 [&] { return project(concat_cols<double>({a, b}), L, R); }, rng);
  });

  run("gather_rows", [](SplitMix64& rng) {
    int m = 2 + static_cast<int>(rng.below(5)), n = 1 + static_cast<int>(rng.below(5));
    int k = 1 + static_cast<int>(rng.below(6));
    std::vector<int> idx(static_cast<size_t>(k));
    for (int& v : idx) v = static_cast<int>(rng.below(static_cast<uint64_t>(m)));
    auto a = detail::leaf(m, n, rng);
    auto L = random_mat(1, k, rng);
    auto R = random_mat(n, 1, rng);
    return check({a}, [&] { return project(gather_rows(a, idx), L, R); }, rng);
  });

  run("scatter_rows", [](SplitMix64& rng) {
    int total = 3 + static_cast<int>(rng.below(5)), d = 1 + static_cast<int>(rng.below(5));
    int k = 1 + static_cast<int>(rng.below(static_cast<uint64_t>(total)));
    std::vector<int> all(static_cast<size_t>(total));
    std::iota(all.begin(), all.end(), 0);
    for (int i = total - 1; i > 0; --i)
      std::swap(all[static_cast<size_t>(i)],
                all[rng.below(static_cast<uint64_t>(i) + 1)]);
    std::vector<int> slots(all.begin(), all.begin() + k);
    auto vis = detail::leaf(k, d, rng);
    auto fill = detail::leaf(1, d, rng);
    auto L = random_mat(1, total, rng);
    auto R = random_mat(d, 1, rng);
    return check({vis, fill},
                 [&] { return project(scatter_rows(vis, slots, total, fill), L, R); },
                 rng);
  });

  run("set_row", [](SplitMix64& rng) {
    int m = 2 + static_cast<int>(rng.below(5)), n = 1 + static_cast<int>(rng.below(5));
    int row = static_cast<int>(rng.below(static_cast<uint64_t>(m)));
    auto a = detail::leaf(m, n, rng);
    auto v = detail::leaf(1, n, rng);
    auto L = random_mat(1, m, rng);
    auto R = random_mat(n, 1, rng);
    return check({a, v}, [&] { return project(set_row(a, row, v), L, R); }, rng);
  });

  run("mean_all", [](SplitMix64& rng) {
    int m = 1 + static_cast<int>(rng.below(5)), n = 1 + static_cast<int>(rng.below(5));
    auto a = detail::leaf(m, n, rng);
    return check({a}, [&] { return mean_all(a); }, rng);
  });

  run("row_mse", [](SplitMix64& rng) {
    int m = 2 + static_cast<int>(rng.below(5)), d = 1 + static_cast<int>(rng.below(5));
    auto pred = detail::leaf(m, d, rng);
    Mat<double> target = random_mat(m, d, rng);
    int k = 1 + static_cast<int>(rng.below(static_cast<uint64_t>(m)));
    std::vector<int> scope;
    for (int i = 0; i < k; ++i) scope.push_back(i);
    return check({pred}, [&] { return row_mse(pred, target, scope).loss; }, rng);
  });

  run("attention", [](SplitMix64& rng) {
    int heads = 1 + static_cast<int>(rng.below(2));
    int d = heads * (2 + static_cast<int>(rng.below(3)) * 2);
    int m = 1 + static_cast<int>(rng.below(4)), n = 1 + static_cast<int>(rng.below(5));
    ParamStore<double> ps;
    add_attention_params(ps, "a", d, true, rng.next());
    for (auto& [key, var] : ps) var->val = random_mat(var->val.rows, var->val.cols, rng, -0.5, 0.5);
    auto q = detail::leaf(m, d, rng);
    auto kv = detail::leaf(n, d, rng);
    std::vector<Var<double>> leaves{q, kv};
    for (auto& [key, var] : ps) leaves.push_back(var);
    auto L = random_mat(1, m, rng);
    auto R = random_mat(d, 1, rng);
    AttentionParams<double> p = attention_params(ps, "a");
    return check(leaves,
                 [&] { return project(multi_head_attention(q, kv, p, heads, "a"), L, R); },
                 rng);
  });

  run("transformer_block", [](SplitMix64& rng) {
    int heads = 1 + static_cast<int>(rng.below(2));
    int d = heads * 4;
    int m = 2 + static_cast<int>(rng.below(3));
    TransformerConfig cfg{d, 1, heads, 2};
    ParamStore<double> ps;
    add_block_params(ps, "b", cfg, rng.next());
    for (auto& [key, var] : ps)
      var->val = random_mat(var->val.rows, var->val.cols, rng, -0.4, 0.4);
    auto x = detail::leaf(m, d, rng);
    std::vector<Var<double>> leaves{x};
    for (auto& [key, var] : ps) leaves.push_back(var);
    auto L = random_mat(1, m, rng);
    auto R = random_mat(d, 1, rng);
    BlockParams<double> p = block_params(ps, "b");
    return check(leaves,
                 [&] { return project(transformer_block(x, p, heads, "b"), L, R); },
                 rng, 24);
  });

  run("encode", [](SplitMix64& rng) {
    int heads = 1 + static_cast<int>(rng.below(2));
    int d = heads * 4;
    int depth = 1 + static_cast<int>(rng.below(2));
    int m = 2 + static_cast<int>(rng.below(3));
    TransformerConfig cfg{d, depth, heads, 2};
    ParamStore<double> ps;
    add_encoder_params(ps, "e", cfg, rng.next());
    for (auto& [key, var] : ps)
      var->val = random_mat(var->val.rows, var->val.cols, rng, -0.4, 0.4);
    auto x = detail::leaf(m, d, rng);
    std::vector<Var<double>> leaves{x};
    for (auto& [key, var] : ps) leaves.push_back(var);
    auto L = random_mat(1, m, rng);
    auto R = random_mat(d, 1, rng);
    return check(leaves, [&] { return project(encode(x, ps, "e", cfg), L, R); }, rng,
                 16);
  });

  run("cross_attention_fuse", [](SplitMix64& rng) {
    int heads = 1 + static_cast<int>(rng.below(2));
    int d = heads * 4;
    int nc = static_cast<int>(rng.below(5));  // 0 camera tokens included
    FusionConfig cfg{d, 1 + static_cast<int>(rng.below(2)), heads,
                     rng.below(2) == 0};
    ParamStore<double> ps;
    add_fusion_params(ps, "f", d, d, cfg, rng.next());
    for (auto& [key, var] : ps)
      var->val = random_mat(var->val.rows, var->val.cols, rng, -0.4, 0.4);
    auto cls = detail::leaf(1, d, rng);
    auto cam = nc > 0 ? detail::leaf(nc, d, rng)
                      : parameter(Mat<double>(0, d));
    std::vector<Var<double>> leaves{cls};
    if (nc > 0) leaves.push_back(cam);
    for (auto& [key, var] : ps) leaves.push_back(var);
    auto L = random_mat(1, 1, rng);
    auto R = random_mat(d, 1, rng);
    return check(leaves,
                 [&] { return project(cross_attention_fuse(cls, cam, ps, "f", cfg), L, R); },
                 rng, 20);
  });

  run("fuse_into_sequence", [](SplitMix64& rng) {
    int heads = 1;
    int d = 4;        // fusion width
    int dd = 6;       // decoder width
    int dc = 4;       // camera width
    int n = 2 + static_cast<int>(rng.below(3));
    int nc = 1 + static_cast<int>(rng.below(3));
    FusionConfig cfg{d, 1, heads, rng.below(2) == 0};
    ParamStore<double> ps;
    add_fusion_params(ps, "f", dd, dc, cfg, rng.next());
    for (auto& [key, var] : ps)
      var->val = random_mat(var->val.rows, var->val.cols, rng, -0.4, 0.4);
    TokenSeq<double> seq;
    auto toks = detail::leaf(n + 1, dd, rng);
    seq.tokens = toks;
    seq.has_class_token = true;
    seq.grid_rows = 1;
    seq.grid_cols = n;
    auto cam = detail::leaf(nc, dc, rng);
    std::vector<Var<double>> leaves{toks, cam};
    for (auto& [key, var] : ps) leaves.push_back(var);
    auto L = random_mat(1, n + 1, rng);
    auto R = random_mat(dd, 1, rng);
    return check(leaves,
                 [&] {
                   return project(fuse_into_sequence(seq, cam, ps, "f", cfg).tokens, L, R);
                 },
                 rng);
  });

  return out;
}

inline RunConfig micro_config(uint64_t seed) {
  RunConfig cfg;
  cfg.grid.height = 16;
  cfg.grid.width = 16;
  cfg.grid.elevation_min = -0.45;
  cfg.grid.elevation_max = 0.28;
  cfg.grid.azimuth_min = -0.8;
  cfg.grid.azimuth_max = 0.8;
  cfg.patch_size = 8;
  cfg.camera_height = 16;
  cfg.camera_width = 16;
  cfg.lidar_encoder = {8, 1, 2, 2};
  cfg.camera_encoder = {8, 1, 2, 2};
  cfg.fusion = {8, 1, 2, true};
  cfg.decoder = {8, 1, 2, 2};
  cfg.seed = seed;
  return cfg;
}

// End-to-end check at micro scale (criterion tolerance 1e-3). Coordinates
// are subsampled per parameter; the full model is rebuilt for every probe.
inline OpReport run_model_grad_check(int instances, uint64_t seed = 77,
                                     int coords_per_leaf = 2) {
  SplitMix64 rng(seed);
  OpReport rep;
  rep.name = "full_model";
  rep.instances = instances;
  rep.tol = 1e-3;
  for (int i = 0; i < instances; ++i) {
    RunConfig cfg = micro_config(rng.next());
    ParamStore<double> ps = build_params<double>(cfg);
    SphericalImage lidar;
    lidar.img = Image(cfg.grid.height, cfg.grid.width, 3);
    for (float& v : lidar.img.d) v = static_cast<float>(rng.uniform());
    CameraImage camera(cfg.camera_height, cfg.camera_width, 3);
    for (float& v : camera.d) v = static_cast<float>(rng.uniform());
    MaskPlan plan = sample_mask(cfg.n_lidar_patches(), cfg.mask_ratio, rng.next());
    CameraMode mode = i % 3 == 2 ? CameraMode::zero_tokens : CameraMode::full;
    std::vector<Var<double>> leaves;
    for (auto& [key, var] : ps) leaves.push_back(var);
    gradcheck::Result r = check(
        leaves,
        [&] {
          return mode == CameraMode::full
                     ? forward(lidar, camera, ps, cfg, plan, mode).loss_node
                     : forward_no_camera(lidar, ps, cfg, plan, mode).loss_node;
        },
        rng, coords_per_leaf);
    rep.max_rel = std::max(rep.max_rel, r.max_rel);
    rep.coords += r.coords;
  }
  return rep;
}

}  // namespace gradsuite

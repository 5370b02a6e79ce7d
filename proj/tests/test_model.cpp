#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"
#include "grad_suite.hpp"
#include "lcmae/mae_model.hpp"

using namespace lcmae;

namespace {

using Md = Mat<double>;

// ---- straight-line float64 reimplementation of every stage ----

Md omm(const Md& a, const Md& b) {
  Md c(a.rows, b.cols);
  for (int i = 0; i < a.rows; ++i)
    for (int k = 0; k < a.cols; ++k)
      for (int j = 0; j < b.cols; ++j) c(i, j) += a(i, k) * b(k, j);
  return c;
}

Md oaddrow(Md a, const Md& row) {
  for (int i = 0; i < a.rows; ++i)
    for (int j = 0; j < a.cols; ++j) a(i, j) += row(0, j);
  return a;
}

Md oadd(Md a, const Md& b) {
  for (size_t i = 0; i < a.d.size(); ++i) a.d[i] += b.d[i];
  return a;
}

Md olnorm(const Md& x, const Md& scale, const Md& offset) {
  Md out(x.rows, x.cols);
  for (int i = 0; i < x.rows; ++i) {
    double m = 0;
    for (int j = 0; j < x.cols; ++j) m += x(i, j);
    m /= x.cols;
    double v = 0;
    for (int j = 0; j < x.cols; ++j) v += (x(i, j) - m) * (x(i, j) - m);
    v /= x.cols;
    double is = 1.0 / std::sqrt(v + 1e-6);
    for (int j = 0; j < x.cols; ++j)
      out(i, j) = (x(i, j) - m) * is * scale(0, j) + offset(0, j);
  }
  return out;
}

Md ogelu(Md x) {
  for (double& v : x.d) v = 0.5 * v * (1.0 + std::erf(v / std::sqrt(2.0)));
  return x;
}

Md oattn(const Md& q_in, const Md& kv, const AttentionParams<double>& p, int heads) {
  int m = q_in.rows, n = kv.rows, d = p.w_q->val.cols, hd = d / heads;
  Md q = oaddrow(omm(q_in, p.w_q->val), p.b_q->val);
  Md k = omm(kv, p.w_k->val);
  Md v = omm(kv, p.w_v->val);
  if (p.b_k) k = oaddrow(std::move(k), p.b_k->val);
  if (p.b_v) v = oaddrow(std::move(v), p.b_v->val);
  Md concat(m, d);
  for (int h = 0; h < heads; ++h)
    for (int i = 0; i < m; ++i) {
      std::vector<double> s(static_cast<size_t>(n));
      double mx = -1e300;
      for (int j = 0; j < n; ++j) {
        double acc = 0;
        for (int e = 0; e < hd; ++e) acc += q(i, h * hd + e) * k(j, h * hd + e);
        s[static_cast<size_t>(j)] = acc / std::sqrt(static_cast<double>(hd));
        mx = std::max(mx, s[static_cast<size_t>(j)]);
      }
      double z = 0;
      for (double& e : s) {
        e = std::exp(e - mx);
        z += e;
      }
      for (int e = 0; e < hd; ++e) {
        double acc = 0;
        for (int j = 0; j < n; ++j) acc += s[static_cast<size_t>(j)] / z * v(j, h * hd + e);
        concat(i, h * hd + e) = acc;
      }
    }
  return oaddrow(omm(concat, p.w_o->val), p.b_o->val);
}

Md oblock(Md x, const ParamStore<double>& ps, const std::string& prefix, int heads) {
  Md n1 = olnorm(x, ps.at(prefix + ".norm1.scale")->val, ps.at(prefix + ".norm1.offset")->val);
  x = oadd(std::move(x), oattn(n1, n1, attention_params(ps, prefix + ".attn"), heads));
  Md n2 = olnorm(x, ps.at(prefix + ".norm2.scale")->val, ps.at(prefix + ".norm2.offset")->val);
  Md h = ogelu(oaddrow(omm(n2, ps.at(prefix + ".mlp.w1")->val), ps.at(prefix + ".mlp.b1")->val));
  return oadd(std::move(x), oaddrow(omm(h, ps.at(prefix + ".mlp.w2")->val),
                                    ps.at(prefix + ".mlp.b2")->val));
}

Md oencode(Md x, const ParamStore<double>& ps, const std::string& prefix,
           const TransformerConfig& cfg) {
  for (int i = 0; i < cfg.depth; ++i)
    x = oblock(std::move(x), ps, prefix + ".block" + std::to_string(i), cfg.n_heads);
  return olnorm(x, ps.at(prefix + ".final_norm.scale")->val,
                ps.at(prefix + ".final_norm.offset")->val);
}

Md oposemb(int rows, int cols, int dim) {
  int quarter = dim / 4;
  Md out(rows * cols, dim);
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < cols; ++c)
      for (int i = 0; i < quarter; ++i) {
        double w = 1.0 / std::pow(10000.0, static_cast<double>(i) / quarter);
        int base = r * cols + c;
        out(base, i) = std::sin(r * w);
        out(base, quarter + i) = std::cos(r * w);
        out(base, 2 * quarter + i) = std::sin(c * w);
        out(base, 3 * quarter + i) = std::cos(c * w);
      }
  return out;
}

Md opatchify(const Image& img, int P) {
  int gr = img.height / P, gc = img.width / P;
  Md out(gr * gc, P * P * img.channels);
  for (int pr = 0; pr < gr; ++pr)
    for (int pc = 0; pc < gc; ++pc)
      for (int ch = 0; ch < img.channels; ++ch)
        for (int r = 0; r < P; ++r)
          for (int col = 0; col < P; ++col)
            out(pr * gc + pc, (ch * P + r) * P + col) =
                img.at(ch, pr * P + r, pc * P + col);
  return out;
}

struct OracleOut {
  double loss = 0;
  std::vector<double> per_patch;
  Md pred;
};

OracleOut oracle_forward(const SphericalImage& lidar, const CameraImage& camera,
                         const ParamStore<double>& ps, const RunConfig& cfg,
                         const MaskPlan& plan, CameraMode mode) {
  int n = cfg.n_lidar_patches();
  Md target = opatchify(lidar.img, cfg.patch_size);

  Md tokens = oaddrow(omm(target, ps.at("lidar_embed.w")->val), ps.at("lidar_embed.b")->val);
  tokens = oadd(std::move(tokens),
                oposemb(cfg.lidar_grid_rows(), cfg.lidar_grid_cols(),
                        cfg.lidar_encoder.embed_dim));

  std::vector<int> vis = plan.visible_indices();
  Md x(1 + plan.n_keep, cfg.lidar_encoder.embed_dim);
  for (int j = 0; j < x.cols; ++j) x(0, j) = ps.at("lidar_enc.cls")->val(0, j);
  for (int i = 0; i < plan.n_keep; ++i)
    for (int j = 0; j < x.cols; ++j) x(1 + i, j) = tokens(vis[static_cast<size_t>(i)], j);

  Md enc_out = oencode(std::move(x), ps, "lidar_enc", cfg.lidar_encoder);
  Md adapted = omm(enc_out, ps.at("adapt.enc_to_dec.w")->val);

  int dec = cfg.decoder.embed_dim;
  Md full(n, dec);
  for (int r = 0; r < n; ++r)
    for (int j = 0; j < dec; ++j) full(r, j) = ps.at("mask_token")->val(0, j);
  for (int i = 0; i < plan.n_keep; ++i)
    for (int j = 0; j < dec; ++j) full(vis[static_cast<size_t>(i)], j) = adapted(1 + i, j);
  full = oadd(std::move(full), oposemb(cfg.lidar_grid_rows(), cfg.lidar_grid_cols(), dec));

  Md seq(1 + n, dec);
  for (int j = 0; j < dec; ++j) seq(0, j) = adapted(0, j);
  for (int r = 0; r < n; ++r)
    for (int j = 0; j < dec; ++j) seq(1 + r, j) = full(r, j);

  // camera tokens
  int m = cfg.n_camera_patches();
  int cam = cfg.camera_encoder.embed_dim;
  Md cam_tokens(m, cam);
  if (mode != CameraMode::zero_tokens) {
    Image img = mode == CameraMode::zero_image
                    ? Image(cfg.camera_height, cfg.camera_width, 3)
                    : camera;
    Md patches = opatchify(img, cfg.patch_size);
    Md ct = oaddrow(omm(patches, ps.at("camera_embed.w")->val), ps.at("camera_embed.b")->val);
    ct = oadd(std::move(ct), oposemb(cfg.camera_grid_rows(), cfg.camera_grid_cols(), cam));
    Md cx(1 + m, cam);
    for (int j = 0; j < cam; ++j) cx(0, j) = ps.at("camera_enc.cls")->val(0, j);
    for (int r = 0; r < m; ++r)
      for (int j = 0; j < cam; ++j) cx(1 + r, j) = ct(r, j);
    Md cout = oencode(std::move(cx), ps, "camera_enc", cfg.camera_encoder);
    for (int r = 0; r < m; ++r)
      for (int j = 0; j < cam; ++j) cam_tokens(r, j) = cout(1 + r, j);
  }

  // fusion at the class-token slot
  Md cls(1, dec);
  for (int j = 0; j < dec; ++j) cls(0, j) = seq(0, j);
  Md cls_f = omm(cls, ps.at("fusion.in.w")->val);
  Md cam_f = omm(cam_tokens, ps.at("fusion.cam.w")->val);
  for (int i = 0; i < cfg.fusion.depth; ++i) {
    std::string bp = "fusion.block" + std::to_string(i) + ".attn";
    Md kv(1 + cam_f.rows, cfg.fusion.embed_dim);
    for (int j = 0; j < kv.cols; ++j) kv(0, j) = cls_f(0, j);
    for (int r = 0; r < cam_f.rows; ++r)
      for (int j = 0; j < kv.cols; ++j) kv(1 + r, j) = cam_f(r, j);
    cls_f = oadd(std::move(cls_f), oattn(cls_f, kv, attention_params(ps, bp),
                                         cfg.fusion.n_heads));
  }
  Md back = omm(cls_f, ps.at("fusion.out.w")->val);
  for (int j = 0; j < dec; ++j) seq(0, j) = back(0, j);

  Md dec_out = oencode(std::move(seq), ps, "decoder", cfg.decoder);
  Md patch_rows(n, dec);
  for (int r = 0; r < n; ++r)
    for (int j = 0; j < dec; ++j) patch_rows(r, j) = dec_out(1 + r, j);
  Md pred = oaddrow(omm(patch_rows, ps.at("pred.w")->val), ps.at("pred.b")->val);

  OracleOut out;
  out.pred = pred;
  out.per_patch.assign(static_cast<size_t>(n), 0.0);
  for (int r = 0; r < n; ++r) {
    double s = 0;
    for (int j = 0; j < pred.cols; ++j) {
      double e = pred(r, j) - target(r, j);
      s += e * e;
    }
    out.per_patch[static_cast<size_t>(r)] = s / pred.cols;
  }
  std::vector<int> scope = cfg.loss_scope == LossScope::masked_only
                               ? plan.masked_indices()
                               : std::vector<int>();
  if (scope.empty())
    for (int i = 0; i < n; ++i) scope.push_back(i);
  for (int r : scope) out.loss += out.per_patch[static_cast<size_t>(r)];
  out.loss /= static_cast<double>(scope.size());
  return out;
}

SphericalImage random_lidar(const RunConfig& cfg, SplitMix64& rng) {
  SphericalImage s;
  s.img = Image(cfg.grid.height, cfg.grid.width, 3);
  for (float& v : s.img.d) v = static_cast<float>(rng.uniform());
  s.occupancy.assign(static_cast<size_t>(cfg.grid.height) * cfg.grid.width, 1);
  return s;
}

CameraImage random_camera(const RunConfig& cfg, SplitMix64& rng) {
  CameraImage c(cfg.camera_height, cfg.camera_width, 3);
  for (float& v : c.d) v = static_cast<float>(rng.uniform());
  return c;
}

// closed-form parameter counts from the config alone
size_t attn_count(int d, bool kv_bias) {
  return static_cast<size_t>(4) * d * d + (kv_bias ? 4 : 2) * static_cast<size_t>(d);
}
size_t block_count(int d, int r) {
  return attn_count(d, true) + 4 * static_cast<size_t>(d) +
         2 * static_cast<size_t>(r) * d * d + static_cast<size_t>(r) * d + d;
}
size_t encoder_count(const TransformerConfig& c) {
  return static_cast<size_t>(c.depth) * block_count(c.embed_dim, c.mlp_ratio) +
         2 * static_cast<size_t>(c.embed_dim);
}
size_t model_count(const RunConfig& cfg) {
  size_t e = static_cast<size_t>(cfg.lidar_encoder.embed_dim);
  size_t c = static_cast<size_t>(cfg.camera_encoder.embed_dim);
  size_t d = static_cast<size_t>(cfg.decoder.embed_dim);
  size_t f = static_cast<size_t>(cfg.fusion.embed_dim);
  size_t pd = static_cast<size_t>(cfg.lidar_patch_dim());
  size_t cpd = static_cast<size_t>(cfg.camera_patch_dim());
  size_t total = 0;
  total += pd * e + e + e;  // lidar embed w/b + cls
  total += encoder_count(cfg.lidar_encoder);
  total += cpd * c + c + c;  // camera embed w/b + cls
  total += encoder_count(cfg.camera_encoder);
  total += e * d;  // adapt
  total += d;      // mask token
  total += d * f + c * f + f * d +
           static_cast<size_t>(cfg.fusion.depth) * attn_count(cfg.fusion.embed_dim, false);
  total += encoder_count(cfg.decoder);
  total += d * pd + pd;  // prediction head
  return total;
}

}  // namespace

TEST_CASE("forward matches the composed float64 oracle in all camera modes") {
  SplitMix64 rng(501);
  for (int t = 0; t < 6; ++t) {
    RunConfig cfg = gradsuite::micro_config(rng.next());
    if (t == 3) cfg.loss_scope = LossScope::all_patches;
    ParamStore<double> ps = build_params<double>(cfg);
    SphericalImage lidar = random_lidar(cfg, rng);
    CameraImage camera = random_camera(cfg, rng);
    MaskPlan plan = sample_mask(cfg.n_lidar_patches(), cfg.mask_ratio, rng.next());
    CameraMode mode = t % 3 == 0   ? CameraMode::full
                      : t % 3 == 1 ? CameraMode::zero_image
                                   : CameraMode::zero_tokens;

    ForwardOutput<double> got =
        mode == CameraMode::full
            ? forward(lidar, camera, ps, cfg, plan, mode)
            : forward_no_camera(lidar, ps, cfg, plan, mode);
    OracleOut want = oracle_forward(lidar, camera, ps, cfg, plan, mode);

    CHECK(got.loss == doctest::Approx(want.loss).epsilon(1e-10));
    REQUIRE(got.per_patch_loss.size() == want.per_patch.size());
    for (size_t i = 0; i < want.per_patch.size(); ++i)
      CHECK(got.per_patch_loss[i] ==
            doctest::Approx(want.per_patch[i]).epsilon(1e-10));

    // reconstruction = unpatchified prediction, float storage
    PatchSequence<double> seq = patchify<double>(lidar.img, cfg.patch_size);
    seq.data = want.pred;
    Image recon = unpatchify(seq);
    REQUIRE(got.reconstruction.d.size() == recon.d.size());
    for (size_t i = 0; i < recon.d.size(); ++i)
      CHECK(got.reconstruction.d[i] == doctest::Approx(recon.d[i]).epsilon(1e-6));
  }
}

TEST_CASE("half masking of 128 patches keeps 64 visible plus the class token") {
  RunConfig cfg;  // desk defaults
  CHECK(cfg.n_lidar_patches() == 128);
  MaskPlan plan = sample_mask(cfg.n_lidar_patches(), cfg.mask_ratio, 11);
  CHECK(plan.n_keep == 64);
  CHECK(static_cast<int>(plan.masked_indices().size()) == 64);
}

TEST_CASE("untrained random parameters give a finite positive loss") {
  SplitMix64 rng(502);
  RunConfig cfg = gradsuite::micro_config(12);
  ParamStore<float> ps = build_params<float>(cfg);
  SphericalImage lidar = random_lidar(cfg, rng);
  CameraImage camera = random_camera(cfg, rng);
  MaskPlan plan = sample_mask(cfg.n_lidar_patches(), cfg.mask_ratio, 3);
  ForwardOutput<float> out = forward(lidar, camera, ps, cfg, plan, CameraMode::full);
  CHECK(std::isfinite(out.loss));
  CHECK(out.loss > 0.0f);
  CHECK(out.reconstruction.all_finite());
}

TEST_CASE("masking more patches strictly lowers encoder attention FLOPs") {
  SplitMix64 rng(503);
  RunConfig cfg;  // desk scale
  ParamStore<float> ps = build_params<float>(cfg);
  SphericalImage lidar = random_lidar(cfg, rng);
  CameraImage camera = random_camera(cfg, rng);

  MaskPlan half = sample_mask(cfg.n_lidar_patches(), 0.5, 21);
  MaskPlan threeq = sample_mask(cfg.n_lidar_patches(), 0.75, 21);

  flops::reset();
  forward(lidar, camera, ps, cfg, half, CameraMode::full);
  uint64_t flops_half = flops::attention();
  flops::reset();
  forward(lidar, camera, ps, cfg, threeq, CameraMode::full);
  uint64_t flops_threeq = flops::attention();
  CHECK(flops_threeq < flops_half);
}

TEST_CASE("zero_tokens output ignores every camera-side parameter") {
  SplitMix64 rng(504);
  RunConfig cfg = gradsuite::micro_config(31);
  REQUIRE(cfg.fusion.bias_free_kv);
  ParamStore<float> ps = build_params<float>(cfg);
  SphericalImage lidar = random_lidar(cfg, rng);
  MaskPlan plan = sample_mask(cfg.n_lidar_patches(), cfg.mask_ratio, 9);

  ForwardOutput<float> base = forward_no_camera(lidar, ps, cfg, plan, CameraMode::zero_tokens);

  int camera_keys = 0;
  for (const std::string& key : ps.keys()) {
    if (key.rfind("camera_", 0) != 0) continue;
    ++camera_keys;
    Var<float>& var = const_cast<Var<float>&>(ps.at(key));
    for (size_t i = 0; i < var->val.d.size(); i += std::max<size_t>(1, var->val.d.size() / 3)) {
      float saved = var->val.d[i];
      var->val.d[i] = saved + 1.0f;
      ForwardOutput<float> out =
          forward_no_camera(lidar, ps, cfg, plan, CameraMode::zero_tokens);
      CHECK(out.loss == base.loss);
      CHECK(out.reconstruction.d == base.reconstruction.d);
      var->val.d[i] = saved;
    }
  }
  CHECK(camera_keys >= 4);  // embed w/b, cls, encoder params

  // sanity: a LiDAR-side parameter does change the output
  Var<float>& lw = const_cast<Var<float>&>(ps.at("lidar_embed.w"));
  lw->val.d[0] += 1.0f;
  ForwardOutput<float> changed =
      forward_no_camera(lidar, ps, cfg, plan, CameraMode::zero_tokens);
  CHECK(changed.loss != base.loss);
}

TEST_CASE("zero_image and zero_tokens modes differ in general") {
  SplitMix64 rng(505);
  RunConfig cfg = gradsuite::micro_config(33);
  ParamStore<float> ps = build_params<float>(cfg);
  SphericalImage lidar = random_lidar(cfg, rng);
  MaskPlan plan = sample_mask(cfg.n_lidar_patches(), cfg.mask_ratio, 5);
  ForwardOutput<float> zi = forward_no_camera(lidar, ps, cfg, plan, CameraMode::zero_image);
  ForwardOutput<float> zt = forward_no_camera(lidar, ps, cfg, plan, CameraMode::zero_tokens);
  CHECK(zi.reconstruction.d != zt.reconstruction.d);
}

TEST_CASE("identical inputs produce bit-identical outputs") {
  SplitMix64 rng(506);
  RunConfig cfg = gradsuite::micro_config(44);
  ParamStore<float> ps = build_params<float>(cfg);
  SphericalImage lidar = random_lidar(cfg, rng);
  CameraImage camera = random_camera(cfg, rng);
  MaskPlan plan = sample_mask(cfg.n_lidar_patches(), cfg.mask_ratio, 8);
  ForwardOutput<float> a = forward(lidar, camera, ps, cfg, plan, CameraMode::full);
  ForwardOutput<float> b = forward(lidar, camera, ps, cfg, plan, CameraMode::full);
  CHECK(a.loss == b.loss);
  CHECK(a.reconstruction.d == b.reconstruction.d);
  CHECK(a.per_patch_loss == b.per_patch_loss);
}

TEST_CASE("visible patches are reconstructed freely, not copied") {
  SplitMix64 rng(507);
  RunConfig cfg = gradsuite::micro_config(55);
  ParamStore<float> ps = build_params<float>(cfg);
  SphericalImage lidar = random_lidar(cfg, rng);
  CameraImage camera = random_camera(cfg, rng);
  MaskPlan plan = sample_mask(cfg.n_lidar_patches(), cfg.mask_ratio, 2);
  ForwardOutput<float> out = forward(lidar, camera, ps, cfg, plan, CameraMode::full);
  int vis_patch = plan.visible_indices()[0];
  int P = cfg.patch_size;
  int pr = vis_patch / cfg.lidar_grid_cols(), pc = vis_patch % cfg.lidar_grid_cols();
  double diff = 0;
  for (int c = 0; c < 3; ++c)
    for (int r = 0; r < P; ++r)
      for (int col = 0; col < P; ++col)
        diff += std::abs(out.reconstruction.at(c, pr * P + r, pc * P + col) -
                         lidar.img.at(c, pr * P + r, pc * P + col));
  CHECK(diff > 1e-3);
}

TEST_CASE("loss equals the mean of per-patch losses over the scope") {
  SplitMix64 rng(508);
  for (LossScope scope : {LossScope::masked_only, LossScope::all_patches}) {
    RunConfig cfg = gradsuite::micro_config(66);
    cfg.loss_scope = scope;
    ParamStore<double> ps = build_params<double>(cfg);
    SphericalImage lidar = random_lidar(cfg, rng);
    CameraImage camera = random_camera(cfg, rng);
    MaskPlan plan = sample_mask(cfg.n_lidar_patches(), cfg.mask_ratio, 4);
    ForwardOutput<double> out = forward(lidar, camera, ps, cfg, plan, CameraMode::full);
    std::vector<int> idx = scope == LossScope::masked_only
                               ? plan.masked_indices()
                               : plan.permutation;
    double mean = 0;
    for (int r : idx) mean += out.per_patch_loss[static_cast<size_t>(r)];
    mean /= static_cast<double>(idx.size());
    CHECK(out.loss == doctest::Approx(mean).epsilon(1e-12));
  }
}

TEST_CASE("one small gradient step reduces the loss") {
  SplitMix64 rng(509);
  int wins = 0;
  for (int t = 0; t < 10; ++t) {
    RunConfig cfg = gradsuite::micro_config(rng.next());
    ParamStore<double> ps = build_params<double>(cfg);
    SphericalImage lidar = random_lidar(cfg, rng);
    CameraImage camera = random_camera(cfg, rng);
    MaskPlan plan = sample_mask(cfg.n_lidar_patches(), cfg.mask_ratio, rng.next());
    ForwardOutput<double> before = forward(lidar, camera, ps, cfg, plan, CameraMode::full);
    ps.zero_grads();
    backward(before.loss_node);
    for (auto& [key, var] : ps)
      if (var->grad.size() != 0)
        for (size_t i = 0; i < var->val.d.size(); ++i)
          var->val.d[i] -= 1e-4 * var->grad.d[i];
    ForwardOutput<double> after = forward(lidar, camera, ps, cfg, plan, CameraMode::full);
    if (after.loss < before.loss) ++wins;
  }
  CHECK(wins == 10);
}

TEST_CASE("parameter counts match the closed-form formula") {
  for (uint64_t seed : {1ull, 2ull}) {
    RunConfig micro = gradsuite::micro_config(seed);
    ParamStore<float> ps = build_params<float>(micro);
    ParamCount count = count_parameters(ps);
    CHECK(count.total == model_count(micro));
    size_t by_prefix_sum = 0;
    for (const auto& [prefix, n] : count.by_prefix) by_prefix_sum += n;
    CHECK(by_prefix_sum == count.total);
  }
  RunConfig desk;
  ParamStore<float> ps = build_params<float>(desk);
  CHECK(count_parameters(ps).total == model_count(desk));
}

TEST_CASE("doubling embed_dim quadruples attention projections") {
  RunConfig small = gradsuite::micro_config(3);
  RunConfig big = small;
  big.lidar_encoder.embed_dim = 16;
  big.camera_encoder.embed_dim = 16;
  big.decoder.embed_dim = 16;
  big.fusion.embed_dim = 16;
  ParamStore<float> ps8 = build_params<float>(small);
  ParamStore<float> ps16 = build_params<float>(big);
  size_t w8 = ps8.at("lidar_enc.block0.attn.w_q")->val.d.size();
  size_t w16 = ps16.at("lidar_enc.block0.attn.w_q")->val.d.size();
  CHECK(w16 == 4 * w8);
  size_t f8 = ps8.at("fusion.block0.attn.w_o")->val.d.size();
  size_t f16 = ps16.at("fusion.block0.attn.w_o")->val.d.size();
  CHECK(f16 == 4 * f8);
}

TEST_CASE("a zero-depth decoder removes exactly its block parameters") {
  RunConfig with = gradsuite::micro_config(4);
  RunConfig without = with;
  without.decoder.depth = 0;
  size_t n_with = count_parameters(build_params<float>(with)).total;
  size_t n_without = count_parameters(build_params<float>(without)).total;
  CHECK(n_with - n_without ==
        block_count(with.decoder.embed_dim, with.decoder.mlp_ratio));
}

TEST_CASE("shape mismatches are rejected with stage names") {
  SplitMix64 rng(510);
  RunConfig cfg = gradsuite::micro_config(77);
  ParamStore<float> ps = build_params<float>(cfg);
  SphericalImage lidar = random_lidar(cfg, rng);
  CameraImage camera = random_camera(cfg, rng);
  MaskPlan plan = sample_mask(cfg.n_lidar_patches(), cfg.mask_ratio, 1);

  SphericalImage wrong = lidar;
  wrong.img = Image(8, 16, 3);
  CHECK_THROWS_AS(forward(wrong, camera, ps, cfg, plan, CameraMode::full), ContractError);

  CameraImage bad_cam(8, 8, 3);
  CHECK_THROWS_AS(forward(lidar, bad_cam, ps, cfg, plan, CameraMode::full), ContractError);

  MaskPlan bad_plan = sample_mask(9, 0.5, 1);
  CHECK_THROWS_AS(forward(lidar, camera, ps, cfg, bad_plan, CameraMode::full),
                  ContractError);

  CHECK_THROWS_AS(forward_no_camera(lidar, ps, cfg, plan, CameraMode::full), ContractError);

  RunConfig bad_cfg = cfg;
  bad_cfg.mask_ratio = 1.0;
  CHECK_THROWS_AS(bad_cfg.validate(), ContractError);
  bad_cfg = cfg;
  bad_cfg.patch_size = 5;
  CHECK_THROWS_AS(bad_cfg.validate(), ContractError);
}

#include "lcmae/mae_model.hpp"

#include <cmath>
#include <map>

namespace lcmae {

void RunConfig::validate() const {
  grid.validate();
  if (patch_size < 1) throw ContractError("RunConfig: patch_size must be positive");
  if (grid.height % patch_size != 0 || grid.width % patch_size != 0)
    throw ContractError("RunConfig: patch_size must divide the LiDAR grid");
  if (camera_height % patch_size != 0 || camera_width % patch_size != 0)
    throw ContractError("RunConfig: patch_size must divide the camera image");
  if (!(mask_ratio >= 0.0 && mask_ratio < 1.0))
    throw ContractError("RunConfig: mask_ratio must lie in [0, 1)");
  lidar_encoder.validate();
  camera_encoder.validate();
  fusion.validate();
  decoder.validate();
  if (lidar_encoder.embed_dim % 4 != 0 || camera_encoder.embed_dim % 4 != 0 ||
      decoder.embed_dim % 4 != 0)
    throw ContractError("RunConfig: embed dims must be multiples of 4 for positions");
}

template <typename S>
ParamStore<S> build_params(const RunConfig& cfg) {
  cfg.validate();
  ParamStore<S> ps;
  uint64_t seed = cfg.seed;
  int enc = cfg.lidar_encoder.embed_dim;
  int cam = cfg.camera_encoder.embed_dim;
  int dec = cfg.decoder.embed_dim;

  ps.create("lidar_embed.w",
            trunc_normal_init<S>(cfg.lidar_patch_dim(), enc, seed, "lidar_embed.w"));
  ps.create("lidar_embed.b", Mat<S>(1, enc));
  ps.create("lidar_enc.cls", trunc_normal_init<S>(1, enc, seed, "lidar_enc.cls"));
  add_encoder_params(ps, "lidar_enc", cfg.lidar_encoder, seed);

  ps.create("camera_embed.w",
            trunc_normal_init<S>(cfg.camera_patch_dim(), cam, seed, "camera_embed.w"));
  ps.create("camera_embed.b", Mat<S>(1, cam));
  ps.create("camera_enc.cls", trunc_normal_init<S>(1, cam, seed, "camera_enc.cls"));
  add_encoder_params(ps, "camera_enc", cfg.camera_encoder, seed);

  ps.create("adapt.enc_to_dec.w",
            trunc_normal_init<S>(enc, dec, seed, "adapt.enc_to_dec.w"));
  ps.create("mask_token", trunc_normal_init<S>(1, dec, seed, "mask_token"));

  add_fusion_params(ps, "fusion", dec, cam, cfg.fusion, seed);
  add_encoder_params(ps, "decoder", cfg.decoder, seed);

  ps.create("pred.w",
            trunc_normal_init<S>(dec, cfg.lidar_patch_dim(), seed, "pred.w"));
  ps.create("pred.b", Mat<S>(1, cfg.lidar_patch_dim()));
  return ps;
}

namespace {

template <typename S>
Var<S> camera_tokens_for(const CameraImage& camera, const ParamStore<S>& ps,
                         const RunConfig& cfg, CameraMode mode) {
  int m = cfg.n_camera_patches();
  int cam = cfg.camera_encoder.embed_dim;
  if (mode == CameraMode::zero_tokens)
    return constant(Mat<S>::zeros(m, cam));

  CameraImage img = camera;
  if (mode == CameraMode::zero_image) {
    img = Image(cfg.camera_height, cfg.camera_width, 3);
  } else {
    if (camera.height != cfg.camera_height || camera.width != cfg.camera_width ||
        camera.channels != 3)
      throw ContractError("forward: camera image does not match config");
  }
  PatchSequence<S> seq = patchify<S>(img, cfg.patch_size);
  Var<S> tokens = add_rowvec(matmul(constant(seq.data), ps.at("camera_embed.w")),
                             ps.at("camera_embed.b"));
  Mat<S> pos = positional_embedding<S>(cfg.camera_grid_rows(), cfg.camera_grid_cols(), cam);
  tokens = add(tokens, constant(pos));
  Var<S> x = concat_rows<S>({ps.at("camera_enc.cls"), tokens});
  Var<S> out = encode(x, ps, "camera_enc", cfg.camera_encoder);
  return slice_rows(out, 1, m);  // CLS dropped; patch tokens feed the fusion KV
}

template <typename S>
ForwardOutput<S> run_forward(const SphericalImage& lidar, const CameraImage& camera,
                             const ParamStore<S>& ps, const RunConfig& cfg,
                             const MaskPlan& plan, CameraMode mode) {
  cfg.validate();
  if (lidar.img.height != cfg.grid.height || lidar.img.width != cfg.grid.width ||
      lidar.img.channels != 3)
    throw ContractError("forward: spherical image does not match config grid");
  int n = cfg.n_lidar_patches();
  plan.validate();
  if (plan.n_patches != n)
    throw ContractError("forward: mask plan patch count does not match config");

  PatchSequence<S> target_seq = patchify<S>(lidar.img, cfg.patch_size);
  int pd = cfg.lidar_patch_dim();

  // optional per-patch target normalization (kept off by default)
  Mat<S> target = target_seq.data;
  std::vector<S> mu(static_cast<size_t>(n), S(0));
  std::vector<S> sd(static_cast<size_t>(n), S(1));
  if (cfg.normalize_targets) {
    for (int r = 0; r < n; ++r) {
      S m = 0, v = 0;
      for (int c = 0; c < pd; ++c) m += target(r, c);
      m /= S(pd);
      for (int c = 0; c < pd; ++c) {
        S d = target(r, c) - m;
        v += d * d;
      }
      v /= S(pd);
      S s = std::sqrt(v + S(1e-6));
      for (int c = 0; c < pd; ++c) target(r, c) = (target(r, c) - m) / s;
      mu[static_cast<size_t>(r)] = m;
      sd[static_cast<size_t>(r)] = s;
    }
  }

  int enc = cfg.lidar_encoder.embed_dim;
  int dec = cfg.decoder.embed_dim;
  Var<S> tokens = add_rowvec(matmul(constant(target_seq.data), ps.at("lidar_embed.w")),
                             ps.at("lidar_embed.b"));
  Mat<S> pos = positional_embedding<S>(cfg.lidar_grid_rows(), cfg.lidar_grid_cols(), enc);
  tokens = add(tokens, constant(pos));

  std::vector<int> visible = plan.visible_indices();
  Var<S> vis = gather_rows(tokens, visible);
  Var<S> x = concat_rows<S>({ps.at("lidar_enc.cls"), vis});
  Var<S> enc_out = encode(x, ps, "lidar_enc", cfg.lidar_encoder);

  Var<S> adapted = matmul(enc_out, ps.at("adapt.enc_to_dec.w"));
  Var<S> cls_d = slice_rows(adapted, 0, 1);
  Var<S> vis_d = slice_rows(adapted, 1, plan.n_keep);
  Var<S> full = scatter_rows(vis_d, visible, n, ps.at("mask_token"));
  Mat<S> dpos = positional_embedding<S>(cfg.lidar_grid_rows(), cfg.lidar_grid_cols(), dec);
  full = add(full, constant(dpos));

  TokenSeq<S> seq;
  seq.tokens = concat_rows<S>({cls_d, full});
  seq.has_class_token = true;
  seq.grid_rows = cfg.lidar_grid_rows();
  seq.grid_cols = cfg.lidar_grid_cols();

  Var<S> cam_tokens = camera_tokens_for<S>(camera, ps, cfg, mode);
  TokenSeq<S> fused = fuse_into_sequence(seq, cam_tokens, ps, "fusion", cfg.fusion);

  Var<S> dec_out = encode(fused.tokens, ps, "decoder", cfg.decoder);
  Var<S> patch_rows = slice_rows(dec_out, 1, n);
  Var<S> pred = add_rowvec(matmul(patch_rows, ps.at("pred.w")), ps.at("pred.b"));

  std::vector<int> scope = cfg.loss_scope == LossScope::masked_only
                               ? plan.masked_indices()
                               : [&] {
                                   std::vector<int> all(static_cast<size_t>(n));
                                   for (int i = 0; i < n; ++i) all[static_cast<size_t>(i)] = i;
                                   return all;
                                 }();
  RowMseResult<S> mse = row_mse(pred, target, scope);

  ForwardOutput<S> out;
  out.plan = plan;
  out.loss_node = mse.loss;
  out.loss = mse.loss->val(0, 0);
  out.per_patch_loss = mse.per_row;
  if (!std::isfinite(static_cast<double>(out.loss)))
    throw NumericalError("forward: non-finite loss");

  PatchSequence<S> recon_seq = target_seq;
  recon_seq.data = pred->val;
  if (cfg.normalize_targets) {
    for (int r = 0; r < n; ++r)
      for (int c = 0; c < pd; ++c)
        recon_seq.data(r, c) =
            recon_seq.data(r, c) * sd[static_cast<size_t>(r)] + mu[static_cast<size_t>(r)];
  }
  out.reconstruction = unpatchify(recon_seq);
  return out;
}

}  // namespace

template <typename S>
ForwardOutput<S> forward(const SphericalImage& lidar, const CameraImage& camera,
                         const ParamStore<S>& params, const RunConfig& cfg,
                         const MaskPlan& plan, CameraMode mode) {
  return run_forward<S>(lidar, camera, params, cfg, plan, mode);
}

template <typename S>
ForwardOutput<S> forward_no_camera(const SphericalImage& lidar, const ParamStore<S>& params,
                                   const RunConfig& cfg, const MaskPlan& plan,
                                   CameraMode mode) {
  if (mode == CameraMode::full)
    throw ContractError("forward_no_camera: mode must be zero_image or zero_tokens");
  CameraImage empty;
  return run_forward<S>(lidar, empty, params, cfg, plan, mode);
}

template <typename S>
ParamCount count_parameters(const ParamStore<S>& ps) {
  std::map<std::string, size_t> acc;
  size_t total = 0;
  for (const auto& [key, var] : ps) {
    std::string prefix = key.substr(0, key.find('.'));
    size_t n = var->val.d.size();
    acc[prefix] += n;
    total += n;
  }
  ParamCount out;
  out.by_prefix.assign(acc.begin(), acc.end());
  out.total = total;
  return out;
}

template ParamStore<float> build_params<float>(const RunConfig&);
template ParamStore<double> build_params<double>(const RunConfig&);
template ForwardOutput<float> forward<float>(const SphericalImage&, const CameraImage&,
                                             const ParamStore<float>&, const RunConfig&,
                                             const MaskPlan&, CameraMode);
template ForwardOutput<double> forward<double>(const SphericalImage&, const CameraImage&,
                                               const ParamStore<double>&, const RunConfig&,
                                               const MaskPlan&, CameraMode);
template ForwardOutput<float> forward_no_camera<float>(const SphericalImage&,
                                                       const ParamStore<float>&,
                                                       const RunConfig&, const MaskPlan&,
                                                       CameraMode);
template ForwardOutput<double> forward_no_camera<double>(const SphericalImage&,
                                                         const ParamStore<double>&,
                                                         const RunConfig&, const MaskPlan&,
                                                         CameraMode);
template ParamCount count_parameters<float>(const ParamStore<float>&);
template ParamCount count_parameters<double>(const ParamStore<double>&);

}  // namespace lcmae

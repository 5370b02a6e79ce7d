#include "lcmae/training.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "lcmae/run_config.hpp"

namespace lcmae {

double cosine_lr(double epoch, double total_epochs, double lr0, double lr_min) {
  if (total_epochs <= 0.0) throw ContractError("cosine_lr: total_epochs must be positive");
  if (epoch < 0.0 || epoch > total_epochs)
    throw ContractError("cosine_lr: epoch out of [0, total_epochs]");
  return lr_min + 0.5 * (lr0 - lr_min) * (1.0 + std::cos(M_PI * epoch / total_epochs));
}

void OptimState::init_like(const ParamStore<float>& ps) {
  moments.clear();
  step = 0;
  for (const auto& [key, var] : ps)
    moments.emplace(key, Moments{Mat<float>::zeros(var->val.rows, var->val.cols),
                                 Mat<float>::zeros(var->val.rows, var->val.cols)});
}

void adamw_step(ParamStore<float>& params, OptimState& st, double lr,
                const TrainConfig& hp) {
  if (st.moments.size() != params.size())
    throw ContractError("adamw_step: state/parameter key sets differ");
  st.step += 1;
  double bc1 = 1.0 - std::pow(hp.beta1, static_cast<double>(st.step));
  double bc2 = 1.0 - std::pow(hp.beta2, static_cast<double>(st.step));
  float b1 = static_cast<float>(hp.beta1);
  float b2 = static_cast<float>(hp.beta2);
  float decay = static_cast<float>(1.0 - lr * hp.weight_decay);
  for (auto& [key, var] : params) {
    auto it = st.moments.find(key);
    if (it == st.moments.end())
      throw ContractError("adamw_step: no optimizer state for '" + key + "'");
    OptimState::Moments& mo = it->second;
    Mat<float>& p = var->val;
    bool has_grad = !var->grad.d.empty();
    size_t n = p.d.size();
    for (size_t i = 0; i < n; ++i) {
      float g = has_grad ? var->grad.d[i] : 0.0f;
      mo.m.d[i] = b1 * mo.m.d[i] + (1.0f - b1) * g;
      mo.v.d[i] = b2 * mo.v.d[i] + (1.0f - b2) * g * g;
      float mhat = static_cast<float>(mo.m.d[i] / bc1);
      float vhat = static_cast<float>(mo.v.d[i] / bc2);
      p.d[i] = decay * p.d[i] -
               static_cast<float>(lr) * mhat / (std::sqrt(vhat) + static_cast<float>(hp.eps));
    }
  }
}

void save_optim_state(const std::string& path, const OptimState& st, int next_epoch,
                      uint64_t digest) {
  TensorFile tf;
  tf.digest = digest;
  for (const auto& [key, mo] : st.moments) {
    tf.tensors.emplace("adam.m." + key, mo.m);
    tf.tensors.emplace("adam.v." + key, mo.v);
  }
  Mat<float> meta(1, 2);
  meta(0, 0) = static_cast<float>(st.step);  // exact below 2^24 steps
  meta(0, 1) = static_cast<float>(next_epoch);
  tf.tensors.emplace("adam.meta", meta);
  save_tensor_file(path, tf);
}

ResumeState load_optim_state(const std::string& path, const ParamStore<float>& ps,
                             uint64_t digest) {
  TensorFile tf = load_tensor_file(path);
  if (tf.digest != digest)
    throw DataError("optimizer state: config digest mismatch in " + path);
  auto meta = tf.tensors.find("adam.meta");
  if (meta == tf.tensors.end() || meta->second.d.size() != 2)
    throw FormatError("optimizer state: missing meta record");
  if (tf.tensors.size() != 2 * ps.size() + 1)
    throw DataError("optimizer state: key count mismatch in " + path);
  ResumeState rs;
  rs.optim.step = static_cast<int64_t>(meta->second(0, 0));
  rs.next_epoch = static_cast<int>(meta->second(0, 1));
  for (const auto& [key, var] : ps) {
    auto m = tf.tensors.find("adam.m." + key);
    auto v = tf.tensors.find("adam.v." + key);
    if (m == tf.tensors.end() || v == tf.tensors.end())
      throw DataError("optimizer state: missing moments for '" + key + "'");
    if (m->second.rows != var->val.rows || m->second.cols != var->val.cols ||
        v->second.rows != var->val.rows || v->second.cols != var->val.cols)
      throw DataError("optimizer state: moment shape mismatch for '" + key + "'");
    rs.optim.moments.emplace(key, OptimState::Moments{m->second, v->second});
  }
  return rs;
}

Image masked_composite(const Image& target, const Image& recon, const MaskPlan& plan,
                       int patch_size) {
  if (target.height != recon.height || target.width != recon.width ||
      target.channels != recon.channels)
    throw ShapeError("masked_composite: image shape mismatch");
  int gcols = target.width / patch_size;
  Image out = target;
  for (int idx : plan.masked_indices()) {
    int gr = idx / gcols, gc = idx % gcols;
    for (int c = 0; c < target.channels; ++c)
      for (int r = 0; r < patch_size; ++r)
        for (int col = 0; col < patch_size; ++col)
          out.at(c, gr * patch_size + r, gc * patch_size + col) =
              recon.at(c, gr * patch_size + r, gc * patch_size + col);
  }
  return out;
}

Image masked_input_image(const Image& target, const MaskPlan& plan, int patch_size) {
  int gcols = target.width / patch_size;
  Image out = target;
  for (int idx : plan.masked_indices()) {
    int gr = idx / gcols, gc = idx % gcols;
    for (int c = 0; c < target.channels; ++c)
      for (int r = 0; r < patch_size; ++r)
        for (int col = 0; col < patch_size; ++col)
          out.at(c, gr * patch_size + r, gc * patch_size + col) = 0.0f;
  }
  return out;
}

EvalResult evaluate(const ParamStore<float>& ps, const FullConfig& cfg,
                    const std::vector<Sample>& samples, Split split, CameraMode mode) {
  EvalResult res;
  int n = cfg.model.n_lidar_patches();
  for (size_t i = 0; i < samples.size(); ++i) {
    MaskPlan plan = sample_mask(n, cfg.model.mask_ratio,
                                eval_mask_seed(cfg.model.seed, split, static_cast<int>(i)));
    ForwardOutput<float> out =
        mode == CameraMode::full
            ? forward(samples[i].lidar, samples[i].camera, ps, cfg.model, plan)
            : forward_no_camera(samples[i].lidar, ps, cfg.model, plan, mode);
    const Image& target = samples[i].lidar.img;
    res.full_mssim.push_back(ms_ssim(out.reconstruction, target));
    Image comp = masked_composite(target, out.reconstruction, plan, cfg.model.patch_size);
    res.masked_mssim.push_back(ms_ssim(comp, target));
  }
  for (double v : res.full_mssim) res.mean_full += v;
  for (double v : res.masked_mssim) res.mean_masked += v;
  if (!samples.empty()) {
    res.mean_full /= static_cast<double>(samples.size());
    res.mean_masked /= static_cast<double>(samples.size());
  }
  return res;
}

namespace {

void append_report_row(const std::string& path, const EpochRecord& r, bool fresh,
                       uint64_t digest) {
  std::ofstream out(path, fresh ? std::ios::trunc : std::ios::app);
  if (!out) throw FormatError("report: cannot write " + path);
  if (fresh) {
    char head[64];
    std::snprintf(head, sizeof head, "# config_digest %016llx\n",
                  static_cast<unsigned long long>(digest));
    out << head << "epoch,train_loss,val_mssim_camera,val_mssim_zero_tokens,lr\n";
  }
  char row[256];
  std::snprintf(row, sizeof row, "%d,%.9g,%.9g,%.9g,%.9g\n", r.epoch, r.train_loss,
                r.val_mssim_camera, r.val_mssim_zero_tokens, r.lr);
  out << row;
}

void append_wall_line(const std::string& path, double seconds) {
  std::ofstream out(path, std::ios::app);
  char line[64];
  std::snprintf(line, sizeof line, "# wall_seconds %.3f\n", seconds);
  out << line;
}

}  // namespace

TrainReport read_report_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("report: cannot open " + path);
  TrainReport rep;
  std::string line;
  bool saw_header = false;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (line[0] == '#') {
      std::istringstream ls(line.substr(1));
      std::string tag;
      ls >> tag;
      if (tag == "config_digest") {
        std::string hex;
        ls >> hex;
        rep.digest = std::stoull(hex, nullptr, 16);
      } else if (tag == "wall_seconds") {
        double v = 0;
        ls >> v;
        rep.wall_seconds += v;
      }
      continue;
    }
    if (!saw_header) {  // column header line
      saw_header = true;
      continue;
    }
    EpochRecord r;
    if (std::sscanf(line.c_str(), "%d,%lf,%lf,%lf,%lf", &r.epoch, &r.train_loss,
                    &r.val_mssim_camera, &r.val_mssim_zero_tokens, &r.lr) != 5)
      throw FormatError("report: bad row '" + line + "'");
    rep.rows.push_back(r);
  }
  return rep;
}

TrainReport train(const FullConfig& cfg, const std::string& out_dir,
                  const TrainOptions& opt) {
  cfg.validate();
  uint64_t digest = config_digest(cfg);
  std::filesystem::create_directories(out_dir);
  std::string report_path = out_dir + "/report.csv";
  std::string config_path = out_dir + "/config.txt";

  bool resuming = !opt.resume_stem.empty();
  if (resuming) {
    FullConfig prev = load_config_file(config_path);
    if (config_digest(prev) != digest)
      throw DataError("train: out dir config differs from the requested config");
  } else {
    save_config_file(config_path, cfg);
  }

  auto t0 = std::chrono::steady_clock::now();
  std::vector<Sample> train_set = build_split(cfg, Split::train);
  std::vector<Sample> val_set = build_split(cfg, Split::val);

  ParamStore<float> ps = build_params<float>(cfg.model);
  OptimState st;
  st.init_like(ps);
  int start_epoch = 0;
  if (resuming) {
    load_checkpoint(opt.resume_stem + ".params", ps, digest);
    ResumeState rs = load_optim_state(opt.resume_stem + ".adam", ps, digest);
    st = std::move(rs.optim);
    start_epoch = rs.next_epoch;
    if (start_epoch < 0 || start_epoch > cfg.train.epochs)
      throw DataError("train: resume epoch out of range");
  }

  int n_patches = cfg.model.n_lidar_patches();
  int n_train = static_cast<int>(train_set.size());
  TrainReport rep;
  rep.digest = digest;
  if (resuming) {
    TrainReport prev = read_report_csv(report_path);
    rep.rows = prev.rows;
  }

  for (int epoch = start_epoch; epoch < cfg.train.epochs; ++epoch) {
    double lr = cosine_lr(epoch, cfg.train.epochs, cfg.train.lr0, cfg.train.lr_min);
    double loss_sum = 0.0;
    for (int b0 = 0; b0 < n_train; b0 += cfg.train.batch_size) {
      int bn = std::min(cfg.train.batch_size, n_train - b0);
      ps.zero_grads();
      for (int k = 0; k < bn; ++k) {
        int idx = b0 + k;
        MaskPlan plan = sample_mask(n_patches, cfg.model.mask_ratio,
                                    train_mask_seed(cfg.model.seed, epoch, idx));
        ForwardOutput<float> out =
            forward(train_set[static_cast<size_t>(idx)].lidar,
                    train_set[static_cast<size_t>(idx)].camera, ps, cfg.model, plan);
        if (!std::isfinite(out.loss)) {
          std::ostringstream msg;
          msg << "train: non-finite loss " << out.loss << " at epoch " << epoch
              << " batch " << b0 / cfg.train.batch_size;
          throw NumericalError(msg.str());
        }
        backward(out.loss_node);
        loss_sum += static_cast<double>(out.loss);
      }
      if (bn > 1) {
        float inv = 1.0f / static_cast<float>(bn);
        for (auto& [key, var] : ps)
          if (!var->grad.d.empty())
            for (float& g : var->grad.d) g *= inv;
      }
      adamw_step(ps, st, lr, cfg.train);
    }

    EpochRecord r;
    r.epoch = epoch;
    r.train_loss = loss_sum / n_train;
    r.lr = lr;
    EvalResult cam = evaluate(ps, cfg, val_set, Split::val, CameraMode::full);
    EvalResult zero = evaluate(ps, cfg, val_set, Split::val, CameraMode::zero_tokens);
    r.val_mssim_camera = cam.mean_full;
    r.val_mssim_zero_tokens = zero.mean_full;
    rep.rows.push_back(r);
    append_report_row(report_path, r, epoch == 0, digest);
    if (!opt.quiet) {
      std::printf("epoch %3d  loss %.6f  val_mssim %.4f  val_mssim_zero %.4f  lr %.3g\n",
                  r.epoch, r.train_loss, r.val_mssim_camera, r.val_mssim_zero_tokens, r.lr);
      std::fflush(stdout);
    }

    bool last = epoch + 1 == cfg.train.epochs;
    if ((epoch + 1) % cfg.train.ckpt_every == 0 || last) {
      std::string stem = out_dir + "/ckpt_e" + std::to_string(epoch + 1);
      save_checkpoint(stem + ".params", ps, digest);
      save_optim_state(stem + ".adam", st, epoch + 1, digest);
      if (last) {
        save_checkpoint(out_dir + "/ckpt_final.params", ps, digest);
        save_optim_state(out_dir + "/ckpt_final.adam", st, epoch + 1, digest);
      }
    }
  }

  rep.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  append_wall_line(report_path, rep.wall_seconds);
  return rep;
}

}  // namespace lcmae

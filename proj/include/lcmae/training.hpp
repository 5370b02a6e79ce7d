#pragma once

#include <map>
#include <string>
#include <vector>

#include "lcmae/checkpoint.hpp"
#include "lcmae/dataset.hpp"
#include "lcmae/metrics.hpp"

namespace lcmae {

double cosine_lr(double epoch, double total_epochs = 57.0, double lr0 = 1e-4,
                 double lr_min = 0.0);

struct OptimState {
  struct Moments {
    Mat<float> m, v;
  };
  std::map<std::string, Moments> moments;
  int64_t step = 0;

  void init_like(const ParamStore<float>& ps);
};

// Decoupled weight decay: p *= (1 - lr*wd), then the bias-corrected Adam
// update. Parameters without an accumulated gradient are treated as having
// gradient zero.
void adamw_step(ParamStore<float>& params, OptimState& st, double lr,
                const TrainConfig& hp);

void save_optim_state(const std::string& path, const OptimState& st, int next_epoch,
                      uint64_t digest);

struct ResumeState {
  OptimState optim;
  int next_epoch = 0;
};

ResumeState load_optim_state(const std::string& path, const ParamStore<float>& ps,
                             uint64_t digest);

struct EpochRecord {
  int epoch = 0;
  double train_loss = 0;
  double val_mssim_camera = 0;
  double val_mssim_zero_tokens = 0;
  double lr = 0;
};

struct TrainReport {
  std::vector<EpochRecord> rows;
  double wall_seconds = 0;
  uint64_t digest = 0;
};

TrainReport read_report_csv(const std::string& path);

struct TrainOptions {
  std::string resume_stem;  // checkpoint stem (no extension); empty = fresh run
  bool quiet = false;
};

// Writes into out_dir: config.txt, report.csv (append-only), periodic
// checkpoint pairs ckpt_e<N>.params/.adam and a final ckpt_final pair.
TrainReport train(const FullConfig& cfg, const std::string& out_dir,
                  const TrainOptions& opt = {});

struct EvalResult {
  std::vector<double> full_mssim;
  std::vector<double> masked_mssim;
  double mean_full = 0;
  double mean_masked = 0;
};

EvalResult evaluate(const ParamStore<float>& ps, const FullConfig& cfg,
                    const std::vector<Sample>& samples, Split split, CameraMode mode);

// Reconstruction spliced over the target: predicted pixels at masked
// patches, target pixels elsewhere.
Image masked_composite(const Image& target, const Image& recon, const MaskPlan& plan,
                       int patch_size);

// Target with masked patches blanked to zero (visualization aid).
Image masked_input_image(const Image& target, const MaskPlan& plan, int patch_size);

}  // namespace lcmae

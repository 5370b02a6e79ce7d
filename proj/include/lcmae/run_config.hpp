#pragma once

#include <iosfwd>
#include <string>

#include "lcmae/mae_model.hpp"

namespace lcmae {

struct TrainConfig {
  int epochs = 57;
  int batch_size = 8;
  double lr0 = 1e-4;
  double lr_min = 0.0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.05;
  int ckpt_every = 10;
  void validate() const;
};

struct DataConfig {
  int train_count = 256;
  int val_count = 32;
  uint64_t seed = 7;
  int n_boxes = 3;
  double noise_std = 0.01;
  void validate() const;
};

struct FullConfig {
  RunConfig model;
  TrainConfig train;
  DataConfig data;
  void validate() const;
};

// Flat key=value text. '#' starts a comment; keys are the documented list;
// unknown or duplicate keys raise FormatError.
FullConfig parse_config(std::istream& in);
FullConfig load_config_file(const std::string& path);
std::string serialize_config(const FullConfig& cfg);
void save_config_file(const std::string& path, const FullConfig& cfg);

// FNV-1a over the canonical serialization; pins checkpoints and reports to
// the exact configuration that produced them.
uint64_t config_digest(const FullConfig& cfg);

}  // namespace lcmae

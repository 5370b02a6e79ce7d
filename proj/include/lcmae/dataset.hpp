#pragma once

#include <vector>

#include "lcmae/run_config.hpp"
#include "lcmae/synthetic_scenes.hpp"

namespace lcmae {

struct Sample {
  SphericalImage lidar;
  CameraImage camera;
};

enum class Split { train, val };

// Scene seeds derive from (data seed, split, index), so the two splits are
// disjoint and regeneration is exact.
uint64_t scene_seed(const DataConfig& data, Split split, int index);

SceneParams scene_params_for(const FullConfig& cfg, Split split, int index);

Sample make_sample(const FullConfig& cfg, Split split, int index);

std::vector<Sample> build_split(const FullConfig& cfg, Split split);

// Mask seed used by evaluation paths (independent of training epoch).
uint64_t eval_mask_seed(uint64_t model_seed, Split split, int index);

// Mask seed for training: fresh plan per (epoch, sample).
uint64_t train_mask_seed(uint64_t model_seed, int epoch, int index);

}  // namespace lcmae

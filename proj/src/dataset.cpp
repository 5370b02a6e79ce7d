#include "lcmae/dataset.hpp"

namespace lcmae {

uint64_t scene_seed(const DataConfig& data, Split split, int index) {
  return derive_seed(data.seed, split == Split::train ? 1 : 2,
                     static_cast<uint64_t>(index));
}

SceneParams scene_params_for(const FullConfig& cfg, Split split, int index) {
  SceneParams p;
  p.seed = scene_seed(cfg.data, split, index);
  p.n_boxes = cfg.data.n_boxes;
  p.noise_std = cfg.data.noise_std;
  p.camera_height = cfg.model.camera_height;
  p.camera_width = cfg.model.camera_width;
  p.grid = cfg.model.grid;
  return p;
}

Sample make_sample(const FullConfig& cfg, Split split, int index) {
  ScenePair pair = generate_scene(scene_params_for(cfg, split, index));
  Sample s;
  s.lidar = spherical_project(pair.cloud, cfg.model.grid);
  s.camera = pair.camera;
  return s;
}

std::vector<Sample> build_split(const FullConfig& cfg, Split split) {
  int count = split == Split::train ? cfg.data.train_count : cfg.data.val_count;
  std::vector<Sample> out;
  out.reserve(static_cast<size_t>(count));
  for (int i = 0; i < count; ++i) out.push_back(make_sample(cfg, split, i));
  return out;
}

uint64_t eval_mask_seed(uint64_t model_seed, Split split, int index) {
  return derive_seed(model_seed, split == Split::train ? 0xEA01 : 0xEA02,
                     static_cast<uint64_t>(index));
}

uint64_t train_mask_seed(uint64_t model_seed, int epoch, int index) {
  return derive_seed(model_seed, static_cast<uint64_t>(epoch),
                     static_cast<uint64_t>(index));
}

}  // namespace lcmae

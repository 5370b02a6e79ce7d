#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "lcmae/fusion.hpp"
#include "lcmae/lidar_projection.hpp"
#include "lcmae/nn.hpp"
#include "lcmae/patching.hpp"

namespace lcmae {

enum class LossScope { masked_only, all_patches };

enum class CameraMode { full, zero_image, zero_tokens };

struct RunConfig {
  GridSpec grid = desk_grid();
  int patch_size = 8;
  double mask_ratio = 0.5;
  int camera_height = 64;
  int camera_width = 64;
  TransformerConfig lidar_encoder{64, 4, 4, 4};
  TransformerConfig camera_encoder{64, 4, 4, 4};
  FusionConfig fusion{64, 2, 4, true};
  TransformerConfig decoder{64, 4, 4, 4};
  LossScope loss_scope = LossScope::masked_only;
  bool normalize_targets = false;
  uint64_t seed = 42;

  int lidar_grid_rows() const { return grid.height / patch_size; }
  int lidar_grid_cols() const { return grid.width / patch_size; }
  int n_lidar_patches() const { return lidar_grid_rows() * lidar_grid_cols(); }
  int lidar_patch_dim() const { return patch_size * patch_size * 3; }
  int camera_grid_rows() const { return camera_height / patch_size; }
  int camera_grid_cols() const { return camera_width / patch_size; }
  int n_camera_patches() const { return camera_grid_rows() * camera_grid_cols(); }
  int camera_patch_dim() const { return patch_size * patch_size * 3; }
  void validate() const;
};

template <typename S>
struct ForwardOutput {
  Image reconstruction;      // decoder prediction at every patch slot
  std::vector<S> per_patch_loss;
  S loss = S(0);
  MaskPlan plan;
  Var<S> loss_node;          // backward entry point
};

// Full parameter inventory for a config; keys are stable path strings.
template <typename S>
ParamStore<S> build_params(const RunConfig& cfg);

template <typename S>
ForwardOutput<S> forward(const SphericalImage& lidar, const CameraImage& camera,
                         const ParamStore<S>& params, const RunConfig& cfg,
                         const MaskPlan& plan, CameraMode mode = CameraMode::full);

// Camera replaced by zeros. zero_image runs the camera encoder on a black
// image (biases and positions still leak through); zero_tokens feeds
// exactly-zero camera tokens and never touches camera-encoder parameters.
template <typename S>
ForwardOutput<S> forward_no_camera(const SphericalImage& lidar,
                                   const ParamStore<S>& params, const RunConfig& cfg,
                                   const MaskPlan& plan,
                                   CameraMode mode = CameraMode::zero_tokens);

struct ParamCount {
  std::vector<std::pair<std::string, size_t>> by_prefix;
  size_t total = 0;
};

template <typename S>
ParamCount count_parameters(const ParamStore<S>& ps);

}  // namespace lcmae

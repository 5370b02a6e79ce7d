#pragma once

#include <optional>

#include "lcmae/lidar_projection.hpp"

namespace lcmae {

// Procedural scene: a ground plane plus axis-aligned boxes, each with its own
// reflectance. The same geometry is sampled by the LiDAR rays (grid bin
// centers) and by a forward-facing pinhole camera, so the camera image is
// genuinely informative about the LiDAR content.
struct SceneParams {
  uint64_t seed = 0;
  int n_boxes = 3;
  double box_min_extent = 1.0;   // full side length range, meters
  double box_max_extent = 4.0;
  double box_min_dist = 5.0;     // ground distance of box center from sensor
  double box_max_dist = 18.0;
  double box_azimuth_span = 0.7 * M_PI / 2.0;  // centers within +- span
  double ground_z = 0.0;
  double sensor_height = 1.7;
  int camera_width = 64;
  int camera_height = 64;
  double camera_hfov = M_PI / 2.0;
  double noise_std = 0.01;
  GridSpec grid = desk_grid();

  void validate(int patch_size) const;
};

struct Vec3 {
  double x = 0, y = 0, z = 0;
};

struct Box {
  Vec3 lo, hi;       // min/max corners
  double reflectance = 0.5;
};

struct SceneGeometry {
  double ground_z = 0.0;
  double ground_reflectance = 0.4;
  std::vector<Box> boxes;
};

struct RayHit {
  double t = 0;            // distance along the unit ray
  Vec3 point;
  double reflectance = 0;
};

// Geometry is drawn deterministically from params.seed.
SceneGeometry build_scene_geometry(const SceneParams& params);

// Nearest surface hit with t > 0, slab-test AABBs; nullopt on miss.
std::optional<RayHit> cast_ray(const SceneGeometry& geo, const Vec3& origin,
                               const Vec3& dir);

// Unit direction for (elevation, azimuth), x forward, y left, z up.
Vec3 spherical_dir(double elevation, double azimuth);

struct ScenePair {
  PointCloud cloud;
  CameraImage camera;
};

ScenePair generate_scene(const SceneParams& params);

}  // namespace lcmae

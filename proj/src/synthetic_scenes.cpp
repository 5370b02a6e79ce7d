#include "lcmae/synthetic_scenes.hpp"

#include <algorithm>
#include <cmath>

namespace lcmae {

void SceneParams::validate(int patch_size) const {
  if (n_boxes < 0) throw ContractError("SceneParams: n_boxes must be >= 0");
  if (camera_width % patch_size != 0 || camera_height % patch_size != 0)
    throw ContractError("SceneParams: camera resolution not divisible by patch size");
  grid.validate();
}

Vec3 spherical_dir(double elevation, double azimuth) {
  double ce = std::cos(elevation);
  return {ce * std::cos(azimuth), ce * std::sin(azimuth), std::sin(elevation)};
}

SceneGeometry build_scene_geometry(const SceneParams& p) {
  SplitMix64 rng(p.seed);
  SceneGeometry geo;
  geo.ground_z = p.ground_z;
  geo.ground_reflectance = rng.uniform(0.25, 0.55);
  geo.boxes.reserve(p.n_boxes);
  for (int i = 0; i < p.n_boxes; ++i) {
    double az = rng.uniform(-p.box_azimuth_span, p.box_azimuth_span);
    double dist = rng.uniform(p.box_min_dist, p.box_max_dist);
    double ex = rng.uniform(p.box_min_extent, p.box_max_extent);
    double ey = rng.uniform(p.box_min_extent, p.box_max_extent);
    double ez = rng.uniform(p.box_min_extent, p.box_max_extent);
    double refl = rng.uniform(0.1, 0.95);
    double cx = dist * std::cos(az), cy = dist * std::sin(az);
    Box b;
    b.lo = {cx - ex / 2, cy - ey / 2, p.ground_z};
    b.hi = {cx + ex / 2, cy + ey / 2, p.ground_z + ez};
    b.reflectance = refl;
    geo.boxes.push_back(b);
  }
  return geo;
}

namespace {

// Slab test; returns entry distance if the ray hits with t > eps.
std::optional<double> ray_aabb(const Box& b, const Vec3& o, const Vec3& d) {
  constexpr double eps = 1e-12;
  double tmin = -1e300, tmax = 1e300;
  const double os[3] = {o.x, o.y, o.z};
  const double ds[3] = {d.x, d.y, d.z};
  const double los[3] = {b.lo.x, b.lo.y, b.lo.z};
  const double his[3] = {b.hi.x, b.hi.y, b.hi.z};
  for (int a = 0; a < 3; ++a) {
    if (std::fabs(ds[a]) < eps) {
      if (os[a] < los[a] || os[a] > his[a]) return std::nullopt;
      continue;
    }
    double t0 = (los[a] - os[a]) / ds[a];
    double t1 = (his[a] - os[a]) / ds[a];
    if (t0 > t1) std::swap(t0, t1);
    tmin = std::max(tmin, t0);
    tmax = std::min(tmax, t1);
    if (tmin > tmax) return std::nullopt;
  }
  if (tmax < eps) return std::nullopt;
  return tmin > eps ? tmin : tmax;
}

}  // namespace

std::optional<RayHit> cast_ray(const SceneGeometry& geo, const Vec3& o, const Vec3& d) {
  std::optional<RayHit> best;
  if (d.z < -1e-12) {
    double t = (geo.ground_z - o.z) / d.z;
    if (t > 1e-12)
      best = RayHit{t, {o.x + t * d.x, o.y + t * d.y, geo.ground_z}, geo.ground_reflectance};
  }
  for (const auto& b : geo.boxes) {
    auto t = ray_aabb(b, o, d);
    if (t && (!best || *t < best->t))
      best = RayHit{*t, {o.x + *t * d.x, o.y + *t * d.y, o.z + *t * d.z}, b.reflectance};
  }
  return best;
}

ScenePair generate_scene(const SceneParams& p) {
  p.validate(1);
  SceneGeometry geo = build_scene_geometry(p);
  Vec3 origin{0, 0, p.sensor_height};

  ScenePair out;
  // LiDAR: one ray per grid cell center, row-major order.
  for (int r = 0; r < p.grid.height; ++r) {
    double el = p.grid.elevation_at_row(r);
    for (int c = 0; c < p.grid.width; ++c) {
      double az = p.grid.azimuth_at_col(c);
      auto hit = cast_ray(geo, origin, spherical_dir(el, az));
      if (!hit || hit->t > p.grid.max_range) continue;
      // points are emitted in the sensor frame (origin at the LiDAR)
      out.cloud.points.push_back({static_cast<float>(hit->point.x - origin.x),
                                  static_cast<float>(hit->point.y - origin.y),
                                  static_cast<float>(hit->point.z - origin.z),
                                  static_cast<float>(hit->reflectance)});
    }
  }

  // Camera: pinhole at the sensor, looking along +x. Image x axis maps to
  // -y, image y axis to -z, square pixels.
  out.camera = Image(p.camera_height, p.camera_width, 3);
  double th = std::tan(p.camera_hfov / 2.0);
  double tv = th * p.camera_height / p.camera_width;
  SplitMix64 noise(derive_seed(p.seed, 0x6361u /* "ca" */, 0));
  for (int r = 0; r < p.camera_height; ++r) {
    for (int c = 0; c < p.camera_width; ++c) {
      double u = (c + 0.5) / p.camera_width * 2.0 - 1.0;
      double v = (r + 0.5) / p.camera_height * 2.0 - 1.0;
      Vec3 d{1.0, -u * th, -v * tv};
      double n = std::sqrt(d.x * d.x + d.y * d.y + d.z * d.z);
      d = {d.x / n, d.y / n, d.z / n};
      auto hit = cast_ray(geo, origin, d);
      double shade = 0.0;
      if (hit) shade = hit->reflectance / (1.0 + hit->t / 25.0);
      for (int ch = 0; ch < 3; ++ch) {
        // mild per-channel tint keeps the three planes distinct
        double tint = 1.0 - 0.12 * ch;
        double val = shade * tint + noise.normal() * p.noise_std;
        out.camera.at(ch, r, c) = static_cast<float>(std::clamp(val, 0.0, 1.0));
      }
    }
  }
  return out;
}

}  // namespace lcmae

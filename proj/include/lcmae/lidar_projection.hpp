#pragma once

#include <cstdint>
#include <iosfwd>
#include <vector>

#include "lcmae/image.hpp"

namespace lcmae {

struct LidarPoint {
  float x = 0, y = 0, z = 0;
  float intensity = 0;  // reflectance in [0, 1]
};

struct PointCloud {
  std::vector<LidarPoint> points;
};

// Spherical grid geometry. Row 0 sits at elevation_max (top of the image),
// column 0 at azimuth_min; bins are uniform. z_min/z_max bound the height
// channel normalization.
struct GridSpec {
  int height = 64;
  int width = 1024;
  double elevation_min = -24.8 * M_PI / 180.0;
  double elevation_max = 2.0 * M_PI / 180.0;
  double azimuth_min = -M_PI;
  double azimuth_max = M_PI;
  double max_range = 80.0;
  double z_min = -3.0;
  double z_max = 7.0;

  void validate() const;
  double elevation_at_row(int row) const {  // bin center
    double step = (elevation_max - elevation_min) / height;
    return elevation_max - (row + 0.5) * step;
  }
  double azimuth_at_col(int col) const {  // bin center
    double step = (azimuth_max - azimuth_min) / width;
    return azimuth_min + (col + 0.5) * step;
  }
};

GridSpec desk_grid();  // 32 x 256 front window used by the small configs

// 3 channels: 0 intensity, 1 range/max_range, 2 height mapped from
// [z_min, z_max]. Unoccupied cells hold 0 in all channels.
struct SphericalImage {
  Image img;                     // height x width x 3
  std::vector<uint8_t> occupancy;  // height*width, row-major

  bool occupied(int r, int c) const {
    return occupancy[static_cast<size_t>(r) * img.width + c] != 0;
  }
};

// Binary layout: little-endian float32 quadruples (x, y, z, intensity).
PointCloud load_point_cloud(std::istream& in);
PointCloud load_point_cloud_file(const std::string& path);
void save_point_cloud_file(const std::string& path, const PointCloud& cloud);

SphericalImage spherical_project(const PointCloud& cloud, const GridSpec& spec);

// Channel PGMs plus a text sidecar with dimensions and grid fields.
void save_spherical_image(const std::string& dir, const std::string& stem,
                          const SphericalImage& simg, const GridSpec& spec);

}  // namespace lcmae

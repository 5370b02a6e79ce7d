#include "lcmae/lidar_projection.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace lcmae {

void GridSpec::validate() const {
  if (height < 1 || width < 1) throw ShapeError("GridSpec: grid must be at least 1x1");
  if (!(elevation_min < elevation_max))
    throw ShapeError("GridSpec: elevation window empty");
  if (!(azimuth_min < azimuth_max) || azimuth_max - azimuth_min > 2.0 * M_PI + 1e-12)
    throw ShapeError("GridSpec: azimuth span must be positive and <= 2*pi");
  if (!(max_range > 0)) throw ShapeError("GridSpec: max_range must be positive");
  if (!(z_min < z_max)) throw ShapeError("GridSpec: height window empty");
}

GridSpec desk_grid() {
  GridSpec g;
  g.height = 32;
  g.width = 256;
  g.elevation_min = -26.0 * M_PI / 180.0;
  g.elevation_max = 16.0 * M_PI / 180.0;
  g.azimuth_min = -M_PI / 2.0;
  g.azimuth_max = M_PI / 2.0;
  g.max_range = 80.0;
  return g;
}

PointCloud load_point_cloud(std::istream& in) {
  std::vector<char> bytes((std::istreambuf_iterator<char>(in)),
                          std::istreambuf_iterator<char>());
  if (bytes.size() % 16 != 0)
    throw FormatError("point cloud: stream length " + std::to_string(bytes.size()) +
                      " is not a multiple of 16");
  PointCloud cloud;
  cloud.points.resize(bytes.size() / 16);
  static_assert(sizeof(float) == 4);
  for (size_t i = 0; i < cloud.points.size(); ++i) {
    float v[4];
    std::memcpy(v, bytes.data() + i * 16, 16);
    for (float f : v)
      if (!std::isfinite(f))
        throw DataError("point cloud: non-finite value at record " + std::to_string(i));
    cloud.points[i] = {v[0], v[1], v[2], std::clamp(v[3], 0.0f, 1.0f)};
  }
  return cloud;
}

PointCloud load_point_cloud_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw FormatError("cannot open point cloud file " + path);
  return load_point_cloud(f);
}

void save_point_cloud_file(const std::string& path, const PointCloud& cloud) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw FormatError("cannot open " + path + " for writing");
  for (const auto& p : cloud.points) {
    float v[4] = {p.x, p.y, p.z, p.intensity};
    f.write(reinterpret_cast<const char*>(v), 16);
  }
}

SphericalImage spherical_project(const PointCloud& cloud, const GridSpec& spec) {
  spec.validate();
  const int h = spec.height, w = spec.width;
  SphericalImage out;
  out.img = Image(h, w, 3);
  out.occupancy.assign(static_cast<size_t>(h) * w, 0);

  // Winner per cell: smallest range, ties by smaller input index. Both keys
  // make the result independent of point order.
  std::vector<double> best_range(static_cast<size_t>(h) * w, 0.0);
  std::vector<int64_t> best_idx(static_cast<size_t>(h) * w, -1);

  const double az_span = spec.azimuth_max - spec.azimuth_min;
  const double el_span = spec.elevation_max - spec.elevation_min;

  for (size_t i = 0; i < cloud.points.size(); ++i) {
    const auto& p = cloud.points[i];
    double x = p.x, y = p.y, z = p.z;
    double r = std::sqrt(x * x + y * y + z * z);
    if (r == 0.0 || r > spec.max_range) continue;
    double az = std::atan2(y, x);
    double el = std::atan2(z, std::sqrt(x * x + y * y));
    if (az < spec.azimuth_min || az > spec.azimuth_max) continue;
    if (el < spec.elevation_min || el > spec.elevation_max) continue;
    int col = static_cast<int>((az - spec.azimuth_min) / az_span * w);
    int row = static_cast<int>((spec.elevation_max - el) / el_span * h);
    col = std::min(col, w - 1);  // az == azimuth_max folds into the last bin
    row = std::min(row, h - 1);
    size_t cell = static_cast<size_t>(row) * w + col;
    if (best_idx[cell] < 0 || r < best_range[cell]) {
      best_range[cell] = r;
      best_idx[cell] = static_cast<int64_t>(i);
    }
  }

  const double z_span = spec.z_max - spec.z_min;
  for (int row = 0; row < h; ++row) {
    for (int col = 0; col < w; ++col) {
      size_t cell = static_cast<size_t>(row) * w + col;
      if (best_idx[cell] < 0) continue;
      const auto& p = cloud.points[static_cast<size_t>(best_idx[cell])];
      out.occupancy[cell] = 1;
      out.img.at(0, row, col) = p.intensity;
      out.img.at(1, row, col) = static_cast<float>(best_range[cell] / spec.max_range);
      double hn = (static_cast<double>(p.z) - spec.z_min) / z_span;
      out.img.at(2, row, col) = static_cast<float>(std::clamp(hn, 0.0, 1.0));
    }
  }
  return out;
}

void save_spherical_image(const std::string& dir, const std::string& stem,
                          const SphericalImage& simg, const GridSpec& spec) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  static const char* names[3] = {"intensity", "range", "height"};
  for (int c = 0; c < 3; ++c)
    write_pgm((fs::path(dir) / (stem + "_" + names[c] + ".pgm")).string(), simg.img, c);
  std::ofstream meta((fs::path(dir) / (stem + ".meta.txt")).string());
  meta << "rows " << spec.height << "\ncols " << spec.width << "\n"
       << "elevation_min " << spec.elevation_min << "\nelevation_max " << spec.elevation_max
       << "\nazimuth_min " << spec.azimuth_min << "\nazimuth_max " << spec.azimuth_max
       << "\nmax_range " << spec.max_range << "\nz_min " << spec.z_min
       << "\nz_max " << spec.z_max << "\n";
}

}  // namespace lcmae

#pragma once

#include "avt/common.hpp"
#include "avt/image.hpp"

#include <functional>
#include <optional>
#include <vector>

namespace avt {

using DepthMap = Image<double>;

/// Pinhole intrinsics derived from perspective angles and resolution.
struct CameraIntrinsics {
  double fx = 0, fy = 0;
  double cx = 0, cy = 0;
  int width = 0, height = 0;
  double alpha_x = 0, alpha_y = 0;
};

inline CameraIntrinsics intrinsics_from_fov(double alpha_x, double alpha_y, int width, int height) {
  if (!(alpha_x > 0 && alpha_x < kPi) || !(alpha_y > 0 && alpha_y < kPi)) {
    throw std::domain_error("intrinsics_from_fov: perspective angle outside (0, pi)");
  }
  if (width < 1 || height < 1) throw std::domain_error("intrinsics_from_fov: non-positive resolution");
  CameraIntrinsics k;
  k.width = width;
  k.height = height;
  k.alpha_x = alpha_x;
  k.alpha_y = alpha_y;
  k.fx = width / (2.0 * std::tan(alpha_x / 2.0));
  k.fy = height / (2.0 * std::tan(alpha_y / 2.0));
  k.cx = width / 2.0;
  k.cy = height / 2.0;
  return k;
}

/// 60 deg x 60 deg, 256 x 256: the simulated sensor.
inline CameraIntrinsics default_camera() { return intrinsics_from_fov(deg2rad(60), deg2rad(60), 256, 256); }

struct Pixel {
  double u = 0, v = 0;
};

/// Continuous pixel coordinates of a camera-frame point. Requires z > 0.
inline Pixel project(const CameraIntrinsics& k, const Vec3& p) {
  if (!(p.z() > 0)) throw std::domain_error("project: point not in front of camera");
  return {k.fx * p.x() / p.z() + k.cx, k.fy * p.y() / p.z() + k.cy};
}

inline Vec3 backproject(const CameraIntrinsics& k, double u, double v, double depth) {
  if (!(depth > 0)) throw std::domain_error("backproject: non-positive depth");
  return {depth * (u - k.cx) / k.fx, depth * (v - k.cy) / k.fy, depth};
}

struct BoundingBox {
  double x = 0, y = 0, w = 0, h = 0;

  double center_x() const { return x + w / 2; }
  double center_y() const { return y + h / 2; }

  bool valid() const { return w > 0 && h > 0; }

  bool intersects_image(const CameraIntrinsics& k) const {
    return valid() && x < k.width && y < k.height && x + w > 0 && y + h > 0;
  }

  /// A pixel belongs to the box when its center lies in [x, x+w) x [y, y+h).
  bool contains_pixel(int u, int v) const {
    double pu = u + 0.5, pv = v + 0.5;
    return pu >= x && pu < x + w && pv >= y && pv < y + h;
  }

  friend bool operator==(const BoundingBox&, const BoundingBox&) = default;
};

struct PointCloud {
  std::vector<Vec3> points;

  std::size_t size() const { return points.size(); }
  bool empty() const { return points.empty(); }
};

inline bool valid_depth(double d, double z_max) { return d > 0 && d < z_max; }

using PixelMask = std::function<bool(int u, int v)>;

/// Back-projects every valid pixel (depth strictly inside (0, z_max)) through its center.
inline PointCloud depth_to_cloud(const CameraIntrinsics& k, const DepthMap& depth, double z_max,
                                 const PixelMask& mask = {}) {
  if (depth.height() != k.height || depth.width() != k.width || depth.channels() != 1) {
    throw std::invalid_argument("depth_to_cloud: depth map does not match intrinsics");
  }
  PointCloud cloud;
  for (int v = 0; v < depth.height(); ++v) {
    for (int u = 0; u < depth.width(); ++u) {
      double d = depth(v, u);
      if (!valid_depth(d, z_max)) continue;
      if (mask && !mask(u, v)) continue;
      cloud.points.push_back(backproject(k, u + 0.5, v + 0.5, d));
    }
  }
  return cloud;
}

/// Frustum proposal: valid-depth points whose pixel lies inside bbox and the image.
inline PointCloud frustum_crop(const CameraIntrinsics& k, const DepthMap& depth, const BoundingBox& box,
                               double z_max) {
  if (depth.height() != k.height || depth.width() != k.width || depth.channels() != 1) {
    throw std::invalid_argument("frustum_crop: depth map does not match intrinsics");
  }
  PointCloud cloud;
  if (!box.intersects_image(k)) return cloud;
  // Pixel rows/cols whose centers can fall inside the box.
  int u0 = std::max(0, static_cast<int>(std::floor(box.x - 0.5)));
  int v0 = std::max(0, static_cast<int>(std::floor(box.y - 0.5)));
  int u1 = std::min(k.width - 1, static_cast<int>(std::ceil(box.x + box.w)));
  int v1 = std::min(k.height - 1, static_cast<int>(std::ceil(box.y + box.h)));
  for (int v = v0; v <= v1; ++v) {
    for (int u = u0; u <= u1; ++u) {
      if (!box.contains_pixel(u, v)) continue;
      double d = depth(v, u);
      if (valid_depth(d, z_max)) cloud.points.push_back(backproject(k, u + 0.5, v + 0.5, d));
    }
  }
  return cloud;
}

/// Component-wise mean of a non-empty cloud.
inline Vec3 frustum_average(const PointCloud& cloud) {
  if (cloud.empty()) throw std::domain_error("frustum_average: empty cloud");
  Vec3 sum = Vec3::Zero();
  for (const auto& p : cloud.points) sum += p;
  return sum / static_cast<double>(cloud.size());
}

/// Square box around the projection of a sphere; nullopt when the center is behind the camera.
inline std::optional<BoundingBox> sphere_bbox(const CameraIntrinsics& k, const Vec3& center, double radius) {
  if (!(center.z() > 1e-6)) return std::nullopt;
  Pixel c = project(k, center);
  double ru = k.fx * radius / center.z();
  double rv = k.fy * radius / center.z();
  return BoundingBox{c.u - ru, c.v - rv, 2 * ru, 2 * rv};
}

/// Intersection of a box with the image rectangle; nullopt when empty.
inline std::optional<BoundingBox> clip_to_image(const CameraIntrinsics& k, const BoundingBox& b) {
  double x0 = std::max(0.0, b.x), y0 = std::max(0.0, b.y);
  double x1 = std::min<double>(k.width, b.x + b.w), y1 = std::min<double>(k.height, b.y + b.h);
  if (x1 <= x0 || y1 <= y0) return std::nullopt;
  return BoundingBox{x0, y0, x1 - x0, y1 - y0};
}

}  // namespace avt

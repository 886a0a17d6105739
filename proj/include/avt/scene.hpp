#pragma once

#include "avt/camera.hpp"
#include "avt/common.hpp"
#include "avt/image.hpp"

#include <array>
#include <deque>
#include <limits>
#include <optional>
#include <random>
#include <string>
#include <string_view>
#include <vector>

namespace avt {

enum class PrimitiveKind { Sphere, Box, Cylinder, Capsule };

/// Solid in the target body frame. `dims` meaning depends on the kind:
/// sphere (radius), box (half extents x,y,z), cylinder (radius, half height along local z),
/// capsule (radius, half length of the segment along local z).
struct Primitive {
  PrimitiveKind kind = PrimitiveKind::Sphere;
  Vec3 position = Vec3::Zero();
  Quat orientation = Quat::Identity();
  Vec3 dims = Vec3::Ones();
  Vec3 albedo = Vec3::Constant(0.8);

  /// Radius of a sphere about the primitive center enclosing the solid.
  double local_radius() const {
    switch (kind) {
      case PrimitiveKind::Sphere: return dims.x();
      case PrimitiveKind::Box: return dims.norm();
      case PrimitiveKind::Cylinder: return std::hypot(dims.x(), dims.y());
      case PrimitiveKind::Capsule: return dims.x() + dims.y();
    }
    return 0;
  }
};

enum class Category { Asteroid, Capsule, Rocket, Satellite, Station };
inline constexpr std::array<Category, 5> kCategories = {Category::Asteroid, Category::Capsule, Category::Rocket,
                                                        Category::Satellite, Category::Station};

inline std::string_view category_name(Category c) {
  switch (c) {
    case Category::Asteroid: return "Asteroid";
    case Category::Capsule: return "Capsule";
    case Category::Rocket: return "Rocket";
    case Category::Satellite: return "Satellite";
    case Category::Station: return "Station";
  }
  return "?";
}

enum class Split { Train, Eval };

struct TargetModel {
  std::string id;
  Category category = Category::Asteroid;
  std::vector<Primitive> primitives;
  double bounding_radius = 0;
  Split split = Split::Train;
};

inline double enclosing_radius(const std::vector<Primitive>& prims) {
  double r = 0;
  for (const auto& p : prims) r = std::max(r, p.position.norm() + p.local_radius());
  return r;
}

inline constexpr double kMaxModelRadius = 2.5;

namespace detail {

inline Quat axis_to(const Vec3& axis) { return Quat::FromTwoVectors(Vec3::UnitZ(), axis.normalized()); }

inline Primitive make(PrimitiveKind k, Vec3 pos, Quat q, Vec3 dims, Vec3 albedo) {
  return Primitive{k, pos, q.normalized(), dims, albedo};
}

}  // namespace detail

/// Deterministic procedural model for (category, seed). Sizes are drawn so that the
/// enclosing radius stays below kMaxModelRadius; oversize draws are rescaled.
inline TargetModel generate_model(Category category, std::uint64_t seed) {
  using detail::make;
  std::mt19937_64 rng(derive_seed(seed, static_cast<std::uint64_t>(category) + 101));
  auto uni = [&](double a, double b) { return std::uniform_real_distribution<double>(a, b)(rng); };
  TargetModel m;
  m.category = category;
  m.id = std::string(category_name(category)) + "-" + (seed < 10 ? "0" : "") + std::to_string(seed);
  auto& P = m.primitives;

  switch (category) {
    case Category::Asteroid: {
      int n = std::uniform_int_distribution<int>(4, 8)(rng);
      double g = uni(0.35, 0.6);
      for (int i = 0; i < n; ++i) {
        Vec3 c(uni(-0.6, 0.6), uni(-0.6, 0.6), uni(-0.6, 0.6));
        if (i == 0) c.setZero();
        double shade = g * uni(0.85, 1.15);
        P.push_back(make(PrimitiveKind::Sphere, c, Quat::Identity(), Vec3(uni(0.45, 0.9), 0, 0),
                         Vec3::Constant(shade)));
      }
      break;
    }
    case Category::Capsule: {
      double r = uni(0.5, 0.7), hl = uni(0.2, 0.5);
      Vec3 body(uni(0.7, 0.9), uni(0.7, 0.9), uni(0.75, 0.95));
      P.push_back(make(PrimitiveKind::Capsule, Vec3::Zero(), Quat::Identity(), Vec3(r, hl, 0), body));
      // heat shield: stacked cylinders narrowing towards -z
      Vec3 shield(uni(0.3, 0.45), uni(0.2, 0.3), uni(0.15, 0.25));
      double z = -(hl + 0.6 * r);
      for (int i = 0; i < 3; ++i) {
        double ri = r * (1.25 - 0.3 * i);
        P.push_back(make(PrimitiveKind::Cylinder, Vec3(0, 0, z - 0.1 * i), Quat::Identity(), Vec3(ri, 0.06, 0),
                         shield));
      }
      break;
    }
    case Category::Rocket: {
      double r = uni(0.3, 0.45), hh = uni(1.2, 1.7);
      Vec3 hull(uni(0.75, 0.95), uni(0.75, 0.95), uni(0.75, 0.95));
      P.push_back(make(PrimitiveKind::Cylinder, Vec3::Zero(), Quat::Identity(), Vec3(r, hh, 0), hull));
      P.push_back(make(PrimitiveKind::Sphere, Vec3(0, 0, hh), Quat::Identity(), Vec3(r * 0.95, 0, 0), hull));
      int fins = std::uniform_int_distribution<int>(3, 4)(rng);
      Vec3 fin_color(uni(0.5, 0.9), uni(0.1, 0.3), uni(0.1, 0.3));
      for (int i = 0; i < fins; ++i) {
        double phi = 2 * kPi * i / fins;
        Vec3 dir(std::cos(phi), std::sin(phi), 0);
        Quat q(Eigen::AngleAxisd(phi, Vec3::UnitZ()));
        P.push_back(make(PrimitiveKind::Box, dir * (r + 0.2) + Vec3(0, 0, -hh + 0.35), q, Vec3(0.22, 0.03, 0.35),
                         fin_color));
      }
      break;
    }
    case Category::Satellite: {
      Vec3 half(uni(0.4, 0.7), uni(0.4, 0.7), uni(0.4, 0.7));
      Vec3 gold(uni(0.8, 0.95), uni(0.6, 0.75), uni(0.15, 0.3));
      P.push_back(make(PrimitiveKind::Box, Vec3::Zero(), Quat::Identity(), half, gold));
      double pw = uni(0.5, 0.8), ph = uni(0.3, 0.45);
      Vec3 panel(uni(0.1, 0.2), uni(0.15, 0.25), uni(0.45, 0.65));
      for (int s : {-1, 1}) {
        P.push_back(make(PrimitiveKind::Box, Vec3(s * (half.x() + 0.1 + pw), 0, 0), Quat::Identity(),
                         Vec3(pw, ph, 0.02), panel));
      }
      P.push_back(make(PrimitiveKind::Cylinder, Vec3(0, 0, half.z() + 0.15), Quat::Identity(), Vec3(0.08, 0.15, 0),
                       Vec3::Constant(0.85)));
      break;
    }
    case Category::Station: {
      int n = std::uniform_int_distribution<int>(2, 4)(rng);
      Vec3 hull(uni(0.75, 0.9), uni(0.75, 0.9), uni(0.75, 0.9));
      double seg = uni(0.35, 0.5);
      double start = -seg * (n - 1);
      for (int i = 0; i < n; ++i) {
        Vec3 c(0, 0, start + 2 * seg * i);
        bool cross = (i % 2 == 1);
        Quat q = cross ? detail::axis_to(Vec3::UnitX()) : Quat::Identity();
        P.push_back(make(PrimitiveKind::Cylinder, c, q, Vec3(uni(0.25, 0.4), cross ? seg * 1.2 : seg, 0), hull));
      }
      Vec3 panel(uni(0.1, 0.2), uni(0.15, 0.25), uni(0.45, 0.65));
      for (int s : {-1, 1}) {
        P.push_back(make(PrimitiveKind::Box, Vec3(0, s * 0.9, 0), Quat::Identity(), Vec3(0.25, 0.45, 0.02), panel));
      }
      break;
    }
  }

  double r = enclosing_radius(P);
  if (r > kMaxModelRadius) {
    double s = kMaxModelRadius / r;
    for (auto& p : P) {
      p.position *= s;
      p.dims *= s;
    }
  }
  m.bounding_radius = enclosing_radius(P);
  return m;
}

/// The canonical 18-model catalog: seed s -> category s mod 5. The eval split holds the
/// last model of every category plus the next-to-last Asteroid (6 of 18).
inline std::vector<TargetModel> canonical_catalog(std::uint64_t catalog_seed = 0) {
  constexpr int kCount = 18;
  std::vector<TargetModel> models;
  for (int s = 0; s < kCount; ++s) {
    auto m = generate_model(kCategories[s % 5], derive_seed(catalog_seed, static_cast<std::uint64_t>(s)));
    m.id = std::string(category_name(m.category)) + "-" + (s < 10 ? "0" : "") + std::to_string(s);
    models.push_back(std::move(m));
  }
  for (Category c : kCategories) {
    std::vector<std::size_t> idx;
    for (std::size_t i = 0; i < models.size(); ++i) {
      if (models[i].category == c) idx.push_back(i);
    }
    models[idx.back()].split = Split::Eval;
    if (c == Category::Asteroid && idx.size() >= 2) models[idx[idx.size() - 2]].split = Split::Eval;
  }
  return models;
}

/// Single bright sphere, used by the reduced training task.
inline TargetModel sphere_model(double radius = 1.0, Vec3 albedo = Vec3::Constant(0.95)) {
  TargetModel m;
  m.id = "sphere";
  m.category = Category::Asteroid;
  m.primitives.push_back(Primitive{PrimitiveKind::Sphere, Vec3::Zero(), Quat::Identity(), Vec3(radius, 0, 0), albedo});
  m.bounding_radius = radius;
  return m;
}

/// Rendered sensor output. Color in [0,1]; depth in (0, z_max], z_max marks background.
struct Frame {
  Image<double> color;
  DepthMap depth;
  double timestamp = 0;
};

struct Pose {
  Vec3 position = Vec3::Zero();
  Quat orientation = Quat::Identity();
};

struct RayHit {
  double t = std::numeric_limits<double>::infinity();
  Vec3 normal = Vec3::Zero();
};

namespace ray {

// All intersections are in the primitive's local frame; direction need not be unit length.
inline std::optional<RayHit> sphere(const Vec3& o, const Vec3& d, double r, const Vec3& c = Vec3::Zero()) {
  Vec3 oc = o - c;
  double a = d.squaredNorm(), b = oc.dot(d), cc = oc.squaredNorm() - r * r;
  double disc = b * b - a * cc;
  if (disc < 0) return std::nullopt;
  double sq = std::sqrt(disc);
  double t = (-b - sq) / a;
  if (t <= 0) t = (-b + sq) / a;
  if (t <= 0) return std::nullopt;
  return RayHit{t, (oc + t * d) / r};
}

inline std::optional<RayHit> box(const Vec3& o, const Vec3& d, const Vec3& half) {
  double t0 = -std::numeric_limits<double>::infinity(), t1 = std::numeric_limits<double>::infinity();
  int axis0 = -1, axis1 = -1;
  for (int i = 0; i < 3; ++i) {
    if (std::abs(d[i]) < 1e-15) {
      if (std::abs(o[i]) > half[i]) return std::nullopt;
      continue;
    }
    double ta = (-half[i] - o[i]) / d[i], tb = (half[i] - o[i]) / d[i];
    if (ta > tb) std::swap(ta, tb);
    if (ta > t0) { t0 = ta; axis0 = i; }
    if (tb < t1) { t1 = tb; axis1 = i; }
    if (t0 > t1) return std::nullopt;
  }
  double t = t0;
  int axis = axis0;
  if (t <= 0) { t = t1; axis = axis1; }
  if (t <= 0 || axis < 0) return std::nullopt;
  Vec3 n = Vec3::Zero();
  Vec3 p = o + t * d;
  n[axis] = p[axis] > 0 ? 1.0 : -1.0;
  return RayHit{t, n};
}

inline std::optional<RayHit> cylinder(const Vec3& o, const Vec3& d, double r, double hh) {
  RayHit best;
  // lateral surface
  double a = d.x() * d.x() + d.y() * d.y();
  if (a > 1e-18) {
    double b = o.x() * d.x() + o.y() * d.y();
    double c = o.x() * o.x() + o.y() * o.y() - r * r;
    double disc = b * b - a * c;
    if (disc >= 0) {
      double sq = std::sqrt(disc);
      for (double t : {(-b - sq) / a, (-b + sq) / a}) {
        if (t <= 0 || t >= best.t) continue;
        double z = o.z() + t * d.z();
        if (std::abs(z) <= hh) {
          Vec3 p = o + t * d;
          best = RayHit{t, Vec3(p.x(), p.y(), 0) / r};
          break;
        }
      }
    }
  }
  // caps
  if (std::abs(d.z()) > 1e-18) {
    for (double s : {-1.0, 1.0}) {
      double t = (s * hh - o.z()) / d.z();
      if (t <= 0 || t >= best.t) continue;
      Vec3 p = o + t * d;
      if (p.x() * p.x() + p.y() * p.y() <= r * r) best = RayHit{t, Vec3(0, 0, s)};
    }
  }
  if (!std::isfinite(best.t)) return std::nullopt;
  return best;
}

inline std::optional<RayHit> capsule(const Vec3& o, const Vec3& d, double r, double hl) {
  RayHit best;
  double a = d.x() * d.x() + d.y() * d.y();
  if (a > 1e-18) {
    double b = o.x() * d.x() + o.y() * d.y();
    double c = o.x() * o.x() + o.y() * o.y() - r * r;
    double disc = b * b - a * c;
    if (disc >= 0) {
      double t = (-b - std::sqrt(disc)) / a;
      if (t > 0 && std::abs(o.z() + t * d.z()) <= hl) {
        Vec3 p = o + t * d;
        best = RayHit{t, Vec3(p.x(), p.y(), 0) / r};
      }
    }
  }
  for (double s : {-1.0, 1.0}) {
    if (auto h = sphere(o, d, r, Vec3(0, 0, s * hl)); h && h->t < best.t) {
      Vec3 p = o + h->t * d;
      // only the hemisphere beyond the segment end belongs to the surface
      if (s * p.z() >= hl - 1e-12) best = *h;
    }
  }
  if (!std::isfinite(best.t)) return std::nullopt;
  return best;
}

inline std::optional<RayHit> intersect(const Primitive& prim, const Vec3& o, const Vec3& d) {
  switch (prim.kind) {
    case PrimitiveKind::Sphere: return sphere(o, d, prim.dims.x());
    case PrimitiveKind::Box: return box(o, d, prim.dims);
    case PrimitiveKind::Cylinder: return cylinder(o, d, prim.dims.x(), prim.dims.y());
    case PrimitiveKind::Capsule: return capsule(o, d, prim.dims.x(), prim.dims.y());
  }
  return std::nullopt;
}

}  // namespace ray

struct RenderOptions {
  double z_max = 20.0;
  double ambient = 0.1;
  /// Unit direction from the surface towards the light, camera frame.
  Vec3 light = Vec3(0.3, -0.4, -1.0).normalized();
};

/// Ray casts `model` placed at `pose` (camera frame). Nearest hit wins; misses are black at z_max.
inline Frame render(const CameraIntrinsics& k, const TargetModel& model, const Pose& pose,
                    const RenderOptions& opt = {}) {
  Frame f{Image<double>(k.height, k.width, 3, 0.0), DepthMap(k.height, k.width, 1, opt.z_max), 0.0};
  const Vec3 light = opt.light.normalized();

  struct Placed {
    const Primitive* prim;
    Mat3 rot;  // primitive local -> camera
    Vec3 center;
    double radius;
  };
  std::vector<Placed> placed;
  const Mat3 R = pose.orientation.normalized().toRotationMatrix();
  for (const auto& p : model.primitives) {
    placed.push_back({&p, R * p.orientation.normalized().toRotationMatrix(), pose.position + R * p.position,
                      p.local_radius()});
  }

  // Conservative pixel window from the bounding sphere; everything else stays background.
  int u0 = 0, u1 = k.width - 1, v0 = 0, v1 = k.height - 1;
  const Vec3& c = pose.position;
  double br = model.bounding_radius;
  if (c.z() + br <= 0) return f;
  if (c.z() - br > 1e-3) {
    // The sphere projected along y (resp. x) is a disk; its angular half-width bounds u (resp. v).
    double ang_x = std::asin(std::min(1.0, br / std::hypot(c.x(), c.z())));
    double ang_y = std::asin(std::min(1.0, br / std::hypot(c.y(), c.z())));
    double ax = std::atan2(c.x(), c.z()), ay = std::atan2(c.y(), c.z());
    const double lim = kPi / 2 - 1e-6;
    auto to_u = [&](double a) { return k.fx * std::tan(std::clamp(a, -lim, lim)) + k.cx; };
    auto to_v = [&](double a) { return k.fy * std::tan(std::clamp(a, -lim, lim)) + k.cy; };
    u0 = std::max(0, static_cast<int>(std::floor(to_u(ax - ang_x * 1.05))) - 1);
    u1 = std::min(k.width - 1, static_cast<int>(std::ceil(to_u(ax + ang_x * 1.05))) + 1);
    v0 = std::max(0, static_cast<int>(std::floor(to_v(ay - ang_y * 1.05))) - 1);
    v1 = std::min(k.height - 1, static_cast<int>(std::ceil(to_v(ay + ang_y * 1.05))) + 1);
  }

  for (int v = v0; v <= v1; ++v) {
    for (int u = u0; u <= u1; ++u) {
      Vec3 d((u + 0.5 - k.cx) / k.fx, (v + 0.5 - k.cy) / k.fy, 1.0);
      if (!ray::sphere(Vec3::Zero(), d, br * (1 + 1e-9) + 1e-9, c)) continue;
      RayHit best;
      const Placed* hit_prim = nullptr;
      for (const auto& pl : placed) {
        if (!ray::sphere(Vec3::Zero(), d, pl.radius * (1 + 1e-9) + 1e-9, pl.center)) continue;
        Vec3 o_l = pl.rot.transpose() * (-pl.center);
        Vec3 d_l = pl.rot.transpose() * d;
        if (auto h = ray::intersect(*pl.prim, o_l, d_l); h && h->t < best.t) {
          best = RayHit{h->t, pl.rot * h->normal};
          hit_prim = &pl;
        }
      }
      if (!hit_prim) continue;
      double depth = best.t;  // d.z == 1, so t is the camera-frame z of the hit
      if (!(depth < opt.z_max)) continue;
      Vec3 n = best.normal.normalized();
      if (n.dot(d) > 0) n = -n;
      double lambert = std::max(0.0, n.dot(light));
      for (int ch = 0; ch < 3; ++ch) {
        f.color(v, u, ch) = std::min(1.0, hit_prim->prim->albedo[ch] * lambert + opt.ambient);
      }
      f.depth(v, u) = depth;
    }
  }
  return f;
}

/// Photometric blur: mean color over the newest min(N, available) frames; depth from the newest.
/// `history` is ordered most recent first.
inline Frame blur_frames(const std::deque<Frame>& history, int n) {
  if (history.empty()) throw std::invalid_argument("blur_frames: empty history");
  if (n < 1) throw std::invalid_argument("blur_frames: N must be >= 1");
  std::size_t count = std::min<std::size_t>(static_cast<std::size_t>(n), history.size());
  Frame out = history.front();
  if (count == 1) return out;
  auto dst = out.color.data();
  for (std::size_t i = 1; i < count; ++i) {
    auto src = history[i].color.data();
    for (std::size_t j = 0; j < dst.size(); ++j) dst[j] += src[j];
  }
  for (auto& x : dst) x /= static_cast<double>(count);
  return out;
}

/// Blur level 0 disables blur; level k in 1..4 averages k+1 frames.
inline int blur_window(int level) { return level <= 0 ? 1 : level + 1; }

}  // namespace avt

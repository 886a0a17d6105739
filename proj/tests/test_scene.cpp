#include "avt/scene.hpp"

#include <gtest/gtest.h>

#include <map>
#include <random>

using namespace avt;

namespace {

Pose at(double x, double y, double z) { return Pose{Vec3(x, y, z), Quat::Identity()}; }

double max_extent(const TargetModel& m) {
  // brute force: sample every primitive's surface bound from its dims
  double r = 0;
  for (const auto& p : m.primitives) {
    const Vec3& d = p.dims;
    double local = 0;
    switch (p.kind) {
      case PrimitiveKind::Sphere: local = d.x(); break;
      case PrimitiveKind::Box:
        for (int sx : {-1, 1})
          for (int sy : {-1, 1})
            for (int sz : {-1, 1}) {
              Vec3 corner = p.position + p.orientation * Vec3(sx * d.x(), sy * d.y(), sz * d.z());
              r = std::max(r, corner.norm());
            }
        continue;
      case PrimitiveKind::Cylinder: local = std::hypot(d.x(), d.y()); break;
      case PrimitiveKind::Capsule: local = d.x() + d.y(); break;
    }
    r = std::max(r, p.position.norm() + local);
  }
  return r;
}

}  // namespace

TEST(Models, GenerationIsDeterministic) {
  for (Category c : kCategories) {
    auto a = generate_model(c, 0), b = generate_model(c, 0);
    ASSERT_EQ(a.primitives.size(), b.primitives.size());
    for (std::size_t i = 0; i < a.primitives.size(); ++i) {
      EXPECT_EQ(a.primitives[i].position, b.primitives[i].position);
      EXPECT_EQ(a.primitives[i].dims, b.primitives[i].dims);
      EXPECT_EQ(a.primitives[i].orientation.coeffs(), b.primitives[i].orientation.coeffs());
    }
    EXPECT_EQ(a.bounding_radius, b.bounding_radius);
  }
}

TEST(Models, RecipesAndInvariants) {
  for (std::uint64_t seed = 0; seed < 40; ++seed) {
    for (Category c : kCategories) {
      auto m = generate_model(c, seed);
      ASSERT_FALSE(m.primitives.empty());
      EXPECT_EQ(m.category, c);
      EXPECT_LE(m.bounding_radius, 2.5 + 1e-12);
      EXPECT_GE(m.bounding_radius + 1e-9, max_extent(m));
      for (const auto& p : m.primitives) {
        EXPECT_GT(p.dims.x(), 0.0);
        if (p.kind == PrimitiveKind::Box) {
          EXPECT_GT(p.dims.minCoeff(), 0.0);
        }
        EXPECT_NEAR(p.orientation.norm(), 1.0, 1e-9);
        EXPECT_GE(p.albedo.minCoeff(), 0.0);
        EXPECT_LE(p.albedo.maxCoeff(), 1.0);
      }
      if (c == Category::Asteroid) {
        EXPECT_GE(m.primitives.size(), 4u);
        EXPECT_LE(m.primitives.size(), 8u);
        for (const auto& p : m.primitives) EXPECT_EQ(p.kind, PrimitiveKind::Sphere);
      }
    }
  }
}

TEST(Catalog, EighteenModelsWithStableSplit) {
  auto cat = canonical_catalog();
  ASSERT_EQ(cat.size(), 18u);
  int train = 0, eval = 0;
  std::map<Category, int> eval_per_cat;
  for (const auto& m : cat) {
    if (m.split == Split::Train) {
      ++train;
    } else {
      ++eval;
      ++eval_per_cat[m.category];
    }
  }
  EXPECT_EQ(train, 12);
  EXPECT_EQ(eval, 6);
  for (Category c : kCategories) EXPECT_GE(eval_per_cat[c], 1);
  auto again = canonical_catalog();
  for (std::size_t i = 0; i < cat.size(); ++i) {
    EXPECT_EQ(cat[i].id, again[i].id);
    EXPECT_EQ(cat[i].split, again[i].split);
    EXPECT_EQ(cat[i].category, kCategories[i % 5]);
  }
}

TEST(Rays, ClosedFormSphereAndBox) {
  auto h = ray::sphere(Vec3::Zero(), Vec3(0, 0, 1), 1.0, Vec3(0, 0, 5));
  ASSERT_TRUE(h);
  EXPECT_DOUBLE_EQ(h->t, 4.0);
  EXPECT_FALSE(ray::sphere(Vec3::Zero(), Vec3(0, 1, 0), 1.0, Vec3(0, 0, 5)));
  auto b = ray::box(Vec3(0, 0, -5), Vec3(0, 0, 1), Vec3(1, 2, 0.5));
  ASSERT_TRUE(b);
  EXPECT_DOUBLE_EQ(b->t, 4.5);
  EXPECT_EQ(b->normal, Vec3(0, 0, -1));
  auto cyl = ray::cylinder(Vec3(-5, 0, 0), Vec3(1, 0, 0), 0.5, 1.0);
  ASSERT_TRUE(cyl);
  EXPECT_DOUBLE_EQ(cyl->t, 4.5);
  auto cap = ray::capsule(Vec3(0, 0, -5), Vec3(0, 0, 1), 0.5, 1.0);
  ASSERT_TRUE(cap);
  EXPECT_DOUBLE_EQ(cap->t, 3.5);
}

TEST(Render, UnitSphereOnAxis) {
  auto k = default_camera();
  auto m = sphere_model(1.0);
  Frame f = render(k, m, at(0, 0, 5));
  // pixel (128,128) has its center slightly off axis; compare with the closed form
  Vec3 d((128.5 - k.cx) / k.fx, (128.5 - k.cy) / k.fy, 1.0);
  auto h = ray::sphere(Vec3::Zero(), d, 1.0, Vec3(0, 0, 5));
  ASSERT_TRUE(h);
  EXPECT_NEAR(f.depth(128, 128), h->t, 1e-9);
  EXPECT_NEAR(f.depth(128, 128), 4.0, 1e-3);
  EXPECT_EQ(f.depth(0, 0), 20.0);
}

TEST(Render, DepthMatchesClosedFormSphereEverywhere) {
  auto k = intrinsics_from_fov(deg2rad(60), deg2rad(60), 64, 64);
  auto m = sphere_model(0.8);
  Vec3 c(0.4, -0.3, 4.0);
  Frame f = render(k, m, at(c.x(), c.y(), c.z()));
  int hits = 0;
  for (int v = 0; v < 64; ++v) {
    for (int u = 0; u < 64; ++u) {
      Vec3 d((u + 0.5 - k.cx) / k.fx, (v + 0.5 - k.cy) / k.fy, 1.0);
      auto h = ray::sphere(Vec3::Zero(), d, 0.8, c);
      if (h) {
        ++hits;
        EXPECT_NEAR(f.depth(v, u), h->t * d.z(), 1e-6);
      } else {
        EXPECT_EQ(f.depth(v, u), 20.0);
      }
    }
  }
  EXPECT_GT(hits, 100);
}

TEST(Render, BoxFaceDepthIsFlat) {
  auto k = intrinsics_from_fov(deg2rad(60), deg2rad(60), 64, 64);
  TargetModel m;
  m.id = "box";
  m.primitives.push_back(Primitive{PrimitiveKind::Box, Vec3::Zero(), Quat::Identity(), Vec3(1, 1, 0.5), Vec3::Ones()});
  m.bounding_radius = enclosing_radius(m.primitives);
  Frame f = render(k, m, at(0, 0, 6));
  EXPECT_NEAR(f.depth(32, 32), 5.5, 1e-9);
  EXPECT_NEAR(f.depth(30, 34), 5.5, 1e-9);
}

TEST(Render, BehindCameraIsBackground) {
  auto k = default_camera();
  Frame f = render(k, sphere_model(1.0), at(0, 0, -5));
  for (double d : f.depth.data()) ASSERT_EQ(d, 20.0);
  for (double c : f.color.data()) ASSERT_EQ(c, 0.0);
}

TEST(Render, DeterministicAndConsistentShading) {
  auto k = intrinsics_from_fov(deg2rad(60), deg2rad(60), 96, 96);
  auto cat = canonical_catalog();
  for (const auto& m : {cat[0], cat[3], cat[9]}) {
    Pose p{Vec3(0.2, 0.1, 6), Quat(Eigen::AngleAxisd(0.7, Vec3(1, 2, 3).normalized()))};
    Frame a = render(k, m, p), b = render(k, m, p);
    EXPECT_EQ(a.color, b.color);
    EXPECT_EQ(a.depth, b.depth);
    int lit = 0;
    for (int v = 0; v < 96; ++v) {
      for (int u = 0; u < 96; ++u) {
        bool hit = a.depth(v, u) < 20.0;
        double sum = a.color(v, u, 0) + a.color(v, u, 1) + a.color(v, u, 2);
        if (hit) {
          ++lit;
          EXPECT_GT(sum, 0.0);
          for (int c = 0; c < 3; ++c) EXPECT_LE(a.color(v, u, c), 1.0);
          EXPECT_GT(a.depth(v, u), 0.0);
        } else {
          EXPECT_EQ(sum, 0.0);
          EXPECT_EQ(a.depth(v, u), 20.0);
        }
      }
    }
    EXPECT_GT(lit, 0) << m.id;
  }
}

TEST(Render, WindowDoesNotClipOffAxisTargets) {
  // Compare against an unwindowed brute-force pass over all pixels.
  auto k = intrinsics_from_fov(deg2rad(60), deg2rad(60), 48, 48);
  auto m = generate_model(Category::Station, 4);
  Pose p{Vec3(2.0, -1.5, 4.0), Quat(Eigen::AngleAxisd(1.1, Vec3::UnitY()))};
  Frame f = render(k, m, p);
  const Mat3 R = p.orientation.toRotationMatrix();
  for (int v = 0; v < 48; ++v) {
    for (int u = 0; u < 48; ++u) {
      Vec3 d((u + 0.5 - k.cx) / k.fx, (v + 0.5 - k.cy) / k.fy, 1.0);
      double best = std::numeric_limits<double>::infinity();
      for (const auto& prim : m.primitives) {
        Mat3 rot = R * prim.orientation.toRotationMatrix();
        Vec3 center = p.position + R * prim.position;
        if (auto h = ray::intersect(prim, rot.transpose() * (-center), rot.transpose() * d)) best = std::min(best, h->t);
      }
      double expect = best < 20.0 ? best : 20.0;
      EXPECT_NEAR(f.depth(v, u), expect, 1e-9) << u << "," << v;
    }
  }
}

TEST(Blur, IdentityMeanAndConvexity) {
  std::deque<Frame> hist;
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u(0, 1);
  for (int i = 0; i < 5; ++i) {
    Frame f{Image<double>(6, 8, 3, 0.0), DepthMap(6, 8, 1, 20.0), double(i)};
    for (auto& x : f.color.data()) x = u(rng);
    for (auto& x : f.depth.data()) x = 1 + u(rng);
    hist.push_front(f);
  }
  Frame one = blur_frames(hist, 1);
  EXPECT_EQ(one.color, hist.front().color);

  Frame five = blur_frames(hist, 5);
  EXPECT_EQ(five.depth, hist.front().depth);
  for (std::size_t j = 0; j < five.color.data().size(); ++j) {
    double s = 0, lo = 1, hi = 0;
    for (const auto& f : hist) {
      s += f.color.data()[j];
      lo = std::min(lo, f.color.data()[j]);
      hi = std::max(hi, f.color.data()[j]);
    }
    EXPECT_NEAR(five.color.data()[j], s / 5, 1e-12);
    EXPECT_GE(five.color.data()[j], lo - 1e-15);
    EXPECT_LE(five.color.data()[j], hi + 1e-15);
  }
  // shorter histories use what is available
  std::deque<Frame> two{hist[0], hist[1]};
  EXPECT_EQ(blur_frames(two, 4).color, blur_frames(hist, 2).color);

  Frame a{Image<double>(2, 2, 3, 0.2), DepthMap(2, 2, 1, 5.0), 0}, b{Image<double>(2, 2, 3, 0.4), DepthMap(2, 2, 1, 6.0), 0};
  Frame m = blur_frames(std::deque<Frame>{b, a}, 2);
  for (double x : m.color.data()) EXPECT_NEAR(x, 0.3, 1e-15);
  EXPECT_EQ(blur_window(0), 1);
  EXPECT_EQ(blur_window(1), 2);
  EXPECT_EQ(blur_window(4), 5);
}

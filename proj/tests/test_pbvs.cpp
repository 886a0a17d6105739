#include "avt/agent.hpp"
#include "avt/pbvs.hpp"

#include <gtest/gtest.h>

#include <random>

using namespace avt;

namespace {

double texture(double u, double v) {
  return 0.5 + 0.2 * std::sin(0.7 * u) * std::cos(0.45 * v) + 0.15 * std::sin(0.23 * u + 0.31 * v);
}

/// Smooth texture sampled with an offset, so a shifted copy is exact.
Image<double> textured(int w, int h, int du = 0, int dv = 0) {
  Image<double> img(h, w, 3);
  for (int v = 0; v < h; ++v)
    for (int u = 0; u < w; ++u)
      for (int c = 0; c < 3; ++c) img(v, u, c) = texture(u - du, v - dv) * (0.8 + 0.1 * c);
  return img;
}

}  // namespace

TEST(Tracker, SelfMatch) {
  auto img = textured(96, 96);
  TemplateTracker t(img, BoundingBox{30, 30, 20, 16});
  EXPECT_GE(t.score_at(to_gray(img), 30, 30), 0.999);
  auto r = t.update(img);
  EXPECT_TRUE(r.confident);
  EXPECT_EQ(r.bbox.x, 30);
  EXPECT_EQ(r.bbox.y, 30);
}

TEST(Tracker, RecoversShift) {
  TemplateTracker t(textured(96, 96), BoundingBox{30, 30, 20, 16});
  auto r = t.update(textured(96, 96, 3, -2));
  EXPECT_TRUE(r.confident);
  EXPECT_EQ(r.bbox.x, 33);
  EXPECT_EQ(r.bbox.y, 28);
  EXPECT_GE(r.score, 0.999);
}

TEST(Tracker, UniformFrameIsNotConfident) {
  TemplateTracker t(textured(64, 64), BoundingBox{20, 20, 16, 16});
  auto r = t.update(Image<double>(64, 64, 3, 0.4));
  EXPECT_FALSE(r.confident);
  EXPECT_LT(r.score, t.params().min_score);
  EXPECT_EQ(r.bbox.x, 20);
  EXPECT_EQ(r.bbox.y, 20);
}

TEST(Tracker, NccIsAffineInvariant) {
  auto img = textured(64, 64);
  TemplateTracker t(img, BoundingBox{10, 12, 16, 16});
  auto g = to_gray(textured(64, 64, 1, 2));
  Image<double> g2 = g;
  for (auto& v : g2.data()) v = 2.5 * v + 0.3;
  for (int py = 5; py < 20; py += 3)
    for (int px = 5; px < 20; px += 4) EXPECT_NEAR(t.score_at(g, px, py), t.score_at(g2, px, py), 1e-9);
}

TEST(Tracker, RejectsBadInput) {
  auto img = textured(32, 32);
  EXPECT_THROW(TemplateTracker(img, BoundingBox{40, 40, 5, 5}), std::invalid_argument);
  TrackerParams p;
  p.update_rate = 1.5;
  EXPECT_THROW(TemplateTracker(img, BoundingBox{4, 4, 5, 5}, p), std::invalid_argument);
}

namespace {

/// Mean of analytic ray-sphere hits through every pixel center inside `box`.
Vec3 ray_oracle_mean(const CameraIntrinsics& k, const BoundingBox& box, const Vec3& c, double r) {
  Vec3 sum = Vec3::Zero();
  int n = 0;
  for (int v = 0; v < k.height; ++v)
    for (int u = 0; u < k.width; ++u) {
      double pu = u + 0.5, pv = v + 0.5;
      if (pu < box.x || pu >= box.x + box.w || pv < box.y || pv >= box.y + box.h) continue;
      Vec3 d((pu - k.cx) / k.fx, (pv - k.cy) / k.fy, 1.0);
      double a = d.squaredNorm(), b = -2 * d.dot(c), cc = c.squaredNorm() - r * r;
      double disc = b * b - 4 * a * cc;
      if (disc < 0) continue;
      sum += (-b - std::sqrt(disc)) / (2 * a) * d;
      ++n;
    }
  return n ? Vec3(sum / n) : Vec3(Vec3::Constant(NAN));
}

}  // namespace

TEST(Estimate3d, SphereSurfaceMeanMatchesRayOracle) {
  const double r = 0.5;
  auto k = intrinsics_from_fov(deg2rad(60), deg2rad(60), 128, 128);
  for (Vec3 c : {Vec3(0, 0, 5), Vec3(0.3, -0.2, 5), Vec3(-1, 0.6, 8)}) {
    Frame f = render(k, sphere_model(r), Pose{c, Quat::Identity()});
    auto box = *clip_to_image(k, *sphere_bbox(k, c, r));
    auto est = estimate_3d(f, box, k, 20.0, Vec3::Zero());
    ASSERT_FALSE(est.held);
    EXPECT_LE((est.position - ray_oracle_mean(k, box, c, r)).norm(), 1e-6);
    EXPECT_LT(est.position.z(), c.z());
  }
}

TEST(Estimate3d, OnAxisSphereBiasMatchesContinuousIntegral) {
  // Continuous mean depth offset of the visible cap, integrating uniformly over the image plane.
  // Orthographic projection would give 2r/3; perspective pushes it slightly higher.
  const double r = 0.5, z = 5.0, half = r / z;
  const int n = 1500;
  double sum = 0;
  long count = 0;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      double x = ((i + 0.5) / n * 2 - 1) * half, y = ((j + 0.5) / n * 2 - 1) * half;
      double a = x * x + y * y + 1, disc = z * z - a * (z * z - r * r);
      if (disc < 0) continue;
      sum += (z - std::sqrt(disc)) / a;
      ++count;
    }
  const double bias = z - sum / count;
  EXPECT_GT(bias, 2 * r / 3);

  auto k = intrinsics_from_fov(deg2rad(60), deg2rad(60), 256, 256);
  const Vec3 c(0, 0, z);
  Frame f = render(k, sphere_model(r), Pose{c, Quat::Identity()});
  auto est = estimate_3d(f, *clip_to_image(k, *sphere_bbox(k, c, r)), k, 20.0, Vec3::Zero());
  EXPECT_NEAR((est.position - c).norm(), bias, 2e-3);
  EXPECT_LE(std::hypot(est.position.x(), est.position.y()), 0.01);
}

TEST(Estimate3d, EmptyProposalHoldsPrevious) {
  auto k = intrinsics_from_fov(deg2rad(60), deg2rad(60), 64, 64);
  Frame f = render(k, sphere_model(0.5), Pose{Vec3(0, 0, 5), Quat::Identity()});
  Vec3 prev(1, 2, 3);
  auto est = estimate_3d(f, BoundingBox{0, 0, 5, 5}, k, 20.0, prev);
  EXPECT_TRUE(est.held);
  EXPECT_EQ(est.position, prev);
}

TEST(Pid, ProportionalIntegralDerivative) {
  PidController p({Vec3(2, 2, 2), Vec3::Zero(), Vec3::Zero()}, 5.0);
  EXPECT_EQ(p.update(Vec3(1, -0.5, 0), 0.1), Vec3(2, -1, 0));

  PidController i({Vec3::Zero(), Vec3::Ones(), Vec3::Zero()}, 5.0);
  Vec3 u;
  for (int n = 0; n < 3; ++n) u = i.update(Vec3(1, 0, 0), 0.1);
  EXPECT_NEAR(u.x(), 0.3, 1e-15);
  EXPECT_NEAR(i.integral().x(), 0.3, 1e-15);

  PidController d({Vec3::Zero(), Vec3::Zero(), Vec3::Ones()}, 5.0);
  EXPECT_EQ(d.update(Vec3(1, 0, 0), 0.1), Vec3::Zero());
  EXPECT_NEAR(d.update(Vec3(1.2, 0, 0), 0.1).x(), 2.0, 1e-12);
  d.reset();
  EXPECT_EQ(d.update(Vec3(3, 0, 0), 0.1), Vec3::Zero());
}

TEST(Pid, AntiWindupFreezesIntegral) {
  PidController p({Vec3::Constant(1), Vec3::Constant(1), Vec3::Zero()}, 5.0);
  for (int n = 0; n < 50; ++n) {
    Vec3 u = p.update(Vec3(10, 0, 0), 0.1);
    EXPECT_EQ(u.x(), 5.0);
  }
  EXPECT_EQ(p.integral().x(), 0.0);
  // the output leaves saturation as soon as the error drops
  EXPECT_NEAR(p.update(Vec3(1, 0, 0), 0.1).x(), 1.1, 1e-12);
}

TEST(Pid, ZeroGainsAndValidation) {
  PidController z({}, 5.0);
  EXPECT_EQ(z.update(Vec3(3, -4, 9), 0.1), Vec3::Zero());
  EXPECT_THROW(PidController({Vec3(-1, 0, 0), Vec3::Zero(), Vec3::Zero()}, 5.0), std::invalid_argument);
  EXPECT_THROW(z.update(Vec3::Zero(), 0.0), std::domain_error);
}

TEST(PbvsAgent, OracleBoxConvergesInVelocityMode) {
  EnvConfig cfg;
  cfg.resolution = 64;
  cfg.obs_size = 16;
  cfg.control_mode = ControlMode::Velocity;
  cfg.max_steps = 150;
  Environment env(cfg);
  TargetState t;
  t.position = Vec3(1.0, -0.5, 7.0);
  env.reset_with(sphere_model(0.15), ChaserState{}, t);
  PbvsAgent agent(ControlMode::Velocity, BoxSource::GroundTruth);
  agent.reset(make_view(env), 0);
  double e0 = tracking_error(env.relative().body), e = e0;
  while (!env.done()) e = env.step(agent.act(make_view(env))).error;
  EXPECT_GT(e0, 2.0);
  EXPECT_LT(e, 0.15);
  EXPECT_EQ(agent.name(), "pbvs-oracle");
}

TEST(PbvsAgent, RejectsDiscreteControl) {
  EXPECT_THROW(PbvsAgent(ControlMode::PositionStep, BoxSource::Tracker), std::invalid_argument);
}

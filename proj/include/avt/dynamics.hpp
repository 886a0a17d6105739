#pragma once

#include "avt/common.hpp"

#include <random>

namespace avt {

inline constexpr double kChaserMass = 113.9;     // kg
inline constexpr double kForceLimit = 50.0;      // N, infinity norm
inline constexpr double kVelocityLimit = 5.0;    // m/s, infinity norm
inline constexpr double kStepSize = 0.5;         // m per discrete step
inline constexpr double kNominalDt = 0.1;        // s

struct ChaserState {
  Vec3 position = Vec3::Zero();  // reference frame
  Vec3 velocity = Vec3::Zero();
  double mass = kChaserMass;
};

struct TargetState {
  Vec3 position = Vec3::Zero();
  Vec3 velocity = Vec3::Zero();  // constant within an episode
  Vec3 attitude = Vec3::Zero();  // (alpha, beta, gamma), radians
  Vec3 angular_rate = Vec3::Zero();

  /// Orientation from the attitude angles, applied as Rz(gamma) * Ry(beta) * Rx(alpha).
  Quat orientation() const {
    return Quat(Eigen::AngleAxisd(attitude.z(), Vec3::UnitZ()) * Eigen::AngleAxisd(attitude.y(), Vec3::UnitY()) *
                Eigen::AngleAxisd(attitude.x(), Vec3::UnitX()));
  }
};

enum class ControlMode { Force, Velocity, PositionStep };

struct ControlCommand {
  ControlMode mode = ControlMode::PositionStep;
  Vec3 value = Vec3::Zero();  // N, m/s, or step counts in {-1, 0, 1}
};

struct PerturbationConfig {
  bool actuator_noise = false;
  bool time_delay = false;
  int blur_level = 0;  // 0..4

  friend bool operator==(const PerturbationConfig&, const PerturbationConfig&) = default;
};

inline void validate(const PerturbationConfig& p) {
  if (p.blur_level < 0 || p.blur_level > 4) throw std::invalid_argument("blur_level must be in [0, 4]");
}

namespace detail {
inline void require_finite(const Vec3& v, const char* what) {
  if (!v.allFinite()) throw std::domain_error(std::string(what) + ": non-finite input");
}
inline void require_dt(double dt, const char* what) {
  if (!(dt > 0) || !std::isfinite(dt)) throw std::domain_error(std::string(what) + ": dt must be positive");
}
}  // namespace detail

/// Semi-implicit Euler under a bounded thrust: v += (u'/m) dt, then x += v dt.
inline ChaserState step_chaser_force(ChaserState s, const Vec3& force, double dt, double noise = 1.0) {
  detail::require_dt(dt, "step_chaser_force");
  detail::require_finite(force, "step_chaser_force");
  if (!std::isfinite(noise)) throw std::domain_error("step_chaser_force: non-finite noise factor");
  Vec3 applied = clamp_inf(noise * force, kForceLimit);
  s.velocity += applied / s.mass * dt;
  s.position += s.velocity * dt;
  return s;
}

inline ChaserState step_chaser_velocity(ChaserState s, const Vec3& velocity, double dt, double noise = 1.0) {
  detail::require_dt(dt, "step_chaser_velocity");
  detail::require_finite(velocity, "step_chaser_velocity");
  if (!std::isfinite(noise)) throw std::domain_error("step_chaser_velocity: non-finite noise factor");
  s.velocity = clamp_inf(noise * velocity, kVelocityLimit);
  s.position += s.velocity * dt;
  return s;
}

/// Discrete translation in the body frame; the chaser keeps a fixed attitude so body == reference axes.
inline ChaserState step_chaser_position(ChaserState s, const Vec3& step, double noise = 1.0,
                                        double step_size = kStepSize) {
  for (int i = 0; i < 3; ++i) {
    if (step[i] != -1.0 && step[i] != 0.0 && step[i] != 1.0) {
      throw std::invalid_argument("step_chaser_position: step components must be in {-1, 0, 1}");
    }
  }
  if (!std::isfinite(noise)) throw std::domain_error("step_chaser_position: non-finite noise factor");
  s.position += noise * step_size * step;
  return s;
}

inline TargetState step_target(TargetState s, double dt) {
  detail::require_dt(dt, "step_target");
  s.position += s.velocity * dt;
  for (int i = 0; i < 3; ++i) s.attitude[i] = wrap_angle(s.attitude[i] + s.angular_rate[i] * dt);
  return s;
}

template <typename Rng>
double sample_actuator_noise(Rng& rng, bool enabled = true) {
  if (!enabled) return 1.0;
  return std::normal_distribution<double>(1.0, 0.3)(rng);
}

/// Effective sampling period: 0.1 s plus D ~ U(0, 0.1) s when the delay perturbation is on.
template <typename Rng>
double sample_time_delay(Rng& rng, bool enabled = true) {
  if (!enabled) return kNominalDt;
  return kNominalDt + std::uniform_real_distribution<double>(0.0, 0.1)(rng);
}

/// Rigid camera-to-body transform. The camera boresight is the body +z axis.
struct CameraMount {
  Vec3 translation = Vec3::Zero();  // camera origin in the body frame
  Mat3 rotation = Mat3::Identity();  // camera axes in the body frame

  Vec3 camera_to_body(const Vec3& p_c) const { return rotation * p_c + translation; }
  Vec3 body_to_camera(const Vec3& p_b) const { return rotation.transpose() * (p_b - translation); }
};

struct RelativePosition {
  Vec3 body;    // r_T^B
  Vec3 camera;  // r_T^C
};

inline RelativePosition relative_position(const ChaserState& chaser, const TargetState& target,
                                          const CameraMount& mount = {}) {
  Vec3 body = target.position - chaser.position;  // body axes coincide with reference axes
  return {body, mount.body_to_camera(body)};
}

inline const Vec3 kDesiredOffset(0, 0, 5);

inline double tracking_error(const Vec3& r_body, const Vec3& r_star = kDesiredOffset) {
  return (r_body - r_star).norm();
}

}  // namespace avt

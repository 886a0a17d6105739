#pragma once

#include "avt/actions.hpp"
#include "avt/camera.hpp"
#include "avt/common.hpp"
#include "avt/dynamics.hpp"
#include "avt/scene.hpp"

#include <cstdio>
#include <deque>
#include <optional>
#include <ostream>
#include <random>
#include <string>
#include <vector>

namespace avt {

enum class ObsChannels { Color = 3, Rgbd = 4 };
enum class RewardVariant { Original, DistOnly, SoftVisible };
enum class VisibilityRule { CenterProjection, PixelCount };

struct EnvConfig {
  double dt = kNominalDt;
  Vec3 r_star = kDesiredOffset;
  int max_steps = 1000;
  int delayed_ending = 15;
  ControlMode control_mode = ControlMode::PositionStep;
  int obs_size = 64;
  int frame_stack = 3;
  ObsChannels channels = ObsChannels::Rgbd;
  double z_max = 20.0;
  RewardVariant reward_variant = RewardVariant::Original;
  /// Ablation variants taken with the printed sign (+r_dist) instead of the penalty.
  bool literal_ablation_sign = false;
  PerturbationConfig perturbations;
  std::uint64_t seed = 0;

  // camera
  double fov_deg = 60.0;
  int resolution = 256;
  CameraMount mount;

  // reset distributions
  double init_xy_std = 1.0;
  double init_z_min = 2.0;
  double init_z_max = 12.0;
  double target_speed_std = 0.3;
  bool planar_drift = false;       // zero the target's z velocity
  double angular_rate_max = 0.2;   // rad/s, per axis, uniform
  bool random_attitude = true;

  VisibilityRule visibility_rule = VisibilityRule::CenterProjection;
  int visibility_min_pixels = 20;

  CameraIntrinsics intrinsics() const {
    return intrinsics_from_fov(deg2rad(fov_deg), deg2rad(fov_deg), resolution, resolution);
  }
  int channel_count() const { return static_cast<int>(channels); }
  int obs_channels() const { return frame_stack * channel_count(); }
};

inline void validate(const EnvConfig& c) {
  if (c.delayed_ending < 10 || c.delayed_ending > 20) throw std::invalid_argument("delayed_ending must be in [10, 20]");
  if (c.frame_stack < 1) throw std::invalid_argument("frame_stack must be >= 1");
  if (c.obs_size < 1 || c.resolution % c.obs_size != 0) {
    throw std::invalid_argument("obs_size must divide the camera resolution");
  }
  if (c.max_steps < 1) throw std::invalid_argument("max_steps must be >= 1");
  if (!(c.dt > 0)) throw std::invalid_argument("dt must be positive");
  if (!(c.z_max > 0)) throw std::invalid_argument("z_max must be positive");
  if (!(c.init_z_min > 0) || c.init_z_max < c.init_z_min) throw std::invalid_argument("bad initial depth range");
  validate(c.perturbations);
}

/// Network input: channel-major (C, S, S) floats in [0,1], newest frame's channels last.
struct Observation {
  int size = 0;
  int channels = 0;
  std::vector<float> data;

  Observation() = default;
  Observation(int s, int c) : size(s), channels(c), data(static_cast<std::size_t>(s) * s * c, 0.0f) {}

  float& at(int c, int y, int x) { return data[(static_cast<std::size_t>(c) * size + y) * size + x]; }
  float at(int c, int y, int x) const { return data[(static_cast<std::size_t>(c) * size + y) * size + x]; }

  friend bool operator==(const Observation&, const Observation&) = default;
};

/// Single preprocessed frame: area-averaged color (+ depth / z_max).
inline Observation preprocess_frame(const Frame& frame, int obs_size, ObsChannels channels, double z_max) {
  const int H = frame.color.height(), W = frame.color.width();
  if (H % obs_size != 0 || W % obs_size != 0) throw std::invalid_argument("preprocess: obs_size must divide frame");
  const int fy = H / obs_size, fx = W / obs_size;
  const int C = static_cast<int>(channels);
  Observation out(obs_size, C);
  const double inv = 1.0 / (fx * fy);
  for (int y = 0; y < obs_size; ++y) {
    for (int x = 0; x < obs_size; ++x) {
      double acc[4] = {0, 0, 0, 0};
      for (int v = y * fy; v < (y + 1) * fy; ++v) {
        for (int u = x * fx; u < (x + 1) * fx; ++u) {
          for (int c = 0; c < 3; ++c) acc[c] += frame.color(v, u, c);
          if (C == 4) acc[3] += frame.depth(v, u) / z_max;
        }
      }
      for (int c = 0; c < C; ++c) {
        out.at(c, y, x) = static_cast<float>(std::clamp(acc[c] * inv, 0.0, 1.0));
      }
    }
  }
  return out;
}

/// Stacks per-frame observations oldest first; `history` is most recent first and
/// padded by repeating its oldest entry when shorter than `k`.
inline Observation stack_frames(const std::deque<Observation>& history, int k) {
  if (history.empty()) throw std::invalid_argument("stack_frames: empty history");
  const int C = history.front().channels, S = history.front().size;
  Observation out(S, C * k);
  const std::size_t plane = static_cast<std::size_t>(S) * S * C;
  for (int slot = 0; slot < k; ++slot) {
    int age = k - 1 - slot;
    const auto& src = history[std::min<std::size_t>(static_cast<std::size_t>(age), history.size() - 1)];
    std::copy(src.data.begin(), src.data.end(), out.data.begin() + static_cast<std::ptrdiff_t>(plane * slot));
  }
  return out;
}

/// Appends `frame` to the per-frame history (most recent first, capped at K) and returns the stack.
inline Observation preprocess(const Frame& frame, std::deque<Observation>& history, const EnvConfig& cfg) {
  history.push_front(preprocess_frame(frame, cfg.obs_size, cfg.channels, cfg.z_max));
  while (static_cast<int>(history.size()) > cfg.frame_stack) history.pop_back();
  return stack_frames(history, cfg.frame_stack);
}

struct RewardBreakdown {
  double r_vis = 0;
  double r_dist = 0;
};

inline std::pair<double, RewardBreakdown> reward(bool visible, double e, RewardVariant variant,
                                                 bool literal_sign = false) {
  RewardBreakdown b;
  b.r_dist = e;
  switch (variant) {
    case RewardVariant::Original:
      b.r_vis = visible ? 1.0 : -5.0;
      return {b.r_vis - b.r_dist, b};
    case RewardVariant::DistOnly:
      b.r_vis = 0.0;
      return {literal_sign ? b.r_dist : -b.r_dist, b};
    case RewardVariant::SoftVisible:
      b.r_vis = visible ? 1.0 : -1.0;
      return {literal_sign ? b.r_vis + b.r_dist : b.r_vis - b.r_dist, b};
  }
  return {0.0, b};
}

/// Target center projects inside the image and lies within the sensing range.
inline bool visibility(const CameraIntrinsics& k, const Vec3& r_c, double z_max) {
  if (!(r_c.z() > 0.1 && r_c.z() < z_max)) return false;
  Pixel p = project(k, r_c);
  return p.u >= 0 && p.u < k.width && p.v >= 0 && p.v < k.height;
}

inline int count_target_pixels(const DepthMap& depth, double z_max) {
  int n = 0;
  for (double d : depth.data()) n += valid_depth(d, z_max) ? 1 : 0;
  return n;
}

struct StepInfo {
  Vec3 r_body = Vec3::Zero();
  Vec3 r_camera = Vec3::Zero();
  Vec3 chaser_position = Vec3::Zero();
  bool visible = false;
  int step = 0;
  double dt = kNominalDt;
};

struct StepResult {
  Observation observation;
  double reward = 0;
  RewardBreakdown breakdown;
  double error = 0;
  bool done = false;
  StepInfo info;
};

/// One row of the per-step log. Step 0 is the reset observation (no action, zero reward).
struct StepRecord {
  int step = 0;
  int action = -1;
  Vec3 command = Vec3::Zero();
  double reward = 0;
  double r_vis = 0;
  double r_dist = 0;
  double error = 0;
  bool visible = false;
  Vec3 r_body = Vec3::Zero();
  Vec3 chaser = Vec3::Zero();
  std::optional<BoundingBox> bbox;
  std::optional<Vec3> estimate;
};

inline const char* kStepLogHeader =
    "step,action,cmd_x,cmd_y,cmd_z,reward,r_vis,r_dist,e,visible,rB_x,rB_y,rB_z,chaser_x,chaser_y,chaser_z,"
    "bbox_x,bbox_y,bbox_w,bbox_h,est_x,est_y,est_z";

inline std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline void write_step_record(std::ostream& os, const StepRecord& r) {
  auto d = [](double v) { return format_double(v); };
  os << r.step << ',' << r.action << ',' << d(r.command.x()) << ',' << d(r.command.y()) << ',' << d(r.command.z())
     << ',' << d(r.reward) << ',' << d(r.r_vis) << ',' << d(r.r_dist) << ',' << d(r.error) << ','
     << (r.visible ? 1 : 0) << ',' << d(r.r_body.x()) << ',' << d(r.r_body.y()) << ',' << d(r.r_body.z()) << ','
     << d(r.chaser.x()) << ',' << d(r.chaser.y()) << ',' << d(r.chaser.z());
  if (r.bbox) {
    os << ',' << d(r.bbox->x) << ',' << d(r.bbox->y) << ',' << d(r.bbox->w) << ',' << d(r.bbox->h);
  } else {
    os << ",,,,";
  }
  if (r.estimate) {
    os << ',' << d(r.estimate->x()) << ',' << d(r.estimate->y()) << ',' << d(r.estimate->z());
  } else {
    os << ",,,";
  }
  os << '\n';
}

/// Episode orchestration: reset sampling, stepping, reward, termination with delayed ending.
class Environment {
 public:
  explicit Environment(EnvConfig config)
      : config_(std::move(config)), intr_(config_.intrinsics()), rng_(config_.seed) {
    validate(config_);
  }

  const EnvConfig& config() const { return config_; }
  const CameraIntrinsics& intrinsics() const { return intr_; }
  const TargetModel& model() const { return model_; }
  const ChaserState& chaser() const { return chaser_; }
  const TargetState& target() const { return target_; }
  const Frame& frame() const { return frames_.front(); }
  const Observation& observation() const { return obs_; }
  bool done() const { return done_; }
  int steps() const { return steps_; }
  /// Reset observation plus executed steps.
  int episode_length() const { return steps_ + 1; }
  int lost_count() const { return lost_; }
  RelativePosition relative() const { return relative_position(chaser_, target_, config_.mount); }
  std::mt19937_64& rng() { return rng_; }

  /// Samples the target's initial state in the camera frame and starts an episode.
  Observation reset(const TargetModel& model) {
    std::normal_distribution<double> xy(0.0, config_.init_xy_std);
    std::uniform_real_distribution<double> z(config_.init_z_min, config_.init_z_max);
    std::normal_distribution<double> vel(0.0, config_.target_speed_std);
    std::uniform_real_distribution<double> att(-kPi, kPi);
    std::uniform_real_distribution<double> rate(-config_.angular_rate_max, config_.angular_rate_max);

    TargetState t;
    Vec3 r_c;
    r_c.x() = xy(rng_);
    r_c.y() = xy(rng_);
    r_c.z() = z(rng_);
    t.velocity = Vec3(vel(rng_), vel(rng_), vel(rng_));
    if (config_.planar_drift) t.velocity.z() = 0;
    if (config_.random_attitude) {
      for (int i = 0; i < 3; ++i) t.attitude[i] = wrap_angle(att(rng_));
    }
    for (int i = 0; i < 3; ++i) t.angular_rate[i] = config_.angular_rate_max > 0 ? rate(rng_) : 0.0;
    t.position = config_.mount.camera_to_body(r_c);  // chaser starts at the origin
    return reset_with(model, ChaserState{}, t);
  }

  /// Starts an episode from an explicit state.
  Observation reset_with(const TargetModel& model, const ChaserState& chaser, const TargetState& target) {
    model_ = model;
    chaser_ = chaser;
    target_ = target;
    steps_ = 0;
    lost_ = 0;
    done_ = false;
    time_ = 0;
    frames_.clear();
    obs_history_.clear();
    raw_history_.clear();
    render_and_observe();
    return obs_;
  }

  StepResult step(int action_index) {
    if (config_.control_mode != ControlMode::PositionStep) {
      throw std::logic_error("step(action): discrete actions require position_step control");
    }
    last_action_ = action_index;
    return step_impl(ControlCommand{ControlMode::PositionStep, ActionTable::step(action_index)});
  }

  StepResult step(const ControlCommand& cmd) {
    last_action_ = -1;
    if (cmd.mode == ControlMode::PositionStep) {
      if (auto idx = ActionTable::index_of(cmd.value)) last_action_ = *idx;
    }
    return step_impl(cmd);
  }

  int last_action() const { return last_action_; }

  bool is_visible() const {
    auto rel = relative();
    if (config_.visibility_rule == VisibilityRule::PixelCount) {
      return count_target_pixels(frames_.front().depth, config_.z_max) >= config_.visibility_min_pixels;
    }
    return visibility(intr_, rel.camera, config_.z_max);
  }

 private:
  StepResult step_impl(const ControlCommand& cmd) {
    if (done_) throw std::logic_error("Environment::step: episode is finished");
    if (cmd.mode != config_.control_mode) throw std::invalid_argument("Environment::step: control mode mismatch");

    const auto& pert = config_.perturbations;
    double dt = pert.time_delay ? sample_time_delay(rng_, true) : config_.dt;
    double noise = sample_actuator_noise(rng_, pert.actuator_noise);

    switch (cmd.mode) {
      case ControlMode::Force: chaser_ = step_chaser_force(chaser_, cmd.value, dt, noise); break;
      case ControlMode::Velocity: chaser_ = step_chaser_velocity(chaser_, cmd.value, dt, noise); break;
      case ControlMode::PositionStep: chaser_ = step_chaser_position(chaser_, cmd.value, noise); break;
    }
    target_ = step_target(target_, dt);
    time_ += dt;
    ++steps_;

    render_and_observe();

    auto rel = relative();
    bool visible = is_visible();
    double e = tracking_error(rel.body, config_.r_star);
    auto [r, breakdown] = reward(visible, e, config_.reward_variant, config_.literal_ablation_sign);
    lost_ = visible ? 0 : lost_ + 1;
    done_ = lost_ >= config_.delayed_ending || steps_ >= config_.max_steps;

    StepResult out;
    out.observation = obs_;
    out.reward = r;
    out.breakdown = breakdown;
    out.error = e;
    out.done = done_;
    out.info = StepInfo{rel.body, rel.camera, chaser_.position, visible, steps_, dt};
    return out;
  }

  void render_and_observe() {
    auto rel = relative();
    Pose pose{rel.camera, Quat(config_.mount.rotation.transpose()) * target_.orientation()};
    RenderOptions ropt;
    ropt.z_max = config_.z_max;
    Frame raw = render(intr_, model_, pose, ropt);
    raw.timestamp = time_;
    raw_history_.push_front(std::move(raw));
    const int window = blur_window(config_.perturbations.blur_level);
    while (static_cast<int>(raw_history_.size()) > window) raw_history_.pop_back();
    frames_.clear();
    frames_.push_front(blur_frames(raw_history_, window));

    obs_ = preprocess(frames_.front(), obs_history_, config_);
  }

  EnvConfig config_;
  CameraIntrinsics intr_;
  std::mt19937_64 rng_;
  TargetModel model_;
  ChaserState chaser_;
  TargetState target_;
  std::deque<Frame> raw_history_;
  std::deque<Frame> frames_;
  std::deque<Observation> obs_history_;
  Observation obs_;
  int steps_ = 0;
  int lost_ = 0;
  bool done_ = true;
  int last_action_ = -1;
  double time_ = 0;
};

}  // namespace avt

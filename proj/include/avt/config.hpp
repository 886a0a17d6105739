#pragma once

#include "avt/dqn/trainer.hpp"
#include "avt/env.hpp"

#include <json.hpp>

#include <fstream>
#include <set>
#include <sstream>
#include <string>

namespace avt {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

using Json = nlohmann::json;

namespace cfgio {

/// Reads the keys of one JSON object, remembering which were consumed so the rest can be rejected.
class Fields {
 public:
  Fields(const Json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j.is_object()) throw ConfigError(path_ + ": expected an object");
  }

  template <typename T>
  void get(const char* key, T& dst) {
    auto it = j_.find(key);
    if (it == j_.end()) return;
    used_.insert(key);
    try {
      dst = it->template get<T>();
    } catch (const Json::exception& e) {
      throw ConfigError(path_ + "." + key + ": " + e.what());
    }
  }

  template <typename F>
  void nested(const char* key, F&& fn) {
    auto it = j_.find(key);
    if (it == j_.end()) return;
    used_.insert(key);
    Fields sub(*it, path_ + "." + key);
    fn(sub);
    sub.finish();
  }

  void vec3(const char* key, Vec3& dst) {
    if (!j_.contains(key)) return;
    std::vector<double> v;
    get(key, v);
    if (v.size() != 3) throw ConfigError(path_ + "." + key + ": expected 3 numbers");
    dst = Vec3(v[0], v[1], v[2]);
  }

  template <typename E>
  void enumeration(const char* key, E& dst, std::initializer_list<std::pair<const char*, E>> names) {
    if (!j_.contains(key)) return;
    std::string s;
    get(key, s);
    for (const auto& [n, v] : names) {
      if (s == n) {
        dst = v;
        return;
      }
    }
    std::string allowed;
    for (const auto& [n, v] : names) allowed += std::string(allowed.empty() ? "" : ", ") + n;
    throw ConfigError(path_ + "." + key + ": unknown value '" + s + "' (expected one of: " + allowed + ")");
  }

  void finish() const {
    for (const auto& [k, v] : j_.items()) {
      if (!used_.count(k)) throw ConfigError(path_ + "." + k + ": unknown key");
    }
  }

 private:
  const Json& j_;
  std::string path_;
  std::set<std::string> used_;
};

inline const std::initializer_list<std::pair<const char*, ControlMode>> kModes = {
    {"force", ControlMode::Force}, {"velocity", ControlMode::Velocity}, {"position_step", ControlMode::PositionStep}};
inline const std::initializer_list<std::pair<const char*, ObsChannels>> kChannels = {{"rgb", ObsChannels::Color},
                                                                                     {"rgbd", ObsChannels::Rgbd}};
inline const std::initializer_list<std::pair<const char*, RewardVariant>> kRewards = {
    {"original", RewardVariant::Original},
    {"dist_only", RewardVariant::DistOnly},
    {"soft_visible", RewardVariant::SoftVisible}};
inline const std::initializer_list<std::pair<const char*, VisibilityRule>> kVisibility = {
    {"center_projection", VisibilityRule::CenterProjection}, {"pixel_count", VisibilityRule::PixelCount}};
inline const std::initializer_list<std::pair<const char*, dqn::TargetUpdateUnit>> kUpdateUnits = {
    {"episodes", dqn::TargetUpdateUnit::Episodes}, {"gradient_steps", dqn::TargetUpdateUnit::GradientSteps}};
inline const std::initializer_list<std::pair<const char*, dqn::ReplayStorage>> kStorage = {
    {"uint8", dqn::ReplayStorage::Uint8}, {"float32", dqn::ReplayStorage::Float32}};

template <typename E>
std::string name_of(E v, std::initializer_list<std::pair<const char*, E>> names) {
  for (const auto& [n, x] : names) {
    if (x == v) return n;
  }
  return "?";
}

inline Json vec(const Vec3& v) { return Json::array({v.x(), v.y(), v.z()}); }

}  // namespace cfgio

inline void read_perturbations(cfgio::Fields& f, PerturbationConfig& p) {
  f.get("actuator_noise", p.actuator_noise);
  f.get("time_delay", p.time_delay);
  f.get("blur_level", p.blur_level);
}

inline Json to_json(const PerturbationConfig& p) {
  return {{"actuator_noise", p.actuator_noise}, {"time_delay", p.time_delay}, {"blur_level", p.blur_level}};
}

inline void read_env(cfgio::Fields& f, EnvConfig& c) {
  using namespace cfgio;
  f.get("dt", c.dt);
  f.vec3("r_star", c.r_star);
  f.get("max_steps", c.max_steps);
  f.get("delayed_ending", c.delayed_ending);
  f.enumeration("control_mode", c.control_mode, kModes);
  f.get("obs_size", c.obs_size);
  f.get("frame_stack", c.frame_stack);
  f.enumeration("channels", c.channels, kChannels);
  f.get("z_max", c.z_max);
  f.enumeration("reward", c.reward_variant, kRewards);
  f.get("literal_ablation_sign", c.literal_ablation_sign);
  f.nested("perturbations", [&](Fields& p) { read_perturbations(p, c.perturbations); });
  f.get("seed", c.seed);
  f.get("fov_deg", c.fov_deg);
  f.get("resolution", c.resolution);
  f.vec3("camera_offset", c.mount.translation);
  f.get("init_xy_std", c.init_xy_std);
  f.get("init_z_min", c.init_z_min);
  f.get("init_z_max", c.init_z_max);
  f.get("target_speed_std", c.target_speed_std);
  f.get("planar_drift", c.planar_drift);
  f.get("angular_rate_max", c.angular_rate_max);
  f.get("random_attitude", c.random_attitude);
  f.enumeration("visibility_rule", c.visibility_rule, kVisibility);
  f.get("visibility_min_pixels", c.visibility_min_pixels);
}

inline Json to_json(const EnvConfig& c) {
  using namespace cfgio;
  return {{"dt", c.dt},
          {"r_star", vec(c.r_star)},
          {"max_steps", c.max_steps},
          {"delayed_ending", c.delayed_ending},
          {"control_mode", name_of(c.control_mode, kModes)},
          {"obs_size", c.obs_size},
          {"frame_stack", c.frame_stack},
          {"channels", name_of(c.channels, kChannels)},
          {"z_max", c.z_max},
          {"reward", name_of(c.reward_variant, kRewards)},
          {"literal_ablation_sign", c.literal_ablation_sign},
          {"perturbations", to_json(c.perturbations)},
          {"seed", c.seed},
          {"fov_deg", c.fov_deg},
          {"resolution", c.resolution},
          {"camera_offset", vec(c.mount.translation)},
          {"init_xy_std", c.init_xy_std},
          {"init_z_min", c.init_z_min},
          {"init_z_max", c.init_z_max},
          {"target_speed_std", c.target_speed_std},
          {"planar_drift", c.planar_drift},
          {"angular_rate_max", c.angular_rate_max},
          {"random_attitude", c.random_attitude},
          {"visibility_rule", name_of(c.visibility_rule, kVisibility)},
          {"visibility_min_pixels", c.visibility_min_pixels}};
}

inline void read_trainer(cfgio::Fields& f, dqn::TrainerConfig& c) {
  using namespace cfgio;
  f.get("episodes", c.episodes);
  f.get("max_episode_len", c.max_episode_len);
  f.get("target_update_interval", c.target_update_interval);
  f.enumeration("target_update_unit", c.target_update_unit, kUpdateUnits);
  f.get("gamma", c.gamma);
  f.get("batch_size", c.batch_size);
  f.get("replay_capacity", c.replay_capacity);
  f.get("replay_initial", c.replay_initial);
  f.get("train_every", c.train_every);
  f.get("learning_rate", c.adam.lr);
  f.get("grad_clip", c.grad_clip);
  f.get("epsilon_start", c.epsilon.start);
  f.get("epsilon_end", c.epsilon.end);
  f.get("epsilon_decay_steps", c.epsilon.decay_steps);
  f.enumeration("replay_storage", c.replay_storage, kStorage);
  f.get("bootstrap_on_timeout", c.bootstrap_on_timeout);
  f.get("seed", c.seed);
}

inline Json to_json(const dqn::TrainerConfig& c) {
  using namespace cfgio;
  return {{"episodes", c.episodes},
          {"max_episode_len", c.max_episode_len},
          {"target_update_interval", c.target_update_interval},
          {"target_update_unit", name_of(c.target_update_unit, kUpdateUnits)},
          {"gamma", c.gamma},
          {"batch_size", c.batch_size},
          {"replay_capacity", c.replay_capacity},
          {"replay_initial", c.replay_initial},
          {"train_every", c.train_every},
          {"learning_rate", c.adam.lr},
          {"grad_clip", c.grad_clip},
          {"epsilon_start", c.epsilon.start},
          {"epsilon_end", c.epsilon.end},
          {"epsilon_decay_steps", c.epsilon.decay_steps},
          {"replay_storage", name_of(c.replay_storage, kStorage)},
          {"bootstrap_on_timeout", c.bootstrap_on_timeout},
          {"seed", c.seed}};
}

inline void read_network(cfgio::Fields& f, dqn::QNetworkConfig& c) {
  f.get("merge_filters", c.merge_filters);
  f.get("conv_filters", c.conv_filters);
  f.get("extra_blocks", c.extra_blocks);
  f.get("hidden", c.hidden);
  f.get("dropout", c.dropout);
}

inline Json network_json(const dqn::QNetworkConfig& c) {
  return {{"merge_filters", c.merge_filters},
          {"conv_filters", c.conv_filters},
          {"extra_blocks", c.extra_blocks},
          {"hidden", c.hidden},
          {"dropout", c.dropout}};
}

enum class TargetSet { Catalog, Sphere };

struct EvalSettings {
  int repetitions = 20;
  std::uint64_t seed = 0;
};

struct ProbeSettings {
  int steps = 60;
  double speed = 0.3;
};

/// Complete declarative run description. Every default reproduces the published setup.
struct RunConfig {
  EnvConfig env;
  dqn::TrainerConfig trainer;
  dqn::QNetworkConfig network;
  std::uint64_t catalog_seed = 0;
  TargetSet targets = TargetSet::Catalog;
  double sphere_radius = 1.0;
  EvalSettings eval;
  ProbeSettings probe;
  std::string output_dir = "runs/default";
};

inline void validate(const RunConfig& c) {
  validate(c.env);
  dqn::validate(c.trainer);
  dqn::validate(dqn::network_for(c.env, c.network));
  if (c.eval.repetitions < 1) throw ConfigError("eval.repetitions must be >= 1");
  if (c.probe.steps < 1) throw ConfigError("probe.steps must be >= 1");
  if (!(c.sphere_radius > 0)) throw ConfigError("sphere_radius must be positive");
}

inline RunConfig parse_run_config(const std::string& text) {
  Json j;
  try {
    j = Json::parse(text, nullptr, true, /*ignore_comments=*/true);
  } catch (const Json::parse_error& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  RunConfig c;
  cfgio::Fields f(j, "config");
  f.nested("env", [&](cfgio::Fields& s) { read_env(s, c.env); });
  f.nested("trainer", [&](cfgio::Fields& s) { read_trainer(s, c.trainer); });
  f.nested("network", [&](cfgio::Fields& s) { read_network(s, c.network); });
  f.get("catalog_seed", c.catalog_seed);
  f.enumeration("targets", c.targets, {{"catalog", TargetSet::Catalog}, {"sphere", TargetSet::Sphere}});
  f.get("sphere_radius", c.sphere_radius);
  f.nested("eval", [&](cfgio::Fields& s) {
    s.get("repetitions", c.eval.repetitions);
    s.get("seed", c.eval.seed);
  });
  f.nested("probe", [&](cfgio::Fields& s) {
    s.get("steps", c.probe.steps);
    s.get("speed", c.probe.speed);
  });
  f.get("output_dir", c.output_dir);
  f.finish();
  try {
    validate(c);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  return c;
}

inline std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open config file: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline Json to_json(const RunConfig& c) {
  return {{"env", to_json(c.env)},
          {"trainer", to_json(c.trainer)},
          {"network", network_json(c.network)},
          {"catalog_seed", c.catalog_seed},
          {"targets", c.targets == TargetSet::Sphere ? "sphere" : "catalog"},
          {"sphere_radius", c.sphere_radius},
          {"eval", {{"repetitions", c.eval.repetitions}, {"seed", c.eval.seed}}},
          {"probe", {{"steps", c.probe.steps}, {"speed", c.probe.speed}}},
          {"output_dir", c.output_dir}};
}

}  // namespace avt

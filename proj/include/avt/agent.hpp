#pragma once

#include "avt/env.hpp"

#include <memory>
#include <string>

namespace avt {

/// What an agent may look at each frame. Ground truth is present for oracle baselines only;
/// learned agents must restrict themselves to `obs`.
struct AgentView {
  const Observation& obs;
  const Frame& frame;
  const CameraIntrinsics& intr;
  const EnvConfig& config;
  Vec3 truth_camera;
  double target_radius;
};

inline AgentView make_view(const Environment& env) {
  return AgentView{env.observation(), env.frame(), env.intrinsics(), env.config(), env.relative().camera,
                   env.model().bounding_radius};
}

class Agent {
 public:
  virtual ~Agent() = default;
  virtual std::string name() const = 0;
  virtual ControlMode mode() const = 0;
  virtual void reset(const AgentView& view, std::uint64_t seed) = 0;
  virtual ControlCommand act(const AgentView& view) = 0;
  /// Fresh copy with identical configuration, for parallel evaluation.
  virtual std::unique_ptr<Agent> clone() const = 0;
  /// Discrete action behind the last command, or -1.
  virtual int last_action() const { return -1; }
  /// Adds agent-specific columns (bbox, estimate) to the step log.
  virtual void annotate(StepRecord&) const {}
};

}  // namespace avt

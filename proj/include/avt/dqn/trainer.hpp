#pragma once

#include "avt/agent.hpp"
#include "avt/dqn/learning.hpp"
#include "avt/dqn/network.hpp"
#include "avt/dqn/replay.hpp"
#include "avt/env.hpp"

#include <atomic>
#include <functional>
#include <memory>
#include <ostream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

namespace avt::dqn {

enum class TargetUpdateUnit { Episodes, GradientSteps };
enum class ReplayStorage { Uint8, Float32 };

struct TrainerConfig {
  int episodes = 300;
  int max_episode_len = 1000;
  int target_update_interval = 10;
  TargetUpdateUnit target_update_unit = TargetUpdateUnit::Episodes;
  double gamma = 0.99;
  std::size_t batch_size = 32;
  std::size_t replay_capacity = 50000;
  std::size_t replay_initial = 10000;
  /// Environment steps per gradient step once the buffer is warm.
  int train_every = 1;
  AdamConfig adam;
  double grad_clip = 10.0;
  EpsilonSchedule epsilon;
  ReplayStorage replay_storage = ReplayStorage::Uint8;
  /// Bootstrap through episodes cut by max_episode_len instead of treating them as terminal.
  bool bootstrap_on_timeout = true;
  std::uint64_t seed = 0;
};

inline void validate(const TrainerConfig& c) {
  if (c.episodes < 0) throw std::invalid_argument("episodes must be >= 0");
  if (c.max_episode_len < 1) throw std::invalid_argument("max_episode_len must be >= 1");
  if (c.target_update_interval < 1) throw std::invalid_argument("target_update_interval must be >= 1");
  if (c.gamma < 0 || c.gamma > 1) throw std::invalid_argument("gamma must be in [0, 1]");
  if (c.batch_size < 1) throw std::invalid_argument("batch_size must be >= 1");
  if (c.replay_capacity < 1 || c.replay_initial > c.replay_capacity) {
    throw std::invalid_argument("replay_initial must not exceed replay_capacity");
  }
  if (c.train_every < 1) throw std::invalid_argument("train_every must be >= 1");
  if (!(c.adam.lr > 0)) throw std::invalid_argument("learning rate must be positive");
  if (c.epsilon.end < 0 || c.epsilon.start > 1 || c.epsilon.end > c.epsilon.start) {
    throw std::invalid_argument("epsilon schedule must satisfy 0 <= end <= start <= 1");
  }
}

struct CurveRow {
  int episode = 0;
  int length = 0;
  double total_reward = 0;
  double mean_q = 0;  // mean over the episode of max_a Q(s_t, a)
};

inline void write_curves(std::ostream& os, const std::vector<CurveRow>& rows) {
  os << "episode,length,total_reward,mean_q\n";
  for (const auto& r : rows) {
    os << r.episode << ',' << r.length << ',' << format_double(r.total_reward) << ',' << format_double(r.mean_q)
       << '\n';
  }
}

struct TrainResult {
  QNetwork<float> net;
  std::vector<CurveRow> curves;
  std::string rng_state;
  std::uint64_t env_steps = 0;
  std::uint64_t gradient_steps = 0;
  bool interrupted = false;
};

struct TrainHooks {
  std::function<void(const CurveRow&)> on_episode;
  /// Polled once per environment step; training returns early when set.
  const std::atomic<bool>* stop = nullptr;
};

inline std::string rng_to_string(const std::mt19937_64& rng) {
  std::ostringstream os;
  os << rng;
  return os.str();
}

inline QNetworkConfig network_for(const EnvConfig& env, QNetworkConfig net) {
  net.input_size = env.obs_size;
  net.input_channels = env.obs_channels();
  net.actions = ActionTable::kSize;
  return net;
}

namespace detail {

template <typename Storage>
TrainResult train_impl(EnvConfig env_cfg, const TrainerConfig& cfg, const QNetworkConfig& net_cfg,
                       const std::vector<TargetModel>& models, const TrainHooks& hooks) {
  std::mt19937_64 rng(derive_seed(cfg.seed, 1));
  std::mt19937_64 init_rng(derive_seed(cfg.seed, 2));
  env_cfg.seed = derive_seed(cfg.seed, 3);
  env_cfg.max_steps = cfg.max_episode_len;
  env_cfg.control_mode = ControlMode::PositionStep;
  Environment env(env_cfg);

  TrainResult out{QNetwork<float>(network_for(env_cfg, net_cfg)), {}, {}, 0, 0, false};
  QNetwork<float>& net = out.net;
  net.initialize(init_rng);
  QNetwork<float> target(net.config());
  target.copy_params_from(net);
  Adam<float> adam(net.param_count(), cfg.adam);
  ReplayBuffer<Storage> replay(cfg.replay_capacity, cfg.replay_initial, env_cfg.frame_stack);
  std::uniform_int_distribution<std::size_t> pick_model(0, models.size() - 1);

  for (int ep = 0; ep < cfg.episodes; ++ep) {
    const TargetModel& model = models[pick_model(rng)];
    Observation obs = env.reset(model);
    CurveRow row;
    row.episode = ep;
    double q_sum = 0;
    int q_count = 0;
    while (!env.done()) {
      if (hooks.stop && hooks.stop->load()) {
        out.interrupted = true;
        break;
      }
      auto q = net.forward(obs.data);
      q_sum += *std::max_element(q.begin(), q.end());
      ++q_count;
      const int a = select_action(std::span<const float>(q), cfg.epsilon.at(out.env_steps), rng);
      StepResult res = env.step(a);
      const bool timeout = res.done && env.lost_count() < env_cfg.delayed_ending;
      const bool terminal = res.done && !(timeout && cfg.bootstrap_on_timeout);
      replay.push(Transition{obs, a, res.reward, res.observation, terminal});
      row.total_reward += res.reward;
      obs = std::move(res.observation);
      ++out.env_steps;

      if (replay.ready() && out.env_steps % static_cast<std::uint64_t>(cfg.train_every) == 0) {
        auto batch = replay.sample(cfg.batch_size, rng);
        auto y = td_targets(batch, target, cfg.gamma);
        auto lg = loss_and_gradients(net, batch, y, &rng);
        clip_grad_norm(std::span<float>(lg.grad), cfg.grad_clip);
        adam.step(net.params(), lg.grad);
        ++out.gradient_steps;
        if (cfg.target_update_unit == TargetUpdateUnit::GradientSteps &&
            out.gradient_steps % static_cast<std::uint64_t>(cfg.target_update_interval) == 0) {
          target.copy_params_from(net);
        }
      }
    }
    row.length = env.episode_length();
    row.mean_q = q_count > 0 ? q_sum / q_count : 0.0;
    if (out.interrupted) break;
    out.curves.push_back(row);
    if (hooks.on_episode) hooks.on_episode(row);
    if (cfg.target_update_unit == TargetUpdateUnit::Episodes && (ep + 1) % cfg.target_update_interval == 0) {
      target.copy_params_from(net);
    }
  }
  out.rng_state = rng_to_string(rng);
  return out;
}

}  // namespace detail

/// Single-threaded DQN training; identical inputs give identical curves and parameters.
inline TrainResult train(const EnvConfig& env_cfg, const TrainerConfig& cfg, const QNetworkConfig& net_cfg,
                         const std::vector<TargetModel>& models, const TrainHooks& hooks = {}) {
  validate(cfg);
  validate(env_cfg);
  if (models.empty()) throw std::invalid_argument("train: no training models");
  if (env_cfg.control_mode != ControlMode::PositionStep) {
    throw std::invalid_argument("train: the Q-network drives position_step control");
  }
  if (cfg.replay_storage == ReplayStorage::Float32) return detail::train_impl<float>(env_cfg, cfg, net_cfg, models, hooks);
  return detail::train_impl<std::uint8_t>(env_cfg, cfg, net_cfg, models, hooks);
}

/// Greedy (or eps-greedy) policy over a frozen network.
class DqnAgent final : public Agent {
 public:
  explicit DqnAgent(QNetwork<float> net, double epsilon = 0.0) : net_(std::move(net)), eps_(epsilon) {
    if (net_.config().actions != ActionTable::kSize) throw std::invalid_argument("DqnAgent: network must output 11 values");
  }

  std::string name() const override { return "dqn"; }
  ControlMode mode() const override { return ControlMode::PositionStep; }
  std::unique_ptr<Agent> clone() const override { return std::make_unique<DqnAgent>(net_, eps_); }

  void reset(const AgentView& view, std::uint64_t seed) override {
    if (static_cast<std::size_t>(view.obs.data.size()) != net_.input_size()) {
      throw std::invalid_argument("DqnAgent: observation shape does not match the network");
    }
    rng_.seed(seed);
    last_ = -1;
  }

  ControlCommand act(const AgentView& view) override {
    q_ = net_.forward(view.obs.data);
    last_ = select_action(std::span<const float>(q_), eps_, rng_);
    return action_to_command(last_);
  }

  int last_action() const override { return last_; }
  const std::vector<float>& last_q() const { return q_; }
  const QNetwork<float>& network() const { return net_; }

 private:
  QNetwork<float> net_;
  double eps_;
  std::mt19937_64 rng_;
  std::vector<float> q_;
  int last_ = -1;
};

}  // namespace avt::dqn

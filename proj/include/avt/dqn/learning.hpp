#pragma once

#include "avt/dqn/network.hpp"
#include "avt/dqn/replay.hpp"

#include <cmath>
#include <random>
#include <span>
#include <vector>

namespace avt::dqn {

template <typename Scalar>
std::vector<Scalar> to_input(const Observation& obs) {
  return std::vector<Scalar>(obs.data.begin(), obs.data.end());
}

/// y = r for terminal transitions, else r + gamma * max_a' Q(s', a'; target).
template <typename Scalar>
std::vector<double> td_targets(const std::vector<Transition>& batch, const QNetwork<Scalar>& target, double gamma) {
  if (gamma < 0 || gamma > 1) throw std::invalid_argument("td_targets: gamma outside [0,1]");
  std::vector<double> y(batch.size());
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const auto& t = batch[i];
    if (t.done) {
      y[i] = t.reward;
      continue;
    }
    auto q = target.forward(to_input<Scalar>(t.s_next));
    y[i] = t.reward + gamma * static_cast<double>(*std::max_element(q.begin(), q.end()));
  }
  return y;
}

template <typename Scalar>
struct LossAndGrad {
  double loss = 0;
  std::vector<Scalar> grad;
  double mean_q_taken = 0;
};

/// Mean squared TD error over the batch; only the taken action's output receives gradient.
/// Dropout masks come from `rng` when non-null.
template <typename Scalar, typename Rng = std::mt19937_64>
LossAndGrad<Scalar> loss_and_gradients(const QNetwork<Scalar>& net, const std::vector<Transition>& batch,
                                       std::span<const double> targets, Rng* rng = nullptr) {
  if (batch.empty() || targets.size() != batch.size()) {
    throw std::invalid_argument("loss_and_gradients: batch/target size mismatch");
  }
  LossAndGrad<Scalar> out;
  out.grad.assign(net.param_count(), Scalar(0));
  const double inv_b = 1.0 / static_cast<double>(batch.size());
  Activations<Scalar> acts;
  std::vector<Scalar> gout(static_cast<std::size_t>(net.config().actions));
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const auto& t = batch[i];
    if (t.action < 0 || t.action >= net.config().actions) throw std::invalid_argument("loss_and_gradients: bad action");
    auto input = to_input<Scalar>(t.s);
    auto q = net.forward_train(std::span<const Scalar>(input), acts, rng);
    double diff = static_cast<double>(q[static_cast<std::size_t>(t.action)]) - targets[i];
    out.loss += diff * diff * inv_b;
    out.mean_q_taken += static_cast<double>(q[static_cast<std::size_t>(t.action)]) * inv_b;
    std::fill(gout.begin(), gout.end(), Scalar(0));
    gout[static_cast<std::size_t>(t.action)] = static_cast<Scalar>(2.0 * diff * inv_b);
    net.backward(acts, gout, out.grad);
  }
  return out;
}

/// Rescales `grad` in place so that its global L2 norm is at most `max_norm`; returns the pre-clip norm.
template <typename Scalar>
double clip_grad_norm(std::span<Scalar> grad, double max_norm) {
  double sq = 0;
  for (Scalar g : grad) sq += static_cast<double>(g) * static_cast<double>(g);
  double norm = std::sqrt(sq);
  if (max_norm > 0 && norm > max_norm) {
    const Scalar s = static_cast<Scalar>(max_norm / norm);
    for (auto& g : grad) g *= s;
  }
  return norm;
}

struct AdamConfig {
  double lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// Adaptive per-parameter first/second moment scaling.
template <typename Scalar>
class Adam {
 public:
  Adam(std::size_t n, AdamConfig cfg = {}) : cfg_(cfg), m_(n, 0.0), v_(n, 0.0) {}

  void step(std::span<Scalar> params, std::span<const Scalar> grad) {
    if (params.size() != m_.size() || grad.size() != m_.size()) throw std::invalid_argument("Adam: size mismatch");
    ++t_;
    const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
    for (std::size_t i = 0; i < params.size(); ++i) {
      const double g = static_cast<double>(grad[i]);
      m_[i] = cfg_.beta1 * m_[i] + (1 - cfg_.beta1) * g;
      v_[i] = cfg_.beta2 * v_[i] + (1 - cfg_.beta2) * g * g;
      const double mhat = m_[i] / bc1, vhat = v_[i] / bc2;
      params[i] = static_cast<Scalar>(static_cast<double>(params[i]) - cfg_.lr * mhat / (std::sqrt(vhat) + cfg_.eps));
    }
  }

  std::uint64_t steps() const { return t_; }
  const AdamConfig& config() const { return cfg_; }

 private:
  AdamConfig cfg_;
  std::vector<double> m_, v_;
  std::uint64_t t_ = 0;
};

/// Linear decay from `start` to `end` over `decay_steps`, constant afterwards.
struct EpsilonSchedule {
  double start = 1.0;
  double end = 0.1;
  std::uint64_t decay_steps = 50000;

  double at(std::uint64_t step) const {
    if (decay_steps == 0 || step >= decay_steps) return end;
    double frac = static_cast<double>(step) / static_cast<double>(decay_steps);
    return start + (end - start) * frac;
  }
};

/// Epsilon-greedy: uniform action with probability eps, else argmax (lowest index on ties).
template <typename Scalar, typename Rng>
int select_action(std::span<const Scalar> q, double eps, Rng& rng) {
  if (q.empty()) throw std::invalid_argument("select_action: empty action values");
  if (eps > 0 && std::uniform_real_distribution<double>(0.0, 1.0)(rng) < eps) {
    return std::uniform_int_distribution<int>(0, static_cast<int>(q.size()) - 1)(rng);
  }
  return argmax(q);
}

inline ControlCommand action_to_command(int index) {
  return ControlCommand{ControlMode::PositionStep, ActionTable::step(index)};
}

}  // namespace avt::dqn

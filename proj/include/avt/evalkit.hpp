#pragma once

#include "avt/agent.hpp"
#include "avt/config.hpp"
#include "avt/env.hpp"
#include "avt/scene.hpp"

#include <atomic>
#include <chrono>
#include <istream>
#include <map>
#include <memory>
#include <mutex>
#include <ostream>
#include <random>
#include <string>
#include <thread>
#include <vector>

namespace avt {

/// Uniform over the 11 discrete actions, or uniform inside the actuator bounds for continuous modes.
class RandomAgent final : public Agent {
 public:
  explicit RandomAgent(ControlMode mode = ControlMode::PositionStep) : mode_(mode) {}

  std::string name() const override { return "random"; }
  ControlMode mode() const override { return mode_; }
  std::unique_ptr<Agent> clone() const override { return std::make_unique<RandomAgent>(mode_); }
  void reset(const AgentView&, std::uint64_t seed) override { rng_.seed(seed); }
  void seed(std::uint64_t s) { rng_.seed(s); }

  ControlCommand act(const AgentView&) override { return sample(); }

  ControlCommand sample() {
    if (mode_ == ControlMode::PositionStep) {
      last_ = std::uniform_int_distribution<int>(0, ActionTable::kSize - 1)(rng_);
      return ControlCommand{mode_, ActionTable::step(last_)};
    }
    const double lim = mode_ == ControlMode::Force ? kForceLimit : kVelocityLimit;
    std::uniform_real_distribution<double> u(-lim, lim);
    Vec3 v(u(rng_), u(rng_), u(rng_));
    return ControlCommand{mode_, v};
  }

  int last_action() const override { return mode_ == ControlMode::PositionStep ? last_ : -1; }

 private:
  ControlMode mode_;
  std::mt19937_64 rng_;
  int last_ = -1;
};

struct EpisodeLog {
  std::string model_id;
  Category category = Category::Asteroid;
  std::uint64_t seed = 0;
  std::vector<StepRecord> records;  // records[0] is the reset observation
  int length = 0;
  double total_reward = 0;
  double decision_seconds = 0;  // time spent inside the agent
  double step_seconds = 0;      // time spent inside the simulator
};

inline StepRecord initial_record(const Environment& env) {
  StepRecord r;
  auto rel = env.relative();
  r.r_body = rel.body;
  r.chaser = env.chaser().position;
  r.error = tracking_error(rel.body, env.config().r_star);
  r.visible = env.is_visible();
  return r;
}

/// Runs one episode to termination.
inline EpisodeLog run_episode(Agent& agent, EnvConfig cfg, const TargetModel& model, std::uint64_t seed) {
  using Clock = std::chrono::steady_clock;
  cfg.seed = seed;
  cfg.control_mode = agent.mode();
  Environment env(cfg);
  env.reset(model);
  agent.reset(make_view(env), derive_seed(seed, 0xa6e47));

  EpisodeLog log;
  log.model_id = model.id;
  log.category = model.category;
  log.seed = seed;
  StepRecord first = initial_record(env);
  agent.annotate(first);
  log.records.push_back(first);
  while (!env.done()) {
    auto t0 = Clock::now();
    ControlCommand cmd = agent.act(make_view(env));
    auto t1 = Clock::now();
    StepResult res = env.step(cmd);
    auto t2 = Clock::now();
    log.decision_seconds += std::chrono::duration<double>(t1 - t0).count();
    log.step_seconds += std::chrono::duration<double>(t2 - t1).count();

    StepRecord r;
    r.step = res.info.step;
    r.action = env.last_action();
    r.command = cmd.value;
    r.reward = res.reward;
    r.r_vis = res.breakdown.r_vis;
    r.r_dist = res.breakdown.r_dist;
    r.error = res.error;
    r.visible = res.info.visible;
    r.r_body = res.info.r_body;
    r.chaser = res.info.chaser_position;
    agent.annotate(r);
    log.records.push_back(r);
  }
  log.length = static_cast<int>(log.records.size());
  for (const auto& r : log.records) log.total_reward += r.reward;
  return log;
}

struct CategoryStats {
  Category category = Category::Asteroid;
  int episodes = 0;
  double ael = 0;
  double aer = 0;
};

struct EvalReport {
  std::string agent;
  std::vector<CategoryStats> categories;
  double ael = 0;
  double aer = 0;
  int n_categories = 0;
  int repetitions = 0;
  std::uint64_t seed = 0;
  Json config;  // effective environment configuration
  // wall-clock throughput; kept out of the deterministic report files
  double hz_decision = 0;
  double hz_inclusive = 0;
};

struct EvalResult {
  EvalReport report;
  std::vector<EpisodeLog> logs;  // category-major, repetition-minor
};

/// AEL/AER over all episodes and per category, summing in log order.
inline void aggregate(const std::vector<EpisodeLog>& logs, EvalReport& rep) {
  rep.categories.clear();
  std::map<Category, std::size_t> slot;
  long long len_sum = 0;
  double rew_sum = 0;
  std::vector<long long> cat_len;
  std::vector<double> cat_rew;
  for (const auto& l : logs) {
    auto [it, fresh] = slot.try_emplace(l.category, rep.categories.size());
    if (fresh) {
      rep.categories.push_back(CategoryStats{l.category, 0, 0, 0});
      cat_len.push_back(0);
      cat_rew.push_back(0);
    }
    auto& c = rep.categories[it->second];
    ++c.episodes;
    cat_len[it->second] += l.length;
    cat_rew[it->second] += l.total_reward;
    len_sum += l.length;
    rew_sum += l.total_reward;
  }
  for (std::size_t i = 0; i < rep.categories.size(); ++i) {
    auto& c = rep.categories[i];
    c.ael = static_cast<double>(cat_len[i]) / c.episodes;
    c.aer = cat_rew[i] / c.episodes;
  }
  const double n = logs.empty() ? 1.0 : static_cast<double>(logs.size());
  rep.ael = logs.empty() ? 0.0 : static_cast<double>(len_sum) / n;
  rep.aer = logs.empty() ? 0.0 : rew_sum / n;
  rep.n_categories = static_cast<int>(rep.categories.size());
  double decide = 0, total = 0;
  long long steps = 0;
  for (const auto& l : logs) {
    decide += l.decision_seconds;
    total += l.decision_seconds + l.step_seconds;
    steps += l.length - 1;
  }
  rep.hz_decision = decide > 0 ? static_cast<double>(steps) / decide : 0.0;
  rep.hz_inclusive = total > 0 ? static_cast<double>(steps) / total : 0.0;
}

/// Twelve train / six eval models; every category is represented in the eval split.
inline std::pair<std::vector<TargetModel>, std::vector<TargetModel>> one_shot_split(
    const std::vector<TargetModel>& catalog) {
  std::vector<TargetModel> train, eval;
  for (const auto& m : catalog) (m.split == Split::Train ? train : eval).push_back(m);
  return {train, eval};
}

inline int resolve_jobs(int jobs) {
  if (jobs > 0) return jobs;
  unsigned hc = std::thread::hardware_concurrency();
  return hc == 0 ? 1 : static_cast<int>(hc);
}

/// Runs R episodes per eval category. The r-th repetition of a category uses its
/// (r mod count)-th model and the seed derived from (seed, category, r). Jobs run in parallel,
/// each with its own environment and agent clone; results are reduced in a fixed order.
inline EvalResult evaluate(const Agent& agent, const std::vector<TargetModel>& eval_models, int repetitions,
                           const EnvConfig& cfg, std::uint64_t seed, int jobs = 1) {
  if (repetitions < 1) throw std::invalid_argument("evaluate: repetitions must be >= 1");
  if (eval_models.empty()) throw std::invalid_argument("evaluate: no eval models");
  struct Job {
    const TargetModel* model;
    std::uint64_t seed;
  };
  std::vector<Job> work;
  for (Category c : kCategories) {
    std::vector<const TargetModel*> ms;
    for (const auto& m : eval_models) {
      if (m.category == c) ms.push_back(&m);
    }
    if (ms.empty()) continue;
    for (int r = 0; r < repetitions; ++r) {
      work.push_back(Job{ms[static_cast<std::size_t>(r) % ms.size()],
                         derive_seed(seed, static_cast<std::uint64_t>(c), static_cast<std::uint64_t>(r))});
    }
  }

  EvalResult out;
  out.logs.resize(work.size());
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mu;
  auto worker = [&] {
    auto local = agent.clone();
    for (std::size_t i = next++; i < work.size(); i = next++) {
      try {
        out.logs[i] = run_episode(*local, cfg, *work[i].model, work[i].seed);
      } catch (...) {
        std::lock_guard lock(failure_mu);
        if (!failure) failure = std::current_exception();
        next = work.size();
      }
    }
  };
  const int n_threads = std::min<int>(resolve_jobs(jobs), static_cast<int>(work.size()));
  if (n_threads <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int t = 0; t < n_threads; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  if (failure) std::rethrow_exception(failure);

  out.report.agent = agent.name();
  out.report.repetitions = repetitions;
  out.report.seed = seed;
  EnvConfig echo = cfg;
  echo.control_mode = agent.mode();
  out.report.config = to_json(echo);
  aggregate(out.logs, out.report);
  return out;
}

struct SweepCell {
  std::string label;
  PerturbationConfig perturbations;
};

/// The seven perturbation settings: noise, delay, blur levels 1-4, and noise + delay + blur 3.
inline std::vector<SweepCell> perturbation_grid() {
  std::vector<SweepCell> g;
  g.push_back({"actuator_noise", {true, false, 0}});
  g.push_back({"time_delay", {false, true, 0}});
  for (int b = 1; b <= 4; ++b) g.push_back({"blur_" + std::to_string(b), {false, false, b}});
  g.push_back({"combined", {true, true, 3}});
  return g;
}

struct SweepRow {
  SweepCell cell;
  EvalResult result;
};

inline std::vector<SweepRow> perturbation_sweep(const Agent& agent, const std::vector<SweepCell>& grid,
                                                const std::vector<TargetModel>& eval_models, int repetitions,
                                                const EnvConfig& base, std::uint64_t seed, int jobs = 1) {
  std::vector<SweepRow> rows;
  for (const auto& cell : grid) {
    EnvConfig cfg = base;
    cfg.perturbations = cell.perturbations;
    rows.push_back(SweepRow{cell, evaluate(agent, eval_models, repetitions, cfg, seed, jobs)});
  }
  return rows;
}

enum class MotionPattern { Left, Right, Up, Down, Forward, Backward };

inline const std::initializer_list<std::pair<const char*, MotionPattern>> kPatterns = {
    {"left", MotionPattern::Left}, {"right", MotionPattern::Right},     {"up", MotionPattern::Up},
    {"down", MotionPattern::Down}, {"forward", MotionPattern::Forward}, {"backward", MotionPattern::Backward}};

inline MotionPattern parse_pattern(const std::string& s) {
  for (const auto& [n, p] : kPatterns) {
    if (s == n) return p;
  }
  throw std::invalid_argument("unknown motion pattern '" + s + "' (left, right, up, down, forward, backward)");
}

/// Direction of travel in the camera frame (x right, y down, z along the boresight).
inline Vec3 pattern_direction(MotionPattern p) {
  switch (p) {
    case MotionPattern::Left: return Vec3(-1, 0, 0);
    case MotionPattern::Right: return Vec3(1, 0, 0);
    case MotionPattern::Up: return Vec3(0, -1, 0);
    case MotionPattern::Down: return Vec3(0, 1, 0);
    case MotionPattern::Forward: return Vec3(0, 0, 1);
    case MotionPattern::Backward: return Vec3(0, 0, -1);
  }
  return Vec3::Zero();
}

struct ProbeResult {
  std::array<int, ActionTable::kSize> counts{};
  int frames = 0;
};

/// Target starts at the desired offset and translates along the pattern axis; the chaser holds
/// still while the agent's choice is recorded on every frame.
inline ProbeResult motion_pattern_probe(Agent& agent, EnvConfig cfg, const TargetModel& model, MotionPattern pattern,
                                        int steps, double speed = 0.3, std::uint64_t seed = 0) {
  if (steps < 1) throw std::invalid_argument("probe: steps must be >= 1");
  if (agent.mode() != ControlMode::PositionStep) throw std::invalid_argument("probe: needs a discrete-action agent");
  cfg.seed = seed;
  cfg.control_mode = ControlMode::PositionStep;
  cfg.perturbations = {};
  cfg.max_steps = steps;
  cfg.delayed_ending = 20;
  Environment env(cfg);
  TargetState t;
  t.position = cfg.r_star;
  t.velocity = cfg.mount.rotation * pattern_direction(pattern) * speed;
  env.reset_with(model, ChaserState{}, t);
  agent.reset(make_view(env), derive_seed(seed, 0xa6e47));

  ProbeResult out;
  for (int i = 0; i < steps; ++i) {
    agent.act(make_view(env));
    int a = agent.last_action();
    if (a < 0) throw std::logic_error("probe: agent did not report a discrete action");
    ++out.counts[static_cast<std::size_t>(a)];
    ++out.frames;
    if (i + 1 == steps) break;
    if (env.done()) throw std::runtime_error("probe: target left the view before the probe finished");
    env.step(0);  // no-op keeps the chaser in place
  }
  return out;
}

inline int modal_action(const ProbeResult& p) {
  int best = 0;
  for (int i = 1; i < ActionTable::kSize; ++i) {
    if (p.counts[static_cast<std::size_t>(i)] > p.counts[static_cast<std::size_t>(best)]) best = i;
  }
  return best;
}

// ---- persistence -------------------------------------------------------------------------

inline void write_report_csv(std::ostream& os, const EvalReport& r) {
  os << "category,episodes,ael,aer\n";
  for (const auto& c : r.categories) {
    os << category_name(c.category) << ',' << c.episodes << ',' << format_double(c.ael) << ','
       << format_double(c.aer) << '\n';
  }
  int total = 0;
  for (const auto& c : r.categories) total += c.episodes;
  os << "overall," << total << ',' << format_double(r.ael) << ',' << format_double(r.aer) << '\n';
}

inline void write_episodes_csv(std::ostream& os, const std::vector<EpisodeLog>& logs) {
  os << "episode,category,model,seed,length,total_reward\n";
  for (std::size_t i = 0; i < logs.size(); ++i) {
    const auto& l = logs[i];
    os << i << ',' << category_name(l.category) << ',' << l.model_id << ',' << l.seed << ',' << l.length << ','
       << format_double(l.total_reward) << '\n';
  }
}

inline void write_episode_log(std::ostream& os, const EpisodeLog& l) {
  os << kStepLogHeader << '\n';
  for (const auto& r : l.records) write_step_record(os, r);
}

inline Json summary_json(const EvalReport& r) {
  Json cats = Json::array();
  for (const auto& c : r.categories) {
    cats.push_back({{"category", category_name(c.category)}, {"episodes", c.episodes}, {"ael", c.ael},
                    {"aer", c.aer}});
  }
  return {{"agent", r.agent},           {"ael", r.ael},         {"aer", r.aer},   {"n_categories", r.n_categories},
          {"repetitions", r.repetitions}, {"seed", r.seed}, {"categories", cats}, {"config", r.config}};
}

inline Json throughput_json(const EvalReport& r) {
  return {{"agent", r.agent}, {"decision_hz", r.hz_decision}, {"inclusive_hz", r.hz_inclusive}};
}

/// Rewards column of a persisted step log, in row order.
inline std::vector<double> read_log_rewards(std::istream& is) {
  std::string line;
  if (!std::getline(is, line) || line != kStepLogHeader) throw std::runtime_error("step log: bad header");
  std::vector<double> rewards;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::size_t pos = 0;
    for (int col = 0; col < 5; ++col) {
      pos = line.find(',', pos);
      if (pos == std::string::npos) throw std::runtime_error("step log: short row");
      ++pos;
    }
    rewards.push_back(std::stod(line.substr(pos, line.find(',', pos) - pos)));
  }
  return rewards;
}

}  // namespace avt

#include "avt/config.hpp"
#include "avt/evalkit.hpp"

#include <gtest/gtest.h>

#include <set>
#include <sstream>

using namespace avt;

namespace {

EnvConfig fast_env() {
  EnvConfig c;
  c.resolution = 32;
  c.obs_size = 16;
  c.max_steps = 25;
  c.delayed_ending = 10;
  return c;
}

EpisodeLog fake_log(Category c, int length, double reward) {
  EpisodeLog l;
  l.category = c;
  l.length = length;
  l.total_reward = reward;
  return l;
}

}  // namespace

TEST(Split, TwelveTrainSixEvalCoveringEveryCategory) {
  auto [train, eval] = one_shot_split(canonical_catalog());
  EXPECT_EQ(train.size(), 12u);
  EXPECT_EQ(eval.size(), 6u);
  std::set<std::string> ids;
  for (const auto& m : train) ids.insert(m.id);
  std::map<Category, int> per;
  for (const auto& m : eval) {
    EXPECT_FALSE(ids.count(m.id)) << m.id;
    ++per[m.category];
  }
  EXPECT_EQ(per.size(), kCategories.size());
  for (auto [c, n] : per) EXPECT_EQ(n, c == Category::Asteroid ? 2 : 1);
}

TEST(Aggregate, Examples) {
  EvalReport r;
  aggregate({fake_log(Category::Asteroid, 10, 1.0), fake_log(Category::Asteroid, 20, -3.0),
             fake_log(Category::Satellite, 30, 5.0)},
            r);
  EXPECT_EQ(r.ael, 20.0);
  EXPECT_EQ(r.aer, 1.0);
  ASSERT_EQ(r.categories.size(), 2u);
  EXPECT_EQ(r.categories[0].ael, 15.0);
  EXPECT_EQ(r.categories[0].aer, -1.0);
  EXPECT_EQ(r.categories[1].episodes, 1);
  EXPECT_EQ(r.n_categories, 2);
  EvalReport empty;
  aggregate({}, empty);
  EXPECT_EQ(empty.ael, 0.0);
}

TEST(Evaluate, RandomAgentLogsAreConsistent) {
  auto cfg = fast_env();
  auto eval = one_shot_split(canonical_catalog()).second;
  auto res = evaluate(RandomAgent(), eval, 3, cfg, 42, 1);
  ASSERT_EQ(res.logs.size(), 15u);
  EXPECT_EQ(res.report.n_categories, 5);
  EXPECT_EQ(res.report.repetitions, 3);
  EXPECT_EQ(res.report.agent, "random");
  std::set<std::uint64_t> seeds;
  for (const auto& l : res.logs) {
    EXPECT_EQ(l.length, static_cast<int>(l.records.size()));
    EXPECT_GE(l.length, 2);
    EXPECT_LE(l.length, cfg.max_steps + 1);
    EXPECT_EQ(l.records.front().step, 0);
    EXPECT_EQ(l.records.front().reward, 0.0);
    double s = 0;
    for (const auto& r : l.records) s += r.reward;
    EXPECT_EQ(s, l.total_reward);
    if (l.length < cfg.max_steps + 1) {
      // terminated by the delayed ending: the final records are all lost frames
      for (int k = 0; k < cfg.delayed_ending; ++k) EXPECT_FALSE(l.records[l.records.size() - 1 - k].visible);
    }
    seeds.insert(l.seed);
  }
  EXPECT_EQ(seeds.size(), 15u);
}

TEST(Evaluate, ParallelReductionMatchesSerial) {
  auto cfg = fast_env();
  cfg.perturbations = PerturbationConfig{true, true, 1};
  auto eval = one_shot_split(canonical_catalog()).second;
  auto a = evaluate(RandomAgent(), eval, 2, cfg, 9, 1);
  auto b = evaluate(RandomAgent(), eval, 2, cfg, 9, 3);
  EXPECT_EQ(summary_json(a.report).dump(), summary_json(b.report).dump());
  for (std::size_t i = 0; i < a.logs.size(); ++i) {
    std::ostringstream x, y;
    write_episode_log(x, a.logs[i]);
    write_episode_log(y, b.logs[i]);
    EXPECT_EQ(x.str(), y.str());
  }
  std::ostringstream r1, r2;
  write_report_csv(r1, a.report);
  write_report_csv(r2, b.report);
  EXPECT_EQ(r1.str(), r2.str());
}

TEST(Evaluate, PersistedLogsReaggregateExactly) {
  auto cfg = fast_env();
  auto res = evaluate(RandomAgent(), one_shot_split(canonical_catalog()).second, 2, cfg, 3, 1);
  std::vector<EpisodeLog> reread;
  for (const auto& l : res.logs) {
    std::stringstream ss;
    write_episode_log(ss, l);
    auto rewards = read_log_rewards(ss);
    EpisodeLog r = fake_log(l.category, static_cast<int>(rewards.size()), 0.0);
    for (double v : rewards) r.total_reward += v;
    reread.push_back(r);
  }
  EvalReport rep;
  aggregate(reread, rep);
  EXPECT_EQ(rep.ael, res.report.ael);
  EXPECT_EQ(rep.aer, res.report.aer);
}

TEST(Evaluate, RejectsBadArguments) {
  EXPECT_THROW(evaluate(RandomAgent(), {sphere_model()}, 0, fast_env(), 0), std::invalid_argument);
  EXPECT_THROW(evaluate(RandomAgent(), {}, 1, fast_env(), 0), std::invalid_argument);
}

TEST(Sweep, GridHasSevenCells) {
  auto g = perturbation_grid();
  ASSERT_EQ(g.size(), 7u);
  EXPECT_EQ(g[0].label, "actuator_noise");
  EXPECT_TRUE(g[0].perturbations.actuator_noise);
  EXPECT_EQ(g[5].perturbations.blur_level, 4);
  EXPECT_TRUE(g[6].perturbations.actuator_noise && g[6].perturbations.time_delay);
  std::set<std::string> labels;
  for (const auto& c : g) labels.insert(c.label);
  EXPECT_EQ(labels.size(), 7u);
  EXPECT_TRUE(perturbation_sweep(RandomAgent(), {}, {sphere_model()}, 1, fast_env(), 0).empty());
}

TEST(Probe, HistogramSumsToFrames) {
  auto cfg = fast_env();
  RandomAgent agent;
  auto p = motion_pattern_probe(agent, cfg, sphere_model(), MotionPattern::Left, 20);
  int sum = 0;
  for (int c : p.counts) sum += c;
  EXPECT_EQ(sum, 20);
  EXPECT_EQ(p.frames, 20);
}

TEST(Probe, ZeroNetworkAlwaysPicksNoOp) {
  auto cfg = fast_env();
  dqn::QNetworkConfig n;
  n.merge_filters = 2;
  n.conv_filters = {2};
  n.hidden = {4};
  dqn::DqnAgent agent(dqn::QNetwork<float>(dqn::network_for(cfg, n)));
  for (auto [name, pat] : kPatterns) {
    auto p = motion_pattern_probe(agent, cfg, sphere_model(), pat, 15);
    EXPECT_EQ(p.counts[0], 15) << name;
    EXPECT_EQ(modal_action(p), 0);
  }
}

TEST(Probe, PatternsAndValidation) {
  EXPECT_EQ(pattern_direction(parse_pattern("left")), Vec3(-1, 0, 0));
  EXPECT_EQ(pattern_direction(parse_pattern("down")), Vec3(0, 1, 0));
  EXPECT_EQ(pattern_direction(parse_pattern("backward")), Vec3(0, 0, -1));
  EXPECT_THROW(parse_pattern("sideways"), std::invalid_argument);
  RandomAgent vel(ControlMode::Velocity);
  EXPECT_THROW(motion_pattern_probe(vel, fast_env(), sphere_model(), MotionPattern::Up, 5), std::invalid_argument);
  RandomAgent d;
  EXPECT_THROW(motion_pattern_probe(d, fast_env(), sphere_model(), MotionPattern::Up, 0), std::invalid_argument);
}

TEST(RandomAgent, UniformDiscreteAndBoundedContinuous) {
  RandomAgent a;
  a.seed(4);
  std::array<int, 11> counts{};
  const int n = 55000;
  for (int i = 0; i < n; ++i) {
    a.sample();
    ++counts[static_cast<std::size_t>(a.last_action())];
  }
  for (int c : counts) EXPECT_NEAR(static_cast<double>(c) / n, 1.0 / 11, 0.006);
  RandomAgent f(ControlMode::Force);
  f.seed(1);
  for (int i = 0; i < 1000; ++i) EXPECT_LE(f.sample().value.cwiseAbs().maxCoeff(), kForceLimit);
  EXPECT_EQ(f.last_action(), -1);
}

TEST(Report, CsvLayout) {
  EvalReport r;
  aggregate({fake_log(Category::Rocket, 4, 2.5)}, r);
  std::ostringstream os;
  write_report_csv(os, r);
  EXPECT_EQ(os.str(), "category,episodes,ael,aer\nRocket,1,4,2.5\noverall,1,4,2.5\n");
}

// ---- configuration ------------------------------------------------------------------------

TEST(Config, ShippedConfigsParse) {
  for (const char* name : {"default.jsonc", "smoke.jsonc", "sanity.jsonc"}) {
    auto c = parse_run_config(read_text_file(std::string(AVT_SOURCE_DIR) + "/configs/" + name));
    EXPECT_NO_THROW(validate(c)) << name;
  }
  auto d = parse_run_config(read_text_file(std::string(AVT_SOURCE_DIR) + "/configs/default.jsonc"));
  auto builtin = parse_run_config("{}");
  EXPECT_EQ(to_json(d).dump(), to_json(builtin).dump());
}

TEST(Config, DefaultsAndRoundTrip) {
  auto c = parse_run_config("// comment\n{ /* block */ \"env\": {\"max_steps\": 50}, \"eval\": {\"seed\": 4} }");
  EXPECT_EQ(c.env.max_steps, 50);
  EXPECT_EQ(c.env.delayed_ending, 15);
  EXPECT_EQ(c.env.obs_size, 64);
  EXPECT_EQ(c.trainer.gamma, 0.99);
  EXPECT_EQ(c.eval.seed, 4u);
  auto again = parse_run_config(to_json(c).dump());
  EXPECT_EQ(to_json(again).dump(), to_json(c).dump());
}

TEST(Config, RejectsUnknownKeysAndBadValues) {
  EXPECT_THROW(parse_run_config("{\"env\": {\"max_stpes\": 50}}"), ConfigError);
  EXPECT_THROW(parse_run_config("{\"bogus\": 1}"), ConfigError);
  EXPECT_THROW(parse_run_config("{\"env\": {\"control_mode\": \"warp\"}}"), ConfigError);
  EXPECT_THROW(parse_run_config("{\"env\": {\"delayed_ending\": 5}}"), ConfigError);
  EXPECT_THROW(parse_run_config("{\"env\": {\"max_steps\": \"many\"}}"), ConfigError);
  EXPECT_THROW(parse_run_config("{ not json"), ConfigError);
  EXPECT_THROW(read_text_file("/nonexistent/run.jsonc"), ConfigError);
}

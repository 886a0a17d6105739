// Command-line entry point: train, eval, probe, render, sweep.
#include "avt/avt.hpp"

#include <CLI11.hpp>

#include <atomic>
#include <csignal>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>

namespace fs = std::filesystem;
using namespace avt;

namespace {

std::atomic<bool> g_stop{false};

extern "C" void on_signal(int) { g_stop = true; }

struct Common {
  std::string config_path;
  std::string out;
  std::optional<std::uint64_t> seed;
  int jobs = 0;
  bool overwrite = false;
};

struct Loaded {
  RunConfig cfg;
  std::string text;
};

Loaded load(const Common& c) {
  Loaded l;
  l.text = read_text_file(c.config_path);
  l.cfg = parse_run_config(l.text);
  if (c.seed) {
    l.cfg.trainer.seed = *c.seed;
    l.cfg.eval.seed = *c.seed;
  }
  return l;
}

/// Creates the output directory; an existing non-empty directory needs --overwrite.
fs::path prepare_out(const Common& c, const RunConfig& cfg) {
  fs::path dir = c.out.empty() ? fs::path(cfg.output_dir) : fs::path(c.out);
  if (fs::exists(dir) && !fs::is_empty(dir)) {
    if (!c.overwrite) {
      throw std::runtime_error("output directory " + dir.string() + " is not empty (pass --overwrite to replace it)");
    }
    fs::remove_all(dir);
  }
  fs::create_directories(dir);
  return dir;
}

void write_text(const fs::path& p, const std::string& s) {
  std::ofstream out(p, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + p.string());
  out << s;
}

void echo_config(const fs::path& dir, const Loaded& l) {
  write_text(dir / "config.jsonc", l.text);
  write_text(dir / "config.resolved.json", to_json(l.cfg).dump(2) + "\n");
}

std::vector<TargetModel> train_models(const RunConfig& c) {
  if (c.targets == TargetSet::Sphere) return {sphere_model(c.sphere_radius)};
  return one_shot_split(canonical_catalog(c.catalog_seed)).first;
}

std::vector<TargetModel> eval_models(const RunConfig& c) {
  if (c.targets == TargetSet::Sphere) return {sphere_model(c.sphere_radius)};
  return one_shot_split(canonical_catalog(c.catalog_seed)).second;
}

std::unique_ptr<dqn::DqnAgent> load_dqn(const std::string& path, const EnvConfig& env) {
  auto ck = dqn::load_checkpoint(path);
  if (ck.network.input_size != env.obs_size || ck.network.input_channels != env.obs_channels()) {
    throw std::runtime_error("checkpoint input shape does not match the env config");
  }
  return std::make_unique<dqn::DqnAgent>(dqn::network_from_checkpoint(ck));
}

std::unique_ptr<Agent> make_agent(const std::string& spec, const EnvConfig& env) {
  const ControlMode continuous =
      env.control_mode == ControlMode::PositionStep ? ControlMode::Velocity : env.control_mode;
  if (spec == "random") return std::make_unique<RandomAgent>(env.control_mode);
  if (spec == "pbvs") return std::make_unique<PbvsAgent>(continuous, BoxSource::Tracker);
  if (spec == "pbvs-oracle") return std::make_unique<PbvsAgent>(continuous, BoxSource::GroundTruth);
  if (fs::is_regular_file(spec)) return load_dqn(spec, env);
  throw std::runtime_error("unknown agent '" + spec + "' (expected a checkpoint path, pbvs, pbvs-oracle or random)");
}

void write_eval(const fs::path& dir, const EvalResult& r) {
  fs::create_directories(dir / "logs");
  std::ofstream rep(dir / "report.csv");
  write_report_csv(rep, r.report);
  std::ofstream eps(dir / "episodes.csv");
  write_episodes_csv(eps, r.logs);
  write_text(dir / "summary.json", summary_json(r.report).dump(2) + "\n");
  write_text(dir / "throughput.json", throughput_json(r.report).dump(2) + "\n");
  for (std::size_t i = 0; i < r.logs.size(); ++i) {
    std::ostringstream name;
    name << "episode_" << std::setw(4) << std::setfill('0') << i << ".csv";
    std::ofstream log(dir / "logs" / name.str());
    write_episode_log(log, r.logs[i]);
  }
}

int cmd_train(const Common& c) {
  auto l = load(c);
  auto dir = prepare_out(c, l.cfg);
  echo_config(dir, l);
  std::signal(SIGINT, on_signal);
  std::signal(SIGTERM, on_signal);
  dqn::TrainHooks hooks;
  hooks.stop = &g_stop;
  hooks.on_episode = [](const dqn::CurveRow& r) {
    std::cout << "episode " << r.episode << " length " << r.length << " reward " << r.total_reward << " mean_q "
              << r.mean_q << std::endl;
  };
  auto res = dqn::train(l.cfg.env, l.cfg.trainer, l.cfg.network, train_models(l.cfg), hooks);
  dqn::save_checkpoint((dir / "checkpoint.avtq").string(), res.net, to_json(l.cfg).dump(), res.rng_state);
  std::ofstream curves(dir / "curves.csv");
  dqn::write_curves(curves, res.curves);
  Json summary = {{"episodes", res.curves.size()},
                  {"env_steps", res.env_steps},
                  {"gradient_steps", res.gradient_steps},
                  {"interrupted", res.interrupted}};
  write_text(dir / "train_summary.json", summary.dump(2) + "\n");
  std::cout << "wrote " << (dir / "checkpoint.avtq").string() << '\n';
  return 0;
}

int cmd_eval(const Common& c, const std::string& agent_spec) {
  auto l = load(c);
  auto agent = make_agent(agent_spec, l.cfg.env);
  auto dir = prepare_out(c, l.cfg);
  echo_config(dir, l);
  auto res = evaluate(*agent, eval_models(l.cfg), l.cfg.eval.repetitions, l.cfg.env, l.cfg.eval.seed, c.jobs);
  write_eval(dir, res);
  std::cout << agent->name() << ": AEL " << res.report.ael << " AER " << res.report.aer << '\n';
  return 0;
}

int cmd_sweep(const Common& c, const std::string& agent_spec) {
  auto l = load(c);
  auto agent = make_agent(agent_spec, l.cfg.env);
  auto dir = prepare_out(c, l.cfg);
  echo_config(dir, l);
  auto rows = perturbation_sweep(*agent, perturbation_grid(), eval_models(l.cfg), l.cfg.eval.repetitions, l.cfg.env,
                                 l.cfg.eval.seed, c.jobs);
  std::ofstream table(dir / "sweep.csv");
  table << "setting,actuator_noise,time_delay,blur_level,ael,aer\n";
  for (const auto& r : rows) {
    const auto& p = r.cell.perturbations;
    table << r.cell.label << ',' << p.actuator_noise << ',' << p.time_delay << ',' << p.blur_level << ','
          << format_double(r.result.report.ael) << ',' << format_double(r.result.report.aer) << '\n';
    write_eval(dir / r.cell.label, r.result);
    std::cout << r.cell.label << ": AEL " << r.result.report.ael << " AER " << r.result.report.aer << '\n';
  }
  return 0;
}

int cmd_probe(const Common& c, const std::string& checkpoint, const std::string& pattern_name) {
  auto l = load(c);
  auto pattern = parse_pattern(pattern_name);
  auto agent = load_dqn(checkpoint, l.cfg.env);
  auto dir = prepare_out(c, l.cfg);
  echo_config(dir, l);
  auto res = motion_pattern_probe(*agent, l.cfg.env, eval_models(l.cfg).front(), pattern, l.cfg.probe.steps,
                                  l.cfg.probe.speed, l.cfg.eval.seed);
  std::ofstream out(dir / ("probe_" + pattern_name + ".csv"));
  for (int i = 0; i < ActionTable::kSize; ++i) out << (i ? "," : "") << ActionTable::label(i);
  out << '\n';
  for (int i = 0; i < ActionTable::kSize; ++i) out << (i ? "," : "") << res.counts[static_cast<std::size_t>(i)];
  out << '\n';
  std::cout << pattern_name << ": modal action " << ActionTable::label(modal_action(res)) << '\n';
  return 0;
}

int cmd_render(const Common& c, const std::string& model_id, const std::vector<double>& position,
               const std::vector<double>& attitude) {
  auto l = load(c);
  std::optional<TargetModel> model;
  if (model_id == "sphere") model = sphere_model(l.cfg.sphere_radius);
  for (const auto& m : canonical_catalog(l.cfg.catalog_seed)) {
    if (m.id == model_id) model = m;
  }
  if (!model) throw std::runtime_error("unknown model id '" + model_id + "'");
  auto dir = prepare_out(c, l.cfg);
  Vec3 p = position.empty() ? l.cfg.env.r_star : Vec3(position[0], position[1], position[2]);
  TargetState t;
  if (!attitude.empty()) t.attitude = Vec3(attitude[0], attitude[1], attitude[2]);
  Pose pose{p, t.orientation()};
  RenderOptions opt;
  opt.z_max = l.cfg.env.z_max;
  Frame f = render(l.cfg.env.intrinsics(), *model, pose, opt);
  write_ppm((dir / "color.ppm").string(), f.color);
  write_depth_raw((dir / "depth.f32").string(), f.depth);
  std::cout << "rendered " << model_id << " (" << f.depth.width() << "x" << f.depth.height() << ")\n";
  return 0;
}

void add_common(CLI::App* sub, Common& c, bool jobs) {
  sub->add_option("--config", c.config_path, "Run configuration (JSON with comments)")->required();
  sub->add_option("--out", c.out, "Output directory (defaults to output_dir from the config)");
  sub->add_option("--seed", c.seed, "Overrides the trainer and evaluation seeds");
  if (jobs) sub->add_option("--jobs", c.jobs, "Parallel evaluation workers (0 = logical cores)");
  sub->add_flag("--overwrite", c.overwrite, "Replace an existing output directory");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Active visual tracking laboratory"};
  app.require_subcommand(1);
  Common common;
  std::string agent_spec, checkpoint, pattern, model_id;
  std::vector<double> position, attitude;

  auto* train = app.add_subcommand("train", "Train a Q-network tracker");
  add_common(train, common, false);

  auto* eval = app.add_subcommand("eval", "Evaluate an agent with the one-shot protocol");
  add_common(eval, common, true);
  eval->add_option("--agent", agent_spec, "Checkpoint path, pbvs, pbvs-oracle or random")->required();

  auto* sweep = app.add_subcommand("sweep", "Evaluate an agent under the perturbation grid");
  add_common(sweep, common, true);
  sweep->add_option("--agent", agent_spec, "Checkpoint path, pbvs, pbvs-oracle or random")->required();

  auto* probe = app.add_subcommand("probe", "Action histogram for a moving target");
  add_common(probe, common, false);
  probe->add_option("--checkpoint", checkpoint, "Trained checkpoint")->required();
  probe->add_option("--pattern", pattern, "left, right, up, down, forward or backward")->required();

  auto* rend = app.add_subcommand("render", "Render one color image and depth dump");
  add_common(rend, common, false);
  rend->add_option("--model", model_id, "Catalog model id or 'sphere'")->required();
  rend->add_option("--position", position, "Target position in the camera frame (m)")->expected(3);
  rend->add_option("--attitude", attitude, "Roll, pitch, yaw (rad)")->expected(3);

  CLI11_PARSE(app, argc, argv);

  try {
    if (*train) return cmd_train(common);
    if (*eval) return cmd_eval(common, agent_spec);
    if (*sweep) return cmd_sweep(common, agent_spec);
    if (*probe) return cmd_probe(common, checkpoint, pattern);
    if (*rend) return cmd_render(common, model_id, position, attitude);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 1;
}

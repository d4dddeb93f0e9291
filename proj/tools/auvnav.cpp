#include "auvnav/experiments.hpp"
#include "auvnav/io.hpp"
#include "auvnav/observability.hpp"

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>

using namespace auvnav;
namespace fs = std::filesystem;

namespace {

struct Common {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out = "out";
};

void add_common(CLI::App* app, Common& c) {
  app->add_option("--config", c.config, "JSON config file")->check(CLI::ExistingFile);
  app->add_option("--seed", c.seed, "Master seed (overrides the config)");
  app->add_option("--out", c.out, "Output directory");
}

ConfigFile load(const Common& c) {
  ConfigFile cfg;
  if (!c.config.empty()) {
    std::ifstream is(c.config);
    cfg = config_from_json(json::parse(is));
  }
  if (c.seed) {
    cfg.seed = *c.seed;
    cfg.scenario.seed = *c.seed;
  }
  return cfg;
}

std::ofstream open_out(const fs::path& dir, const std::string& name) {
  fs::create_directories(dir);
  std::ofstream os(dir / name);
  if (!os) throw std::runtime_error("cannot write " + (dir / name).string());
  return os;
}

void echo_config(const fs::path& dir, const ConfigFile& cfg) {
  open_out(dir, "config.json") << config_to_json(cfg).dump(2) << '\n';
}

json metrics_json(const TrialMetrics& m) {
  json j{{"completed", m.completed},
         {"position_rmse_m", m.position_rmse},
         {"final_position_error_m", m.final_position_error},
         {"gate_rejections", m.gate_rejections},
         {"init_window_s", m.init_window}};
  if (!m.diagnostic.empty()) j["diagnostic"] = m.diagnostic;
  if (m.calib) {
    j["beacon_m"] = detail::vec(m.calib->beacon_world);
    j["misalignment_deg"] = detail::vec_deg(m.calib->misalignment.to_vector());
    j["beacon_error_m"] = m.beacon_error->norm();
    j["alignment_error_deg"] = detail::vec_deg(*m.alignment_error);
  }
  return j;
}

json aggregate_json(const AggregateMetrics& a) {
  return {{"n_trials", a.n_trials},
          {"n_completed", a.n_completed},
          {"n_calibrated", a.n_calibrated},
          {"n_navigated", a.n_navigated},
          {"mean_position_rmse_m", a.mean_position_rmse},
          {"median_final_error_m", a.median_final_error},
          {"beacon_rmse_m", a.beacon_rmse},
          {"alignment_rmse_deg", rad2deg(a.alignment_rmse)},
          {"beacon_mean_m", detail::vec(a.beacon_mean)},
          {"misalignment_mean_deg", detail::vec_deg(a.misalignment_mean)}};
}

int cmd_simulate(const Common& c) {
  const ConfigFile cfg = load(c);
  const GroundTruthLog truth = generate_truth(cfg.scenario);
  const MeasurementStream stream = generate_measurements(truth, cfg.scenario);
  const fs::path dir = c.out;
  echo_config(dir, cfg);
  auto ts = open_out(dir, "truth.csv");
  write_truth(ts, truth, cfg.scenario);
  auto ss = open_out(dir, "stream.jsonl");
  write_stream(ss, stream);
  std::cout << "wrote " << truth.size() << " truth rows, " << stream.size() << " records to " << dir << '\n';
  return 0;
}

int cmd_run(const Common& c, const std::string& mode_name, const std::string& stream_path,
            const std::string& truth_path) {
  ConfigFile cfg = load(c);
  if (!mode_name.empty()) cfg.mode = run_mode_from_name(mode_name);
  const fs::path dir = c.out;
  echo_config(dir, cfg);

  if (cfg.mode == RunMode::UsblAid) {
    const TrialOutcome t = run_trial(cfg.scenario, cfg.run, cfg.mode, cfg.scenario.seed);
    open_out(dir, "metrics.json") << json{{"config", config_to_json(cfg)}, {"trial", metrics_json(t.metrics)}}.dump(2)
                                  << '\n';
    std::cout << metrics_json(t.metrics).dump(2) << '\n';
    return t.metrics.completed ? 0 : 2;
  }

  GroundTruthLog truth;
  MeasurementStream stream;
  if (!stream_path.empty()) {
    std::ifstream is(stream_path);
    stream = read_stream(is);
    if (truth_path.empty()) throw std::runtime_error("--stream requires --truth for the initial state and metrics");
    std::ifstream ts(truth_path);
    truth = read_truth(ts);
  } else {
    truth = generate_truth(cfg.scenario);
    stream = generate_measurements(truth, cfg.scenario);
  }
  const RunResult run = run_mode(cfg.mode, stream, truth.states.front(), cfg.run);
  auto es = open_out(dir, "estimates.csv");
  write_estimates(es, run.estimates);
  const TrialMetrics m = compute_metrics(run, truth);
  json report{{"config", config_to_json(cfg)}, {"trial", metrics_json(m)}};
  report["init"] = {{"succeeded", run.init.succeeded},
                    {"attempts", run.init.attempts},
                    {"t_ready", run.init.t_ready},
                    {"n_constraints", run.init.n_constraints},
                    {"n_doa_inliers", run.init.n_doa_inliers}};
  open_out(dir, "metrics.json") << report.dump(2) << '\n';
  std::cout << metrics_json(m).dump(2) << '\n';
  if (run.aborted) std::cerr << "trial aborted: " << run.diagnostic << '\n';
  return run.aborted ? 2 : 0;
}

int cmd_campaign(const Common& c, std::vector<std::string> modes, int trials, int threads, double offset_deg) {
  ConfigFile cfg = load(c);
  if (trials > 0) cfg.trials = trials;
  if (modes.empty()) modes.push_back(std::string(run_mode_name(cfg.mode)));
  const fs::path dir = c.out;
  echo_config(dir, cfg);
  json report{{"config", config_to_json(cfg)}, {"bearing_offset_deg", offset_deg}, {"modes", json::object()}};
  auto summary = open_out(dir, "summary.txt");
  for (const auto& name : modes) {
    const RunMode mode = run_mode_from_name(name);
    const CampaignResult r =
        run_campaign(cfg.scenario, cfg.run, mode, cfg.trials, cfg.seed, threads, deg2rad(offset_deg));
    auto ts = open_out(dir, "trials_" + name + ".csv");
    write_trial_metrics_csv(ts, r.trials);
    json per = json::array();
    for (const auto& t : r.trials) per.push_back(metrics_json(t.metrics));
    report["modes"][name] = {{"aggregate", aggregate_json(r.aggregate)}, {"trials", per}};
    write_summary(summary, name, r.aggregate);
    write_summary(std::cout, name, r.aggregate);
  }
  open_out(dir, "metrics.json") << report.dump(2) << '\n';
  return 0;
}

int cmd_sweep(const Common& c, int samples) {
  const ConfigFile cfg = load(c);
  SweepConfig sw;
  for (double a : {0.0, 5.0, 10.0, 20.0, 30.0, 45.0, 60.0}) sw.sigma_angle.push_back(deg2rad(a));
  sw.sigma_radius = {0.0, 2.0, 4.0, 6.0, 8.0, 10.0};
  sw.samples_per_cell = samples;
  sw.seed = cfg.seed;
  sw.calib = cfg.scenario.true_calib();
  const fs::path dir = c.out;
  echo_config(dir, cfg);
  auto os = open_out(dir, "observability_sweep.csv");
  const auto cells = sweep_observability(sw);
  write_sweep_csv(os, cells);
  write_sweep_csv(std::cout, cells);
  return 0;
}

int cmd_metrics(const Common& c, const std::string& est_path, const std::string& truth_path) {
  std::ifstream es(est_path), ts(truth_path);
  if (!es || !ts) throw std::runtime_error("cannot open estimates or truth file");
  const auto est = read_estimates(es);
  const GroundTruthLog truth = read_truth(ts);
  const TrialMetrics m = compute_metrics(est, truth, final_calibration(est));
  json report{{"estimates", est_path}, {"truth", truth_path}, {"trial", metrics_json(m)}};
  if (!c.config.empty()) report["config"] = config_to_json(load(c));
  open_out(c.out, "metrics.json") << report.dump(2) << '\n';
  std::cout << metrics_json(m).dump(2) << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"AUV navigation with online beacon localization and array alignment"};
  app.require_subcommand(1);

  Common common;
  auto* sim = app.add_subcommand("simulate", "Generate ground truth and a measurement stream");
  add_common(sim, common);

  std::string mode, stream_path, truth_path;
  auto* run = app.add_subcommand("run", "Run one trial (proposed, dr, misalignment_ignorant, usbl_aid_calibration)");
  add_common(run, common);
  run->add_option("--mode", mode, "Overrides the config mode");
  run->add_option("--stream", stream_path, "Measurement stream (.jsonl) instead of simulating")->check(CLI::ExistingFile);
  run->add_option("--truth", truth_path, "Ground truth CSV matching --stream")->check(CLI::ExistingFile);

  std::vector<std::string> modes;
  int trials = 0, threads = 0;
  double offset_deg = 0.0;
  auto* camp = app.add_subcommand("campaign", "Monte Carlo trials with a summary table");
  add_common(camp, common);
  camp->add_option("--modes", modes, "Modes to run on the same seeds")->delimiter(',');
  camp->add_option("--trials", trials, "Overrides the config trial count")->check(CLI::PositiveNumber);
  camp->add_option("--threads", threads, "Worker threads (0: all cores)")->check(CLI::NonNegativeNumber);
  camp->add_option("--bearing-offset-deg", offset_deg, "Offset added to every DoA bearing");

  int samples = 500;
  auto* sweep = app.add_subcommand("observability-sweep", "Observability ratio over angular and radial spread");
  add_common(sweep, common);
  sweep->add_option("--samples", samples, "Samples per grid cell")->check(CLI::PositiveNumber);

  std::string est_path;
  auto* met = app.add_subcommand("metrics", "Metrics of an estimates CSV against a truth CSV");
  add_common(met, common);
  met->add_option("--estimates", est_path)->required()->check(CLI::ExistingFile);
  met->add_option("--truth", truth_path)->required()->check(CLI::ExistingFile);

  CLI11_PARSE(app, argc, argv);

  try {
    if (*sim) return cmd_simulate(common);
    if (*run) return cmd_run(common, mode, stream_path, truth_path);
    if (*camp) return cmd_campaign(common, modes, trials, threads, offset_deg);
    if (*sweep) return cmd_sweep(common, samples);
    if (*met) return cmd_metrics(common, est_path, truth_path);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}

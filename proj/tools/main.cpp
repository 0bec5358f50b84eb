#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#ifdef _OPENMP
#include <omp.h>
#endif

#include "hjopt/evaluator.hpp"
#include "hjopt/io.hpp"
#include "hjopt/simulator.hpp"
#include "hjopt/trainer.hpp"
#include "hjopt/verify.hpp"

namespace {

using namespace hjopt;

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitFingerprint = 3;
constexpr int kExitNumeric = 4;
constexpr int kExitCollapse = 5;

void apply_threads(int threads) {
#ifdef _OPENMP
  if (threads > 0) omp_set_num_threads(threads);
#else
  (void)threads;
#endif
}

struct GridSpec {
  double lo = 0.0, hi = 0.0;
  int n = 0;
};

GridSpec parse_grid(const std::string& text) {
  GridSpec grid;
  size_t p1 = text.find(':');
  size_t p2 = text.find(':', p1 == std::string::npos ? p1 : p1 + 1);
  if (p1 == std::string::npos || p2 == std::string::npos)
    throw ConfigError("/grid", "expected \"lo:hi:n\"");
  try {
    grid.lo = std::stod(text.substr(0, p1));
    grid.hi = std::stod(text.substr(p1 + 1, p2 - p1 - 1));
    grid.n = std::stoi(text.substr(p2 + 1));
  } catch (const std::exception&) {
    throw ConfigError("/grid", "expected numeric \"lo:hi:n\"");
  }
  if (grid.n < 2 || grid.hi <= grid.lo) throw ConfigError("/grid", "need n >= 2 and hi > lo");
  return grid;
}

Vec default_start(const RunConfig& cfg) {
  if (cfg.evaluate.start_x) return *cfg.evaluate.start_x;
  double mid = 0.5 * (cfg.simulate.x0_low + cfg.simulate.x0_high);
  return Vec::Constant(cfg.model.state_dim, mid);
}

int cmd_simulate(const std::string& config_path, const std::string& out_path,
                 std::optional<std::uint64_t> seed_override) {
  RunConfig cfg = load_run_config(config_path);
  std::uint64_t seed = seed_override ? *seed_override : cfg.simulate.seed;
  StateSampler sampler =
      uniform_box_sampler(cfg.model.state_dim, cfg.simulate.x0_low, cfg.simulate.x0_high);
  Dataset data = simulate_dataset(cfg.model, cfg.behavior_policy, cfg.simulate.n_traj, seed, sampler);
  write_dataset_jsonl(out_path, cfg.model, data);

  double lo = std::numeric_limits<double>::infinity(), hi = -lo;
  for (const Trajectory& traj : data.trajectories) {
    lo = std::min(lo, traj.states.minCoeff());
    hi = std::max(hi, traj.states.maxCoeff());
  }
  std::cout << "wrote " << data.trajectories.size() << " trajectories, " << cfg.model.n_steps
            << " steps each, seed " << seed << ", fingerprint " << data.spec_fingerprint << "\n";
  if (!data.trajectories.empty()) std::cout << "state range [" << lo << ", " << hi << "]\n";
  return kExitOk;
}

int cmd_train(const std::string& config_path, const std::string& data_path,
              const std::string& out_path, const std::string& metrics_path, bool allow_mismatch,
              const std::string& resume_path) {
  RunConfig cfg = load_run_config(config_path);
  auto [header, data] = read_dataset_jsonl(data_path);
  std::string expected = dataset_fingerprint(cfg.model, cfg.behavior_policy);
  if (header.spec_fingerprint != expected && !allow_mismatch) {
    std::cerr << "dataset fingerprint " << header.spec_fingerprint
              << " does not match config fingerprint " << expected
              << " (use --allow-mismatch to override)\n";
    return kExitFingerprint;
  }

  ValueNetwork net;
  AdamState state;
  int start_epoch = 0;
  if (!resume_path.empty()) {
    Checkpoint ckpt = load_checkpoint(resume_path);
    net = std::move(ckpt.net);
    if (ckpt.optimizer_state) state = *ckpt.optimizer_state;
    start_epoch = ckpt.epochs_done;
  } else {
    net = ValueNetwork::initialize(cfg.model.state_dim, cfg.network.hidden_widths,
                                   cfg.network.init_seed);
    if (cfg.network.whiten_inputs) {
      const int d = cfg.model.state_dim + 2;
      Vec sum = Vec::Zero(d), sum_sq = Vec::Zero(d);
      long count = 0;
      for (const Trajectory& traj : data.trajectories) {
        for (int i = 0; i < traj.states.rows(); ++i) {
          Vec in(d);
          in.head(cfg.model.state_dim) = traj.states.row(i).transpose();
          in[cfg.model.state_dim] = traj.costs[i];
          in[cfg.model.state_dim + 1] = traj.times[i];
          sum += in;
          sum_sq += in.cwiseProduct(in);
          ++count;
        }
      }
      if (count > 1) {
        InputWhitening w;
        w.mean = sum / count;
        w.std = ((sum_sq / count - w.mean.cwiseProduct(w.mean)).cwiseMax(1e-12)).cwiseSqrt();
        net.set_whitening(std::move(w));
      }
    }
  }

  TrainingConfig tc = cfg.train;
  if (tc.checkpoint_path.empty()) tc.checkpoint_path = out_path;
  try {
    MetricsLog log = train(net, data, cfg.model, cfg.behavior_policy, tc, &state, start_epoch);
    save_checkpoint(out_path, net, &state, cfg.train.epochs);
    std::string mpath = metrics_path.empty() ? out_path + ".metrics.csv" : metrics_path;
    write_metrics_csv(mpath, log);
    if (!log.epochs.empty())
      std::cout << "trained " << log.epochs.size() << " epochs, final loss "
                << log.epochs.back().mean_loss << "\n";
    else
      std::cout << "no epochs requested; checkpoint written unchanged\n";
  } catch (const NonFiniteLoss& e) {
    Json replay{{"message", e.what()}, {"epoch", e.epoch}, {"batch_index", e.batch_index}};
    std::ofstream out(out_path + ".replay.json");
    out << replay.dump(2) << "\n";
    std::cerr << "non-finite loss at epoch " << e.epoch << ", batch " << e.batch_index << "\n";
    return kExitNumeric;
  }
  return kExitOk;
}

int cmd_evaluate(const std::string& config_path, const std::string& model_path,
                 const std::string& out_dir) {
  RunConfig cfg = load_run_config(config_path);
  Checkpoint ckpt = load_checkpoint(model_path);
  std::filesystem::create_directories(out_dir);
  ExtendedState start{default_start(cfg), 0.0, 0.0};
  const int n_mc = cfg.evaluate.n_mc;
  const std::uint64_t seed = cfg.evaluate.seed;

  ReturnDistribution behavior =
      estimate_return_distribution(cfg.model, cfg.behavior_policy, start, n_mc, seed);
  ReturnDistribution optimal = estimate_return_distribution(cfg.model, cfg.behavior_policy,
                                                            ckpt.net, start, n_mc, seed + 1);
  RegularizedCost cost0 = estimate_regularized_cost(cfg.model, cfg.behavior_policy, start, n_mc, seed);
  RegularizedCost cost1 = estimate_regularized_cost(cfg.model, cfg.behavior_policy, ckpt.net,
                                                    start, n_mc, seed + 1, cfg.evaluate.n_kl);

  auto path = [&](const std::string& name) { return out_dir + "/" + name; };
  write_return_distribution(path("dist_behavior.csv"), path("dist_behavior.json"), behavior);
  write_return_distribution(path("dist_optimal.csv"), path("dist_optimal.json"), optimal);

  double delta = cost1.total - cost0.total;
  double combined_se = std::sqrt(cost0.total_se * cost0.total_se + cost1.total_se * cost1.total_se);
  Json comparison{{"seed", seed},
                  {"n_mc", n_mc},
                  {"behavior", regularized_cost_to_json(cost0)},
                  {"optimal", regularized_cost_to_json(cost1)},
                  {"delta_total", delta},
                  {"delta_combined_se", combined_se},
                  {"improved", delta <= 0.0}};
  std::ofstream out(path("comparison.json"));
  out << comparison.dump(2) << "\n";
  std::cout << "J(pi0) = " << cost0.total << " +- " << cost0.total_se << ", J(pi*) = "
            << cost1.total << " +- " << cost1.total_se << ", delta = " << delta << "\n";
  return kExitOk;
}

int cmd_slice(const std::string& config_path, const std::string& model_path, int dim,
              const std::string& grid_text, const std::string& out_path) {
  RunConfig cfg = load_run_config(config_path);
  Checkpoint ckpt = load_checkpoint(model_path);
  GridSpec grid = parse_grid(grid_text);
  if (dim < 0 || dim >= cfg.model.state_dim)
    throw ConfigError("/dim", "sweep dimension out of range for state_dim " +
                                  std::to_string(cfg.model.state_dim));
  std::vector<double> values(grid.n);
  for (int i = 0; i < grid.n; ++i)
    values[i] = grid.lo + (grid.hi - grid.lo) * i / (grid.n - 1);
  ExtendedState anchor{default_start(cfg), 0.0, 0.0};
  auto rows = policy_slice_export(ckpt.net, cfg.behavior_policy, cfg.model, dim, values, anchor);
  write_policy_slice_csv(out_path, rows);
  std::cout << "wrote " << rows.size() << " slice rows to " << out_path << "\n";
  return kExitOk;
}

int cmd_verify(const std::string& level, const std::string& out_path) {
  auto checks = run_verification(level);
  Json report = verification_report(checks);
  if (!out_path.empty()) {
    std::ofstream out(out_path);
    out << report.dump(2) << "\n";
  }
  std::cout << report.dump(2) << "\n";
  for (const auto& check : checks)
    if (!check.pass) {
      std::cerr << "verification breach: " << check.check_name << "\n";
      return 1;
    }
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"offline continuous-time distributional policy optimization"};
  app.require_subcommand(1);
  int threads = 0;
  app.add_option("--threads", threads, "cap worker thread count");

  std::string config_path, out_path, data_path, model_path, out_dir, metrics_path;
  std::string grid_text = "-5:5:201", level = "quick", resume_path;
  int dim = 0;
  bool allow_mismatch = false;
  std::int64_t seed_flag = -1;

  auto* simulate = app.add_subcommand("simulate", "generate a behavioral dataset");
  simulate->add_option("--config", config_path)->required();
  simulate->add_option("--out", out_path)->required();
  simulate->add_option("--seed", seed_flag, "override the config seed");

  auto* train_cmd = app.add_subcommand("train", "fit the value network");
  train_cmd->add_option("--config", config_path)->required();
  train_cmd->add_option("--data", data_path)->required();
  train_cmd->add_option("--out", out_path)->required();
  train_cmd->add_option("--metrics", metrics_path);
  train_cmd->add_option("--resume", resume_path, "resume from a checkpoint");
  train_cmd->add_flag("--allow-mismatch", allow_mismatch);

  auto* evaluate = app.add_subcommand("evaluate", "Monte Carlo policy comparison");
  evaluate->add_option("--config", config_path)->required();
  evaluate->add_option("--model", model_path)->required();
  evaluate->add_option("--out-dir", out_dir)->required();

  auto* slice = app.add_subcommand("slice", "export posterior policy slices");
  slice->add_option("--config", config_path)->required();
  slice->add_option("--model", model_path)->required();
  slice->add_option("--dim", dim)->required();
  slice->add_option("--grid", grid_text);
  slice->add_option("--out", out_path)->required();

  auto* verify = app.add_subcommand("verify", "run the oracle cross-check battery");
  verify->add_option("--level", level)->check(CLI::IsMember({"quick", "full"}));
  verify->add_option("--out", out_path);

  CLI11_PARSE(app, argc, argv);
  apply_threads(threads);

  try {
    if (simulate->parsed()) {
      std::optional<std::uint64_t> seed;
      if (seed_flag >= 0) seed = static_cast<std::uint64_t>(seed_flag);
      return cmd_simulate(config_path, out_path, seed);
    }
    if (train_cmd->parsed())
      return cmd_train(config_path, data_path, out_path, metrics_path, allow_mismatch, resume_path);
    if (evaluate->parsed()) return cmd_evaluate(config_path, model_path, out_dir);
    if (slice->parsed()) return cmd_slice(config_path, model_path, dim, grid_text, out_path);
    if (verify->parsed()) return cmd_verify(level, out_path);
  } catch (const ConfigError& e) {
    std::cerr << "config error at " << e.what() << "\n";
    return kExitConfig;
  } catch (const NonFiniteLoss& e) {
    std::cerr << "numeric failure: " << e.what() << "\n";
    return kExitNumeric;
  } catch (const CurvatureCollapse& e) {
    std::cerr << "policy collapse: " << e.what() << "\n";
    return kExitCollapse;
  } catch (const std::invalid_argument& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return kExitOk;
}

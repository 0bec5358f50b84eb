#pragma once

#include <optional>
#include <string>

#include <json.hpp>

#include "hjopt/evaluator.hpp"
#include "hjopt/gm_policy.hpp"
#include "hjopt/model.hpp"
#include "hjopt/trainer.hpp"
#include "hjopt/value_net.hpp"

namespace hjopt {

using Json = nlohmann::json;

// Schema violations carry a JSON-pointer path to the offending key.
struct ConfigError : std::runtime_error {
  ConfigError(const std::string& path, const std::string& message)
      : std::runtime_error(path + ": " + message), pointer(path) {}
  std::string pointer;
};

std::string fnv1a_hex(const std::string& data);

Json model_spec_to_json(const ModelSpec& spec);
ModelSpec model_spec_from_json(const Json& j, const std::string& path = "/model");

Json policy_to_json(const GaussianMixturePolicy& policy);
GaussianMixturePolicy policy_from_json(const Json& j, int state_dim, int action_dim,
                                       const std::string& path = "/behavior_policy");

std::string dataset_fingerprint(const ModelSpec& spec, const GaussianMixturePolicy& policy);

struct SimulateConfig {
  int n_traj = 10000;
  std::uint64_t seed = 0;
  double x0_low = 0.05;
  double x0_high = 0.15;
};

struct EvaluateConfig {
  int n_mc = 5000;
  std::uint64_t seed = 0;
  int n_kl = 16;
  std::optional<Vec> start_x;  // default: x0 sampler mean
};

struct NetworkConfig {
  std::vector<int> hidden_widths = {64, 64, 64};
  std::uint64_t init_seed = 0;
  bool whiten_inputs = false;
};

// Whole run configuration: sections model / behavior_policy / simulate /
// train / evaluate / network. Unknown keys are rejected.
struct RunConfig {
  ModelSpec model;
  GaussianMixturePolicy behavior_policy;
  SimulateConfig simulate;
  TrainingConfig train;
  EvaluateConfig evaluate;
  NetworkConfig network;
};

RunConfig run_config_from_json(const Json& j);
RunConfig load_run_config(const std::string& path);

// Dataset file: JSON Lines; line 1 a header object, one trajectory per line.
struct DatasetHeader {
  int format_version = 1;
  int state_dim = 0;
  int action_dim = 0;
  int n_steps = 0;
  double horizon = 0.0;
  double dt = 0.0;
  std::uint64_t seed = 0;
  std::string spec_fingerprint;
};

void write_dataset_jsonl(const std::string& path, const ModelSpec& spec, const Dataset& dataset);
std::pair<DatasetHeader, Dataset> read_dataset_jsonl(const std::string& path);

void save_checkpoint(const std::string& path, const ValueNetwork& net,
                     const AdamState* optimizer_state = nullptr, int epochs_done = 0);
struct Checkpoint {
  ValueNetwork net;
  std::optional<AdamState> optimizer_state;
  int epochs_done = 0;
};
Checkpoint load_checkpoint(const std::string& path);

void write_metrics_csv(const std::string& path, const MetricsLog& log);
void write_return_distribution(const std::string& csv_path, const std::string& json_path,
                               const ReturnDistribution& dist);
void write_policy_slice_csv(const std::string& path, const std::vector<PolicySliceRow>& rows);
Json regularized_cost_to_json(const RegularizedCost& rc);

}  // namespace hjopt

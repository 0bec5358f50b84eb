#include "hjopt/io.hpp"

#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

namespace hjopt {

namespace {

[[noreturn]] void fail(const std::string& path, const std::string& message) {
  throw ConfigError(path, message);
}

void reject_unknown_keys(const Json& j, const std::string& path,
                         const std::set<std::string>& allowed) {
  if (!j.is_object()) fail(path, "expected an object");
  for (const auto& item : j.items())
    if (!allowed.count(item.key())) fail(path + "/" + item.key(), "unknown key");
}

double get_number(const Json& j, const std::string& path) {
  if (!j.is_number()) fail(path, "expected a number");
  return j.get<double>();
}

int get_int(const Json& j, const std::string& path) {
  if (!j.is_number_integer()) fail(path, "expected an integer");
  return j.get<int>();
}

std::uint64_t get_seed(const Json& j, const std::string& path) {
  if (!(j.is_number_integer() && j.get<long long>() >= 0)) fail(path, "expected a non-negative integer");
  return j.get<std::uint64_t>();
}

Json vec_to_json(const Vec& v) {
  Json out = Json::array();
  for (int i = 0; i < v.size(); ++i) out.push_back(v[i]);
  return out;
}

Json mat_to_json(const Mat& m) {
  Json out = Json::array();
  for (int i = 0; i < m.rows(); ++i) {
    Json row = Json::array();
    for (int j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    out.push_back(std::move(row));
  }
  return out;
}

// A vector-valued field accepts either a scalar (constant fill) or an array.
Vec parse_vec(const Json& j, int n, const std::string& path) {
  if (j.is_number()) return Vec::Constant(n, j.get<double>());
  if (!j.is_array()) fail(path, "expected a number or an array");
  if (static_cast<int>(j.size()) != n)
    fail(path, "expected length " + std::to_string(n) + ", got " + std::to_string(j.size()));
  Vec v(n);
  for (int i = 0; i < n; ++i) v[i] = get_number(j[i], path + "/" + std::to_string(i));
  return v;
}

// A matrix-valued field accepts a scalar (that value on the main diagonal,
// zero elsewhere) or a nested array of rows.
Mat parse_mat(const Json& j, int rows, int cols, const std::string& path) {
  if (j.is_number()) {
    Mat m = Mat::Zero(rows, cols);
    for (int i = 0; i < std::min(rows, cols); ++i) m(i, i) = j.get<double>();
    return m;
  }
  if (!j.is_array()) fail(path, "expected a number or a nested array");
  if (static_cast<int>(j.size()) != rows)
    fail(path, "expected " + std::to_string(rows) + " rows, got " + std::to_string(j.size()));
  Mat m(rows, cols);
  for (int i = 0; i < rows; ++i) {
    const Json& row = j[i];
    const std::string row_path = path + "/" + std::to_string(i);
    if (!row.is_array() || static_cast<int>(row.size()) != cols)
      fail(row_path, "expected a row of length " + std::to_string(cols));
    for (int c = 0; c < cols; ++c) m(i, c) = get_number(row[c], row_path + "/" + std::to_string(c));
  }
  return m;
}

Vec parse_fixed_vec(const Json& j, int n, const std::string& path) {
  if (!j.is_array()) fail(path, "expected an array");
  return parse_vec(j, n, path);
}

}  // namespace

std::string fnv1a_hex(const std::string& data) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : data) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return std::string(buf);
}

Json model_spec_to_json(const ModelSpec& spec) {
  Json j;
  j["state_dim"] = spec.state_dim;
  j["action_dim"] = spec.action_dim;
  j["mu0_const"] = vec_to_json(spec.mu0_const);
  j["mu0_lin"] = mat_to_json(spec.mu0_lin);
  j["mu1_const"] = mat_to_json(spec.mu1_const);
  j["mu1_lin"] = mat_to_json(spec.mu1_lin);
  j["sigma"] = vec_to_json(spec.sigma);
  j["c0"] = spec.c0;
  j["c1"] = spec.c1;
  j["discount_rate"] = spec.discount_rate;
  j["inverse_temperature"] = spec.inverse_temperature;
  j["horizon"] = spec.horizon;
  j["n_steps"] = spec.n_steps;
  j["terminal_utility"] =
      spec.terminal_utility_kind == TerminalUtility::Quadratic ? "quadratic" : "absolute_value";
  return j;
}

ModelSpec model_spec_from_json(const Json& j, const std::string& path) {
  reject_unknown_keys(j, path,
                      {"state_dim", "action_dim", "mu0_const", "mu0_lin", "mu1_const", "mu1_lin",
                       "sigma", "c0", "c1", "discount_rate", "inverse_temperature", "horizon",
                       "n_steps", "terminal_utility"});
  for (const char* key : {"state_dim", "action_dim", "sigma", "c0", "c1", "horizon", "n_steps"})
    if (!j.contains(key)) fail(path + "/" + key, "missing required key");

  ModelSpec spec;
  spec.state_dim = get_int(j.at("state_dim"), path + "/state_dim");
  spec.action_dim = get_int(j.at("action_dim"), path + "/action_dim");
  if (spec.state_dim <= 0) fail(path + "/state_dim", "must be positive");
  if (spec.action_dim <= 0) fail(path + "/action_dim", "must be positive");
  const int N = spec.state_dim, M = spec.action_dim;

  spec.mu0_const = j.contains("mu0_const") ? parse_vec(j.at("mu0_const"), N, path + "/mu0_const")
                                           : Vec::Zero(N);
  spec.mu0_lin = j.contains("mu0_lin") ? parse_mat(j.at("mu0_lin"), N, N, path + "/mu0_lin")
                                       : Mat::Zero(N, N);
  spec.mu1_const = j.contains("mu1_const") ? parse_mat(j.at("mu1_const"), N, M, path + "/mu1_const")
                                           : Mat::Zero(N, M);
  spec.mu1_lin = j.contains("mu1_lin") ? parse_mat(j.at("mu1_lin"), N, M, path + "/mu1_lin")
                                       : Mat::Zero(N, M);
  spec.sigma = parse_vec(j.at("sigma"), N, path + "/sigma");
  spec.c0 = get_number(j.at("c0"), path + "/c0");
  spec.c1 = get_number(j.at("c1"), path + "/c1");
  if (j.contains("discount_rate"))
    spec.discount_rate = get_number(j.at("discount_rate"), path + "/discount_rate");
  if (j.contains("inverse_temperature"))
    spec.inverse_temperature = get_number(j.at("inverse_temperature"), path + "/inverse_temperature");
  spec.horizon = get_number(j.at("horizon"), path + "/horizon");
  spec.n_steps = get_int(j.at("n_steps"), path + "/n_steps");
  if (j.contains("terminal_utility")) {
    const Json& tu = j.at("terminal_utility");
    if (tu == "quadratic")
      spec.terminal_utility_kind = TerminalUtility::Quadratic;
    else if (tu == "absolute_value")
      spec.terminal_utility_kind = TerminalUtility::AbsoluteValue;
    else
      fail(path + "/terminal_utility", "expected \"quadratic\" or \"absolute_value\"");
  }
  try {
    spec.validate();
  } catch (const std::exception& e) {
    fail(path, e.what());
  }
  return spec;
}

Json policy_to_json(const GaussianMixturePolicy& policy) {
  Json comps = Json::array();
  for (int k = 0; k < policy.components(); ++k) {
    Json c;
    c["weight"] = policy.weights[k];
    c["mean_const"] = vec_to_json(policy.mean_const[k]);
    c["mean_lin"] = mat_to_json(policy.mean_lin[k]);
    c["std"] = policy.stds[k];
    comps.push_back(std::move(c));
  }
  return Json{{"components", std::move(comps)}};
}

namespace {

GaussianMixturePolicy random_policy(const Json& j, int state_dim, int action_dim,
                                    const std::string& path) {
  reject_unknown_keys(j, path, {"count", "mean_low", "mean_high", "var_low", "var_high", "seed"});
  for (const char* key : {"count", "mean_low", "mean_high", "var_low", "var_high", "seed"})
    if (!j.contains(key)) fail(path + "/" + key, "missing required key");
  int K = get_int(j.at("count"), path + "/count");
  if (K <= 0) fail(path + "/count", "must be positive");
  double mean_low = get_number(j.at("mean_low"), path + "/mean_low");
  double mean_high = get_number(j.at("mean_high"), path + "/mean_high");
  double var_low = get_number(j.at("var_low"), path + "/var_low");
  double var_high = get_number(j.at("var_high"), path + "/var_high");
  if (var_low <= 0.0 || var_high < var_low) fail(path + "/var_low", "need 0 < var_low <= var_high");
  Rng rng = Rng::substream(get_seed(j.at("seed"), path + "/seed"), 0);

  GaussianMixturePolicy policy;
  for (int k = 0; k < K; ++k) {
    Vec mean(action_dim);
    for (int m = 0; m < action_dim; ++m) mean[m] = rng.next_uniform(mean_low, mean_high);
    double var = rng.next_uniform(var_low, var_high);
    policy.weights.push_back(1.0 / K);
    policy.mean_const.push_back(std::move(mean));
    policy.mean_lin.push_back(Mat::Zero(action_dim, state_dim));
    policy.stds.push_back(std::sqrt(var));
  }
  return policy;
}

}  // namespace

GaussianMixturePolicy policy_from_json(const Json& j, int state_dim, int action_dim,
                                       const std::string& path) {
  reject_unknown_keys(j, path, {"components", "random"});
  if (j.contains("random") == j.contains("components"))
    fail(path, "expected exactly one of \"components\" or \"random\"");
  if (j.contains("random")) {
    GaussianMixturePolicy policy = random_policy(j.at("random"), state_dim, action_dim, path + "/random");
    policy.validate();
    return policy;
  }

  const Json& comps = j.at("components");
  const std::string comps_path = path + "/components";
  if (!comps.is_array() || comps.empty()) fail(comps_path, "expected a non-empty array");
  GaussianMixturePolicy policy;
  double weight_sum = 0.0;
  for (size_t k = 0; k < comps.size(); ++k) {
    const Json& c = comps[k];
    const std::string c_path = comps_path + "/" + std::to_string(k);
    reject_unknown_keys(c, c_path, {"weight", "mean_const", "mean_lin", "std"});
    for (const char* key : {"weight", "mean_const", "std"})
      if (!c.contains(key)) fail(c_path + "/" + key, "missing required key");
    double w = get_number(c.at("weight"), c_path + "/weight");
    if (w <= 0.0) fail(c_path + "/weight", "must be positive");
    weight_sum += w;
    policy.weights.push_back(w);
    policy.mean_const.push_back(parse_vec(c.at("mean_const"), action_dim, c_path + "/mean_const"));
    policy.mean_lin.push_back(c.contains("mean_lin")
                                  ? parse_mat(c.at("mean_lin"), action_dim, state_dim, c_path + "/mean_lin")
                                  : Mat::Zero(action_dim, state_dim));
    double s = get_number(c.at("std"), c_path + "/std");
    if (s <= 0.0) fail(c_path + "/std", "must be positive");
    policy.stds.push_back(s);
  }
  if (std::abs(weight_sum - 1.0) > 1e-9)
    fail(comps_path, "weights must sum to 1 (got " + std::to_string(weight_sum) + ")");
  policy.validate();
  return policy;
}

std::string dataset_fingerprint(const ModelSpec& spec, const GaussianMixturePolicy& policy) {
  Json j;
  j["model"] = model_spec_to_json(spec);
  j["policy"] = policy_to_json(policy);
  return fnv1a_hex(j.dump());
}

RunConfig run_config_from_json(const Json& j) {
  reject_unknown_keys(j, "", {"model", "behavior_policy", "simulate", "train", "evaluate", "network"});
  if (!j.contains("model")) fail("/model", "missing required section");
  if (!j.contains("behavior_policy")) fail("/behavior_policy", "missing required section");

  RunConfig cfg;
  cfg.model = model_spec_from_json(j.at("model"));
  cfg.behavior_policy =
      policy_from_json(j.at("behavior_policy"), cfg.model.state_dim, cfg.model.action_dim);
  if (cfg.behavior_policy.action_dim() != cfg.model.action_dim)
    fail("/behavior_policy", "action dimension does not match the model");

  if (j.contains("simulate")) {
    const Json& s = j.at("simulate");
    const std::string p = "/simulate";
    reject_unknown_keys(s, p, {"n_traj", "seed", "x0_low", "x0_high"});
    if (s.contains("n_traj")) cfg.simulate.n_traj = get_int(s.at("n_traj"), p + "/n_traj");
    if (cfg.simulate.n_traj < 0) fail(p + "/n_traj", "must be nonnegative");
    if (s.contains("seed")) cfg.simulate.seed = get_seed(s.at("seed"), p + "/seed");
    if (s.contains("x0_low")) cfg.simulate.x0_low = get_number(s.at("x0_low"), p + "/x0_low");
    if (s.contains("x0_high")) cfg.simulate.x0_high = get_number(s.at("x0_high"), p + "/x0_high");
    if (cfg.simulate.x0_high < cfg.simulate.x0_low) fail(p + "/x0_high", "must be >= x0_low");
  }

  if (j.contains("train")) {
    const Json& t = j.at("train");
    const std::string p = "/train";
    reject_unknown_keys(t, p,
                        {"batch_size", "epochs", "learning_rate", "lr_decay_factor",
                         "lr_decay_every_epochs", "lr_floor", "weight_decay", "nu_squared",
                         "adam_beta1", "adam_beta2", "adam_epsilon", "grad_clip_norm", "seed",
                         "checkpoint_every_epochs", "checkpoint_path"});
    TrainingConfig& tc = cfg.train;
    if (t.contains("batch_size")) tc.batch_size = get_int(t.at("batch_size"), p + "/batch_size");
    if (t.contains("epochs")) tc.epochs = get_int(t.at("epochs"), p + "/epochs");
    if (t.contains("learning_rate"))
      tc.initial_learning_rate = get_number(t.at("learning_rate"), p + "/learning_rate");
    if (t.contains("lr_decay_factor"))
      tc.lr_decay_factor = get_number(t.at("lr_decay_factor"), p + "/lr_decay_factor");
    if (t.contains("lr_decay_every_epochs"))
      tc.lr_decay_every_epochs = get_int(t.at("lr_decay_every_epochs"), p + "/lr_decay_every_epochs");
    if (t.contains("lr_floor")) tc.lr_floor = get_number(t.at("lr_floor"), p + "/lr_floor");
    if (t.contains("weight_decay"))
      tc.weight_decay = get_number(t.at("weight_decay"), p + "/weight_decay");
    if (t.contains("nu_squared")) tc.nu_squared = get_number(t.at("nu_squared"), p + "/nu_squared");
    if (t.contains("adam_beta1")) tc.adam_beta1 = get_number(t.at("adam_beta1"), p + "/adam_beta1");
    if (t.contains("adam_beta2")) tc.adam_beta2 = get_number(t.at("adam_beta2"), p + "/adam_beta2");
    if (t.contains("adam_epsilon"))
      tc.adam_epsilon = get_number(t.at("adam_epsilon"), p + "/adam_epsilon");
    if (t.contains("grad_clip_norm"))
      tc.grad_clip_norm = get_number(t.at("grad_clip_norm"), p + "/grad_clip_norm");
    if (t.contains("seed")) tc.seed = get_seed(t.at("seed"), p + "/seed");
    if (t.contains("checkpoint_every_epochs"))
      tc.checkpoint_every_epochs = get_int(t.at("checkpoint_every_epochs"), p + "/checkpoint_every_epochs");
    if (t.contains("checkpoint_path"))
      tc.checkpoint_path = t.at("checkpoint_path").get<std::string>();
    try {
      tc.validate();
    } catch (const std::exception& e) {
      fail(p, e.what());
    }
  }

  if (j.contains("evaluate")) {
    const Json& e = j.at("evaluate");
    const std::string p = "/evaluate";
    reject_unknown_keys(e, p, {"n_mc", "seed", "n_kl", "start_x"});
    if (e.contains("n_mc")) cfg.evaluate.n_mc = get_int(e.at("n_mc"), p + "/n_mc");
    if (cfg.evaluate.n_mc <= 0) fail(p + "/n_mc", "must be positive");
    if (e.contains("seed")) cfg.evaluate.seed = get_seed(e.at("seed"), p + "/seed");
    if (e.contains("n_kl")) cfg.evaluate.n_kl = get_int(e.at("n_kl"), p + "/n_kl");
    if (e.contains("start_x"))
      cfg.evaluate.start_x = parse_vec(e.at("start_x"), cfg.model.state_dim, p + "/start_x");
  }

  if (j.contains("network")) {
    const Json& n = j.at("network");
    const std::string p = "/network";
    reject_unknown_keys(n, p, {"hidden_widths", "init_seed", "whiten_inputs"});
    if (n.contains("hidden_widths")) {
      const Json& hw = n.at("hidden_widths");
      if (!hw.is_array() || hw.empty()) fail(p + "/hidden_widths", "expected a non-empty array");
      cfg.network.hidden_widths.clear();
      for (size_t i = 0; i < hw.size(); ++i) {
        int w = get_int(hw[i], p + "/hidden_widths/" + std::to_string(i));
        if (w <= 0) fail(p + "/hidden_widths/" + std::to_string(i), "must be positive");
        cfg.network.hidden_widths.push_back(w);
      }
    }
    if (n.contains("init_seed")) cfg.network.init_seed = get_seed(n.at("init_seed"), p + "/init_seed");
    if (n.contains("whiten_inputs"))
      cfg.network.whiten_inputs = n.at("whiten_inputs").get<bool>();
  }

  return cfg;
}

RunConfig load_run_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("", "cannot open config file: " + path);
  Json j;
  try {
    in >> j;
  } catch (const Json::parse_error& e) {
    throw ConfigError("", std::string("invalid JSON: ") + e.what());
  }
  return run_config_from_json(j);
}

void write_dataset_jsonl(const std::string& path, const ModelSpec& spec, const Dataset& dataset) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open dataset file for writing: " + path);
  Json header;
  header["format_version"] = 1;
  header["state_dim"] = spec.state_dim;
  header["action_dim"] = spec.action_dim;
  header["n_steps"] = spec.n_steps;
  header["horizon"] = spec.horizon;
  header["dt"] = spec.dt();
  header["seed"] = dataset.seed;
  header["spec_fingerprint"] = dataset.spec_fingerprint;
  out << header.dump() << "\n";
  for (const Trajectory& traj : dataset.trajectories) {
    Json line;
    line["t"] = traj.times;
    line["x"] = mat_to_json(traj.states);
    line["C"] = traj.costs;
    out << line.dump() << "\n";
  }
  if (!out) throw std::runtime_error("write failed: " + path);
}

std::pair<DatasetHeader, Dataset> read_dataset_jsonl(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open dataset file: " + path);
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error("dataset file is empty: " + path);
  Json hj = Json::parse(line);
  reject_unknown_keys(hj, "/header",
                      {"format_version", "state_dim", "action_dim", "n_steps", "horizon", "dt",
                       "seed", "spec_fingerprint"});
  DatasetHeader header;
  header.format_version = get_int(hj.at("format_version"), "/header/format_version");
  if (header.format_version != 1)
    throw std::runtime_error("unsupported dataset format version " +
                             std::to_string(header.format_version));
  header.state_dim = get_int(hj.at("state_dim"), "/header/state_dim");
  header.action_dim = get_int(hj.at("action_dim"), "/header/action_dim");
  header.n_steps = get_int(hj.at("n_steps"), "/header/n_steps");
  header.horizon = get_number(hj.at("horizon"), "/header/horizon");
  header.dt = get_number(hj.at("dt"), "/header/dt");
  header.seed = get_seed(hj.at("seed"), "/header/seed");
  header.spec_fingerprint = hj.at("spec_fingerprint").get<std::string>();

  Dataset dataset;
  dataset.seed = header.seed;
  dataset.spec_fingerprint = header.spec_fingerprint;
  const int rows = header.n_steps + 1;
  size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    Json tj = Json::parse(line);
    const std::string p = "/line" + std::to_string(line_no);
    reject_unknown_keys(tj, p, {"t", "x", "C"});
    Trajectory traj;
    Vec times = parse_fixed_vec(tj.at("t"), rows, p + "/t");
    Vec costs = parse_fixed_vec(tj.at("C"), rows, p + "/C");
    traj.times.assign(times.data(), times.data() + rows);
    traj.costs.assign(costs.data(), costs.data() + rows);
    traj.states = parse_mat(tj.at("x"), rows, header.state_dim, p + "/x");
    dataset.trajectories.push_back(std::move(traj));
  }
  return {header, dataset};
}

void save_checkpoint(const std::string& path, const ValueNetwork& net,
                     const AdamState* optimizer_state, int epochs_done) {
  Json j;
  j["format_version"] = 1;
  j["state_dim"] = net.state_dim();
  j["hidden_widths"] = net.hidden_widths();
  j["activation"] = "softplus";
  if (net.whitening()) {
    j["whitening"] = Json{{"mean", vec_to_json(net.whitening()->mean)},
                          {"std", vec_to_json(net.whitening()->std)}};
  } else {
    j["whitening"] = nullptr;
  }
  Json layers = Json::array();
  for (const auto& layer : net.layers())
    layers.push_back(Json{{"weights", mat_to_json(layer.W)}, {"bias", vec_to_json(layer.b)}});
  j["layers"] = std::move(layers);
  if (optimizer_state && optimizer_state->m.size() > 0) {
    j["optimizer"] = Json{{"m", vec_to_json(optimizer_state->m)},
                          {"v", vec_to_json(optimizer_state->v)},
                          {"step", optimizer_state->step}};
  }
  j["epochs_done"] = epochs_done;

  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open checkpoint for writing: " + path);
  out << j.dump() << "\n";
  if (!out) throw std::runtime_error("write failed: " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open checkpoint: " + path);
  Json j;
  in >> j;
  if (get_int(j.at("format_version"), "/format_version") != 1)
    throw std::runtime_error("unsupported checkpoint format version");
  if (j.at("activation") != "softplus")
    throw std::runtime_error("unsupported activation in checkpoint");

  int state_dim = get_int(j.at("state_dim"), "/state_dim");
  std::vector<int> hidden = j.at("hidden_widths").get<std::vector<int>>();
  Checkpoint ckpt;
  ckpt.net = ValueNetwork(state_dim, hidden);

  const Json& layers = j.at("layers");
  if (layers.size() != ckpt.net.layers().size())
    throw std::runtime_error("checkpoint layer count does not match architecture");
  for (size_t l = 0; l < layers.size(); ++l) {
    auto& target = ckpt.net.layers()[l];
    target.W = parse_mat(layers[l].at("weights"), static_cast<int>(target.W.rows()),
                         static_cast<int>(target.W.cols()), "/layers/" + std::to_string(l) + "/weights");
    Vec b = parse_fixed_vec(layers[l].at("bias"), static_cast<int>(target.b.size()),
                            "/layers/" + std::to_string(l) + "/bias");
    target.b = b;
  }

  if (!j.at("whitening").is_null()) {
    InputWhitening w;
    int d = state_dim + 2;
    w.mean = parse_fixed_vec(j.at("whitening").at("mean"), d, "/whitening/mean");
    w.std = parse_fixed_vec(j.at("whitening").at("std"), d, "/whitening/std");
    ckpt.net.set_whitening(std::move(w));
  }

  if (j.contains("optimizer")) {
    AdamState state;
    int n_params = ckpt.net.parameter_count();
    state.m = parse_fixed_vec(j.at("optimizer").at("m"), n_params, "/optimizer/m");
    state.v = parse_fixed_vec(j.at("optimizer").at("v"), n_params, "/optimizer/v");
    state.step = j.at("optimizer").at("step").get<long>();
    ckpt.optimizer_state = std::move(state);
  }
  if (j.contains("epochs_done")) ckpt.epochs_done = get_int(j.at("epochs_done"), "/epochs_done");
  return ckpt;
}

void write_metrics_csv(const std::string& path, const MetricsLog& log) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open metrics file for writing: " + path);
  out << "epoch,loss,hj_term,delta_s_term,clamp_events,learning_rate\n";
  out.precision(17);
  for (const EpochMetrics& m : log.epochs)
    out << m.epoch << ',' << m.mean_loss << ',' << m.hj_term << ',' << m.delta_s_term << ','
        << m.clamp_events << ',' << m.learning_rate << "\n";
}

void write_return_distribution(const std::string& csv_path, const std::string& json_path,
                               const ReturnDistribution& dist) {
  if (!csv_path.empty()) {
    std::ofstream out(csv_path);
    if (!out) throw std::runtime_error("cannot open samples file for writing: " + csv_path);
    out << "sample\n";
    out.precision(17);
    for (double s : dist.samples) out << s << "\n";
  }
  if (!json_path.empty()) {
    Json j;
    j["n"] = dist.samples.size();
    j["mean"] = dist.mean;
    j["variance"] = dist.variance;
    j["std_error"] = dist.std_error;
    j["quantiles"] = Json{{"q05", dist.q05}, {"q25", dist.q25}, {"q50", dist.q50},
                          {"q75", dist.q75}, {"q95", dist.q95}};
    std::ofstream out(json_path);
    if (!out) throw std::runtime_error("cannot open summary file for writing: " + json_path);
    out << j.dump(2) << "\n";
  }
}

void write_policy_slice_csv(const std::string& path, const std::vector<PolicySliceRow>& rows) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open slice file for writing: " + path);
  int action_dim = rows.empty() ? 0 : static_cast<int>(rows.front().mean.size());
  out << "sweep_value,component,weight,cov_scalar,collapsed";
  for (int m = 0; m < action_dim; ++m) out << ",mean_" << m;
  out << "\n";
  out.precision(17);
  for (const PolicySliceRow& row : rows) {
    out << row.sweep_value << ',' << row.component << ',' << row.weight << ',' << row.cov_scalar
        << ',' << (row.collapsed ? 1 : 0);
    for (int m = 0; m < action_dim; ++m) out << ',' << row.mean[m];
    out << "\n";
  }
}

Json regularized_cost_to_json(const RegularizedCost& rc) {
  Json j;
  j["expected_utility"] = rc.expected_utility;
  j["utility_se"] = rc.utility_se;
  j["kl_term"] = rc.kl_term;
  j["kl_se"] = rc.kl_se;
  j["total"] = rc.total;
  j["total_se"] = rc.total_se;
  return j;
}

}  // namespace hjopt

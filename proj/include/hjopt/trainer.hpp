#pragma once

#include <string>
#include <vector>

#include "hjopt/hj_loss.hpp"
#include "hjopt/value_net.hpp"

namespace hjopt {

struct TrainingConfig {
  int batch_size = 256;
  int epochs = 30;
  double initial_learning_rate = 1e-3;
  double lr_decay_factor = 0.5;
  int lr_decay_every_epochs = 5;
  double lr_floor = 1e-5;
  double weight_decay = 0.001;  // decoupled L2
  double nu_squared = 100.0;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_epsilon = 1e-8;
  double grad_clip_norm = 0.0;  // 0 disables clipping
  std::uint64_t seed = 0;
  int checkpoint_every_epochs = 0;  // 0 disables periodic checkpoints
  std::string checkpoint_path;

  void validate() const;
  double learning_rate_for_epoch(int epoch) const;
};

struct AdamState {
  Vec m;
  Vec v;
  long step = 0;
};

struct EpochMetrics {
  int epoch = 0;
  double mean_loss = 0.0;
  double hj_term = 0.0;
  double delta_s_term = 0.0;
  long clamp_events = 0;
  double learning_rate = 0.0;
};

struct MetricsLog {
  std::vector<EpochMetrics> epochs;
};

struct NonFiniteLoss : std::runtime_error {
  NonFiniteLoss(const std::string& msg, int epoch, int batch_index)
      : std::runtime_error(msg), epoch(epoch), batch_index(batch_index) {}
  int epoch;
  int batch_index;
};

// One Adam step with decoupled weight decay; exposed for the hand-stepped
// reference check.
void adam_step(Vec& theta, const Vec& gradient, AdamState& state, const TrainingConfig& config,
               double learning_rate);

// Epoch shuffle is a pure function of (seed, epoch).
std::vector<int> epoch_permutation(std::uint64_t seed, int epoch, int count);

MetricsLog train(ValueNetwork& net, const Dataset& dataset, const ModelSpec& spec,
                 const GaussianMixturePolicy& policy0, const TrainingConfig& config,
                 AdamState* resume_state = nullptr, int start_epoch = 0);

double evaluate_loss(const ValueNetwork& net, const Dataset& dataset, const ModelSpec& spec,
                     const GaussianMixturePolicy& policy0, double nu_squared);

}  // namespace hjopt

#include "hjopt/trainer.hpp"

#include <cmath>

#include "hjopt/io.hpp"

namespace hjopt {

void TrainingConfig::validate() const {
  if (batch_size < 1) throw std::invalid_argument("batch_size must be at least 1");
  if (epochs < 0) throw std::invalid_argument("epochs must be nonnegative");
  if (initial_learning_rate <= 0.0) throw std::invalid_argument("learning rate must be positive");
  if (nu_squared < 0.0) throw std::invalid_argument("nu_squared must be nonnegative");
  if (weight_decay < 0.0) throw std::invalid_argument("weight_decay must be nonnegative");
}

double TrainingConfig::learning_rate_for_epoch(int epoch) const {
  double lr = initial_learning_rate *
              std::pow(lr_decay_factor, epoch / lr_decay_every_epochs);
  return std::max(lr, lr_floor);
}

void adam_step(Vec& theta, const Vec& gradient, AdamState& state, const TrainingConfig& config,
               double learning_rate) {
  if (state.m.size() != theta.size()) {
    state.m = Vec::Zero(theta.size());
    state.v = Vec::Zero(theta.size());
    state.step = 0;
  }
  ++state.step;
  state.m = config.adam_beta1 * state.m + (1.0 - config.adam_beta1) * gradient;
  state.v = config.adam_beta2 * state.v +
            (1.0 - config.adam_beta2) * gradient.cwiseProduct(gradient);
  double bias1 = 1.0 - std::pow(config.adam_beta1, static_cast<double>(state.step));
  double bias2 = 1.0 - std::pow(config.adam_beta2, static_cast<double>(state.step));
  Vec m_hat = state.m / bias1;
  Vec v_hat = state.v / bias2;
  theta -= learning_rate * (m_hat.array() / (v_hat.array().sqrt() + config.adam_epsilon)).matrix();
  // decoupled weight decay, applied outside the moment estimates
  if (config.weight_decay > 0.0) theta -= learning_rate * config.weight_decay * theta;
}

std::vector<int> epoch_permutation(std::uint64_t seed, int epoch, int count) {
  std::vector<int> perm(count);
  for (int i = 0; i < count; ++i) perm[i] = i;
  Rng rng = Rng::substream(seed ^ 0x5c5c5c5c5c5c5c5cull, static_cast<std::uint64_t>(epoch));
  for (int i = count - 1; i > 0; --i) {
    int j = static_cast<int>(rng.next_u64() % static_cast<std::uint64_t>(i + 1));
    std::swap(perm[i], perm[j]);
  }
  return perm;
}

MetricsLog train(ValueNetwork& net, const Dataset& dataset, const ModelSpec& spec,
                 const GaussianMixturePolicy& policy0, const TrainingConfig& config,
                 AdamState* resume_state, int start_epoch) {
  config.validate();
  std::vector<StepSample> all_steps = collect_steps(spec, dataset);
  const int total = static_cast<int>(all_steps.size());

  Vec theta = net.flatten_parameters();
  AdamState local_state;
  AdamState& state = resume_state ? *resume_state : local_state;

  MetricsLog log;
  for (int epoch = start_epoch; epoch < config.epochs; ++epoch) {
    double lr = config.learning_rate_for_epoch(epoch);
    std::vector<int> perm = epoch_permutation(config.seed, epoch, total);

    double loss_sum = 0.0, hj_sum = 0.0, ds_sum = 0.0;
    long clamps = 0, samples = 0;
    int n_batches = (total + config.batch_size - 1) / config.batch_size;
    for (int b = 0; b < n_batches; ++b) {
      int lo = b * config.batch_size;
      int hi = std::min(lo + config.batch_size, total);
      std::vector<StepSample> batch;
      batch.reserve(hi - lo);
      for (int i = lo; i < hi; ++i) batch.push_back(all_steps[perm[i]]);

      Vec gradient;
      LossDiagnostics diag =
          nll_loss_gradient(net, spec, policy0, batch, config.nu_squared, gradient);
      if (!std::isfinite(diag.loss) || !gradient.allFinite())
        throw NonFiniteLoss("non-finite loss or gradient", epoch, b);

      if (config.grad_clip_norm > 0.0) {
        double norm = gradient.norm();
        if (norm > config.grad_clip_norm) gradient *= config.grad_clip_norm / norm;
      }
      adam_step(theta, gradient, state, config, lr);
      net.unflatten_parameters(theta);

      int bsz = hi - lo;
      loss_sum += diag.loss * bsz;
      hj_sum += diag.hj_term * bsz;
      ds_sum += diag.delta_s_term * bsz;
      clamps += diag.clamp_events;
      samples += bsz;
    }

    EpochMetrics em;
    em.epoch = epoch;
    em.mean_loss = samples ? loss_sum / samples : 0.0;
    em.hj_term = samples ? hj_sum / samples : 0.0;
    em.delta_s_term = samples ? ds_sum / samples : 0.0;
    em.clamp_events = clamps;
    em.learning_rate = lr;
    log.epochs.push_back(em);

    if (config.checkpoint_every_epochs > 0 && !config.checkpoint_path.empty() &&
        ((epoch + 1) % config.checkpoint_every_epochs == 0 || epoch + 1 == config.epochs)) {
      save_checkpoint(config.checkpoint_path, net, &state, epoch + 1);
    }
  }
  return log;
}

double evaluate_loss(const ValueNetwork& net, const Dataset& dataset, const ModelSpec& spec,
                     const GaussianMixturePolicy& policy0, double nu_squared) {
  std::vector<StepSample> steps = collect_steps(spec, dataset);
  return nll_loss(net, spec, policy0, steps, nu_squared).loss;
}

}  // namespace hjopt

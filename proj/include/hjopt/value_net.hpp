#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <vector>

#include "hjopt/gm_policy.hpp"
#include "hjopt/model.hpp"

namespace hjopt {

// Optional affine input whitening, stored with the checkpoint.
struct InputWhitening {
  Vec mean;  // input_dim
  Vec std;   // input_dim, strictly positive
};

struct EvalPoint {
  Vec x;
  double C = 0.0;
  double t = 0.0;
};

struct PointValue {
  double J = 0.0;
  Vec grad_x;
  double grad_C = 0.0;
};

// Cotangents dL/dJ, dL/d(grad_x), dL/d(grad_C) supplied by a loss evaluator.
struct PointCotangent {
  double J_bar = 0.0;
  Vec grad_x_bar;
  double grad_C_bar = 0.0;
};

// Evaluates a scalar loss from per-point network outputs and fills the
// per-point cotangents. Must not touch the network itself.
using LossEvaluator =
    std::function<double(const std::vector<PointValue>&, std::vector<PointCotangent>&)>;

// Feedforward scalar network J(x, C, t). Inputs ordered [x..., C, t];
// softplus hidden activations, identity output. Supports exact input
// gradients and exact parameter gradients of losses built from input
// gradients (closed-form double backprop for this fixed architecture).
class ValueNetwork {
 public:
  struct Layer {
    Mat W;
    Vec b;
  };

  ValueNetwork() = default;
  ValueNetwork(int state_dim, std::vector<int> hidden_widths);

  static ValueNetwork initialize(int state_dim, const std::vector<int>& hidden_widths,
                                 std::uint64_t seed);

  int state_dim() const { return state_dim_; }
  int input_dim() const { return state_dim_ + 2; }
  const std::vector<int>& hidden_widths() const { return hidden_widths_; }
  const std::vector<Layer>& layers() const { return layers_; }
  std::vector<Layer>& layers() { return layers_; }
  const std::optional<InputWhitening>& whitening() const { return whitening_; }
  void set_whitening(std::optional<InputWhitening> w) { whitening_ = std::move(w); }

  double eval(const Vec& x, double C, double t) const;
  PointValue value_and_input_gradients(const Vec& x, double C, double t) const;

  // grad_x/grad_C plus the projected gradient m = mu1(x)^T grad_x.
  ValueGradients gradients(const ModelSpec& spec, const Vec& x, double C, double t) const;

  Vec loss_parameter_gradient(const std::vector<EvalPoint>& points,
                              const LossEvaluator& evaluator, double* loss_out = nullptr) const;

  int parameter_count() const;
  Vec flatten_parameters() const;
  void unflatten_parameters(const Vec& theta);

 private:
  struct Cache;
  double forward(const Vec& input, Cache& cache) const;
  void input_gradient_pass(Cache& cache) const;
  void parameter_backprop(const Cache& cache, double J_bar, const Vec& input_grad_bar,
                          std::vector<Layer>& grad_accum) const;
  Vec assemble_input(const Vec& x, double C, double t) const;

  int state_dim_ = 0;
  std::vector<int> hidden_widths_;
  std::vector<Layer> layers_;  // hidden layers then the 1-row output layer
  std::optional<InputWhitening> whitening_;
};

}  // namespace hjopt

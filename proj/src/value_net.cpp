#include "hjopt/value_net.hpp"

#include <cmath>

namespace hjopt {

namespace {

double softplus(double z) {
  if (z > 30.0) return z;
  if (z < -30.0) return std::exp(z);
  return std::log1p(std::exp(z));
}

double sigmoid(double z) {
  if (z >= 0.0) {
    double e = std::exp(-z);
    return 1.0 / (1.0 + e);
  }
  double e = std::exp(z);
  return e / (1.0 + e);
}

}  // namespace

struct ValueNetwork::Cache {
  // phase 1
  std::vector<Vec> a;  // a[0] = whitened input, a[1..H] hidden activations
  std::vector<Vec> s;  // s[l] = sigmoid(z_l) = softplus'(z_l), l = 1..H
  std::vector<Vec> z;  // pre-activations, l = 1..H
  // phase 2 (input-gradient backward sweep)
  std::vector<Vec> g;  // g[l] = dJ/da_l, l = 0..H
  std::vector<Vec> q;  // q[l] = g[l] .* s[l], l = 1..H
};

ValueNetwork::ValueNetwork(int state_dim, std::vector<int> hidden_widths)
    : state_dim_(state_dim), hidden_widths_(std::move(hidden_widths)) {
  int prev = input_dim();
  for (int w : hidden_widths_) {
    layers_.push_back({Mat::Zero(w, prev), Vec::Zero(w)});
    prev = w;
  }
  layers_.push_back({Mat::Zero(1, prev), Vec::Zero(1)});
}

ValueNetwork ValueNetwork::initialize(int state_dim, const std::vector<int>& hidden_widths,
                                      std::uint64_t seed) {
  ValueNetwork net(state_dim, hidden_widths);
  Rng rng(seed);
  for (auto& layer : net.layers_) {
    double scale = 1.0 / std::sqrt(static_cast<double>(layer.W.cols()));
    for (int i = 0; i < layer.W.rows(); ++i)
      for (int j = 0; j < layer.W.cols(); ++j) layer.W(i, j) = scale * rng.next_normal();
    layer.b.setZero();
  }
  return net;
}

Vec ValueNetwork::assemble_input(const Vec& x, double C, double t) const {
  if (x.size() != state_dim_) throw DimensionMismatch("ValueNetwork: x has wrong dimension");
  Vec input(input_dim());
  input.head(state_dim_) = x;
  input[state_dim_] = C;
  input[state_dim_ + 1] = t;
  if (whitening_) input = (input - whitening_->mean).cwiseQuotient(whitening_->std);
  return input;
}

double ValueNetwork::forward(const Vec& input, Cache& cache) const {
  const int H = static_cast<int>(hidden_widths_.size());
  cache.a.assign(H + 1, Vec());
  cache.s.assign(H + 1, Vec());
  cache.z.assign(H + 1, Vec());
  cache.a[0] = input;
  for (int l = 1; l <= H; ++l) {
    cache.z[l] = layers_[l - 1].W * cache.a[l - 1] + layers_[l - 1].b;
    cache.a[l] = cache.z[l].unaryExpr([](double v) { return softplus(v); });
    cache.s[l] = cache.z[l].unaryExpr([](double v) { return sigmoid(v); });
  }
  const Layer& out = layers_[H];
  return (out.W * cache.a[H])(0) + out.b(0);
}

void ValueNetwork::input_gradient_pass(Cache& cache) const {
  const int H = static_cast<int>(hidden_widths_.size());
  cache.g.assign(H + 1, Vec());
  cache.q.assign(H + 1, Vec());
  cache.g[H] = layers_[H].W.row(0).transpose();
  for (int l = H; l >= 1; --l) {
    cache.q[l] = cache.g[l].cwiseProduct(cache.s[l]);
    cache.g[l - 1] = layers_[l - 1].W.transpose() * cache.q[l];
  }
}

double ValueNetwork::eval(const Vec& x, double C, double t) const {
  Cache cache;
  return forward(assemble_input(x, C, t), cache);
}

PointValue ValueNetwork::value_and_input_gradients(const Vec& x, double C, double t) const {
  Cache cache;
  PointValue pv;
  pv.J = forward(assemble_input(x, C, t), cache);
  input_gradient_pass(cache);
  Vec d0 = cache.g[0];
  if (whitening_) d0 = d0.cwiseQuotient(whitening_->std);
  pv.grad_x = d0.head(state_dim_);
  pv.grad_C = d0[state_dim_];
  return pv;
}

ValueGradients ValueNetwork::gradients(const ModelSpec& spec, const Vec& x, double C,
                                       double t) const {
  PointValue pv = value_and_input_gradients(x, C, t);
  ValueGradients vg;
  vg.J = pv.J;
  vg.grad_x = pv.grad_x;
  vg.grad_C = pv.grad_C;
  vg.projected = spec.mu1_at(x).transpose() * pv.grad_x;
  return vg;
}

// Reverse pass through both the forward evaluation and the input-gradient
// sweep. The ordering mirrors the two phases run backwards: undo the
// gradient sweep first (it consumed z_l and the weights), then the forward
// pass with the accumulated z-adjoints folded in.
void ValueNetwork::parameter_backprop(const Cache& cache, double J_bar, const Vec& input_grad_bar,
                                      std::vector<Layer>& grad_accum) const {
  const int H = static_cast<int>(hidden_widths_.size());
  const bool need_phase2 = input_grad_bar.size() > 0;

  std::vector<Vec> z_hat(H + 1);
  for (int l = 1; l <= H; ++l) z_hat[l] = Vec::Zero(cache.z[l].size());

  if (need_phase2) {
    Vec g_hat = input_grad_bar;  // adjoint of g[l-1], starting at g[0]
    for (int l = 1; l <= H; ++l) {
      Vec q_hat = layers_[l - 1].W * g_hat;
      grad_accum[l - 1].W.noalias() += cache.q[l] * g_hat.transpose();
      // phi''(z) = s (1 - s)
      z_hat[l] += q_hat.cwiseProduct(cache.g[l])
                      .cwiseProduct(cache.s[l].cwiseProduct(Vec::Ones(cache.s[l].size()) - cache.s[l]));
      g_hat = q_hat.cwiseProduct(cache.s[l]);
    }
    grad_accum[H].W.row(0) += g_hat.transpose();  // g[H] = W_out^T
  }

  Vec a_hat = J_bar * layers_[H].W.row(0).transpose();
  grad_accum[H].W.row(0) += J_bar * cache.a[H].transpose();
  grad_accum[H].b(0) += J_bar;
  for (int l = H; l >= 1; --l) {
    Vec z_total = a_hat.cwiseProduct(cache.s[l]) + z_hat[l];
    grad_accum[l - 1].W.noalias() += z_total * cache.a[l - 1].transpose();
    grad_accum[l - 1].b += z_total;
    a_hat = layers_[l - 1].W.transpose() * z_total;
  }
}

Vec ValueNetwork::loss_parameter_gradient(const std::vector<EvalPoint>& points,
                                          const LossEvaluator& evaluator,
                                          double* loss_out) const {
  const size_t n = points.size();
  std::vector<Cache> caches(n);
  std::vector<PointValue> values(n);
  for (size_t i = 0; i < n; ++i) {
    values[i].J = forward(assemble_input(points[i].x, points[i].C, points[i].t), caches[i]);
    input_gradient_pass(caches[i]);
    Vec d0 = caches[i].g[0];
    if (whitening_) d0 = d0.cwiseQuotient(whitening_->std);
    values[i].grad_x = d0.head(state_dim_);
    values[i].grad_C = d0[state_dim_];
  }

  std::vector<PointCotangent> cotangents(n);
  for (size_t i = 0; i < n; ++i) cotangents[i].grad_x_bar = Vec::Zero(state_dim_);
  double loss = evaluator(values, cotangents);
  if (loss_out) *loss_out = loss;

  std::vector<Layer> grad_accum;
  for (const auto& layer : layers_)
    grad_accum.push_back({Mat::Zero(layer.W.rows(), layer.W.cols()), Vec::Zero(layer.b.size())});

  for (size_t i = 0; i < n; ++i) {
    const auto& ct = cotangents[i];
    bool grad_part = ct.grad_x_bar.squaredNorm() > 0.0 || ct.grad_C_bar != 0.0;
    Vec d0_bar;
    if (grad_part) {
      d0_bar = Vec::Zero(input_dim());
      d0_bar.head(state_dim_) = ct.grad_x_bar;
      d0_bar[state_dim_] = ct.grad_C_bar;
      if (whitening_) d0_bar = d0_bar.cwiseQuotient(whitening_->std);
    }
    if (ct.J_bar != 0.0 || grad_part) parameter_backprop(caches[i], ct.J_bar, d0_bar, grad_accum);
  }

  Vec out(parameter_count());
  int offset = 0;
  for (const auto& layer : grad_accum) {
    for (int i = 0; i < layer.W.rows(); ++i)
      for (int j = 0; j < layer.W.cols(); ++j) out[offset++] = layer.W(i, j);
    for (int i = 0; i < layer.b.size(); ++i) out[offset++] = layer.b[i];
  }
  return out;
}

int ValueNetwork::parameter_count() const {
  int count = 0;
  for (const auto& layer : layers_)
    count += static_cast<int>(layer.W.size() + layer.b.size());
  return count;
}

Vec ValueNetwork::flatten_parameters() const {
  Vec out(parameter_count());
  int offset = 0;
  for (const auto& layer : layers_) {
    for (int i = 0; i < layer.W.rows(); ++i)
      for (int j = 0; j < layer.W.cols(); ++j) out[offset++] = layer.W(i, j);
    for (int i = 0; i < layer.b.size(); ++i) out[offset++] = layer.b[i];
  }
  return out;
}

void ValueNetwork::unflatten_parameters(const Vec& theta) {
  if (theta.size() != parameter_count())
    throw std::invalid_argument("unflatten_parameters: wrong length");
  int offset = 0;
  for (auto& layer : layers_) {
    for (int i = 0; i < layer.W.rows(); ++i)
      for (int j = 0; j < layer.W.cols(); ++j) layer.W(i, j) = theta[offset++];
    for (int i = 0; i < layer.b.size(); ++i) layer.b[i] = theta[offset++];
  }
}

}  // namespace hjopt

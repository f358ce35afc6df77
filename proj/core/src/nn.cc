#include "popsynth/nn.h"

#include <cmath>
#include <string>

#include "popsynth/error.h"

namespace popsynth::nn {
namespace {

void check_lists(std::span<Matrix* const> params, std::span<const Matrix> grads,
                 std::vector<Matrix>& moments) {
  if (params.size() != grads.size()) {
    throw ConfigError("optimizer: " + std::to_string(params.size()) +
                      " parameters but " + std::to_string(grads.size()) +
                      " gradients");
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (params[i]->rows() != grads[i].rows() ||
        params[i]->cols() != grads[i].cols()) {
      throw ConfigError("optimizer: gradient shape mismatch for parameter " +
                        std::to_string(i));
    }
  }
  if (moments.empty()) {
    for (const Matrix* p : params) moments.push_back(Matrix::Zero(p->rows(), p->cols()));
  } else if (moments.size() != params.size()) {
    throw ConfigError("optimizer: state was built for a different parameter list");
  }
}

}  // namespace

DenseLayer DenseLayer::normal_init(Eigen::Index in, Eigen::Index out, double std,
                                   Rng& rng) {
  DenseLayer layer;
  layer.weight.resize(out, in);
  for (Eigen::Index r = 0; r < out; ++r) {
    for (Eigen::Index c = 0; c < in; ++c) layer.weight(r, c) = std * rng.normal();
  }
  layer.bias = Matrix::Zero(1, out);
  return layer;
}

Matrix dense_forward(const DenseLayer& layer, const Matrix& x) {
  if (x.cols() != layer.in() || layer.bias.cols() != layer.out() ||
      layer.bias.rows() != 1) {
    throw ConfigError("dense_forward: shape mismatch");
  }
  Matrix y = x * layer.weight.transpose();
  y.rowwise() += layer.bias.row(0);
  return y;
}

Var dense_forward(const Var& x, const Var& w, const Var& b) {
  if (x.cols() != w.cols() || b.rows() != 1 || b.cols() != w.rows()) {
    throw ConfigError("dense_forward: shape mismatch");
  }
  return ad::add(ad::matmul_nt(x, w), ad::broadcast_rows(b, x.rows()));
}

Var leaky_relu(const Var& x, double slope) { return ad::leaky_relu(x, slope); }

Var sigmoid(const Var& x) { return ad::sigmoid(x); }

Var record_norm(const Var& x, double epsilon) {
  const Eigen::Index d = x.cols();
  const double inv_d = 1.0 / static_cast<double>(d);
  Var mean = ad::scale(ad::sum_cols(x), inv_d);
  Var centered = ad::sub(x, ad::broadcast_cols(mean, d));
  Var var = ad::scale(ad::sum_cols(ad::square(centered)), inv_d);
  Var inv_std = ad::reciprocal(ad::sqrt(ad::add_scalar(var, epsilon)));
  return ad::mul(centered, ad::broadcast_cols(inv_std, d));
}

BatchNormLayer BatchNormLayer::make(Eigen::Index features) {
  BatchNormLayer layer;
  layer.gamma = Matrix::Ones(1, features);
  layer.beta = Matrix::Zero(1, features);
  layer.running_mean = Matrix::Zero(1, features);
  layer.running_var = Matrix::Ones(1, features);
  return layer;
}

Var batch_norm_train(const Var& x, const Var& gamma, const Var& beta,
                     BatchNormLayer& layer) {
  const Eigen::Index n = x.rows();
  if (n < 2) throw ConfigError("batch_norm_train: batch size must be at least 2");
  if (gamma.cols() != x.cols() || beta.cols() != x.cols()) {
    throw ConfigError("batch_norm_train: shape mismatch");
  }
  const double inv_n = 1.0 / static_cast<double>(n);
  Var mean = ad::scale(ad::sum_rows(x), inv_n);
  Var centered = ad::sub(x, ad::broadcast_rows(mean, n));
  Var var = ad::scale(ad::sum_rows(ad::square(centered)), inv_n);
  Var inv_std = ad::reciprocal(ad::sqrt(ad::add_scalar(var, layer.epsilon)));
  Var normalized = ad::mul(centered, ad::broadcast_rows(inv_std, n));

  layer.running_mean =
      (1.0 - layer.momentum) * layer.running_mean + layer.momentum * mean.value();
  layer.running_var =
      (1.0 - layer.momentum) * layer.running_var + layer.momentum * var.value();

  return ad::add(ad::mul(normalized, ad::broadcast_rows(gamma, n)),
                 ad::broadcast_rows(beta, n));
}

Var batch_norm_infer(const Var& x, const Var& gamma, const Var& beta,
                     const BatchNormLayer& layer) {
  const Eigen::Index n = x.rows();
  if (gamma.cols() != x.cols() || layer.running_mean.cols() != x.cols()) {
    throw ConfigError("batch_norm_infer: shape mismatch");
  }
  ad::Tape& tape = x.tape();
  Var mean = tape.constant(layer.running_mean.replicate(n, 1));
  Matrix inv = (layer.running_var.array() + layer.epsilon).rsqrt().matrix();
  Var inv_std = tape.constant(inv.replicate(n, 1));
  Var normalized = ad::mul(ad::sub(x, mean), inv_std);
  return ad::add(ad::mul(normalized, ad::broadcast_rows(gamma, n)),
                 ad::broadcast_rows(beta, n));
}

std::string_view to_string(OptimizerKind kind) {
  return kind == OptimizerKind::kAdam ? "adam" : "rmsprop";
}

OptimizerKind parse_optimizer(std::string_view text) {
  if (text == "adam") return OptimizerKind::kAdam;
  if (text == "rmsprop") return OptimizerKind::kRmsProp;
  throw ConfigError("unknown optimizer '" + std::string(text) + "'");
}

void adam_step(AdamState& s, std::span<Matrix* const> params,
               std::span<const Matrix> grads) {
  check_lists(params, grads, s.m);
  if (s.v.empty()) {
    for (const Matrix* p : params) s.v.push_back(Matrix::Zero(p->rows(), p->cols()));
  }
  ++s.step;
  const double t = static_cast<double>(s.step);
  const double c1 = 1.0 - std::pow(s.beta1, t);
  const double c2 = 1.0 - std::pow(s.beta2, t);
  for (std::size_t i = 0; i < params.size(); ++i) {
    const auto g = grads[i].array();
    s.m[i] = (s.beta1 * s.m[i].array() + (1.0 - s.beta1) * g).matrix();
    s.v[i] = (s.beta2 * s.v[i].array() + (1.0 - s.beta2) * g.square()).matrix();
    const auto m_hat = s.m[i].array() / c1;
    const auto v_hat = s.v[i].array() / c2;
    params[i]->array() -= s.learning_rate * m_hat / (v_hat.sqrt() + s.epsilon);
  }
}

void rmsprop_step(RmsPropState& s, std::span<Matrix* const> params,
                  std::span<const Matrix> grads) {
  check_lists(params, grads, s.v);
  ++s.step;
  for (std::size_t i = 0; i < params.size(); ++i) {
    const auto g = grads[i].array();
    s.v[i] = (s.alpha * s.v[i].array() + (1.0 - s.alpha) * g.square()).matrix();
    params[i]->array() -= s.learning_rate * g / (s.v[i].array().sqrt() + s.epsilon);
  }
}

Optimizer Optimizer::make(OptimizerKind kind, double learning_rate, double beta1,
                          double beta2) {
  Optimizer opt;
  opt.kind = kind;
  opt.adam.learning_rate = learning_rate;
  opt.adam.beta1 = beta1;
  opt.adam.beta2 = beta2;
  opt.rmsprop.learning_rate = learning_rate;
  return opt;
}

void Optimizer::step(std::span<Matrix* const> params, std::span<const Matrix> grads) {
  if (kind == OptimizerKind::kAdam) {
    adam_step(adam, params, grads);
  } else {
    rmsprop_step(rmsprop, params, grads);
  }
}

}  // namespace popsynth::nn

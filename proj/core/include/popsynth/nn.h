#ifndef POPSYNTH_NN_H_
#define POPSYNTH_NN_H_

#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "popsynth/autodiff.h"
#include "popsynth/rng.h"

namespace popsynth::nn {

using ad::Matrix;
using ad::Var;

// Fully connected layer, y = x Wᵀ + b.
struct DenseLayer {
  Matrix weight;  // out x in
  Matrix bias;    // 1 x out

  // Weights ~ N(0, std²) drawn row by row from rng, biases 0.
  static DenseLayer normal_init(Eigen::Index in, Eigen::Index out, double std,
                                Rng& rng);

  Eigen::Index in() const { return weight.cols(); }
  Eigen::Index out() const { return weight.rows(); }
};

// Value-level forward pass. Throws ConfigError on a shape mismatch.
Matrix dense_forward(const DenseLayer& layer, const Matrix& x);
// Recorded forward pass; w is out x in, b is 1 x out.
Var dense_forward(const Var& x, const Var& w, const Var& b);

Var leaky_relu(const Var& x, double slope = 0.2);
Var sigmoid(const Var& x);

// Normalizes each row to zero mean and unit variance over its features,
// (x - mean) / sqrt(var + eps), with no affine parameters. A constant row
// maps to zeros.
Var record_norm(const Var& x, double epsilon = 1e-5);

// Per-feature batch normalization with learned scale and shift. Variance is
// the population (biased) variance for both normalization and the running
// estimate.
struct BatchNormLayer {
  Matrix gamma;         // 1 x n, starts at 1
  Matrix beta;          // 1 x n, starts at 0
  Matrix running_mean;  // 1 x n, starts at 0
  Matrix running_var;   // 1 x n, starts at 1
  double epsilon = 1e-5;
  double momentum = 0.1;

  static BatchNormLayer make(Eigen::Index features);
};

// Normalizes with batch statistics and updates the running statistics:
// running = (1 - momentum) running + momentum batch. Throws ConfigError for
// a batch of fewer than 2 rows.
Var batch_norm_train(const Var& x, const Var& gamma, const Var& beta,
                     BatchNormLayer& layer);
// Normalizes with the running statistics.
Var batch_norm_infer(const Var& x, const Var& gamma, const Var& beta,
                     const BatchNormLayer& layer);

enum class OptimizerKind { kAdam, kRmsProp };

std::string_view to_string(OptimizerKind kind);
OptimizerKind parse_optimizer(std::string_view text);

// Adam with bias correction:
//   m <- b1 m + (1 - b1) g,  v <- b2 v + (1 - b2) g²
//   theta <- theta - lr mhat / (sqrt(vhat) + eps)
struct AdamState {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  std::int64_t step = 0;
  std::vector<Matrix> m;
  std::vector<Matrix> v;
};

// Moments are allocated on the first call. Throws ConfigError when the
// parameter and gradient lists disagree in count or shape.
void adam_step(AdamState& state, std::span<Matrix* const> params,
               std::span<const Matrix> grads);

// v <- alpha v + (1 - alpha) g²,  theta <- theta - lr g / (sqrt(v) + eps)
struct RmsPropState {
  double learning_rate = 1e-2;
  double alpha = 0.99;
  double epsilon = 1e-8;
  std::int64_t step = 0;
  std::vector<Matrix> v;
};

void rmsprop_step(RmsPropState& state, std::span<Matrix* const> params,
                  std::span<const Matrix> grads);

// One of the two optimizers, chosen by kind.
struct Optimizer {
  OptimizerKind kind = OptimizerKind::kAdam;
  AdamState adam;
  RmsPropState rmsprop;

  static Optimizer make(OptimizerKind kind, double learning_rate,
                        double beta1 = 0.9, double beta2 = 0.999);
  void step(std::span<Matrix* const> params, std::span<const Matrix> grads);
};

}  // namespace popsynth::nn

#endif  // POPSYNTH_NN_H_

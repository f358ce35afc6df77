#ifndef POPSYNTH_WGAN_H_
#define POPSYNTH_WGAN_H_

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "popsynth/autodiff.h"
#include "popsynth/csv.h"
#include "popsynth/nn.h"
#include "popsynth/rng.h"
#include "popsynth/schema.h"

namespace popsynth {

using ad::Matrix;

// Hidden layer widths of the two networks.
struct NetworkShape {
  Eigen::Index critic_hidden1 = 100;
  Eigen::Index critic_hidden2 = 150;
  Eigen::Index generator_hidden1 = 150;
  Eigen::Index generator_hidden2 = 100;
};

// Dense -> record norm -> LeakyReLU(0.2), twice, then a linear head with a
// single unsquashed output per record.
class Critic {
 public:
  Critic() = default;
  Critic(Eigen::Index feature_dim, Rng& rng, const NetworkShape& shape = {},
         double init_std = 0.02);

  // W1, b1, W2, b2, W3, b3.
  std::vector<Matrix*> parameters();
  std::vector<const Matrix*> parameters() const;
  std::size_t parameter_count() const;
  Eigen::Index feature_dim() const { return block1.in(); }

  // One tape variable per parameter, as leaves or as constants.
  std::vector<ad::Var> bind(ad::Tape& tape, bool trainable = true) const;
  // Scores as a batch x 1 variable.
  ad::Var forward(std::span<const ad::Var> params, const ad::Var& x) const;
  // Scores without gradient tracking.
  Eigen::VectorXd score(const Matrix& x) const;

  nn::DenseLayer block1;
  nn::DenseLayer block2;
  nn::DenseLayer head;
  double norm_epsilon = 1e-5;
  double slope = 0.2;
};

// Dense -> batch norm -> LeakyReLU(0.2), twice, then Dense -> sigmoid.
class Generator {
 public:
  enum class Mode { kTrain, kInfer };

  Generator() = default;
  Generator(Eigen::Index latent_dim, Eigen::Index feature_dim, Rng& rng,
            const NetworkShape& shape = {}, double init_std = 0.02);

  // W1, b1, gamma1, beta1, W2, b2, gamma2, beta2, W3, b3.
  std::vector<Matrix*> parameters();
  std::vector<const Matrix*> parameters() const;
  std::size_t parameter_count() const;
  Eigen::Index latent_dim() const { return block1.in(); }
  Eigen::Index feature_dim() const { return head.out(); }

  std::vector<ad::Var> bind(ad::Tape& tape, bool trainable = true) const;
  // kTrain normalizes with batch statistics and updates running statistics;
  // kInfer uses the running statistics.
  ad::Var forward(std::span<const ad::Var> params, const ad::Var& z, Mode mode);
  ad::Var forward(std::span<const ad::Var> params, const ad::Var& z) const;
  // Inference-mode outputs in (0, 1).
  Matrix generate(const Matrix& z) const;

  nn::DenseLayer block1;
  nn::BatchNormLayer norm1;
  nn::DenseLayer block2;
  nn::BatchNormLayer norm2;
  nn::DenseLayer head;
  double slope = 0.2;
};

struct Models {
  Critic critic;
  Generator generator;
};

// Critic first, then generator, from one seeded stream.
Models build_models(Eigen::Index feature_dim, Eigen::Index latent_dim,
                    std::uint64_t seed, const NetworkShape& shape = {});

// Any scalar-per-record critic recorded on a tape.
using CriticFn = std::function<ad::Var(const ad::Var& x)>;

// mean over records of (||grad_x C(x_hat)||_2 - 1)², with
// x_hat = eps * real + (1 - eps) * fake and one eps per record. The result
// is differentiable with respect to whatever the critic closes over.
ad::Var gradient_penalty(ad::Tape& tape, const CriticFn& critic,
                         const Matrix& real, const Matrix& fake,
                         const Eigen::VectorXd& epsilon);
// Draws eps ~ U(0, 1) per record from rng.
ad::Var gradient_penalty(ad::Tape& tape, const CriticFn& critic,
                         const Matrix& real, const Matrix& fake, Rng& rng);

struct CriticLoss {
  ad::Var loss;     // mean C(fake) - mean C(real) + lambda * gp
  ad::Var penalty;  // gp alone
};

CriticLoss critic_loss(ad::Tape& tape, const CriticFn& critic,
                       const Matrix& real, const Matrix& fake, double gp_lambda,
                       const Eigen::VectorXd& epsilon);
CriticLoss critic_loss(ad::Tape& tape, const CriticFn& critic,
                       const Matrix& real, const Matrix& fake, double gp_lambda,
                       Rng& rng);

// -mean C(fake)
ad::Var generator_loss(const CriticFn& critic, const ad::Var& fake);

struct TrainConfig {
  double learning_rate = 1e-5;
  std::size_t batch_size = 300;
  std::size_t iterations = 300;
  std::size_t latent_dim = 100;
  double gp_lambda = 10.0;
  std::size_t n_critic = 5;
  nn::OptimizerKind optimizer = nn::OptimizerKind::kAdam;
  double beta1 = 0.9;
  double beta2 = 0.999;
  std::uint64_t seed = 0;
  NetworkShape shape;

  // Throws ConfigError unless every field is positive and batch_size >= 2.
  void validate() const;

  // lr 1e-5, batch 300, 300 iterations.
  static TrainConfig finland_profile();
  // lr 1e-5, batch 200, 300 iterations.
  static TrainConfig greece_profile();
};

struct LossRecord {
  double critic = 0.0;
  double generator = 0.0;
  double gp = 0.0;

  friend bool operator==(const LossRecord&, const LossRecord&) = default;
};

using LossLog = std::vector<LossRecord>;

// Columns iteration, critic_loss, generator_loss, gp_loss.
CsvTable loss_log_csv(const LossLog& log);

// Everything that evolves during training; together with the data and the
// config this determines the rest of a run exactly.
struct TrainingState {
  Critic critic;
  Generator generator;
  nn::Optimizer critic_optimizer;
  nn::Optimizer generator_optimizer;
  Rng rng;
  std::vector<std::size_t> order;  // current shuffled pass over the rows
  std::size_t cursor = 0;
  std::size_t iteration = 0;
  LossLog log;
};

class Trainer {
 public:
  // Fresh models and optimizers from config.seed. Throws ConfigError when
  // the data has fewer rows than one batch.
  Trainer(EncodedMatrix data, TrainConfig config);
  // Resumes from a saved state.
  Trainer(EncodedMatrix data, TrainConfig config, TrainingState state);

  // One iteration: n_critic critic updates on fresh minibatches, then one
  // generator update. On a non-finite loss or gradient, throws NumericError
  // and leaves the state as it was before the iteration.
  void step();
  // Steps until config().iterations iterations have completed.
  void run();
  void run(std::size_t iterations);

  const TrainConfig& config() const { return config_; }
  const TrainingState& state() const { return state_; }
  const EncodedMatrix& data() const { return data_; }
  std::size_t iteration() const { return state_.iteration; }
  const LossLog& loss_log() const { return state_.log; }
  const Critic& critic() const { return state_.critic; }
  const Generator& generator() const { return state_.generator; }

 private:
  Matrix next_batch();
  Matrix draw_latent(std::size_t rows);
  void shuffle();

  EncodedMatrix data_;
  TrainConfig config_;
  TrainingState state_;
};

struct TrainResult {
  Generator generator;
  Critic critic;
  LossLog log;
};

TrainResult train(const EncodedMatrix& data, const TrainConfig& config);

// n records from the generator in inference mode, decoded per options.
// Throws DataError when the generator width differs from the schema.
std::vector<Record> sample(const Generator& generator, std::size_t n,
                           const Schema& schema, const DecodeOptions& decode,
                           std::uint64_t seed);

struct RegionFilter {
  std::string variable;
  std::string value;
};

struct PopulationRequest {
  std::size_t target = 0;
  std::optional<RegionFilter> region;
  // Abort when fewer than this fraction of draws are accepted once
  // acceptance_check_draws draws have been made.
  double min_acceptance = 1e-3;
  std::size_t acceptance_check_draws = 1'000'000;
  std::size_t chunk = 4096;
};

struct PopulationResult {
  std::vector<Record> records;
  // Draws up to and including the record that completed the target.
  std::size_t draws = 0;
};

// Samples in chunks, keeping records that match the region filter (all
// records without one) until exactly request.target are kept.
PopulationResult generate_population(const Generator& generator,
                                     const Schema& schema,
                                     const PopulationRequest& request,
                                     const DecodeOptions& decode,
                                     std::uint64_t seed);

}  // namespace popsynth

#endif  // POPSYNTH_WGAN_H_

#include "popsynth/wgan.h"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "popsynth/error.h"

namespace popsynth {
namespace {

using ad::Var;

std::size_t count_entries(const std::vector<const Matrix*>& params) {
  std::size_t n = 0;
  for (const Matrix* p : params) n += static_cast<std::size_t>(p->size());
  return n;
}

std::vector<Var> bind_all(ad::Tape& tape, const std::vector<const Matrix*>& params,
                          bool trainable) {
  std::vector<Var> vars;
  vars.reserve(params.size());
  for (const Matrix* p : params) {
    vars.push_back(trainable ? tape.leaf(*p) : tape.constant(*p));
  }
  return vars;
}

bool all_finite(const Matrix& m) { return m.allFinite(); }

Matrix normal_matrix(Rng& rng, std::size_t rows, std::size_t cols) {
  Matrix z(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
  for (Eigen::Index r = 0; r < z.rows(); ++r) {
    for (Eigen::Index c = 0; c < z.cols(); ++c) z(r, c) = rng.normal();
  }
  return z;
}

void check_same_shape(const Matrix& real, const Matrix& fake) {
  if (real.rows() != fake.rows() || real.cols() != fake.cols()) {
    throw ConfigError("real and fake batches differ in shape (" +
                      std::to_string(real.rows()) + "x" + std::to_string(real.cols()) +
                      " vs " + std::to_string(fake.rows()) + "x" +
                      std::to_string(fake.cols()) + ")");
  }
}

// Decodes each row of an inference batch.
void decode_rows(const Matrix& out, const Schema& schema, const DecodeOptions& decode,
                 Rng& rng, const std::function<bool(Record&&)>& sink) {
  std::vector<double> row(static_cast<std::size_t>(out.cols()));
  for (Eigen::Index r = 0; r < out.rows(); ++r) {
    for (Eigen::Index c = 0; c < out.cols(); ++c) row[static_cast<std::size_t>(c)] = out(r, c);
    if (!sink(popsynth::decode(row, schema, decode, &rng))) return;
  }
}

void check_generator_schema(const Generator& generator, const Schema& schema) {
  if (static_cast<std::size_t>(generator.feature_dim()) != schema.feature_dim()) {
    throw DataError("generator produces " + std::to_string(generator.feature_dim()) +
                    " features but the schema has feature_dim " +
                    std::to_string(schema.feature_dim()));
  }
}

}  // namespace

Critic::Critic(Eigen::Index feature_dim, Rng& rng, const NetworkShape& shape,
               double init_std)
    : block1(nn::DenseLayer::normal_init(feature_dim, shape.critic_hidden1, init_std, rng)),
      block2(nn::DenseLayer::normal_init(shape.critic_hidden1, shape.critic_hidden2,
                                         init_std, rng)),
      head(nn::DenseLayer::normal_init(shape.critic_hidden2, 1, init_std, rng)) {}

std::vector<Matrix*> Critic::parameters() {
  return {&block1.weight, &block1.bias, &block2.weight,
          &block2.bias,   &head.weight, &head.bias};
}

std::vector<const Matrix*> Critic::parameters() const {
  return {&block1.weight, &block1.bias, &block2.weight,
          &block2.bias,   &head.weight, &head.bias};
}

std::size_t Critic::parameter_count() const { return count_entries(parameters()); }

std::vector<Var> Critic::bind(ad::Tape& tape, bool trainable) const {
  return bind_all(tape, parameters(), trainable);
}

Var Critic::forward(std::span<const Var> p, const Var& x) const {
  if (p.size() != 6) throw ConfigError("critic: expected 6 parameter variables");
  Var h = nn::dense_forward(x, p[0], p[1]);
  h = nn::leaky_relu(nn::record_norm(h, norm_epsilon), slope);
  h = nn::dense_forward(h, p[2], p[3]);
  h = nn::leaky_relu(nn::record_norm(h, norm_epsilon), slope);
  return nn::dense_forward(h, p[4], p[5]);
}

Eigen::VectorXd Critic::score(const Matrix& x) const {
  ad::Tape tape;
  auto params = bind(tape, false);
  return forward(params, tape.constant(x)).value().col(0);
}

Generator::Generator(Eigen::Index latent_dim, Eigen::Index feature_dim, Rng& rng,
                     const NetworkShape& shape, double init_std)
    : block1(nn::DenseLayer::normal_init(latent_dim, shape.generator_hidden1, init_std,
                                         rng)),
      norm1(nn::BatchNormLayer::make(shape.generator_hidden1)),
      block2(nn::DenseLayer::normal_init(shape.generator_hidden1,
                                         shape.generator_hidden2, init_std, rng)),
      norm2(nn::BatchNormLayer::make(shape.generator_hidden2)),
      head(nn::DenseLayer::normal_init(shape.generator_hidden2, feature_dim, init_std,
                                       rng)) {}

std::vector<Matrix*> Generator::parameters() {
  return {&block1.weight, &block1.bias, &norm1.gamma, &norm1.beta,
          &block2.weight, &block2.bias, &norm2.gamma, &norm2.beta,
          &head.weight,   &head.bias};
}

std::vector<const Matrix*> Generator::parameters() const {
  return {&block1.weight, &block1.bias, &norm1.gamma, &norm1.beta,
          &block2.weight, &block2.bias, &norm2.gamma, &norm2.beta,
          &head.weight,   &head.bias};
}

std::size_t Generator::parameter_count() const { return count_entries(parameters()); }

std::vector<Var> Generator::bind(ad::Tape& tape, bool trainable) const {
  return bind_all(tape, parameters(), trainable);
}

Var Generator::forward(std::span<const Var> p, const Var& z, Mode mode) {
  if (mode == Mode::kInfer) return std::as_const(*this).forward(p, z);
  if (p.size() != 10) throw ConfigError("generator: expected 10 parameter variables");
  Var h = nn::dense_forward(z, p[0], p[1]);
  h = nn::leaky_relu(nn::batch_norm_train(h, p[2], p[3], norm1), slope);
  h = nn::dense_forward(h, p[4], p[5]);
  h = nn::leaky_relu(nn::batch_norm_train(h, p[6], p[7], norm2), slope);
  return nn::sigmoid(nn::dense_forward(h, p[8], p[9]));
}

Var Generator::forward(std::span<const Var> p, const Var& z) const {
  if (p.size() != 10) throw ConfigError("generator: expected 10 parameter variables");
  Var h = nn::dense_forward(z, p[0], p[1]);
  h = nn::leaky_relu(nn::batch_norm_infer(h, p[2], p[3], norm1), slope);
  h = nn::dense_forward(h, p[4], p[5]);
  h = nn::leaky_relu(nn::batch_norm_infer(h, p[6], p[7], norm2), slope);
  return nn::sigmoid(nn::dense_forward(h, p[8], p[9]));
}

Matrix Generator::generate(const Matrix& z) const {
  ad::Tape tape;
  auto params = bind(tape, false);
  return forward(params, tape.constant(z)).value();
}

Models build_models(Eigen::Index feature_dim, Eigen::Index latent_dim,
                    std::uint64_t seed, const NetworkShape& shape) {
  if (feature_dim < 1 || latent_dim < 1) {
    throw ConfigError("build_models: dimensions must be at least 1");
  }
  Rng rng(seed);
  Models models;
  models.critic = Critic(feature_dim, rng, shape);
  models.generator = Generator(latent_dim, feature_dim, rng, shape);
  return models;
}

Var gradient_penalty(ad::Tape& tape, const CriticFn& critic, const Matrix& real,
                     const Matrix& fake, const Eigen::VectorXd& epsilon) {
  check_same_shape(real, fake);
  if (epsilon.size() != real.rows()) {
    throw ConfigError("gradient_penalty: one epsilon per record required");
  }
  Matrix mixed = (real.array().colwise() * epsilon.array() +
                  fake.array().colwise() * (1.0 - epsilon.array()))
                     .matrix();
  Var x = tape.leaf(std::move(mixed));
  Var scores = critic(x);
  const Var wrt[] = {x};
  Var g = tape.grad(ad::sum_all(scores), wrt)[0];
  Var norms = ad::sqrt(ad::sum_cols(ad::square(g)));
  return ad::mean_all(ad::square(ad::add_scalar(norms, -1.0)));
}

Var gradient_penalty(ad::Tape& tape, const CriticFn& critic, const Matrix& real,
                     const Matrix& fake, Rng& rng) {
  Eigen::VectorXd epsilon(real.rows());
  for (Eigen::Index i = 0; i < epsilon.size(); ++i) epsilon[i] = rng.uniform();
  return gradient_penalty(tape, critic, real, fake, epsilon);
}

CriticLoss critic_loss(ad::Tape& tape, const CriticFn& critic, const Matrix& real,
                       const Matrix& fake, double gp_lambda,
                       const Eigen::VectorXd& epsilon) {
  check_same_shape(real, fake);
  Var fake_score = ad::mean_all(critic(tape.constant(fake)));
  Var real_score = ad::mean_all(critic(tape.constant(real)));
  Var gp = gradient_penalty(tape, critic, real, fake, epsilon);
  return {ad::add(ad::sub(fake_score, real_score), ad::scale(gp, gp_lambda)), gp};
}

CriticLoss critic_loss(ad::Tape& tape, const CriticFn& critic, const Matrix& real,
                       const Matrix& fake, double gp_lambda, Rng& rng) {
  Eigen::VectorXd epsilon(real.rows());
  for (Eigen::Index i = 0; i < epsilon.size(); ++i) epsilon[i] = rng.uniform();
  return critic_loss(tape, critic, real, fake, gp_lambda, epsilon);
}

Var generator_loss(const CriticFn& critic, const Var& fake) {
  return ad::scale(ad::mean_all(critic(fake)), -1.0);
}

void TrainConfig::validate() const {
  if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) {
    throw ConfigError("learning_rate must be positive");
  }
  if (batch_size < 2) throw ConfigError("batch_size must be at least 2");
  if (iterations == 0) throw ConfigError("iterations must be positive");
  if (latent_dim == 0) throw ConfigError("latent_dim must be positive");
  if (!(gp_lambda > 0.0)) throw ConfigError("gp_lambda must be positive");
  if (n_critic == 0) throw ConfigError("n_critic must be positive");
  if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0)) {
    throw ConfigError("Adam betas must lie in [0, 1)");
  }
  if (shape.critic_hidden1 < 1 || shape.critic_hidden2 < 1 ||
      shape.generator_hidden1 < 1 || shape.generator_hidden2 < 1) {
    throw ConfigError("hidden widths must be positive");
  }
}

TrainConfig TrainConfig::finland_profile() {
  TrainConfig c;
  c.learning_rate = 1e-5;
  c.batch_size = 300;
  c.iterations = 300;
  return c;
}

TrainConfig TrainConfig::greece_profile() {
  TrainConfig c;
  c.learning_rate = 1e-5;
  c.batch_size = 200;
  c.iterations = 300;
  return c;
}

CsvTable loss_log_csv(const LossLog& log) {
  CsvTable csv;
  csv.header = {"iteration", "critic_loss", "generator_loss", "gp_loss"};
  for (std::size_t i = 0; i < log.size(); ++i) {
    csv.rows.push_back({std::to_string(i + 1), format_double(log[i].critic),
                        format_double(log[i].generator), format_double(log[i].gp)});
  }
  return csv;
}

Trainer::Trainer(EncodedMatrix data, TrainConfig config)
    : data_(std::move(data)), config_(std::move(config)) {
  config_.validate();
  if (static_cast<std::size_t>(data_.rows()) < config_.batch_size) {
    throw ConfigError("training data has " + std::to_string(data_.rows()) +
                      " rows, fewer than batch_size " +
                      std::to_string(config_.batch_size));
  }
  Models models = build_models(data_.cols(), static_cast<Eigen::Index>(config_.latent_dim),
                               config_.seed, config_.shape);
  state_.critic = std::move(models.critic);
  state_.generator = std::move(models.generator);
  state_.critic_optimizer = nn::Optimizer::make(config_.optimizer, config_.learning_rate,
                                                config_.beta1, config_.beta2);
  state_.generator_optimizer = state_.critic_optimizer;
  state_.rng = Rng(Rng::derive_seed(config_.seed, 1));
  state_.order.resize(static_cast<std::size_t>(data_.rows()));
  std::iota(state_.order.begin(), state_.order.end(), std::size_t{0});
  shuffle();
}

Trainer::Trainer(EncodedMatrix data, TrainConfig config, TrainingState state)
    : data_(std::move(data)), config_(std::move(config)), state_(std::move(state)) {
  config_.validate();
  if (state_.order.size() != static_cast<std::size_t>(data_.rows())) {
    throw DataError("training state was saved for " + std::to_string(state_.order.size()) +
                    " rows but the data has " + std::to_string(data_.rows()));
  }
  if (state_.critic.feature_dim() != data_.cols() ||
      state_.generator.feature_dim() != data_.cols()) {
    throw DataError("training state feature width differs from the data");
  }
}

void Trainer::shuffle() {
  auto& order = state_.order;
  for (std::size_t i = order.size(); i > 1; --i) {
    std::swap(order[i - 1], order[state_.rng.uniform_index(i)]);
  }
  state_.cursor = 0;
}

Matrix Trainer::next_batch() {
  if (state_.cursor + config_.batch_size > state_.order.size()) shuffle();
  Matrix batch(static_cast<Eigen::Index>(config_.batch_size), data_.cols());
  for (std::size_t i = 0; i < config_.batch_size; ++i) {
    batch.row(static_cast<Eigen::Index>(i)) =
        data_.row(static_cast<Eigen::Index>(state_.order[state_.cursor + i]));
  }
  state_.cursor += config_.batch_size;
  return batch;
}

Matrix Trainer::draw_latent(std::size_t rows) {
  return normal_matrix(state_.rng, rows, config_.latent_dim);
}

void Trainer::step() {
  TrainingState backup = state_;
  try {
    LossRecord record;
    Critic& critic = state_.critic;
    Generator& generator = state_.generator;

    for (std::size_t k = 0; k < config_.n_critic; ++k) {
      Matrix real = next_batch();
      ad::Tape tape;
      Matrix fake;
      {
        auto gen_params = generator.bind(tape, false);
        fake = generator
                   .forward(gen_params, tape.constant(draw_latent(config_.batch_size)),
                            Generator::Mode::kTrain)
                   .value();
      }
      auto params = critic.bind(tape, true);
      CriticFn fn = [&critic, &params](const Var& x) { return critic.forward(params, x); };
      CriticLoss loss = critic_loss(tape, fn, real, fake, config_.gp_lambda, state_.rng);
      auto grads = tape.grad(loss.loss, params);
      std::vector<Matrix> values;
      for (const Var& g : grads) values.push_back(g.value());
      if (!std::isfinite(loss.loss.scalar()) ||
          !std::all_of(values.begin(), values.end(), all_finite)) {
        throw NumericError("non-finite critic loss or gradient at iteration " +
                           std::to_string(state_.iteration + 1));
      }
      auto targets = critic.parameters();
      state_.critic_optimizer.step(targets, values);
      record.critic = loss.loss.scalar();
      record.gp = loss.penalty.scalar();
    }

    {
      ad::Tape tape;
      auto gen_params = generator.bind(tape, true);
      Var fake = generator.forward(gen_params, tape.constant(draw_latent(config_.batch_size)),
                                   Generator::Mode::kTrain);
      auto critic_params = critic.bind(tape, false);
      CriticFn fn = [&critic, &critic_params](const Var& x) {
        return critic.forward(critic_params, x);
      };
      Var loss = generator_loss(fn, fake);
      auto grads = tape.grad(loss, gen_params);
      std::vector<Matrix> values;
      for (const Var& g : grads) values.push_back(g.value());
      if (!std::isfinite(loss.scalar()) ||
          !std::all_of(values.begin(), values.end(), all_finite)) {
        throw NumericError("non-finite generator loss or gradient at iteration " +
                           std::to_string(state_.iteration + 1));
      }
      auto targets = generator.parameters();
      state_.generator_optimizer.step(targets, values);
      record.generator = loss.scalar();
    }

    state_.log.push_back(record);
    ++state_.iteration;
  } catch (const NumericError&) {
    state_ = std::move(backup);
    throw;
  }
}

void Trainer::run() {
  while (state_.iteration < config_.iterations) step();
}

void Trainer::run(std::size_t iterations) {
  for (std::size_t i = 0; i < iterations; ++i) step();
}

TrainResult train(const EncodedMatrix& data, const TrainConfig& config) {
  Trainer trainer(data, config);
  trainer.run();
  return {trainer.generator(), trainer.critic(), trainer.loss_log()};
}

std::vector<Record> sample(const Generator& generator, std::size_t n,
                           const Schema& schema, const DecodeOptions& decode,
                           std::uint64_t seed) {
  check_generator_schema(generator, schema);
  std::vector<Record> records;
  records.reserve(n);
  Rng rng(seed);
  constexpr std::size_t kChunk = 1024;
  while (records.size() < n) {
    const std::size_t m = std::min(kChunk, n - records.size());
    Matrix out = generator.generate(
        normal_matrix(rng, m, static_cast<std::size_t>(generator.latent_dim())));
    decode_rows(out, schema, decode, rng, [&records](Record&& r) {
      records.push_back(std::move(r));
      return true;
    });
  }
  return records;
}

PopulationResult generate_population(const Generator& generator, const Schema& schema,
                                     const PopulationRequest& request,
                                     const DecodeOptions& decode, std::uint64_t seed) {
  check_generator_schema(generator, schema);
  if (request.chunk == 0) throw ConfigError("generate_population: chunk must be positive");
  std::optional<std::size_t> region_index;
  if (request.region) {
    region_index = schema.find(request.region->variable);
    if (!region_index) {
      throw ConfigError("region variable '" + request.region->variable +
                        "' is not in the schema");
    }
    if (!schema.variable(*region_index).category_index(request.region->value)) {
      throw ConfigError("region value '" + request.region->value +
                        "' is not a category of '" + request.region->variable + "'");
    }
  }

  PopulationResult result;
  result.records.reserve(request.target);
  Rng rng(seed);
  while (result.records.size() < request.target) {
    Matrix out = generator.generate(normal_matrix(
        rng, request.chunk, static_cast<std::size_t>(generator.latent_dim())));
    decode_rows(out, schema, decode, rng, [&](Record&& r) {
      ++result.draws;
      if (!region_index || r.values[*region_index] == request.region->value) {
        result.records.push_back(std::move(r));
      }
      return result.records.size() < request.target;
    });
    if (result.records.size() < request.target &&
        result.draws >= request.acceptance_check_draws) {
      const double rate = static_cast<double>(result.records.size()) /
                          static_cast<double>(result.draws);
      if (rate < request.min_acceptance) {
        throw DataError("region acceptance rate " + format_double(rate) + " after " +
                        std::to_string(result.draws) + " draws is below the floor " +
                        format_double(request.min_acceptance));
      }
    }
  }
  return result;
}

}  // namespace popsynth

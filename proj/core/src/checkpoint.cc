#include "popsynth/checkpoint.h"

#include <cstring>
#include <sstream>

#include "json.hpp"
#include "popsynth/csv.h"
#include "popsynth/error.h"

namespace popsynth {
namespace {

using nlohmann::json;

std::string hex(std::uint64_t v) {
  std::ostringstream out;
  out << std::hex << v;
  return out.str();
}

std::uint64_t unhex(const std::string& s) {
  return std::stoull(s, nullptr, 16);
}

json matrix_json(const Matrix& m) {
  std::vector<double> data;
  data.reserve(static_cast<std::size_t>(m.size()));
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) data.push_back(m(r, c));
  }
  return {{"rows", m.rows()}, {"cols", m.cols()}, {"data", data}};
}

Matrix matrix_from(const json& j) {
  const auto rows = j.at("rows").get<Eigen::Index>();
  const auto cols = j.at("cols").get<Eigen::Index>();
  const auto data = j.at("data").get<std::vector<double>>();
  if (static_cast<Eigen::Index>(data.size()) != rows * cols) {
    throw DataError("checkpoint: matrix data length does not match its shape");
  }
  Matrix m(rows, cols);
  std::size_t i = 0;
  for (Eigen::Index r = 0; r < rows; ++r) {
    for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = data[i++];
  }
  return m;
}

json params_json(const std::vector<const Matrix*>& params) {
  json out = json::array();
  for (const Matrix* p : params) out.push_back(matrix_json(*p));
  return out;
}

void load_params(const json& j, std::vector<Matrix*> params) {
  if (j.size() != params.size()) {
    throw DataError("checkpoint: expected " + std::to_string(params.size()) +
                    " parameter tensors, found " + std::to_string(j.size()));
  }
  for (std::size_t i = 0; i < params.size(); ++i) *params[i] = matrix_from(j[i]);
}

json matrices_json(const std::vector<Matrix>& ms) {
  json out = json::array();
  for (const auto& m : ms) out.push_back(matrix_json(m));
  return out;
}

std::vector<Matrix> matrices_from(const json& j) {
  std::vector<Matrix> out;
  for (const auto& item : j) out.push_back(matrix_from(item));
  return out;
}

json norm_json(const nn::BatchNormLayer& n) {
  return {{"running_mean", matrix_json(n.running_mean)},
          {"running_var", matrix_json(n.running_var)},
          {"epsilon", n.epsilon},
          {"momentum", n.momentum}};
}

void load_norm(const json& j, nn::BatchNormLayer& n) {
  n.running_mean = matrix_from(j.at("running_mean"));
  n.running_var = matrix_from(j.at("running_var"));
  n.epsilon = j.at("epsilon").get<double>();
  n.momentum = j.at("momentum").get<double>();
}

json optimizer_json(const nn::Optimizer& o) {
  return {{"kind", nn::to_string(o.kind)},
          {"adam",
           {{"learning_rate", o.adam.learning_rate},
            {"beta1", o.adam.beta1},
            {"beta2", o.adam.beta2},
            {"epsilon", o.adam.epsilon},
            {"step", o.adam.step},
            {"m", matrices_json(o.adam.m)},
            {"v", matrices_json(o.adam.v)}}},
          {"rmsprop",
           {{"learning_rate", o.rmsprop.learning_rate},
            {"alpha", o.rmsprop.alpha},
            {"epsilon", o.rmsprop.epsilon},
            {"step", o.rmsprop.step},
            {"v", matrices_json(o.rmsprop.v)}}}};
}

nn::Optimizer optimizer_from(const json& j) {
  nn::Optimizer o;
  o.kind = nn::parse_optimizer(j.at("kind").get<std::string>());
  const json& a = j.at("adam");
  o.adam.learning_rate = a.at("learning_rate").get<double>();
  o.adam.beta1 = a.at("beta1").get<double>();
  o.adam.beta2 = a.at("beta2").get<double>();
  o.adam.epsilon = a.at("epsilon").get<double>();
  o.adam.step = a.at("step").get<std::int64_t>();
  o.adam.m = matrices_from(a.at("m"));
  o.adam.v = matrices_from(a.at("v"));
  const json& r = j.at("rmsprop");
  o.rmsprop.learning_rate = r.at("learning_rate").get<double>();
  o.rmsprop.alpha = r.at("alpha").get<double>();
  o.rmsprop.epsilon = r.at("epsilon").get<double>();
  o.rmsprop.step = r.at("step").get<std::int64_t>();
  o.rmsprop.v = matrices_from(r.at("v"));
  return o;
}

json config_json(const TrainConfig& c) {
  return {{"learning_rate", c.learning_rate},
          {"batch_size", c.batch_size},
          {"iterations", c.iterations},
          {"latent_dim", c.latent_dim},
          {"gp_lambda", c.gp_lambda},
          {"n_critic", c.n_critic},
          {"optimizer", nn::to_string(c.optimizer)},
          {"beta1", c.beta1},
          {"beta2", c.beta2},
          {"seed", c.seed},
          {"shape",
           {c.shape.critic_hidden1, c.shape.critic_hidden2, c.shape.generator_hidden1,
            c.shape.generator_hidden2}}};
}

TrainConfig config_from(const json& j) {
  TrainConfig c;
  c.learning_rate = j.at("learning_rate").get<double>();
  c.batch_size = j.at("batch_size").get<std::size_t>();
  c.iterations = j.at("iterations").get<std::size_t>();
  c.latent_dim = j.at("latent_dim").get<std::size_t>();
  c.gp_lambda = j.at("gp_lambda").get<double>();
  c.n_critic = j.at("n_critic").get<std::size_t>();
  c.optimizer = nn::parse_optimizer(j.at("optimizer").get<std::string>());
  c.beta1 = j.at("beta1").get<double>();
  c.beta2 = j.at("beta2").get<double>();
  c.seed = j.at("seed").get<std::uint64_t>();
  const auto shape = j.at("shape").get<std::vector<Eigen::Index>>();
  if (shape.size() != 4) throw DataError("checkpoint: shape needs 4 widths");
  c.shape = {shape[0], shape[1], shape[2], shape[3]};
  return c;
}

}  // namespace

Checkpoint make_checkpoint(const Trainer& trainer, const Schema& schema) {
  Checkpoint cp;
  cp.config = trainer.config();
  cp.state = trainer.state();
  cp.schema_fingerprint = schema.fingerprint();
  cp.data_fingerprint = fingerprint(trainer.data());
  cp.n_train_rows = static_cast<std::size_t>(trainer.data().rows());
  return cp;
}

std::string checkpoint_to_json(const Checkpoint& cp) {
  const TrainingState& s = cp.state;
  json log = json::array();
  for (const auto& r : s.log) log.push_back({r.critic, r.generator, r.gp});
  json out = {
      {"format", "popsynth-checkpoint"},
      {"version", kCheckpointVersion},
      {"schema_fingerprint", hex(cp.schema_fingerprint)},
      {"data_fingerprint", hex(cp.data_fingerprint)},
      {"n_train_rows", cp.n_train_rows},
      {"feature_dim", s.critic.feature_dim()},
      {"config", config_json(cp.config)},
      {"critic", {{"params", params_json(s.critic.parameters())},
                  {"norm_epsilon", s.critic.norm_epsilon},
                  {"slope", s.critic.slope}}},
      {"generator", {{"params", params_json(s.generator.parameters())},
                     {"norm1", norm_json(s.generator.norm1)},
                     {"norm2", norm_json(s.generator.norm2)},
                     {"slope", s.generator.slope}}},
      {"critic_optimizer", optimizer_json(s.critic_optimizer)},
      {"generator_optimizer", optimizer_json(s.generator_optimizer)},
      {"rng", s.rng.state()},
      {"order", s.order},
      {"cursor", s.cursor},
      {"iteration", s.iteration},
      {"loss_log", log},
  };
  return out.dump() + "\n";
}

Checkpoint checkpoint_from_json(std::string_view text) {
  Checkpoint cp;
  try {
    const json j = json::parse(text);
    if (j.value("format", std::string()) != "popsynth-checkpoint") {
      throw DataError("checkpoint: not a popsynth checkpoint");
    }
    const int version = j.at("version").get<int>();
    if (version != kCheckpointVersion) {
      throw DataError("checkpoint: unsupported version " + std::to_string(version));
    }
    cp.schema_fingerprint = unhex(j.at("schema_fingerprint").get<std::string>());
    cp.data_fingerprint = unhex(j.at("data_fingerprint").get<std::string>());
    cp.n_train_rows = j.at("n_train_rows").get<std::size_t>();
    cp.config = config_from(j.at("config"));

    TrainingState& s = cp.state;
    const auto feature_dim = j.at("feature_dim").get<Eigen::Index>();
    Rng scratch(0);
    s.critic = Critic(feature_dim, scratch, cp.config.shape);
    s.generator = Generator(static_cast<Eigen::Index>(cp.config.latent_dim), feature_dim,
                            scratch, cp.config.shape);
    load_params(j.at("critic").at("params"), s.critic.parameters());
    s.critic.norm_epsilon = j.at("critic").at("norm_epsilon").get<double>();
    s.critic.slope = j.at("critic").at("slope").get<double>();
    const json& g = j.at("generator");
    load_params(g.at("params"), s.generator.parameters());
    load_norm(g.at("norm1"), s.generator.norm1);
    load_norm(g.at("norm2"), s.generator.norm2);
    s.generator.slope = g.at("slope").get<double>();

    s.critic_optimizer = optimizer_from(j.at("critic_optimizer"));
    s.generator_optimizer = optimizer_from(j.at("generator_optimizer"));
    s.rng.set_state(j.at("rng").get<std::string>());
    s.order = j.at("order").get<std::vector<std::size_t>>();
    s.cursor = j.at("cursor").get<std::size_t>();
    s.iteration = j.at("iteration").get<std::size_t>();
    for (const auto& r : j.at("loss_log")) {
      s.log.push_back({r.at(0).get<double>(), r.at(1).get<double>(), r.at(2).get<double>()});
    }
  } catch (const json::exception& e) {
    throw DataError(std::string("checkpoint: ") + e.what());
  } catch (const std::invalid_argument& e) {
    throw DataError(std::string("checkpoint: ") + e.what());
  }
  return cp;
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& checkpoint) {
  write_file_atomic(path, checkpoint_to_json(checkpoint));
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  return checkpoint_from_json(read_file(path));
}

Trainer resume_training(const Checkpoint& checkpoint, EncodedMatrix data) {
  if (fingerprint(data) != checkpoint.data_fingerprint) {
    throw DataError("checkpoint was trained on different data");
  }
  return Trainer(std::move(data), checkpoint.config, checkpoint.state);
}

void check_schema(const Checkpoint& checkpoint, const Schema& schema) {
  if (checkpoint.schema_fingerprint != schema.fingerprint()) {
    throw DataError("checkpoint was trained against a different schema");
  }
}

std::uint64_t fingerprint(const EncodedMatrix& data) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  auto mix = [&h](const void* p, std::size_t n) {
    const auto* bytes = static_cast<const unsigned char*>(p);
    for (std::size_t i = 0; i < n; ++i) {
      h ^= bytes[i];
      h *= 0x100000001b3ULL;
    }
  };
  const std::int64_t shape[2] = {data.rows(), data.cols()};
  mix(shape, sizeof(shape));
  for (Eigen::Index r = 0; r < data.rows(); ++r) {
    for (Eigen::Index c = 0; c < data.cols(); ++c) {
      const double v = data(r, c);
      mix(&v, sizeof(v));
    }
  }
  return h;
}

}  // namespace popsynth

#include "support.h"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "commands.h"

namespace popsynth::testing {

double max_relative_error(const std::vector<Matrix>& analytic,
                          const std::vector<Matrix>& numeric, double floor) {
  double worst = 0.0;
  for (std::size_t k = 0; k < analytic.size(); ++k) {
    for (Eigen::Index i = 0; i < analytic[k].size(); ++i) {
      const double a = analytic[k](i);
      const double n = numeric[k](i);
      const double denom = std::max({std::abs(a), std::abs(n), floor});
      worst = std::max(worst, std::abs(a - n) / denom);
    }
  }
  return worst;
}

std::vector<Matrix> finite_difference(const std::vector<Matrix*>& params,
                                      const std::function<double()>& f, double h) {
  std::vector<Matrix> out;
  for (Matrix* p : params) {
    Matrix g(p->rows(), p->cols());
    for (Eigen::Index i = 0; i < p->size(); ++i) {
      const double saved = (*p)(i);
      (*p)(i) = saved + h;
      const double up = f();
      (*p)(i) = saved - h;
      const double down = f();
      (*p)(i) = saved;
      g(i) = (up - down) / (2.0 * h);
    }
    out.push_back(std::move(g));
  }
  return out;
}

MiniWgan::MiniWgan(std::uint64_t seed) {
  Rng rng(seed);
  const NetworkShape shape{4, 5, 5, 4};
  critic = Critic(6, rng, shape, 0.5);
  generator = Generator(3, 6, rng, shape, 0.5);
  // Non-trivial affine parameters so their gradients are exercised too.
  for (auto* norm : {&generator.norm1, &generator.norm2}) {
    for (Eigen::Index j = 0; j < norm->gamma.cols(); ++j) {
      norm->gamma(0, j) = 1.0 + 0.3 * rng.normal();
      norm->beta(0, j) = 0.3 * rng.normal();
    }
  }
  for (auto* layer : {&critic.block1, &critic.block2, &critic.head, &generator.block1,
                      &generator.block2, &generator.head}) {
    for (Eigen::Index j = 0; j < layer->bias.cols(); ++j) layer->bias(0, j) = 0.1 * rng.normal();
  }
  real = Matrix::Zero(4, 6);
  for (Eigen::Index r = 0; r < 4; ++r) {
    for (Eigen::Index c = 0; c < 6; ++c) real(r, c) = rng.uniform() < 0.4 ? 1.0 : 0.0;
  }
  z.resize(4, 3);
  for (Eigen::Index i = 0; i < z.size(); ++i) z(i) = rng.normal();
  epsilon.resize(4);
  for (Eigen::Index i = 0; i < 4; ++i) epsilon(i) = rng.uniform();
}

Matrix MiniWgan::fake() const {
  Generator g = generator;
  ad::Tape tape;
  auto params = g.bind(tape, false);
  return g.forward(params, tape.constant(z), Generator::Mode::kTrain).value();
}

double MiniWgan::critic_loss_value() const {
  ad::Tape tape;
  auto params = critic.bind(tape, false);
  CriticFn fn = [&](const ad::Var& x) { return critic.forward(params, x); };
  return critic_loss(tape, fn, real, fake(), gp_lambda, epsilon).loss.scalar();
}

std::vector<Matrix> MiniWgan::critic_loss_grads() const {
  ad::Tape tape;
  auto params = critic.bind(tape, true);
  CriticFn fn = [&](const ad::Var& x) { return critic.forward(params, x); };
  const ad::Var loss = critic_loss(tape, fn, real, fake(), gp_lambda, epsilon).loss;
  std::vector<Matrix> out;
  for (const auto& g : tape.grad(loss, params)) out.push_back(g.value());
  return out;
}

double MiniWgan::generator_loss_value() const {
  Generator g = generator;
  ad::Tape tape;
  auto gp = g.bind(tape, false);
  auto cp = critic.bind(tape, false);
  CriticFn fn = [&](const ad::Var& x) { return critic.forward(cp, x); };
  return generator_loss(fn, g.forward(gp, tape.constant(z), Generator::Mode::kTrain)).scalar();
}

std::vector<Matrix> MiniWgan::generator_loss_grads() const {
  Generator g = generator;
  ad::Tape tape;
  auto gp = g.bind(tape, true);
  auto cp = critic.bind(tape, false);
  CriticFn fn = [&](const ad::Var& x) { return critic.forward(cp, x); };
  const ad::Var loss =
      generator_loss(fn, g.forward(gp, tape.constant(z), Generator::Mode::kTrain));
  std::vector<Matrix> out;
  for (const auto& v : tape.grad(loss, gp)) out.push_back(v.value());
  return out;
}

std::filesystem::path scratch_dir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("popsynth-test-" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

std::vector<std::pair<std::string, double>> brute_force_frequencies(
    const std::vector<Record>& records, const Schema& schema,
    const std::vector<std::size_t>& variables) {
  // Walk every combination of categories and count matching records with a
  // plain nested scan.
  std::vector<std::pair<std::string, double>> out;
  std::vector<std::size_t> digit(variables.size(), 0);
  while (true) {
    std::string id;
    std::size_t count = 0;
    for (std::size_t k = 0; k < variables.size(); ++k) {
      if (k) id += '|';
      const auto& v = schema.variable(variables[k]);
      id += v.name + "=" + v.categories[digit[k]];
    }
    for (const auto& r : records) {
      bool match = true;
      for (std::size_t k = 0; k < variables.size(); ++k) {
        if (r.values[variables[k]] != schema.variable(variables[k]).categories[digit[k]]) {
          match = false;
        }
      }
      if (match) ++count;
    }
    out.emplace_back(id, static_cast<double>(count) / static_cast<double>(records.size()));
    std::size_t pos = variables.size();
    bool done = true;
    while (pos > 0) {
      --pos;
      if (++digit[pos] < schema.variable(variables[pos]).categories.size()) {
        done = false;
        break;
      }
      digit[pos] = 0;
    }
    if (done) break;
  }
  std::sort(out.begin(), out.end());
  return out;
}

CliResult run_cli(const std::vector<std::string>& args) {
  std::ostringstream out, err;
  CliResult r;
  r.code = cli::run(args, out, err);
  r.out = out.str();
  r.err = err.str();
  return r;
}

int run_small_pipeline(const std::filesystem::path& out_dir, std::size_t iterations) {
  const std::string out = "--out=" + out_dir.string();
  const std::string pop = (out_dir / "populations").string();
  const std::vector<std::vector<std::string>> steps = {
      {"toycensus", out, "--n=400", "--seed=3"},
      {"prepare", out, "--input=" + pop + "/toy.csv", "--weight-column=weight"},
      {"balance", out, "--approach=duplicate", "--reduction-factor=40"},
      {"train", out, "--iterations=" + std::to_string(iterations), "--batch-size=32",
       "--latent-dim=8", "--widths=16,16,16,16", "--learning-rate=0.001", "--seed=5"},
      {"generate", out, "--n=300", "--seed=6"},
      {"validate", out, "--original=" + pop + "/prepared.csv",
       "--synthetic=" + pop + "/synthetic.csv"},
      {"audit", out, "--original=" + pop + "/prepared.csv", "--synthetic=" + pop + "/synthetic.csv",
       "--key-variables=age,gender", "--target=health"},
  };
  for (const auto& step : steps) {
    const CliResult r = run_cli(step);
    if (r.code != 0) return r.code;
  }
  return 0;
}

}  // namespace popsynth::testing

#ifndef POPSYNTH_TESTS_SUPPORT_H_
#define POPSYNTH_TESTS_SUPPORT_H_

#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "popsynth/schema.h"
#include "popsynth/wgan.h"

namespace popsynth::testing {

// |a - n| / max(|a|, |n|, floor), worst entry over all parameters.
double max_relative_error(const std::vector<Matrix>& analytic,
                          const std::vector<Matrix>& numeric, double floor = 1e-6);

// Central differences of f with respect to every entry of every parameter.
std::vector<Matrix> finite_difference(const std::vector<Matrix*>& params,
                                      const std::function<double()>& f, double h = 1e-4);

// Feature width 6, critic widths 4/5, generator widths 5/4, latent 3,
// batch 4. Weights use std 0.5 so gradients are well above round-off.
struct MiniWgan {
  Critic critic;
  Generator generator;
  Matrix real;
  Matrix z;
  Eigen::VectorXd epsilon;
  double gp_lambda = 10.0;

  explicit MiniWgan(std::uint64_t seed);

  // Generated batch in training mode (batch statistics), as values.
  Matrix fake() const;
  double critic_loss_value() const;
  double generator_loss_value() const;
  std::vector<Matrix> critic_loss_grads() const;
  std::vector<Matrix> generator_loss_grads() const;
};

// Fresh empty directory under the system temp dir.
std::filesystem::path scratch_dir(const std::string& name);

// Independent brute-force count of value tuples over the given variable
// indices, as relative frequencies keyed like contingency cell ids.
std::vector<std::pair<std::string, double>> brute_force_frequencies(
    const std::vector<Record>& records, const Schema& schema,
    const std::vector<std::size_t>& variables);

struct CliResult {
  int code = 0;
  std::string out;
  std::string err;
};

CliResult run_cli(const std::vector<std::string>& args);

// toycensus, prepare, balance (duplicate), train, generate, validate and
// audit on a small toy census under out_dir. Returns the first non-zero exit
// code, or 0.
int run_small_pipeline(const std::filesystem::path& out_dir, std::size_t iterations = 3);

}  // namespace popsynth::testing

#endif  // POPSYNTH_TESTS_SUPPORT_H_

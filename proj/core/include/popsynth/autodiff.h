#ifndef POPSYNTH_AUTODIFF_H_
#define POPSYNTH_AUTODIFF_H_

#include <cstddef>
#include <deque>
#include <functional>
#include <span>
#include <vector>

#include <Eigen/Dense>

namespace popsynth::ad {

using Matrix = Eigen::MatrixXd;

class Tape;

// Handle to a node on a Tape. Cheap to copy; valid while the tape lives
// and has not been cleared.
class Var {
 public:
  Var() = default;

  bool valid() const { return tape_ != nullptr; }
  Tape& tape() const { return *tape_; }
  std::size_t id() const { return id_; }

  const Matrix& value() const;
  Eigen::Index rows() const { return value().rows(); }
  Eigen::Index cols() const { return value().cols(); }
  // Value of a 1x1 node.
  double scalar() const;

 private:
  friend class Tape;
  Var(Tape* tape, std::size_t id) : tape_(tape), id_(id) {}

  Tape* tape_ = nullptr;
  std::size_t id_ = 0;
};

// Append-only record of matrix operations for reverse-mode
// differentiation.
//
// Backward rules are expressed with the same recorded operations, so the
// gradients returned by grad() are nodes of the tape and can be
// differentiated again. This is what lets a loss built from input-gradient
// norms be differentiated with respect to parameters.
class Tape {
 public:
  // Computes parent gradients from the output gradient. needs[j] is false
  // when parent j does not lead to any requested input; its entry may then
  // be left invalid.
  using Backward =
      std::function<std::vector<Var>(const Var& grad, const std::vector<char>& needs)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  // Differentiable input.
  Var leaf(Matrix value);
  // Input that never carries a gradient.
  Var constant(Matrix value);

  // Gradients of a 1x1 output with respect to each entry of wrt. Inputs the
  // output does not depend on get a zero constant. Throws ConfigError for a
  // non-scalar output or a Var from another tape.
  std::vector<Var> grad(const Var& output, std::span<const Var> wrt);

  // Records an operation result. The node needs a gradient when any parent
  // does; otherwise the backward rule is discarded.
  Var record(Matrix value, std::vector<Var> parents, Backward backward);

  // Handle for an already recorded node.
  Var at(std::size_t id) {
    return Var(this, id);
  }

  std::size_t size() const { return nodes_.size(); }
  // Invalidates every Var issued so far.
  void clear() { nodes_.clear(); }

 private:
  friend class Var;
  struct Node {
    Matrix value;
    std::vector<std::size_t> parents;
    Backward backward;
    bool requires_grad = false;
  };

  void check(const Var& v) const;

  // std::deque keeps element addresses stable while backward rules append.
  std::deque<Node> nodes_;
};

// y = a b
Var matmul(const Var& a, const Var& b);
// y = a bᵀ
Var matmul_nt(const Var& a, const Var& b);
// y = aᵀ b
Var matmul_tn(const Var& a, const Var& b);

Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
// Elementwise product.
Var mul(const Var& a, const Var& b);
Var scale(const Var& a, double s);
Var add_scalar(const Var& a, double s);

// Repeats a 1 x c row n times -> n x c.
Var broadcast_rows(const Var& row, Eigen::Index n);
// Sums over rows -> 1 x c.
Var sum_rows(const Var& x);
// Repeats an r x 1 column n times -> r x n.
Var broadcast_cols(const Var& col, Eigen::Index n);
// Sums over columns -> r x 1.
Var sum_cols(const Var& x);
// Sum of all entries -> 1 x 1.
Var sum_all(const Var& x);
Var mean_all(const Var& x);
// Fills an r x c matrix with a 1 x 1 value.
Var fill(const Var& s, Eigen::Index rows, Eigen::Index cols);

Var square(const Var& x);
// Elementwise square root. The derivative at 0 is taken as 0.
Var sqrt(const Var& x);
// Elementwise 1/x, with 1/0 taken as 0.
Var reciprocal(const Var& x);

// y = x for x >= 0, slope * x otherwise. Derivative 1 at 0.
Var leaky_relu(const Var& x, double slope = 0.2);
Var sigmoid(const Var& x);

inline Var operator+(const Var& a, const Var& b) { return add(a, b); }
inline Var operator-(const Var& a, const Var& b) { return sub(a, b); }
inline Var operator-(const Var& a) { return scale(a, -1.0); }

}  // namespace popsynth::ad

#endif  // POPSYNTH_AUTODIFF_H_

#include "popsynth/autodiff.h"

#include <cmath>
#include <string>

#include "popsynth/error.h"

namespace popsynth::ad {
namespace {

void same_tape(const Var& a, const Var& b) {
  if (!a.valid() || !b.valid() || &a.tape() != &b.tape()) {
    throw ConfigError("autodiff: operands are not on the same tape");
  }
}

void same_shape(const Var& a, const Var& b, const char* op) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw ConfigError(std::string("autodiff: shape mismatch in ") + op + " (" +
                      std::to_string(a.rows()) + "x" + std::to_string(a.cols()) +
                      " vs " + std::to_string(b.rows()) + "x" +
                      std::to_string(b.cols()) + ")");
  }
}

void valid(const Var& a) {
  if (!a.valid()) throw ConfigError("autodiff: invalid variable");
}

}  // namespace

const Matrix& Var::value() const {
  if (!tape_) throw ConfigError("autodiff: invalid variable");
  return tape_->nodes_.at(id_).value;
}

double Var::scalar() const {
  const Matrix& v = value();
  if (v.rows() != 1 || v.cols() != 1) {
    throw ConfigError("autodiff: scalar() on a non 1x1 value");
  }
  return v(0, 0);
}

Var Tape::leaf(Matrix value) {
  nodes_.push_back({std::move(value), {}, nullptr, true});
  return Var(this, nodes_.size() - 1);
}

Var Tape::constant(Matrix value) {
  nodes_.push_back({std::move(value), {}, nullptr, false});
  return Var(this, nodes_.size() - 1);
}

void Tape::check(const Var& v) const {
  if (!v.valid() || &v.tape() != this || v.id() >= nodes_.size()) {
    throw ConfigError("autodiff: variable is not recorded on this tape");
  }
}

Var Tape::record(Matrix value, std::vector<Var> parents, Backward backward) {
  Node node;
  node.value = std::move(value);
  for (const Var& p : parents) {
    check(p);
    node.parents.push_back(p.id());
    node.requires_grad = node.requires_grad || nodes_[p.id()].requires_grad;
  }
  if (node.requires_grad) node.backward = std::move(backward);
  nodes_.push_back(std::move(node));
  return Var(this, nodes_.size() - 1);
}

std::vector<Var> Tape::grad(const Var& output, std::span<const Var> wrt) {
  check(output);
  if (output.rows() != 1 || output.cols() != 1) {
    throw ConfigError("autodiff: gradient requires a scalar (1x1) output");
  }
  for (const Var& w : wrt) check(w);

  const std::size_t n = output.id() + 1;
  // depends[i]: node i is downstream of some requested input.
  std::vector<char> depends(n, 0);
  for (const Var& w : wrt) {
    if (w.id() < n) depends[w.id()] = 1;
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (depends[i] || !nodes_[i].requires_grad) continue;
    for (std::size_t p : nodes_[i].parents) {
      if (depends[p]) {
        depends[i] = 1;
        break;
      }
    }
  }

  std::vector<Var> grads(n);
  if (depends[output.id()]) {
    grads[output.id()] = constant(Matrix::Ones(1, 1));
  }
  std::vector<char> needs;
  for (std::size_t i = n; i-- > 0;) {
    if (!grads[i].valid() || !depends[i]) continue;
    const Node& node = nodes_[i];
    if (!node.backward) continue;
    needs.assign(node.parents.size(), 0);
    bool any = false;
    for (std::size_t j = 0; j < node.parents.size(); ++j) {
      needs[j] = depends[node.parents[j]];
      any = any || needs[j];
    }
    if (!any) continue;
    std::vector<Var> parent_grads = node.backward(grads[i], needs);
    for (std::size_t j = 0; j < node.parents.size(); ++j) {
      if (!needs[j] || !parent_grads[j].valid()) continue;
      Var& acc = grads[node.parents[j]];
      acc = acc.valid() ? add(acc, parent_grads[j]) : parent_grads[j];
    }
  }

  std::vector<Var> result;
  result.reserve(wrt.size());
  for (const Var& w : wrt) {
    if (w.id() < n && grads[w.id()].valid()) {
      result.push_back(grads[w.id()]);
    } else {
      result.push_back(constant(Matrix::Zero(w.rows(), w.cols())));
    }
  }
  return result;
}

Var matmul(const Var& a, const Var& b) {
  same_tape(a, b);
  if (a.cols() != b.rows()) throw ConfigError("autodiff: shape mismatch in matmul");
  Matrix value = a.value() * b.value();
  return a.tape().record(std::move(value), {a, b},
                         [a, b](const Var& g, const std::vector<char>& needs) {
                           return std::vector<Var>{
                               needs[0] ? matmul_nt(g, b) : Var(),
                               needs[1] ? matmul_tn(a, g) : Var()};
                         });
}

Var matmul_nt(const Var& a, const Var& b) {
  same_tape(a, b);
  if (a.cols() != b.cols()) throw ConfigError("autodiff: shape mismatch in matmul_nt");
  Matrix value = a.value() * b.value().transpose();
  return a.tape().record(std::move(value), {a, b},
                         [a, b](const Var& g, const std::vector<char>& needs) {
                           return std::vector<Var>{
                               needs[0] ? matmul(g, b) : Var(),
                               needs[1] ? matmul_tn(g, a) : Var()};
                         });
}

Var matmul_tn(const Var& a, const Var& b) {
  same_tape(a, b);
  if (a.rows() != b.rows()) throw ConfigError("autodiff: shape mismatch in matmul_tn");
  Matrix value = a.value().transpose() * b.value();
  return a.tape().record(std::move(value), {a, b},
                         [a, b](const Var& g, const std::vector<char>& needs) {
                           return std::vector<Var>{
                               needs[0] ? matmul_nt(b, g) : Var(),
                               needs[1] ? matmul(a, g) : Var()};
                         });
}

Var add(const Var& a, const Var& b) {
  same_tape(a, b);
  same_shape(a, b, "add");
  Matrix value = a.value() + b.value();
  return a.tape().record(std::move(value), {a, b},
                         [](const Var& g, const std::vector<char>&) {
                           return std::vector<Var>{g, g};
                         });
}

Var sub(const Var& a, const Var& b) {
  same_tape(a, b);
  same_shape(a, b, "sub");
  Matrix value = a.value() - b.value();
  return a.tape().record(std::move(value), {a, b},
                         [](const Var& g, const std::vector<char>& needs) {
                           return std::vector<Var>{g, needs[1] ? scale(g, -1.0) : Var()};
                         });
}

Var mul(const Var& a, const Var& b) {
  same_tape(a, b);
  same_shape(a, b, "mul");
  Matrix value = a.value().cwiseProduct(b.value());
  return a.tape().record(std::move(value), {a, b},
                         [a, b](const Var& g, const std::vector<char>& needs) {
                           return std::vector<Var>{needs[0] ? mul(g, b) : Var(),
                                                   needs[1] ? mul(g, a) : Var()};
                         });
}

Var scale(const Var& a, double s) {
  valid(a);
  Matrix value = a.value() * s;
  return a.tape().record(std::move(value), {a},
                         [s](const Var& g, const std::vector<char>&) {
                           return std::vector<Var>{scale(g, s)};
                         });
}

Var add_scalar(const Var& a, double s) {
  valid(a);
  Matrix value = a.value().array() + s;
  return a.tape().record(std::move(value), {a},
                         [](const Var& g, const std::vector<char>&) {
                           return std::vector<Var>{g};
                         });
}

Var broadcast_rows(const Var& row, Eigen::Index n) {
  valid(row);
  if (row.rows() != 1) throw ConfigError("autodiff: broadcast_rows needs a row");
  Matrix value = row.value().replicate(n, 1);
  return row.tape().record(std::move(value), {row},
                           [](const Var& g, const std::vector<char>&) {
                             return std::vector<Var>{sum_rows(g)};
                           });
}

Var sum_rows(const Var& x) {
  valid(x);
  Matrix value = x.value().colwise().sum();
  const Eigen::Index n = x.rows();
  return x.tape().record(std::move(value), {x},
                         [n](const Var& g, const std::vector<char>&) {
                           return std::vector<Var>{broadcast_rows(g, n)};
                         });
}

Var broadcast_cols(const Var& col, Eigen::Index n) {
  valid(col);
  if (col.cols() != 1) throw ConfigError("autodiff: broadcast_cols needs a column");
  Matrix value = col.value().replicate(1, n);
  return col.tape().record(std::move(value), {col},
                           [](const Var& g, const std::vector<char>&) {
                             return std::vector<Var>{sum_cols(g)};
                           });
}

Var sum_cols(const Var& x) {
  valid(x);
  Matrix value = x.value().rowwise().sum();
  const Eigen::Index n = x.cols();
  return x.tape().record(std::move(value), {x},
                         [n](const Var& g, const std::vector<char>&) {
                           return std::vector<Var>{broadcast_cols(g, n)};
                         });
}

Var sum_all(const Var& x) {
  valid(x);
  Matrix value = Matrix::Constant(1, 1, x.value().sum());
  const Eigen::Index r = x.rows();
  const Eigen::Index c = x.cols();
  return x.tape().record(std::move(value), {x},
                         [r, c](const Var& g, const std::vector<char>&) {
                           return std::vector<Var>{fill(g, r, c)};
                         });
}

Var mean_all(const Var& x) {
  valid(x);
  return scale(sum_all(x), 1.0 / static_cast<double>(x.value().size()));
}

Var fill(const Var& s, Eigen::Index rows, Eigen::Index cols) {
  valid(s);
  Matrix value = Matrix::Constant(rows, cols, s.scalar());
  return s.tape().record(std::move(value), {s},
                         [](const Var& g, const std::vector<char>&) {
                           return std::vector<Var>{sum_all(g)};
                         });
}

Var square(const Var& x) {
  valid(x);
  Matrix value = x.value().array().square();
  return x.tape().record(std::move(value), {x},
                         [x](const Var& g, const std::vector<char>&) {
                           return std::vector<Var>{mul(g, scale(x, 2.0))};
                         });
}

Var sqrt(const Var& x) {
  valid(x);
  Matrix value = x.value().array().sqrt();
  Tape& tape = x.tape();
  const std::size_t self = tape.size();
  return tape.record(std::move(value), {x},
                     [&tape, self](const Var& g, const std::vector<char>&) {
                       Var y = tape.at(self);
                       return std::vector<Var>{mul(g, scale(reciprocal(y), 0.5))};
                     });
}

Var reciprocal(const Var& x) {
  valid(x);
  Matrix value = x.value().unaryExpr([](double v) { return v == 0.0 ? 0.0 : 1.0 / v; });
  Tape& tape = x.tape();
  const std::size_t self = tape.size();
  return tape.record(std::move(value), {x},
                     [&tape, self](const Var& g, const std::vector<char>&) {
                       Var y = tape.at(self);
                       return std::vector<Var>{mul(g, scale(square(y), -1.0))};
                     });
}

Var leaky_relu(const Var& x, double slope) {
  valid(x);
  Matrix mask = x.value().unaryExpr([slope](double v) { return v >= 0.0 ? 1.0 : slope; });
  Matrix value = x.value().cwiseProduct(mask);
  Tape& tape = x.tape();
  return tape.record(std::move(value), {x},
                     [&tape, mask = std::move(mask)](const Var& g, const std::vector<char>&) {
                       return std::vector<Var>{mul(g, tape.constant(mask))};
                     });
}

Var sigmoid(const Var& x) {
  valid(x);
  Matrix value = x.value().unaryExpr([](double v) {
    if (v >= 0.0) return 1.0 / (1.0 + std::exp(-v));
    const double e = std::exp(v);
    return e / (1.0 + e);
  });
  Tape& tape = x.tape();
  const std::size_t self = tape.size();
  return tape.record(std::move(value), {x},
                     [&tape, self](const Var& g, const std::vector<char>&) {
                       Var y = tape.at(self);
                       Var dy = mul(y, add_scalar(scale(y, -1.0), 1.0));
                       return std::vector<Var>{mul(g, dy)};
                     });
}

}  // namespace popsynth::ad

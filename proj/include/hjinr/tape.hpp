#pragma once

// Reverse-mode scalar tape.
//
// Scalar formulas (Hamiltonians, initial data, residual assembly) are recorded
// node by node through the overloaded operators on Var. Vector-valued pieces
// such as a batched network evaluation are recorded as a single Primitive
// whose outputs occupy a contiguous range of External nodes; the primitive
// supplies its own adjoint rule.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string_view>
#include <vector>

#include <Eigen/Core>

namespace hjinr::ad {

enum class Op : std::uint8_t {
  Constant,
  Input,
  Add,
  Sub,
  Mul,
  Div,
  Neg,
  Square,
  Sin,
  Cos,
  Tan,
  Atan,
  Exp,
  Log,
  Sqrt,
  Abs,
  Sign,
  Max,
  Min,
  Softplus,
  External,
};

std::string_view op_name(Op op);

struct Node {
  double value = 0.0;
  double param = 0.0;  // softplus beta
  std::int32_t a = -1;
  std::int32_t b = -1;  // record id for External nodes
  Op op = Op::Constant;
};

class Tape;

/// Scalar handle. A Var without a tape is a plain constant; combining it with
/// a taped Var materializes it as a Constant node on that tape.
class Var {
 public:
  Var() = default;
  Var(double v) : value_(v) {}  // NOLINT: implicit lift of constants

  double value() const { return value_; }
  Tape* tape() const { return tape_; }
  std::int32_t index() const { return index_; }
  bool is_constant() const { return tape_ == nullptr; }

 private:
  friend class Tape;
  Var(Tape* tape, std::int32_t index, double value)
      : tape_(tape), index_(index), value_(value) {}

  Tape* tape_ = nullptr;
  std::int32_t index_ = -1;
  double value_ = 0.0;
};

/// Adjoint rule for a vector-valued operation recorded as one tape entry.
class Primitive {
 public:
  virtual ~Primitive() = default;
  virtual std::string_view name() const = 0;
  /// Adds d(out)/d(in)^T * out_adjoints into in_adjoints and any bound
  /// parameter gradients.
  virtual void backward(Tape& tape, std::span<const double> out_adjoints,
                        std::span<double> in_adjoints) = 0;
  /// Recomputes the outputs from the given input values.
  virtual void replay(std::span<const double> in_values,
                      std::span<double> out_values) const = 0;
  virtual std::size_t memory_bytes() const { return 0; }
};

class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var input(double value);
  Var constant(double value);

  /// Appends an elementary node. Operands must already be on this tape.
  Var push(Op op, std::int32_t a, std::int32_t b, double value, double param = 0.0);

  /// Index of v on this tape, materializing constants.
  std::int32_t index_of(const Var& v);

  /// Records a primitive; returns one Var per output value.
  std::vector<Var> record(std::unique_ptr<Primitive> primitive,
                          std::span<const Var> inputs,
                          std::span<const double> outputs);

  /// Allocates a zeroed gradient buffer for an external parameter block.
  int bind_params(std::size_t count);
  std::span<double> param_grad(int slot);
  std::span<const double> param_grad(int slot) const;

  /// Reverse sweep seeded with d(output)/d(output) = 1. Returns the adjoint of
  /// every node; parameter gradients are accumulated into the bound slots.
  std::vector<double> backward(const Var& output);

  /// Re-evaluates every node from its operands in tape order.
  std::vector<double> replay() const;

  std::size_t size() const { return nodes_.size(); }
  const Node& node(std::size_t i) const { return nodes_[i]; }
  std::size_t memory_bytes() const;
  void clear();

 private:
  struct Record {
    std::unique_ptr<Primitive> primitive;
    std::vector<std::int32_t> inputs;
    std::int32_t out_begin = 0;
    std::int32_t out_count = 0;
  };

  std::vector<Node> nodes_;
  std::vector<Record> records_;
  // Aligned so vectorized accumulation does not depend on the allocation.
  std::vector<std::vector<double, Eigen::aligned_allocator<double>>> param_grads_;
};

double value_of(double v);
double value_of(const Var& v);

Var operator+(const Var& a, const Var& b);
Var operator-(const Var& a, const Var& b);
Var operator*(const Var& a, const Var& b);
Var operator/(const Var& a, const Var& b);
Var operator-(const Var& a);
Var& operator+=(Var& a, const Var& b);
Var& operator-=(Var& a, const Var& b);
Var& operator*=(Var& a, const Var& b);

Var square(const Var& a);
Var sin(const Var& a);
Var cos(const Var& a);
Var tan(const Var& a);
Var atan(const Var& a);
Var exp(const Var& a);
Var log(const Var& a);
/// Derivative is taken as 0 at a <= 0.
Var sqrt(const Var& a);
/// Subgradient 0 at the kink.
Var abs(const Var& a);
/// Piecewise constant, sign(0) = 0, derivative 0.
Var sign(const Var& a);
/// Ties pass the adjoint to the first argument.
Var max(const Var& a, const Var& b);
Var min(const Var& a, const Var& b);
/// (1/beta) log(1 + exp(beta a)) in overflow-safe form.
Var softplus(const Var& a, double beta);

// Plain-double counterparts so templated formulas can call ad::fn(x) for
// both scalar types.
double square(double a);
double sin(double a);
double cos(double a);
double tan(double a);
double atan(double a);
double exp(double a);
double log(double a);
double sqrt(double a);
double abs(double a);
double sign(double a);
double max(double a, double b);
double min(double a, double b);
double softplus(double a, double beta);
double sigmoid(double a);

using ScalarFn = std::function<Var(std::span<const Var>)>;

/// Max over coordinates of |analytic - central difference| / (|analytic| + 1e-12).
/// The analytic gradient comes from a tape sweep; the difference quotient
/// evaluates fn on untaped constants.
double fd_check(const ScalarFn& fn, std::span<const double> point, double h);

}  // namespace hjinr::ad

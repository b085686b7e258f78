#include "hjinr/tape.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "hjinr/error.hpp"

namespace hjinr::ad {

std::string_view op_name(Op op) {
  switch (op) {
    case Op::Constant: return "constant";
    case Op::Input: return "input";
    case Op::Add: return "add";
    case Op::Sub: return "sub";
    case Op::Mul: return "mul";
    case Op::Div: return "div";
    case Op::Neg: return "neg";
    case Op::Square: return "square";
    case Op::Sin: return "sin";
    case Op::Cos: return "cos";
    case Op::Tan: return "tan";
    case Op::Atan: return "atan";
    case Op::Exp: return "exp";
    case Op::Log: return "log";
    case Op::Sqrt: return "sqrt";
    case Op::Abs: return "abs";
    case Op::Sign: return "sign";
    case Op::Max: return "max";
    case Op::Min: return "min";
    case Op::Softplus: return "softplus";
    case Op::External: return "external";
  }
  return "?";
}

double square(double a) { return a * a; }
double sin(double a) { return std::sin(a); }
double cos(double a) { return std::cos(a); }
double tan(double a) { return std::tan(a); }
double atan(double a) { return std::atan(a); }
double exp(double a) { return std::exp(a); }
double log(double a) { return std::log(a); }
double sqrt(double a) { return std::sqrt(a); }
double abs(double a) { return std::abs(a); }
double sign(double a) { return a > 0.0 ? 1.0 : (a < 0.0 ? -1.0 : 0.0); }
double max(double a, double b) { return a >= b ? a : b; }
double min(double a, double b) { return a <= b ? a : b; }

double softplus(double a, double beta) {
  const double z = beta * a;
  return (std::max(z, 0.0) + std::log1p(std::exp(-std::abs(z)))) / beta;
}

double sigmoid(double a) {
  if (a >= 0.0) {
    return 1.0 / (1.0 + std::exp(-a));
  }
  const double e = std::exp(a);
  return e / (1.0 + e);
}

double value_of(double v) { return v; }
double value_of(const Var& v) { return v.value(); }

namespace {

double evaluate(Op op, double a, double b, double param) {
  switch (op) {
    case Op::Add: return a + b;
    case Op::Sub: return a - b;
    case Op::Mul: return a * b;
    case Op::Div: return a / b;
    case Op::Neg: return -a;
    case Op::Square: return square(a);
    case Op::Sin: return sin(a);
    case Op::Cos: return cos(a);
    case Op::Tan: return tan(a);
    case Op::Atan: return atan(a);
    case Op::Exp: return exp(a);
    case Op::Log: return log(a);
    case Op::Sqrt: return sqrt(a);
    case Op::Abs: return abs(a);
    case Op::Sign: return sign(a);
    case Op::Max: return max(a, b);
    case Op::Min: return min(a, b);
    case Op::Softplus: return softplus(a, param);
    case Op::Constant:
    case Op::Input:
    case Op::External:
      break;
  }
  throw UnsupportedOperation("evaluate: not an elementary op: " + std::string(op_name(op)));
}

Tape* common_tape(const Var& a, const Var& b) {
  Tape* t = a.tape() != nullptr ? a.tape() : b.tape();
  if (a.tape() != nullptr && b.tape() != nullptr && a.tape() != b.tape()) {
    throw UnsupportedOperation("operands recorded on different tapes");
  }
  return t;
}

Var unary(Op op, const Var& a, double param = 0.0) {
  const double v = evaluate(op, a.value(), 0.0, param);
  if (a.is_constant()) {
    return Var(v);
  }
  return a.tape()->push(op, a.index(), -1, v, param);
}

Var binary(Op op, const Var& a, const Var& b) {
  const double v = evaluate(op, a.value(), b.value(), 0.0);
  Tape* t = common_tape(a, b);
  if (t == nullptr) {
    return Var(v);
  }
  const std::int32_t ia = t->index_of(a);
  const std::int32_t ib = t->index_of(b);
  return t->push(op, ia, ib, v);
}

}  // namespace

Var Tape::input(double value) { return push(Op::Input, -1, -1, value); }

Var Tape::constant(double value) { return push(Op::Constant, -1, -1, value); }

Var Tape::push(Op op, std::int32_t a, std::int32_t b, double value, double param) {
  const auto n = static_cast<std::int32_t>(nodes_.size());
  if (a >= n || (op != Op::External && b >= n)) {
    throw ContractViolation("tape operand does not precede its node");
  }
  nodes_.push_back(Node{value, param, a, b, op});
  return Var(this, n, value);
}

std::int32_t Tape::index_of(const Var& v) {
  if (v.is_constant()) {
    return constant(v.value()).index();
  }
  if (v.tape() != this) {
    throw UnsupportedOperation("variable belongs to another tape");
  }
  return v.index();
}

std::vector<Var> Tape::record(std::unique_ptr<Primitive> primitive,
                              std::span<const Var> inputs,
                              std::span<const double> outputs) {
  Record rec;
  rec.inputs.reserve(inputs.size());
  for (const Var& v : inputs) {
    rec.inputs.push_back(index_of(v));
  }
  rec.primitive = std::move(primitive);
  rec.out_begin = static_cast<std::int32_t>(nodes_.size());
  rec.out_count = static_cast<std::int32_t>(outputs.size());
  const auto id = static_cast<std::int32_t>(records_.size());
  records_.push_back(std::move(rec));

  std::vector<Var> out;
  out.reserve(outputs.size());
  for (double v : outputs) {
    out.push_back(push(Op::External, -1, id, v));
  }
  return out;
}

int Tape::bind_params(std::size_t count) {
  param_grads_.emplace_back(count, 0.0);
  return static_cast<int>(param_grads_.size()) - 1;
}

std::span<double> Tape::param_grad(int slot) {
  return param_grads_.at(static_cast<std::size_t>(slot));
}

std::span<const double> Tape::param_grad(int slot) const {
  return param_grads_.at(static_cast<std::size_t>(slot));
}

std::vector<double> Tape::backward(const Var& output) {
  std::vector<double> adj(nodes_.size(), 0.0);
  if (output.is_constant()) {
    return adj;
  }
  if (output.tape() != this) {
    throw UnsupportedOperation("backward: output was not recorded on this tape");
  }
  adj[static_cast<std::size_t>(output.index())] = 1.0;

  // A primitive fires when the sweep reaches its first output; every consumer
  // of its outputs lies above that index and has already been swept.
  std::vector<double> in_adj;

  for (auto i = static_cast<std::ptrdiff_t>(output.index()); i >= 0; --i) {
    const Node& nd = nodes_[static_cast<std::size_t>(i)];
    const double w = adj[static_cast<std::size_t>(i)];
    if (nd.op == Op::External) {
      const Record& rec = records_[static_cast<std::size_t>(nd.b)];
      if (rec.out_begin == i) {
        std::span<const double> out_adj(adj.data() + rec.out_begin,
                                        static_cast<std::size_t>(rec.out_count));
        in_adj.assign(rec.inputs.size(), 0.0);
        rec.primitive->backward(*this, out_adj, in_adj);
        for (std::size_t k = 0; k < rec.inputs.size(); ++k) {
          adj[static_cast<std::size_t>(rec.inputs[k])] += in_adj[k];
        }
      }
      continue;
    }
    if (w == 0.0) {
      continue;
    }
    const double va = nd.a >= 0 ? nodes_[static_cast<std::size_t>(nd.a)].value : 0.0;
    const double vb = nd.b >= 0 ? nodes_[static_cast<std::size_t>(nd.b)].value : 0.0;
    auto ga = [&](double d) { adj[static_cast<std::size_t>(nd.a)] += d; };
    auto gb = [&](double d) { adj[static_cast<std::size_t>(nd.b)] += d; };
    switch (nd.op) {
      case Op::Constant:
      case Op::Input:
        break;
      case Op::Add: ga(w); gb(w); break;
      case Op::Sub: ga(w); gb(-w); break;
      case Op::Mul: ga(w * vb); gb(w * va); break;
      case Op::Div: ga(w / vb); gb(-w * nd.value / vb); break;
      case Op::Neg: ga(-w); break;
      case Op::Square: ga(2.0 * va * w); break;
      case Op::Sin: ga(std::cos(va) * w); break;
      case Op::Cos: ga(-std::sin(va) * w); break;
      case Op::Tan: ga((1.0 + nd.value * nd.value) * w); break;
      case Op::Atan: ga(w / (1.0 + va * va)); break;
      case Op::Exp: ga(nd.value * w); break;
      case Op::Log: ga(w / va); break;
      case Op::Sqrt: ga(va > 0.0 ? w / (2.0 * nd.value) : 0.0); break;
      case Op::Abs: ga(sign(va) * w); break;
      case Op::Sign: break;
      case Op::Max: if (va >= vb) ga(w); else gb(w); break;
      case Op::Min: if (va <= vb) ga(w); else gb(w); break;
      case Op::Softplus: ga(sigmoid(nd.param * va) * w); break;
      case Op::External: break;
    }
  }
  return adj;
}

std::vector<double> Tape::replay() const {
  std::vector<double> values(nodes_.size(), 0.0);
  std::vector<double> in_values;
  std::vector<double> out_values;
  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    const Node& nd = nodes_[i];
    switch (nd.op) {
      case Op::Constant:
      case Op::Input:
        values[i] = nd.value;
        break;
      case Op::External: {
        const Record& rec = records_[static_cast<std::size_t>(nd.b)];
        if (rec.out_begin == static_cast<std::int32_t>(i)) {
          in_values.clear();
          for (std::int32_t k : rec.inputs) {
            in_values.push_back(values[static_cast<std::size_t>(k)]);
          }
          out_values.assign(static_cast<std::size_t>(rec.out_count), 0.0);
          rec.primitive->replay(in_values, out_values);
          std::copy(out_values.begin(), out_values.end(), values.begin() + rec.out_begin);
        }
        break;
      }
      default: {
        const double va = nd.a >= 0 ? values[static_cast<std::size_t>(nd.a)] : 0.0;
        const double vb = nd.b >= 0 ? values[static_cast<std::size_t>(nd.b)] : 0.0;
        values[i] = evaluate(nd.op, va, vb, nd.param);
      }
    }
  }
  return values;
}

std::size_t Tape::memory_bytes() const {
  std::size_t bytes = nodes_.capacity() * sizeof(Node);
  for (const Record& rec : records_) {
    bytes += rec.inputs.capacity() * sizeof(std::int32_t) + rec.primitive->memory_bytes();
  }
  for (const auto& g : param_grads_) {
    bytes += g.capacity() * sizeof(double);
  }
  return bytes;
}

void Tape::clear() {
  nodes_.clear();
  records_.clear();
  param_grads_.clear();
}

Var operator+(const Var& a, const Var& b) { return binary(Op::Add, a, b); }
Var operator-(const Var& a, const Var& b) { return binary(Op::Sub, a, b); }
Var operator*(const Var& a, const Var& b) { return binary(Op::Mul, a, b); }
Var operator/(const Var& a, const Var& b) { return binary(Op::Div, a, b); }
Var operator-(const Var& a) { return unary(Op::Neg, a); }
Var& operator+=(Var& a, const Var& b) { return a = a + b; }
Var& operator-=(Var& a, const Var& b) { return a = a - b; }
Var& operator*=(Var& a, const Var& b) { return a = a * b; }

Var square(const Var& a) { return unary(Op::Square, a); }
Var sin(const Var& a) { return unary(Op::Sin, a); }
Var cos(const Var& a) { return unary(Op::Cos, a); }
Var tan(const Var& a) { return unary(Op::Tan, a); }
Var atan(const Var& a) { return unary(Op::Atan, a); }
Var exp(const Var& a) { return unary(Op::Exp, a); }
Var log(const Var& a) { return unary(Op::Log, a); }
Var sqrt(const Var& a) { return unary(Op::Sqrt, a); }
Var abs(const Var& a) { return unary(Op::Abs, a); }
Var sign(const Var& a) { return unary(Op::Sign, a); }
Var max(const Var& a, const Var& b) { return binary(Op::Max, a, b); }
Var min(const Var& a, const Var& b) { return binary(Op::Min, a, b); }
Var softplus(const Var& a, double beta) { return unary(Op::Softplus, a, beta); }

double fd_check(const ScalarFn& fn, std::span<const double> point, double h) {
  if (!(h > 0.0)) {
    throw ContractViolation("fd_check: step must be positive");
  }
  Tape tape;
  std::vector<Var> inputs;
  inputs.reserve(point.size());
  for (double p : point) {
    inputs.push_back(tape.input(p));
  }
  const Var out = fn(inputs);
  const std::vector<double> adj = tape.backward(out);

  std::vector<Var> probe(point.begin(), point.end());
  double worst = 0.0;
  for (std::size_t i = 0; i < point.size(); ++i) {
    const double analytic = adj[static_cast<std::size_t>(inputs[i].index())];
    probe[i] = Var(point[i] + h);
    const double fp = fn(probe).value();
    probe[i] = Var(point[i] - h);
    const double fm = fn(probe).value();
    probe[i] = Var(point[i]);
    const double numeric = (fp - fm) / (2.0 * h);
    worst = std::max(worst, std::abs(analytic - numeric) / (std::abs(analytic) + 1e-12));
  }
  return worst;
}

}  // namespace hjinr::ad

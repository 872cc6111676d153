#pragma once

// Scalar expression graphs: parse, print, evaluate and differentiate the
// closed-form functions that describe a plant. Expr values are immutable and
// may be shared freely between threads.

#include <cstddef>
#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "robolin/error.hpp"

namespace robolin::expr {

enum class Op : std::uint8_t {
  kConstant,
  kVariable,
  kNeg,
  kAdd,
  kSub,
  kMul,
  kDiv,
  kPow,  // integer exponent only
  kSin,
  kCos,
  kTan,
  kExp,
  kLn,
  kSqrt,
  kAbs,
};

std::string_view op_name(Op op);

class SyntaxError : public Error {
 public:
  SyntaxError(std::size_t offset, const std::string& what);
  std::size_t offset() const noexcept { return offset_; }

 private:
  std::size_t offset_;
};

class UnknownIdentifier : public Error {
 public:
  explicit UnknownIdentifier(std::string name);
  const std::string& name() const noexcept { return name_; }

 private:
  std::string name_;
};

/// Raised by evaluation: ln of a non-positive value, division by zero, sqrt of
/// a negative value. Carries the printed offending subexpression.
class DomainError : public Error {
 public:
  DomainError(std::string subexpression, const std::string& what);
  const std::string& subexpression() const noexcept { return subexpression_; }

 private:
  std::string subexpression_;
};

/// Ordered variable names partitioned into states, inputs and parameters.
/// The global index of a name is fixed for the life of the space.
class VariableSpace {
 public:
  enum class Kind : std::uint8_t { kState, kInput, kParameter };

  VariableSpace() = default;
  VariableSpace(std::vector<std::string> states, std::vector<std::string> inputs,
                std::vector<std::string> parameters);

  std::size_t size() const noexcept { return names_.size(); }
  std::size_t state_count() const noexcept { return n_states_; }
  std::size_t input_count() const noexcept { return n_inputs_; }
  std::size_t parameter_count() const noexcept { return names_.size() - n_states_ - n_inputs_; }

  // Global index of the k-th state / input / parameter.
  std::size_t state(std::size_t k) const noexcept { return k; }
  std::size_t input(std::size_t k) const noexcept { return n_states_ + k; }
  std::size_t parameter(std::size_t k) const noexcept { return n_states_ + n_inputs_ + k; }

  const std::string& name(std::size_t index) const { return names_.at(index); }
  Kind kind(std::size_t index) const;
  std::optional<std::size_t> find(std::string_view name) const;
  const std::vector<std::string>& names() const noexcept { return names_; }

  std::vector<std::string> state_names() const;
  std::vector<std::string> input_names() const;
  std::vector<std::string> parameter_names() const;

  bool operator==(const VariableSpace& other) const { return names_ == other.names_ && n_states_ == other.n_states_ && n_inputs_ == other.n_inputs_; }

 private:
  std::vector<std::string> names_;
  std::size_t n_states_ = 0;
  std::size_t n_inputs_ = 0;
  std::unordered_map<std::string, std::size_t> index_;
};

struct Node;

class Expr {
 public:
  /// The zero constant.
  Expr();

  static Expr constant(double value);
  static Expr variable(std::size_t index, std::string name);
  static Expr variable(const VariableSpace& space, std::string_view name);

  Op op() const noexcept;
  double value() const noexcept;          // kConstant only
  std::size_t var_index() const noexcept;  // kVariable only
  const std::string& var_name() const noexcept;
  int exponent() const noexcept;  // kPow only
  Expr arg() const;  // first child (unary ops, lhs of binary)
  Expr rhs() const;  // second child of binary ops

  bool is_constant() const noexcept { return op() == Op::kConstant; }
  bool is_constant(double v) const noexcept { return is_constant() && value() == v; }
  bool is_zero() const noexcept { return is_constant(0.0); }

  /// Identity of the underlying node (for memo tables).
  const Node* id() const noexcept { return node_.get(); }

  /// Number of distinct nodes reachable from this expression.
  std::size_t node_count() const;

  friend Expr operator+(const Expr& a, const Expr& b);
  friend Expr operator-(const Expr& a, const Expr& b);
  friend Expr operator*(const Expr& a, const Expr& b);
  friend Expr operator/(const Expr& a, const Expr& b);
  friend Expr operator-(const Expr& a);
  friend Expr pow(const Expr& base, int exponent);
  friend Expr sin(const Expr& a);
  friend Expr cos(const Expr& a);
  friend Expr tan(const Expr& a);
  friend Expr exp(const Expr& a);
  friend Expr ln(const Expr& a);
  friend Expr sqrt(const Expr& a);
  friend Expr abs(const Expr& a);

 private:
  explicit Expr(std::shared_ptr<const Node> node) : node_(std::move(node)) {}
  friend class Tape;
  friend struct ExprAccess;
  static Expr make_unary(Op op, const Expr& a, int exponent = 0);
  static Expr make_binary(Op op, const Expr& a, const Expr& b);

  std::shared_ptr<const Node> node_;
};

struct Node {
  Op op = Op::kConstant;
  double value = 0.0;
  std::size_t var = 0;
  int exponent = 0;
  std::string name;
  std::shared_ptr<const Node> a;
  std::shared_ptr<const Node> b;
};

inline Expr operator+(const Expr& a, double b) { return a + Expr::constant(b); }
inline Expr operator+(double a, const Expr& b) { return Expr::constant(a) + b; }
inline Expr operator-(const Expr& a, double b) { return a - Expr::constant(b); }
inline Expr operator-(double a, const Expr& b) { return Expr::constant(a) - b; }
inline Expr operator*(const Expr& a, double b) { return a * Expr::constant(b); }
inline Expr operator*(double a, const Expr& b) { return Expr::constant(a) * b; }
inline Expr operator/(const Expr& a, double b) { return a / Expr::constant(b); }
inline Expr operator/(double a, const Expr& b) { return Expr::constant(a) / b; }

/// Parses the infix grammar documented in docs/expression_grammar.md.
Expr parse(std::string_view text, const VariableSpace& space);

/// Prints an expression in a form `parse` accepts; constants are printed with
/// shortest round-trip precision.
std::string to_string(const Expr& e);

/// Exact partial derivative with respect to the variable with global index
/// `var`, simplified by constant folding.
Expr diff(const Expr& e, std::size_t var);
Expr diff(const Expr& e, const VariableSpace& space, std::string_view var);

/// Replaces variables. `replacement[i]`, when set, replaces the variable with
/// global index i.
Expr substitute(const Expr& e, const std::vector<std::optional<Expr>>& replacement);

/// True if `var` occurs in `e`.
bool depends_on(const Expr& e, std::size_t var);

/// One-shot evaluation; `values` is indexed by global variable index.
double eval(const Expr& e, std::span<const double> values);
double eval(const Expr& e, const VariableSpace& space, const std::map<std::string, double>& env);

/// A compiled, common-subexpression-shared evaluation program for a batch of
/// expressions. Immutable after construction; `eval` is reentrant when each
/// caller passes its own scratch buffer.
class Tape {
 public:
  Tape() = default;
  explicit Tape(std::span<const Expr> outputs);

  std::size_t output_count() const noexcept { return outputs_.size(); }
  std::size_t instruction_count() const noexcept { return code_.size(); }

  void eval(std::span<const double> values, std::span<double> out, std::vector<double>& scratch) const;
  std::vector<double> eval(std::span<const double> values) const;

 private:
  struct Instr {
    Op op;
    int exponent;
    std::uint32_t a;
    std::uint32_t b;
    std::size_t var;
    double value;
    const Node* source;
  };
  std::vector<Instr> code_;
  std::vector<std::uint32_t> outputs_;
  std::vector<Expr> roots_;  // keeps `source` pointers alive
};

}  // namespace robolin::expr

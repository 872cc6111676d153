#include "robolin/expr.hpp"

#include <bit>
#include <charconv>
#include <cmath>
#include <functional>
#include <unordered_set>

namespace robolin::expr {

namespace {

const std::unordered_set<std::string_view>& function_names() {
  static const std::unordered_set<std::string_view> names = {"sin", "cos", "tan", "exp",
                                                             "ln",  "sqrt", "abs"};
  return names;
}

bool foldable(double v) { return std::isfinite(v); }

}  // namespace

std::string_view op_name(Op op) {
  switch (op) {
    case Op::kConstant: return "const";
    case Op::kVariable: return "var";
    case Op::kNeg: return "neg";
    case Op::kAdd: return "+";
    case Op::kSub: return "-";
    case Op::kMul: return "*";
    case Op::kDiv: return "/";
    case Op::kPow: return "^";
    case Op::kSin: return "sin";
    case Op::kCos: return "cos";
    case Op::kTan: return "tan";
    case Op::kExp: return "exp";
    case Op::kLn: return "ln";
    case Op::kSqrt: return "sqrt";
    case Op::kAbs: return "abs";
  }
  return "?";
}

SyntaxError::SyntaxError(std::size_t offset, const std::string& what)
    : Error("syntax error at byte " + std::to_string(offset) + ": " + what), offset_(offset) {}

UnknownIdentifier::UnknownIdentifier(std::string name)
    : Error("unknown identifier '" + name + "'"), name_(std::move(name)) {}

DomainError::DomainError(std::string subexpression, const std::string& what)
    : Error(what + " in '" + subexpression + "'"), subexpression_(std::move(subexpression)) {}

// ---------------------------------------------------------------------------
// VariableSpace

VariableSpace::VariableSpace(std::vector<std::string> states, std::vector<std::string> inputs,
                             std::vector<std::string> parameters)
    : n_states_(states.size()), n_inputs_(inputs.size()) {
  names_.reserve(states.size() + inputs.size() + parameters.size());
  for (auto* group : {&states, &inputs, &parameters}) {
    for (auto& n : *group) names_.push_back(std::move(n));
  }
  for (std::size_t i = 0; i < names_.size(); ++i) {
    const std::string& n = names_[i];
    bool ok = !n.empty() && (std::isalpha(static_cast<unsigned char>(n[0])) || n[0] == '_');
    for (char c : n) ok = ok && (std::isalnum(static_cast<unsigned char>(c)) || c == '_');
    if (!ok) throw Error("invalid variable name '" + n + "'");
    if (function_names().count(n) != 0) throw Error("variable name '" + n + "' is reserved");
    if (!index_.emplace(n, i).second) throw Error("duplicate variable name '" + n + "'");
  }
}

VariableSpace::Kind VariableSpace::kind(std::size_t index) const {
  if (index < n_states_) return Kind::kState;
  if (index < n_states_ + n_inputs_) return Kind::kInput;
  return Kind::kParameter;
}

std::optional<std::size_t> VariableSpace::find(std::string_view name) const {
  auto it = index_.find(std::string(name));
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

std::vector<std::string> VariableSpace::state_names() const {
  return {names_.begin(), names_.begin() + static_cast<std::ptrdiff_t>(n_states_)};
}
std::vector<std::string> VariableSpace::input_names() const {
  return {names_.begin() + static_cast<std::ptrdiff_t>(n_states_),
          names_.begin() + static_cast<std::ptrdiff_t>(n_states_ + n_inputs_)};
}
std::vector<std::string> VariableSpace::parameter_names() const {
  return {names_.begin() + static_cast<std::ptrdiff_t>(n_states_ + n_inputs_), names_.end()};
}

// ---------------------------------------------------------------------------
// Construction and simplification

struct ExprAccess {
  static Expr wrap(std::shared_ptr<const Node> n) { return Expr(std::move(n)); }
  static const std::shared_ptr<const Node>& node(const Expr& e) { return e.node_; }
};

namespace {

std::shared_ptr<const Node> make_constant_node(double v) {
  auto n = std::make_shared<Node>();
  n->op = Op::kConstant;
  n->value = v;
  return n;
}

const std::shared_ptr<const Node>& zero_node() {
  static const std::shared_ptr<const Node> z = make_constant_node(0.0);
  return z;
}

double apply_unary(Op op, double x, int k) {
  switch (op) {
    case Op::kNeg: return -x;
    case Op::kPow: return std::pow(x, k);
    case Op::kSin: return std::sin(x);
    case Op::kCos: return std::cos(x);
    case Op::kTan: return std::tan(x);
    case Op::kExp: return std::exp(x);
    case Op::kLn: return std::log(x);
    case Op::kSqrt: return std::sqrt(x);
    case Op::kAbs: return std::abs(x);
    default: return x;
  }
}

bool in_domain(Op op, double x, int k) {
  switch (op) {
    case Op::kLn: return x > 0.0;
    case Op::kSqrt: return x >= 0.0;
    case Op::kPow: return !(k < 0 && x == 0.0);
    default: return true;
  }
}

}  // namespace

Expr::Expr() : node_(zero_node()) {}

Expr Expr::constant(double value) {
  if (value == 0.0 && !std::signbit(value)) return Expr();
  return Expr(make_constant_node(value));
}

Expr Expr::variable(std::size_t index, std::string name) {
  auto n = std::make_shared<Node>();
  n->op = Op::kVariable;
  n->var = index;
  n->name = std::move(name);
  return Expr(std::move(n));
}

Expr Expr::variable(const VariableSpace& space, std::string_view name) {
  auto idx = space.find(name);
  if (!idx) throw UnknownIdentifier(std::string(name));
  return variable(*idx, std::string(name));
}

Op Expr::op() const noexcept { return node_->op; }
double Expr::value() const noexcept { return node_->value; }
std::size_t Expr::var_index() const noexcept { return node_->var; }
const std::string& Expr::var_name() const noexcept { return node_->name; }
int Expr::exponent() const noexcept { return node_->exponent; }
Expr Expr::arg() const { return node_->a ? Expr(node_->a) : Expr(); }
Expr Expr::rhs() const { return node_->b ? Expr(node_->b) : Expr(); }

std::size_t Expr::node_count() const {
  std::unordered_set<const Node*> seen;
  std::vector<const Node*> stack{node_.get()};
  while (!stack.empty()) {
    const Node* n = stack.back();
    stack.pop_back();
    if (!seen.insert(n).second) continue;
    if (n->a) stack.push_back(n->a.get());
    if (n->b) stack.push_back(n->b.get());
  }
  return seen.size();
}

Expr Expr::make_unary(Op op, const Expr& a, int exponent) {
  if (a.is_constant()) {
    const double x = a.value();
    if (in_domain(op, x, exponent)) {
      const double r = apply_unary(op, x, exponent);
      if (foldable(r)) return constant(r);
    }
  }
  auto n = std::make_shared<Node>();
  n->op = op;
  n->exponent = exponent;
  n->a = a.node_;
  return Expr(std::move(n));
}

Expr Expr::make_binary(Op op, const Expr& a, const Expr& b) {
  auto n = std::make_shared<Node>();
  n->op = op;
  n->a = a.node_;
  n->b = b.node_;
  return Expr(std::move(n));
}

Expr operator+(const Expr& a, const Expr& b) {
  if (a.is_constant() && b.is_constant() && foldable(a.value() + b.value())) {
    return Expr::constant(a.value() + b.value());
  }
  if (a.is_zero()) return b;
  if (b.is_zero()) return a;
  if (b.op() == Op::kNeg) return a - b.arg();
  return Expr::make_binary(Op::kAdd, a, b);
}

Expr operator-(const Expr& a, const Expr& b) {
  if (a.is_constant() && b.is_constant() && foldable(a.value() - b.value())) {
    return Expr::constant(a.value() - b.value());
  }
  if (b.is_zero()) return a;
  if (a.is_zero()) return -b;
  if (a.id() == b.id()) return Expr();
  if (b.op() == Op::kNeg) return a + b.arg();
  return Expr::make_binary(Op::kSub, a, b);
}

Expr operator*(const Expr& a, const Expr& b) {
  if (a.is_constant() && b.is_constant() && foldable(a.value() * b.value())) {
    return Expr::constant(a.value() * b.value());
  }
  if (a.is_zero() || b.is_zero()) return Expr();
  if (a.is_constant(1.0)) return b;
  if (b.is_constant(1.0)) return a;
  if (a.is_constant(-1.0)) return -b;
  if (b.is_constant(-1.0)) return -a;
  return Expr::make_binary(Op::kMul, a, b);
}

Expr operator/(const Expr& a, const Expr& b) {
  if (a.is_constant() && b.is_constant() && b.value() != 0.0 &&
      foldable(a.value() / b.value())) {
    return Expr::constant(a.value() / b.value());
  }
  if (b.is_constant(1.0)) return a;
  if (a.is_zero() && !b.is_zero()) return Expr();
  return Expr::make_binary(Op::kDiv, a, b);
}

Expr operator-(const Expr& a) {
  if (a.op() == Op::kNeg) return a.arg();
  return Expr::make_unary(Op::kNeg, a);
}

Expr pow(const Expr& base, int exponent) {
  if (exponent == 0) return Expr::constant(1.0);
  if (exponent == 1) return base;
  return Expr::make_unary(Op::kPow, base, exponent);
}

Expr sin(const Expr& a) { return Expr::make_unary(Op::kSin, a); }
Expr cos(const Expr& a) { return Expr::make_unary(Op::kCos, a); }
Expr tan(const Expr& a) { return Expr::make_unary(Op::kTan, a); }
Expr exp(const Expr& a) { return Expr::make_unary(Op::kExp, a); }
Expr ln(const Expr& a) { return Expr::make_unary(Op::kLn, a); }
Expr sqrt(const Expr& a) { return Expr::make_unary(Op::kSqrt, a); }
Expr abs(const Expr& a) { return Expr::make_unary(Op::kAbs, a); }

// ---------------------------------------------------------------------------
// Printing

namespace {

constexpr int kPrecAdd = 1;
constexpr int kPrecMul = 2;
constexpr int kPrecNeg = 3;
constexpr int kPrecPow = 4;
constexpr int kPrecAtom = 5;

std::string format_double(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

class Printer {
 public:
  explicit Printer(std::size_t limit) : limit_(limit) {}

  std::string run(const Expr& e) {
    print(e);
    if (out_.size() > limit_) {
      out_.resize(limit_);
      out_ += "...";
    }
    return out_;
  }

 private:
  static int precedence(const Expr& e) {
    switch (e.op()) {
      case Op::kConstant:
      case Op::kVariable: return kPrecAtom;
      case Op::kAdd:
      case Op::kSub: return kPrecAdd;
      case Op::kMul:
      case Op::kDiv: return kPrecMul;
      case Op::kNeg: return kPrecNeg;
      case Op::kPow: return kPrecPow;
      default: return kPrecAtom;  // function calls
    }
  }

  void wrapped(const Expr& e, bool paren) {
    if (paren) out_ += '(';
    print(e);
    if (paren) out_ += ')';
  }

  void print(const Expr& e) {
    if (out_.size() > limit_) return;
    switch (e.op()) {
      case Op::kConstant: {
        const double v = e.value();
        if (std::signbit(v)) {
          out_ += "(" + format_double(v) + ")";
        } else {
          out_ += format_double(v);
        }
        return;
      }
      case Op::kVariable: out_ += e.var_name(); return;
      case Op::kNeg:
        out_ += '-';
        wrapped(e.arg(), precedence(e.arg()) < kPrecNeg);
        return;
      case Op::kAdd:
      case Op::kSub:
      case Op::kMul:
      case Op::kDiv: {
        const int p = precedence(e);
        const bool non_assoc = e.op() == Op::kSub || e.op() == Op::kDiv;
        wrapped(e.arg(), precedence(e.arg()) < p);
        out_ += ' ';
        out_ += op_name(e.op());
        out_ += ' ';
        const int pr = precedence(e.rhs());
        wrapped(e.rhs(), non_assoc ? pr <= p : pr < p);
        return;
      }
      case Op::kPow:
        wrapped(e.arg(), precedence(e.arg()) < kPrecAtom);
        out_ += '^';
        if (e.exponent() < 0) {
          out_ += "(" + std::to_string(e.exponent()) + ")";
        } else {
          out_ += std::to_string(e.exponent());
        }
        return;
      default:
        out_ += op_name(e.op());
        out_ += '(';
        print(e.arg());
        out_ += ')';
        return;
    }
  }

  std::size_t limit_;
  std::string out_;
};

std::string short_string(const Expr& e) { return Printer(240).run(e); }

}  // namespace

std::string to_string(const Expr& e) {
  return Printer(std::numeric_limits<std::size_t>::max() / 2).run(e);
}

// ---------------------------------------------------------------------------
// Parsing

namespace {

class Parser {
 public:
  Parser(std::string_view text, const VariableSpace& space) : text_(text), space_(space) {}

  Expr run() {
    Expr e = expression();
    skip_ws();
    if (pos_ != text_.size()) fail("unexpected '" + std::string(1, text_[pos_]) + "'");
    return e;
  }

 private:
  [[noreturn]] void fail(const std::string& what) const { throw SyntaxError(pos_, what); }

  void skip_ws() {
    while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_]))) ++pos_;
  }

  bool accept(char c) {
    skip_ws();
    if (pos_ < text_.size() && text_[pos_] == c) {
      ++pos_;
      return true;
    }
    return false;
  }

  void expect(char c) {
    if (!accept(c)) {
      if (pos_ >= text_.size()) fail(std::string("expected '") + c + "' before end of input");
      fail(std::string("expected '") + c + "'");
    }
  }

  Expr expression() {
    Expr lhs = term();
    for (;;) {
      if (accept('+')) {
        lhs = lhs + term();
      } else if (accept('-')) {
        lhs = lhs - term();
      } else {
        return lhs;
      }
    }
  }

  Expr term() {
    Expr lhs = unary();
    for (;;) {
      if (accept('*')) {
        lhs = lhs * unary();
      } else if (accept('/')) {
        lhs = lhs / unary();
      } else {
        return lhs;
      }
    }
  }

  Expr unary() {
    if (accept('-')) return -unary();
    if (accept('+')) return unary();
    return power();
  }

  int integer_exponent() {
    skip_ws();
    bool parens = accept('(');
    skip_ws();
    bool negative = false;
    if (accept('-')) {
      negative = true;
    } else {
      accept('+');
    }
    skip_ws();
    const std::size_t start = pos_;
    while (pos_ < text_.size() && std::isdigit(static_cast<unsigned char>(text_[pos_]))) ++pos_;
    if (start == pos_) fail("exponent must be an integer literal");
    if (pos_ < text_.size() && (text_[pos_] == '.' || text_[pos_] == 'e' || text_[pos_] == 'E')) {
      fail("exponent must be an integer literal");
    }
    int k = 0;
    auto res = std::from_chars(text_.data() + start, text_.data() + pos_, k);
    if (res.ec != std::errc()) {
      pos_ = start;
      fail("exponent out of range");
    }
    if (parens) expect(')');
    return negative ? -k : k;
  }

  Expr power() {
    Expr base = primary();
    if (accept('^')) {
      const int k = integer_exponent();
      skip_ws();
      if (pos_ < text_.size() && text_[pos_] == '^') fail("chained '^' is ambiguous; add parentheses");
      return pow(base, k);
    }
    return base;
  }

  Expr primary() {
    skip_ws();
    if (pos_ >= text_.size()) fail("unexpected end of input");
    const char c = text_[pos_];
    if (c == '(') {
      ++pos_;
      Expr e = expression();
      expect(')');
      return e;
    }
    if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') return number();
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') return identifier();
    fail("unexpected '" + std::string(1, c) + "'");
  }

  Expr number() {
    const std::size_t start = pos_;
    while (pos_ < text_.size() &&
           (std::isdigit(static_cast<unsigned char>(text_[pos_])) || text_[pos_] == '.')) {
      ++pos_;
    }
    if (pos_ < text_.size() && (text_[pos_] == 'e' || text_[pos_] == 'E')) {
      std::size_t p = pos_ + 1;
      if (p < text_.size() && (text_[p] == '+' || text_[p] == '-')) ++p;
      if (p < text_.size() && std::isdigit(static_cast<unsigned char>(text_[p]))) {
        pos_ = p;
        while (pos_ < text_.size() && std::isdigit(static_cast<unsigned char>(text_[pos_]))) ++pos_;
      }
    }
    double v = 0.0;
    auto res = std::from_chars(text_.data() + start, text_.data() + pos_, v);
    if (res.ec != std::errc() || res.ptr != text_.data() + pos_) {
      pos_ = start;
      fail("malformed number");
    }
    return Expr::constant(v);
  }

  Expr identifier() {
    const std::size_t start = pos_;
    while (pos_ < text_.size() &&
           (std::isalnum(static_cast<unsigned char>(text_[pos_])) || text_[pos_] == '_')) {
      ++pos_;
    }
    const std::string_view name = text_.substr(start, pos_ - start);
    if (function_names().count(name) != 0) {
      expect('(');
      Expr a = expression();
      expect(')');
      if (name == "sin") return sin(a);
      if (name == "cos") return cos(a);
      if (name == "tan") return tan(a);
      if (name == "exp") return exp(a);
      if (name == "ln") return ln(a);
      if (name == "sqrt") return sqrt(a);
      return abs(a);
    }
    auto idx = space_.find(name);
    if (!idx) throw UnknownIdentifier(std::string(name));
    return Expr::variable(*idx, std::string(name));
  }

  std::string_view text_;
  const VariableSpace& space_;
  std::size_t pos_ = 0;
};

}  // namespace

Expr parse(std::string_view text, const VariableSpace& space) { return Parser(text, space).run(); }

// ---------------------------------------------------------------------------
// Differentiation and substitution

namespace {

class Differentiator {
 public:
  explicit Differentiator(std::size_t var) : var_(var) {}

  Expr run(const Expr& e) {
    auto it = memo_.find(e.id());
    if (it != memo_.end()) return it->second;
    Expr d = compute(e);
    memo_.emplace(e.id(), d);
    return d;
  }

 private:
  Expr compute(const Expr& e) {
    switch (e.op()) {
      case Op::kConstant: return Expr();
      case Op::kVariable: return e.var_index() == var_ ? Expr::constant(1.0) : Expr();
      case Op::kNeg: return -run(e.arg());
      case Op::kAdd: return run(e.arg()) + run(e.rhs());
      case Op::kSub: return run(e.arg()) - run(e.rhs());
      case Op::kMul: {
        const Expr a = e.arg(), b = e.rhs();
        return run(a) * b + a * run(b);
      }
      case Op::kDiv: {
        const Expr a = e.arg(), b = e.rhs();
        const Expr da = run(a), db = run(b);
        if (db.is_zero()) return da / b;
        return da / b - a * db / pow(b, 2);
      }
      case Op::kPow: {
        const Expr a = e.arg();
        const int k = e.exponent();
        return Expr::constant(k) * pow(a, k - 1) * run(a);
      }
      case Op::kSin: return cos(e.arg()) * run(e.arg());
      case Op::kCos: return -(sin(e.arg()) * run(e.arg()));
      case Op::kTan: return run(e.arg()) / pow(cos(e.arg()), 2);
      case Op::kExp: return e * run(e.arg());
      case Op::kLn: return run(e.arg()) / e.arg();
      case Op::kSqrt: return run(e.arg()) / (2.0 * e);
      case Op::kAbs: return e.arg() / e * run(e.arg());
    }
    return Expr();
  }

  std::size_t var_;
  std::unordered_map<const Node*, Expr> memo_;
};

}  // namespace

Expr diff(const Expr& e, std::size_t var) { return Differentiator(var).run(e); }

Expr diff(const Expr& e, const VariableSpace& space, std::string_view var) {
  auto idx = space.find(var);
  if (!idx) throw UnknownIdentifier(std::string(var));
  return diff(e, *idx);
}

Expr substitute(const Expr& e, const std::vector<std::optional<Expr>>& replacement) {
  std::unordered_map<const Node*, Expr> memo;
  std::function<Expr(const Expr&)> go = [&](const Expr& x) -> Expr {
    auto it = memo.find(x.id());
    if (it != memo.end()) return it->second;
    Expr r = x;
    switch (x.op()) {
      case Op::kConstant: break;
      case Op::kVariable:
        if (x.var_index() < replacement.size() && replacement[x.var_index()]) {
          r = *replacement[x.var_index()];
        }
        break;
      case Op::kAdd:
      case Op::kSub:
      case Op::kMul:
      case Op::kDiv: {
        const Expr a = go(x.arg()), b = go(x.rhs());
        if (a.id() == x.arg().id() && b.id() == x.rhs().id()) break;
        if (x.op() == Op::kAdd) r = a + b;
        if (x.op() == Op::kSub) r = a - b;
        if (x.op() == Op::kMul) r = a * b;
        if (x.op() == Op::kDiv) r = a / b;
        break;
      }
      default: {
        const Expr a = go(x.arg());
        if (a.id() == x.arg().id()) break;
        switch (x.op()) {
          case Op::kNeg: r = -a; break;
          case Op::kPow: r = pow(a, x.exponent()); break;
          case Op::kSin: r = sin(a); break;
          case Op::kCos: r = cos(a); break;
          case Op::kTan: r = tan(a); break;
          case Op::kExp: r = exp(a); break;
          case Op::kLn: r = ln(a); break;
          case Op::kSqrt: r = sqrt(a); break;
          case Op::kAbs: r = abs(a); break;
          default: break;
        }
      }
    }
    memo.emplace(x.id(), r);
    return r;
  };
  return go(e);
}

bool depends_on(const Expr& e, std::size_t var) {
  std::unordered_set<const Node*> seen;
  std::vector<const Node*> stack{e.id()};
  while (!stack.empty()) {
    const Node* n = stack.back();
    stack.pop_back();
    if (!seen.insert(n).second) continue;
    if (n->op == Op::kVariable && n->var == var) return true;
    if (n->a) stack.push_back(n->a.get());
    if (n->b) stack.push_back(n->b.get());
  }
  return false;
}

// ---------------------------------------------------------------------------
// Evaluation

namespace {

struct InstrKey {
  Op op;
  int exponent;
  std::uint32_t a;
  std::uint32_t b;
  std::size_t var;
  std::uint64_t bits;
  bool operator==(const InstrKey&) const = default;
};

struct InstrKeyHash {
  std::size_t operator()(const InstrKey& k) const noexcept {
    std::size_t h = static_cast<std::size_t>(k.op) * 0x9E3779B97F4A7C15ULL;
    auto mix = [&h](std::uint64_t v) { h ^= v + 0x9E3779B97F4A7C15ULL + (h << 6) + (h >> 2); };
    mix(static_cast<std::uint64_t>(k.exponent));
    mix(k.a);
    mix(k.b);
    mix(k.var);
    mix(k.bits);
    return h;
  }
};

constexpr std::uint32_t kNoChild = 0xFFFFFFFFu;

}  // namespace

Tape::Tape(std::span<const Expr> outputs) {
  roots_.assign(outputs.begin(), outputs.end());
  std::unordered_map<const Node*, std::uint32_t> visited;
  std::unordered_map<InstrKey, std::uint32_t, InstrKeyHash> structural;

  std::function<std::uint32_t(const Node*)> emit = [&](const Node* n) -> std::uint32_t {
    auto it = visited.find(n);
    if (it != visited.end()) return it->second;
    const std::uint32_t a = n->a ? emit(n->a.get()) : kNoChild;
    const std::uint32_t b = n->b ? emit(n->b.get()) : kNoChild;
    InstrKey key{n->op, n->exponent, a, b, n->op == Op::kVariable ? n->var : 0,
                 n->op == Op::kConstant ? std::bit_cast<std::uint64_t>(n->value) : 0};
    std::uint32_t slot;
    auto sit = structural.find(key);
    if (sit != structural.end()) {
      slot = sit->second;
    } else {
      slot = static_cast<std::uint32_t>(code_.size());
      code_.push_back(Instr{n->op, n->exponent, a, b, key.var, n->value, n});
      structural.emplace(key, slot);
    }
    visited.emplace(n, slot);
    return slot;
  };

  outputs_.reserve(roots_.size());
  for (const Expr& e : roots_) outputs_.push_back(emit(e.id()));
}

void Tape::eval(std::span<const double> values, std::span<double> out,
                std::vector<double>& scratch) const {
  scratch.resize(code_.size());
  double* s = scratch.data();
  // non-owning handle; roots_ keeps the node alive
  auto source = [](const Node* n) {
    return ExprAccess::wrap(std::shared_ptr<const Node>(std::shared_ptr<const Node>{}, n));
  };
  for (std::size_t i = 0; i < code_.size(); ++i) {
    const Instr& in = code_[i];
    double r = 0.0;
    switch (in.op) {
      case Op::kConstant: r = in.value; break;
      case Op::kVariable:
        if (in.var >= values.size()) {
          throw Error("variable '" + in.source->name + "' is not bound");
        }
        r = values[in.var];
        break;
      case Op::kNeg: r = -s[in.a]; break;
      case Op::kAdd: r = s[in.a] + s[in.b]; break;
      case Op::kSub: r = s[in.a] - s[in.b]; break;
      case Op::kMul: r = s[in.a] * s[in.b]; break;
      case Op::kDiv:
        if (s[in.b] == 0.0) throw DomainError(short_string(source(in.source)), "division by zero");
        r = s[in.a] / s[in.b];
        break;
      case Op::kPow: {
        const double x = s[in.a];
        if (in.exponent < 0 && x == 0.0) {
          throw DomainError(short_string(source(in.source)), "division by zero");
        }
        switch (in.exponent) {
          case 2: r = x * x; break;
          case 3: r = x * x * x; break;
          default: r = std::pow(x, in.exponent);
        }
        break;
      }
      case Op::kSin: r = std::sin(s[in.a]); break;
      case Op::kCos: r = std::cos(s[in.a]); break;
      case Op::kTan: r = std::tan(s[in.a]); break;
      case Op::kExp: r = std::exp(s[in.a]); break;
      case Op::kLn:
        if (!(s[in.a] > 0.0)) {
          throw DomainError(short_string(source(in.source)), "logarithm of non-positive value");
        }
        r = std::log(s[in.a]);
        break;
      case Op::kSqrt:
        if (s[in.a] < 0.0) {
          throw DomainError(short_string(source(in.source)), "square root of negative value");
        }
        r = std::sqrt(s[in.a]);
        break;
      case Op::kAbs: r = std::abs(s[in.a]); break;
    }
    s[i] = r;
  }
  for (std::size_t k = 0; k < outputs_.size(); ++k) out[k] = s[outputs_[k]];
}

std::vector<double> Tape::eval(std::span<const double> values) const {
  std::vector<double> scratch;
  std::vector<double> out(outputs_.size());
  eval(values, out, scratch);
  return out;
}

double eval(const Expr& e, std::span<const double> values) {
  const Tape tape(std::span<const Expr>(&e, 1));
  return tape.eval(values)[0];
}

double eval(const Expr& e, const VariableSpace& space, const std::map<std::string, double>& env) {
  std::vector<double> values(space.size(), std::numeric_limits<double>::quiet_NaN());
  std::vector<bool> bound(space.size(), false);
  for (const auto& [name, v] : env) {
    auto idx = space.find(name);
    if (!idx) throw UnknownIdentifier(name);
    values[*idx] = v;
    bound[*idx] = true;
  }
  for (std::size_t i = 0; i < space.size(); ++i) {
    if (!bound[i] && depends_on(e, i)) throw Error("variable '" + space.name(i) + "' is not bound");
  }
  return eval(e, values);
}

}  // namespace robolin::expr

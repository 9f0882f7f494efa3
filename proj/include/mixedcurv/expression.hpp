#pragma once

// Small arithmetic expression language for warping functions, metric entries
// and immersion maps.
//
//   expr   := term (("+"|"-") term)*
//   term   := factor (("*"|"/") factor)*
//   factor := unary ("^" factor)?          right-associative
//   unary  := "-" unary | atom
//   atom   := NUMBER | IDENT | IDENT "(" expr ")" | "(" expr ")"
//
// Functions: sin cos tan sinh cosh tanh exp log sqrt. The identifier `pi` is a
// constant; every other identifier is a free variable bound at compile time.
// Note that "-2^2" is (-2)^2 under this grammar.

#include "mixedcurv/errors.hpp"

#include <array>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <memory>
#include <numbers>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace mixedcurv::expr {

enum class Op { Number, Variable, Neg, Add, Sub, Mul, Div, Pow, Call };
enum class Func { Sin, Cos, Tan, Sinh, Cosh, Tanh, Exp, Log, Sqrt };

inline constexpr std::array<std::string_view, 9> kFuncNames = {"sin",  "cos", "tan", "sinh", "cosh",
                                                               "tanh", "exp", "log", "sqrt"};

struct Node;
using NodePtr = std::shared_ptr<const Node>;

struct Node {
  Op op = Op::Number;
  double value = 0.0;
  std::string name;  // variable name
  Func func = Func::Sin;
  NodePtr lhs;  // operand of Neg/Call, left of binary
  NodePtr rhs;
};

inline NodePtr number(double v) { return std::make_shared<Node>(Node{Op::Number, v, {}, Func::Sin, nullptr, nullptr}); }
inline NodePtr variable(std::string n) {
  return std::make_shared<Node>(Node{Op::Variable, 0.0, std::move(n), Func::Sin, nullptr, nullptr});
}
inline NodePtr unary(Op op, NodePtr a) { return std::make_shared<Node>(Node{op, 0.0, {}, Func::Sin, std::move(a), nullptr}); }
inline NodePtr binary(Op op, NodePtr a, NodePtr b) {
  return std::make_shared<Node>(Node{op, 0.0, {}, Func::Sin, std::move(a), std::move(b)});
}
inline NodePtr call(Func f, NodePtr a) { return std::make_shared<Node>(Node{Op::Call, 0.0, {}, f, std::move(a), nullptr}); }

inline bool equal(const NodePtr& a, const NodePtr& b) {
  if (a == b) return true;
  if (!a || !b || a->op != b->op) return false;
  switch (a->op) {
    case Op::Number: return a->value == b->value;
    case Op::Variable: return a->name == b->name;
    case Op::Call: return a->func == b->func && equal(a->lhs, b->lhs);
    case Op::Neg: return equal(a->lhs, b->lhs);
    default: return equal(a->lhs, b->lhs) && equal(a->rhs, b->rhs);
  }
}

// ---------------------------------------------------------------------------
// parser

class Parser {
 public:
  explicit Parser(std::string_view src) : src_(src) {}

  NodePtr parse() {
    if (src_.find_first_not_of(" \t\r\n") == std::string_view::npos) fail(0, "expression");
    NodePtr e = parse_expr();
    skip_ws();
    if (pos_ != src_.size()) fail(pos_, "operator or end of input");
    return e;
  }

 private:
  [[noreturn]] void fail(std::size_t at, const std::string& expected) const {
    throw SyntaxError(at, expected, std::string(src_));
  }

  void skip_ws() {
    while (pos_ < src_.size() && std::isspace(static_cast<unsigned char>(src_[pos_]))) ++pos_;
  }

  bool accept(char c) {
    skip_ws();
    if (pos_ < src_.size() && src_[pos_] == c) {
      ++pos_;
      return true;
    }
    return false;
  }

  NodePtr parse_expr() {
    NodePtr lhs = parse_term();
    for (;;) {
      if (accept('+')) lhs = binary(Op::Add, lhs, parse_term());
      else if (accept('-')) lhs = binary(Op::Sub, lhs, parse_term());
      else return lhs;
    }
  }

  NodePtr parse_term() {
    NodePtr lhs = parse_factor();
    for (;;) {
      if (accept('*')) lhs = binary(Op::Mul, lhs, parse_factor());
      else if (accept('/')) lhs = binary(Op::Div, lhs, parse_factor());
      else return lhs;
    }
  }

  NodePtr parse_factor() {
    NodePtr base = parse_unary();
    if (accept('^')) return binary(Op::Pow, base, parse_factor());
    return base;
  }

  NodePtr parse_unary() {
    if (accept('-')) return unary(Op::Neg, parse_unary());
    return parse_atom();
  }

  NodePtr parse_atom() {
    skip_ws();
    if (pos_ >= src_.size()) fail(pos_, "number, identifier or '('");
    const char c = src_[pos_];
    if (c == '(') {
      ++pos_;
      NodePtr e = parse_expr();
      skip_ws();
      if (!accept(')')) fail(pos_, "')'");
      return e;
    }
    if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') return parse_number();
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
      const std::size_t start = pos_;
      while (pos_ < src_.size() &&
             (std::isalnum(static_cast<unsigned char>(src_[pos_])) || src_[pos_] == '_'))
        ++pos_;
      std::string ident(src_.substr(start, pos_ - start));
      skip_ws();
      if (pos_ < src_.size() && src_[pos_] == '(') {
        ++pos_;
        std::size_t fi = 0;
        while (fi < kFuncNames.size() && kFuncNames[fi] != ident) ++fi;
        if (fi == kFuncNames.size())
          throw Error(ErrorKind::UnknownFunction, "'" + ident + "' at offset " + std::to_string(start));
        NodePtr arg = parse_expr();
        skip_ws();
        if (!accept(')')) fail(pos_, "')'");
        return call(static_cast<Func>(fi), arg);
      }
      if (ident == "pi") return number(std::numbers::pi);
      return variable(ident);
    }
    fail(pos_, "number, identifier or '('");
  }

  NodePtr parse_number() {
    const std::size_t start = pos_;
    auto digits = [&] {
      while (pos_ < src_.size() && std::isdigit(static_cast<unsigned char>(src_[pos_]))) ++pos_;
    };
    digits();
    if (pos_ < src_.size() && src_[pos_] == '.') {
      ++pos_;
      digits();
    }
    if (pos_ < src_.size() && (src_[pos_] == 'e' || src_[pos_] == 'E')) {
      std::size_t save = pos_++;
      if (pos_ < src_.size() && (src_[pos_] == '+' || src_[pos_] == '-')) ++pos_;
      if (pos_ < src_.size() && std::isdigit(static_cast<unsigned char>(src_[pos_]))) digits();
      else pos_ = save;
    }
    double v = 0.0;
    const auto res = std::from_chars(src_.data() + start, src_.data() + pos_, v);
    if (res.ec != std::errc() || res.ptr != src_.data() + pos_) fail(start, "number");
    return number(v);
  }

  std::string_view src_;
  std::size_t pos_ = 0;
};

inline NodePtr parse(std::string_view src) { return Parser(src).parse(); }

// ---------------------------------------------------------------------------
// canonical printing (parse(print(e)) reproduces e)

inline std::string format_number(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.15g", v);
  double back = 0.0;
  std::from_chars(buf, buf + std::char_traits<char>::length(buf), back);
  if (back != v) std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline std::string to_string(const NodePtr& e) {
  auto is_binary = [](const NodePtr& n) {
    return n->op == Op::Add || n->op == Op::Sub || n->op == Op::Mul || n->op == Op::Div || n->op == Op::Pow;
  };
  auto additive = [](const NodePtr& n) { return n->op == Op::Add || n->op == Op::Sub; };
  auto multiplicative = [](const NodePtr& n) { return n->op == Op::Mul || n->op == Op::Div; };
  auto wrap = [](const std::string& s, bool paren) { return paren ? "(" + s + ")" : s; };

  switch (e->op) {
    case Op::Number:
      // negative literals only come from programmatic trees; keep them re-parseable
      if (std::signbit(e->value)) return "(-" + format_number(-e->value) + ")";
      return format_number(e->value);
    case Op::Variable: return e->name;
    case Op::Call: return std::string(kFuncNames[static_cast<int>(e->func)]) + "(" + to_string(e->lhs) + ")";
    case Op::Neg: return "-" + wrap(to_string(e->lhs), is_binary(e->lhs));
    case Op::Pow:
      return wrap(to_string(e->lhs), is_binary(e->lhs)) + "^" +
             wrap(to_string(e->rhs), additive(e->rhs) || multiplicative(e->rhs));
    case Op::Mul:
    case Op::Div:
      return wrap(to_string(e->lhs), additive(e->lhs)) + (e->op == Op::Mul ? "*" : "/") +
             wrap(to_string(e->rhs), additive(e->rhs) || multiplicative(e->rhs));
    case Op::Add:
    case Op::Sub:
      return to_string(e->lhs) + (e->op == Op::Add ? "+" : "-") + wrap(to_string(e->rhs), additive(e->rhs));
  }
  return {};
}

inline void collect_variables(const NodePtr& e, std::set<std::string>& out) {
  if (!e) return;
  if (e->op == Op::Variable) out.insert(e->name);
  collect_variables(e->lhs, out);
  collect_variables(e->rhs, out);
}

// ---------------------------------------------------------------------------
// symbolic differentiation with constant folding

namespace detail {

inline bool is_num(const NodePtr& n, double v) { return n->op == Op::Number && n->value == v; }

inline NodePtr add(NodePtr a, NodePtr b) {
  if (is_num(a, 0)) return b;
  if (is_num(b, 0)) return a;
  return binary(Op::Add, a, b);
}
inline NodePtr sub(NodePtr a, NodePtr b) {
  if (is_num(b, 0)) return a;
  if (is_num(a, 0)) return unary(Op::Neg, b);
  return binary(Op::Sub, a, b);
}
inline NodePtr mul(NodePtr a, NodePtr b) {
  if (is_num(a, 0) || is_num(b, 0)) return number(0);
  if (is_num(a, 1)) return b;
  if (is_num(b, 1)) return a;
  return binary(Op::Mul, a, b);
}
inline NodePtr div(NodePtr a, NodePtr b) {
  if (is_num(a, 0)) return number(0);
  if (is_num(b, 1)) return a;
  return binary(Op::Div, a, b);
}
inline NodePtr neg(NodePtr a) {
  if (is_num(a, 0)) return a;
  if (a->op == Op::Neg) return a->lhs;
  return unary(Op::Neg, a);
}

inline bool depends_on(const NodePtr& e, const std::string& var) {
  if (!e) return false;
  if (e->op == Op::Variable) return e->name == var;
  return depends_on(e->lhs, var) || depends_on(e->rhs, var);
}

}  // namespace detail

inline NodePtr derivative(const NodePtr& e, const std::string& var) {
  using namespace detail;
  if (!depends_on(e, var)) return number(0);
  switch (e->op) {
    case Op::Number: return number(0);
    case Op::Variable: return number(1);
    case Op::Neg: return neg(derivative(e->lhs, var));
    case Op::Add: return add(derivative(e->lhs, var), derivative(e->rhs, var));
    case Op::Sub: return sub(derivative(e->lhs, var), derivative(e->rhs, var));
    case Op::Mul:
      return add(mul(derivative(e->lhs, var), e->rhs), mul(e->lhs, derivative(e->rhs, var)));
    case Op::Div:
      return div(sub(mul(derivative(e->lhs, var), e->rhs), mul(e->lhs, derivative(e->rhs, var))),
                 binary(Op::Pow, e->rhs, number(2)));
    case Op::Pow: {
      const NodePtr& u = e->lhs;
      const NodePtr& v = e->rhs;
      if (!depends_on(v, var)) {
        NodePtr vm1 = v->op == Op::Number ? number(v->value - 1.0) : sub(v, number(1));
        if (vm1->op == Op::Number && std::signbit(vm1->value)) vm1 = unary(Op::Neg, number(-vm1->value));
        return mul(mul(v, binary(Op::Pow, u, vm1)), derivative(u, var));
      }
      // u^v (v' log u + v u'/u)
      return mul(e, add(mul(derivative(v, var), call(Func::Log, u)), div(mul(v, derivative(u, var)), u)));
    }
    case Op::Call: {
      const NodePtr& u = e->lhs;
      const NodePtr du = derivative(u, var);
      switch (e->func) {
        case Func::Sin: return mul(call(Func::Cos, u), du);
        case Func::Cos: return neg(mul(call(Func::Sin, u), du));
        case Func::Tan: return div(du, binary(Op::Pow, call(Func::Cos, u), number(2)));
        case Func::Sinh: return mul(call(Func::Cosh, u), du);
        case Func::Cosh: return mul(call(Func::Sinh, u), du);
        case Func::Tanh: return mul(sub(number(1), binary(Op::Pow, call(Func::Tanh, u), number(2))), du);
        case Func::Exp: return mul(e, du);
        case Func::Log: return div(du, u);
        case Func::Sqrt: return div(du, mul(number(2), e));
      }
    }
  }
  return number(0);
}

// ---------------------------------------------------------------------------
// compiled evaluation: a postfix program over an operand stack

class Program {
 public:
  Program() = default;

  Program(const NodePtr& root, std::span<const std::string> names) {
    emit(root, names);
    int depth = 0;
    for (const auto& in : code_) {
      depth += (in.op == Op::Number || in.op == Op::Variable) ? 1
               : (in.op == Op::Neg || in.op == Op::Call)      ? 0
                                                              : -1;
      max_depth_ = std::max(max_depth_, depth);
    }
  }

  double operator()(std::span<const double> vars) const {
    constexpr int kInline = 64;
    double inline_stack[kInline];
    std::vector<double> heap;
    double* st = inline_stack;
    if (max_depth_ > kInline) {
      heap.resize(max_depth_);
      st = heap.data();
    }
    int sp = 0;
    for (const auto& in : code_) {
      switch (in.op) {
        case Op::Number: st[sp++] = in.value; break;
        case Op::Variable: st[sp++] = vars[in.index]; break;
        case Op::Neg: st[sp - 1] = -st[sp - 1]; break;
        case Op::Add: --sp; st[sp - 1] += st[sp]; break;
        case Op::Sub: --sp; st[sp - 1] -= st[sp]; break;
        case Op::Mul: --sp; st[sp - 1] *= st[sp]; break;
        case Op::Div: --sp; st[sp - 1] /= st[sp]; break;
        case Op::Pow: --sp; st[sp - 1] = power(st[sp - 1], st[sp]); break;
        case Op::Call: st[sp - 1] = apply(in.func, st[sp - 1]); break;
      }
    }
    return st[0];
  }

 private:
  struct Instr {
    Op op;
    double value;
    int index;
    Func func;
  };

  static double power(double b, double e) {
    if (e == 2.0) return b * b;
    return std::pow(b, e);
  }

  static double apply(Func f, double v) {
    switch (f) {
      case Func::Sin: return std::sin(v);
      case Func::Cos: return std::cos(v);
      case Func::Tan: return std::tan(v);
      case Func::Sinh: return std::sinh(v);
      case Func::Cosh: return std::cosh(v);
      case Func::Tanh: return std::tanh(v);
      case Func::Exp: return std::exp(v);
      case Func::Log: return std::log(v);
      case Func::Sqrt: return std::sqrt(v);
    }
    return v;
  }

  void emit(const NodePtr& e, std::span<const std::string> names) {
    switch (e->op) {
      case Op::Number: code_.push_back({Op::Number, e->value, 0, Func::Sin}); return;
      case Op::Variable: {
        for (std::size_t i = 0; i < names.size(); ++i)
          if (names[i] == e->name) {
            code_.push_back({Op::Variable, 0.0, static_cast<int>(i), Func::Sin});
            return;
          }
        std::string known;
        for (const auto& n : names) known += (known.empty() ? "" : ", ") + n;
        throw Error(ErrorKind::UnknownIdentifier, "'" + e->name + "' (known: " + known + ")");
      }
      case Op::Neg: emit(e->lhs, names); code_.push_back({Op::Neg, 0.0, 0, Func::Sin}); return;
      case Op::Call: emit(e->lhs, names); code_.push_back({Op::Call, 0.0, 0, e->func}); return;
      default:
        emit(e->lhs, names);
        emit(e->rhs, names);
        code_.push_back({e->op, 0.0, 0, Func::Sin});
    }
  }

  std::vector<Instr> code_;
  int max_depth_ = 0;
};

}  // namespace mixedcurv::expr

namespace mixedcurv {

/// A parsed expression together with its source text.
class WarpExpression {
 public:
  WarpExpression() = default;
  explicit WarpExpression(std::string src) : source_(std::move(src)), root_(expr::parse(source_)) {}
  WarpExpression(std::string src, expr::NodePtr root) : source_(std::move(src)), root_(std::move(root)) {}

  static WarpExpression from_ast(expr::NodePtr root) {
    std::string s = expr::to_string(root);
    return WarpExpression(std::move(s), std::move(root));
  }

  const std::string& source_text() const { return source_; }
  const expr::NodePtr& ast() const { return root_; }
  std::string canonical() const { return expr::to_string(root_); }

  std::vector<std::string> free_variables() const {
    std::set<std::string> vars;
    expr::collect_variables(root_, vars);
    return {vars.begin(), vars.end()};
  }

  /// Binds variables by position; throws UnknownIdentifier for unbound names.
  expr::Program compile(std::span<const std::string> names) const { return expr::Program(root_, names); }

  WarpExpression derivative(const std::string& var) const { return from_ast(expr::derivative(root_, var)); }

  /// One-shot evaluation with an explicit binding.
  double evaluate(std::span<const std::string> names, std::span<const double> values) const {
    return compile(names)(values);
  }

 private:
  std::string source_;
  expr::NodePtr root_;
};

}  // namespace mixedcurv

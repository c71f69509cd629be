#include "pareg/expr.hpp"

#include <cctype>
#include <cmath>
#include <cstdlib>
#include <numbers>

namespace pareg {

struct Expression::Node {
  enum class Kind { number, variable, radius, negate, add, sub, mul, div, pow, call };
  Kind kind = Kind::number;
  double value = 0.0;
  int var = 0;
  std::string fn;
  std::vector<std::shared_ptr<const Node>> args;
};

namespace {

using NodePtr = std::shared_ptr<const Expression::Node>;
using Kind = Expression::Node::Kind;

struct FunctionInfo {
  const char* name;
  int arity;
};

constexpr FunctionInfo kFunctions[] = {
    {"sin", 1},  {"cos", 1},  {"tan", 1},  {"exp", 1},   {"log", 1},   {"sqrt", 1}, {"abs", 1}, {"tanh", 1},
    {"sinh", 1}, {"cosh", 1}, {"atan", 1}, {"atan2", 2}, {"pow", 2},   {"min", 2},  {"max", 2},
};

NodePtr make(Kind k, std::vector<NodePtr> args = {}) {
  auto n = std::make_shared<Expression::Node>();
  n->kind = k;
  n->args = std::move(args);
  return n;
}

class Parser {
 public:
  explicit Parser(const std::string& s) : s_(s) {}

  NodePtr parse() {
    NodePtr e = expr();
    skip();
    if (pos_ != s_.size()) fail("unexpected '" + std::string(1, s_[pos_]) + "'");
    return e;
  }

 private:
  [[noreturn]] void fail(const std::string& what) const {
    throw InputError("expression '" + s_ + "': " + what + " at position " + std::to_string(pos_));
  }

  void skip() {
    while (pos_ < s_.size() && std::isspace(static_cast<unsigned char>(s_[pos_]))) ++pos_;
  }

  bool eat(char c) {
    skip();
    if (pos_ < s_.size() && s_[pos_] == c) {
      ++pos_;
      return true;
    }
    return false;
  }

  NodePtr expr() {
    NodePtr lhs = term();
    for (;;) {
      if (eat('+')) {
        lhs = make(Kind::add, {lhs, term()});
      } else if (eat('-')) {
        lhs = make(Kind::sub, {lhs, term()});
      } else {
        return lhs;
      }
    }
  }

  NodePtr term() {
    NodePtr lhs = unary();
    for (;;) {
      if (eat('*')) {
        lhs = make(Kind::mul, {lhs, unary()});
      } else if (eat('/')) {
        lhs = make(Kind::div, {lhs, unary()});
      } else {
        return lhs;
      }
    }
  }

  NodePtr unary() {
    if (eat('-')) return make(Kind::negate, {unary()});
    if (eat('+')) return unary();
    return power();
  }

  NodePtr power() {
    NodePtr base = atom();
    if (eat('^')) return make(Kind::pow, {base, unary()});
    return base;
  }

  NodePtr atom() {
    skip();
    if (pos_ >= s_.size()) fail("unexpected end");
    const char c = s_[pos_];
    if (eat('(')) {
      NodePtr e = expr();
      if (!eat(')')) fail("expected ')'");
      return e;
    }
    if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') return number();
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') return name();
    fail("unexpected '" + std::string(1, c) + "'");
  }

  NodePtr number() {
    const char* begin = s_.c_str() + pos_;
    char* end = nullptr;
    const double v = std::strtod(begin, &end);
    if (end == begin) fail("malformed number");
    pos_ += static_cast<std::size_t>(end - begin);
    auto n = std::make_shared<Expression::Node>();
    n->value = v;
    return n;
  }

  NodePtr name() {
    const std::size_t start = pos_;
    while (pos_ < s_.size() && (std::isalnum(static_cast<unsigned char>(s_[pos_])) || s_[pos_] == '_')) ++pos_;
    const std::string id = s_.substr(start, pos_ - start);
    skip();
    if (pos_ < s_.size() && s_[pos_] == '(') {
      ++pos_;
      for (const auto& f : kFunctions) {
        if (id != f.name) continue;
        std::vector<NodePtr> args{expr()};
        while (eat(',')) args.push_back(expr());
        if (!eat(')')) fail("expected ')' after arguments of " + id);
        if (static_cast<int>(args.size()) != f.arity) {
          fail(id + " takes " + std::to_string(f.arity) + " argument(s)");
        }
        auto n = std::make_shared<Expression::Node>();
        n->kind = Kind::call;
        n->fn = id;
        n->args = std::move(args);
        return n;
      }
      pos_ = start;
      fail("unknown function '" + id + "'");
    }
    auto n = std::make_shared<Expression::Node>();
    if (id == "x1" || id == "x") {
      n->kind = Kind::variable;
      n->var = 0;
    } else if (id == "x2" || id == "y") {
      n->kind = Kind::variable;
      n->var = 1;
    } else if (id == "x3" || id == "z") {
      n->kind = Kind::variable;
      n->var = 2;
    } else if (id == "r") {
      n->kind = Kind::radius;
    } else if (id == "pi") {
      n->value = std::numbers::pi;
    } else if (id == "e") {
      n->value = std::numbers::e;
    } else {
      pos_ = start;
      fail("unknown name '" + id + "'");
    }
    return n;
  }

  const std::string& s_;
  std::size_t pos_ = 0;
};

double eval(const Expression::Node& n, const Point& x) {
  auto arg = [&](std::size_t i) { return eval(*n.args[i], x); };
  switch (n.kind) {
    case Kind::number:
      return n.value;
    case Kind::variable:
      return x[static_cast<std::size_t>(n.var)];
    case Kind::radius:
      return std::sqrt(x[0] * x[0] + x[1] * x[1] + x[2] * x[2]);
    case Kind::negate:
      return -arg(0);
    case Kind::add:
      return arg(0) + arg(1);
    case Kind::sub:
      return arg(0) - arg(1);
    case Kind::mul:
      return arg(0) * arg(1);
    case Kind::div:
      return arg(0) / arg(1);
    case Kind::pow:
      return std::pow(arg(0), arg(1));
    case Kind::call:
      break;
  }
  const std::string& f = n.fn;
  if (f == "sin") return std::sin(arg(0));
  if (f == "cos") return std::cos(arg(0));
  if (f == "tan") return std::tan(arg(0));
  if (f == "exp") return std::exp(arg(0));
  if (f == "log") return std::log(arg(0));
  if (f == "sqrt") return std::sqrt(arg(0));
  if (f == "abs") return std::abs(arg(0));
  if (f == "tanh") return std::tanh(arg(0));
  if (f == "sinh") return std::sinh(arg(0));
  if (f == "cosh") return std::cosh(arg(0));
  if (f == "atan") return std::atan(arg(0));
  if (f == "atan2") return std::atan2(arg(0), arg(1));
  if (f == "pow") return std::pow(arg(0), arg(1));
  if (f == "min") return std::min(arg(0), arg(1));
  return std::max(arg(0), arg(1));
}

}  // namespace

Expression::Expression(const std::string& text) : text_(text) { root_ = Parser(text_).parse(); }

double Expression::operator()(const Point& x) const { return eval(*root_, x); }

}  // namespace pareg

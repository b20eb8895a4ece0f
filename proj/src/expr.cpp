#include "mreg/io/expr.hpp"

#include "mreg/errors.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdlib>
#include <numbers>
#include <sstream>
#include <vector>

namespace mreg::io {

struct Expression::Node {
  enum class Kind { Number, Var, Neg, Add, Sub, Mul, Div, Pow, Call };
  Kind kind = Kind::Number;
  double value = 0;
  char var = 0;
  std::string fn;
  std::vector<std::shared_ptr<const Node>> args;
};

namespace {

using NodePtr = std::shared_ptr<const Expression::Node>;
using Kind = Expression::Node::Kind;

NodePtr make(Kind kind, std::vector<NodePtr> args = {}) {
  auto n = std::make_shared<Expression::Node>();
  n->kind = kind;
  n->args = std::move(args);
  return n;
}

class Parser {
 public:
  explicit Parser(const std::string& s) : s_(s) {}

  NodePtr parse() {
    NodePtr e = expression();
    skip();
    if (pos_ != s_.size()) fail("unexpected '" + std::string(1, s_[pos_]) + "'");
    return e;
  }

 private:
  [[noreturn]] void fail(const std::string& what) const {
    std::ostringstream os;
    os << "expression \"" << s_ << "\": " << what << " at column " << pos_ + 1;
    throw ConfigError(os.str());
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

  // expression := term (('+'|'-') term)*
  NodePtr expression() {
    NodePtr lhs = term();
    while (true) {
      if (eat('+')) lhs = make(Kind::Add, {lhs, term()});
      else if (eat('-')) lhs = make(Kind::Sub, {lhs, term()});
      else return lhs;
    }
  }

  // term := unary (('*'|'/') unary)*
  NodePtr term() {
    NodePtr lhs = unary();
    while (true) {
      if (eat('*')) lhs = make(Kind::Mul, {lhs, unary()});
      else if (eat('/')) lhs = make(Kind::Div, {lhs, unary()});
      else return lhs;
    }
  }

  // unary := ('-'|'+') unary | power
  NodePtr unary() {
    if (eat('-')) return make(Kind::Neg, {unary()});
    if (eat('+')) return unary();
    return power();
  }

  // power := primary ('^' unary)?   (right associative, binds tighter than unary minus on the left)
  NodePtr power() {
    NodePtr base = primary();
    if (eat('^')) return make(Kind::Pow, {base, unary()});
    return base;
  }

  NodePtr primary() {
    skip();
    if (pos_ >= s_.size()) fail("unexpected end of input");
    const char c = s_[pos_];
    if (c == '(') {
      ++pos_;
      NodePtr e = expression();
      if (!eat(')')) fail("expected ')'");
      return e;
    }
    if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') return number();
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') return identifier();
    fail("unexpected '" + std::string(1, c) + "'");
  }

  NodePtr number() {
    const char* begin = s_.c_str() + pos_;
    char* end = nullptr;
    const double v = std::strtod(begin, &end);
    if (end == begin) fail("malformed number");
    pos_ += static_cast<std::size_t>(end - begin);
    auto n = std::make_shared<Expression::Node>();
    n->kind = Kind::Number;
    n->value = v;
    return n;
  }

  NodePtr identifier() {
    const std::size_t start = pos_;
    while (pos_ < s_.size() && (std::isalnum(static_cast<unsigned char>(s_[pos_])) || s_[pos_] == '_')) ++pos_;
    const std::string name = s_.substr(start, pos_ - start);
    if (name == "t" || name == "x" || name == "xi") {
      auto n = std::make_shared<Expression::Node>();
      n->kind = Kind::Var;
      n->var = name == "xi" ? 'z' : name[0];
      return n;
    }
    if (name == "pi") {
      auto n = std::make_shared<Expression::Node>();
      n->kind = Kind::Number;
      n->value = std::numbers::pi;
      return n;
    }
    static const std::vector<std::pair<std::string, int>> functions = {
        {"sin", 1}, {"cos", 1}, {"exp", 1}, {"sqrt", 1}, {"abs", 1}, {"clip", 3}, {"min", 2}, {"max", 2}};
    const auto it = std::find_if(functions.begin(), functions.end(), [&](const auto& f) { return f.first == name; });
    if (it == functions.end()) {
      pos_ = start;
      fail("unknown identifier '" + name + "'");
    }
    if (!eat('(')) fail("expected '(' after " + name);
    std::vector<NodePtr> args{expression()};
    while (eat(',')) args.push_back(expression());
    if (!eat(')')) fail("expected ')' to close " + name);
    if (static_cast<int>(args.size()) != it->second) {
      std::ostringstream os;
      os << name << " takes " << it->second << " argument(s), got " << args.size();
      fail(os.str());
    }
    auto n = std::make_shared<Expression::Node>();
    n->kind = Kind::Call;
    n->fn = name;
    n->args = std::move(args);
    return n;
  }

  const std::string& s_;
  std::size_t pos_ = 0;
};

double eval(const Expression::Node& n, const Variables& v) {
  switch (n.kind) {
    case Kind::Number: return n.value;
    case Kind::Var: return n.var == 't' ? v.t : n.var == 'x' ? v.x : v.xi;
    case Kind::Neg: return -eval(*n.args[0], v);
    case Kind::Add: return eval(*n.args[0], v) + eval(*n.args[1], v);
    case Kind::Sub: return eval(*n.args[0], v) - eval(*n.args[1], v);
    case Kind::Mul: return eval(*n.args[0], v) * eval(*n.args[1], v);
    case Kind::Div: return eval(*n.args[0], v) / eval(*n.args[1], v);
    case Kind::Pow: return std::pow(eval(*n.args[0], v), eval(*n.args[1], v));
    case Kind::Call: break;
  }
  const double a = eval(*n.args[0], v);
  if (n.fn == "sin") return std::sin(a);
  if (n.fn == "cos") return std::cos(a);
  if (n.fn == "exp") return std::exp(a);
  if (n.fn == "sqrt") return std::sqrt(a);
  if (n.fn == "abs") return std::abs(a);
  const double b = eval(*n.args[1], v);
  if (n.fn == "min") return std::min(a, b);
  if (n.fn == "max") return std::max(a, b);
  return std::clamp(a, b, std::max(b, eval(*n.args[2], v)));  // clip
}

bool uses_var(const Expression::Node& n, char var) {
  if (n.kind == Kind::Var) return n.var == var;
  return std::any_of(n.args.begin(), n.args.end(), [var](const auto& a) { return uses_var(*a, var); });
}

}  // namespace

Expression Expression::parse(const std::string& text) {
  Expression e;
  e.root_ = Parser(text).parse();
  e.text_ = text;
  return e;
}

Expression Expression::constant(double value) {
  Expression e;
  auto n = std::make_shared<Node>();
  n->kind = Node::Kind::Number;
  n->value = value;
  e.root_ = n;
  std::ostringstream os;
  os.precision(17);
  os << value;
  e.text_ = os.str();
  return e;
}

double Expression::operator()(const Variables& v) const { return eval(*root_, v); }

bool Expression::is_constant() const { return !uses('t') && !uses('x') && !uses('z'); }

bool Expression::uses(char variable) const { return uses_var(*root_, variable); }

}  // namespace mreg::io

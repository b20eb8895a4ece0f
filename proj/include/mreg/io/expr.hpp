#pragma once

#include <memory>
#include <string>

namespace mreg::io {

// Values of the free variables: time t, position x, state value xi.
struct Variables {
  double t = 0;
  double x = 0;
  double xi = 0;
};

// Arithmetic expression over t, x, xi with + - * / ^, unary minus, the
// constant pi and the functions sin cos exp sqrt abs clip(v,lo,hi) min max.
class Expression {
 public:
  struct Node;

  static Expression parse(const std::string& text);
  static Expression constant(double value);

  double operator()(const Variables& v) const;
  double operator()(double t, double x = 0, double xi = 0) const { return (*this)(Variables{t, x, xi}); }

  const std::string& text() const { return text_; }
  bool is_constant() const;
  bool uses(char variable) const;  // 't', 'x' or 'z' (xi)

 private:
  std::shared_ptr<const Node> root_;
  std::string text_;
};

}  // namespace mreg::io

#include "lsopt/expr.hpp"

#include <cctype>
#include <cmath>
#include <memory>
#include <numbers>
#include <stdexcept>

namespace lsopt {

namespace {

struct Node {
  virtual ~Node() = default;
  virtual double eval(double x, double y) const = 0;
};
using NodePtr = std::unique_ptr<Node>;

struct Constant : Node {
  double v;
  explicit Constant(double v) : v(v) {}
  double eval(double, double) const override { return v; }
};
struct Variable : Node {
  bool is_x;
  explicit Variable(bool is_x) : is_x(is_x) {}
  double eval(double x, double y) const override { return is_x ? x : y; }
};
struct Unary : Node {
  double (*fn)(double);
  NodePtr arg;
  Unary(double (*fn)(double), NodePtr arg) : fn(fn), arg(std::move(arg)) {}
  double eval(double x, double y) const override { return fn(arg->eval(x, y)); }
};
struct Binary : Node {
  char op;
  NodePtr lhs, rhs;
  Binary(char op, NodePtr l, NodePtr r) : op(op), lhs(std::move(l)), rhs(std::move(r)) {}
  double eval(double x, double y) const override {
    const double a = lhs->eval(x, y), b = rhs->eval(x, y);
    switch (op) {
      case '+': return a + b;
      case '-': return a - b;
      case '*': return a * b;
      case '/': return a / b;
      default: return std::pow(a, b);
    }
  }
};

class Parser {
 public:
  explicit Parser(const std::string& s) : s_(s) {}

  NodePtr parse() {
    NodePtr e = expression();
    skip_ws();
    if (pos_ != s_.size())
      throw std::invalid_argument("expression: trailing input at '" +
                                  s_.substr(pos_) + "'");
    return e;
  }

 private:
  const std::string& s_;
  size_t pos_ = 0;

  void skip_ws() {
    while (pos_ < s_.size() && std::isspace(static_cast<unsigned char>(s_[pos_]))) ++pos_;
  }
  bool consume(char c) {
    skip_ws();
    if (pos_ < s_.size() && s_[pos_] == c) {
      ++pos_;
      return true;
    }
    return false;
  }
  char peek() {
    skip_ws();
    return pos_ < s_.size() ? s_[pos_] : '\0';
  }

  NodePtr expression() {
    NodePtr lhs = term();
    while (true) {
      if (consume('+'))
        lhs = std::make_unique<Binary>('+', std::move(lhs), term());
      else if (consume('-'))
        lhs = std::make_unique<Binary>('-', std::move(lhs), term());
      else
        return lhs;
    }
  }
  NodePtr term() {
    NodePtr lhs = factor();
    while (true) {
      if (consume('*'))
        lhs = std::make_unique<Binary>('*', std::move(lhs), factor());
      else if (consume('/'))
        lhs = std::make_unique<Binary>('/', std::move(lhs), factor());
      else
        return lhs;
    }
  }
  NodePtr factor() {
    NodePtr base = unary();
    if (consume('^'))
      return std::make_unique<Binary>('^', std::move(base), factor());  // right assoc
    return base;
  }
  NodePtr unary() {
    if (consume('-'))
      return std::make_unique<Binary>('-', std::make_unique<Constant>(0.0), unary());
    consume('+');
    return primary();
  }
  NodePtr primary() {
    skip_ws();
    if (pos_ >= s_.size()) throw std::invalid_argument("expression: unexpected end");
    const char c = s_[pos_];
    if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') {
      size_t used = 0;
      double v;
      try {
        v = std::stod(s_.substr(pos_), &used);
      } catch (const std::exception&) {
        throw std::invalid_argument("expression: bad number");
      }
      pos_ += used;
      return std::make_unique<Constant>(v);
    }
    if (c == '(') {
      ++pos_;
      NodePtr e = expression();
      if (!consume(')')) throw std::invalid_argument("expression: missing ')'");
      return e;
    }
    if (std::isalpha(static_cast<unsigned char>(c))) {
      size_t end = pos_;
      while (end < s_.size() && std::isalpha(static_cast<unsigned char>(s_[end]))) ++end;
      const std::string name = s_.substr(pos_, end - pos_);
      pos_ = end;
      if (name == "x") return std::make_unique<Variable>(true);
      if (name == "y") return std::make_unique<Variable>(false);
      if (name == "pi") return std::make_unique<Constant>(std::numbers::pi);
      double (*fn)(double) = nullptr;
      if (name == "sin") fn = std::sin;
      else if (name == "cos") fn = std::cos;
      else if (name == "tan") fn = std::tan;
      else if (name == "exp") fn = std::exp;
      else if (name == "log") fn = std::log;
      else if (name == "sqrt") fn = std::sqrt;
      else if (name == "abs") fn = std::fabs;
      if (!fn) throw std::invalid_argument("expression: unknown identifier '" + name + "'");
      if (!consume('(')) throw std::invalid_argument("expression: expected '(' after " + name);
      NodePtr arg = expression();
      if (!consume(')')) throw std::invalid_argument("expression: missing ')'");
      return std::make_unique<Unary>(fn, std::move(arg));
    }
    throw std::invalid_argument(std::string("expression: unexpected character '") + c + "'");
  }
};

}  // namespace

std::function<double(const Vec2&)> compile_expression(const std::string& text) {
  Parser parser(text);
  std::shared_ptr<Node> root{parser.parse().release()};
  return [root](const Vec2& p) { return root->eval(p.x(), p.y()); };
}

}  // namespace lsopt

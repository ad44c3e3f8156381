#include "spotune/expr.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdlib>
#include <variant>

#include "spotune/errors.hpp"

namespace spotune {

struct Expression::Node {
  enum class Kind { Number, Variable, Negate, Add, Sub, Mul, Div, Max, Min, Round };
  Kind kind;
  double value = 0.0;
  std::string name;
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
  explicit Parser(std::string_view text) : text_(text) {}

  NodePtr parse_all(std::vector<std::string>& identifiers) {
    identifiers_ = &identifiers;
    auto node = parse_sum();
    skip_ws();
    if (pos_ != text_.size()) fail("unexpected trailing input");
    return node;
  }

 private:
  [[noreturn]] void fail(const std::string& msg) const {
    throw ConfigError("expression '" + std::string(text_) + "' at offset " +
                      std::to_string(pos_) + ": " + msg);
  }

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
    if (!accept(c)) fail(std::string("expected '") + c + "'");
  }

  NodePtr parse_sum() {
    auto lhs = parse_product();
    for (;;) {
      if (accept('+')) {
        lhs = make(Kind::Add, {lhs, parse_product()});
      } else if (accept('-')) {
        lhs = make(Kind::Sub, {lhs, parse_product()});
      } else {
        return lhs;
      }
    }
  }

  NodePtr parse_product() {
    auto lhs = parse_unary();
    for (;;) {
      if (accept('*')) {
        lhs = make(Kind::Mul, {lhs, parse_unary()});
      } else if (accept('/')) {
        lhs = make(Kind::Div, {lhs, parse_unary()});
      } else {
        return lhs;
      }
    }
  }

  NodePtr parse_unary() {
    if (accept('-')) return make(Kind::Negate, {parse_unary()});
    if (accept('+')) return parse_unary();
    return parse_primary();
  }

  NodePtr parse_primary() {
    skip_ws();
    if (pos_ >= text_.size()) fail("unexpected end of input");
    const char c = text_[pos_];
    if (c == '(') {
      ++pos_;
      auto inner = parse_sum();
      expect(')');
      return inner;
    }
    if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') return parse_number();
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') return parse_name();
    fail(std::string("unexpected character '") + c + "'");
  }

  NodePtr parse_number() {
    const std::string rest(text_.substr(pos_));
    char* end = nullptr;
    const double v = std::strtod(rest.c_str(), &end);
    if (end == rest.c_str()) fail("malformed number");
    pos_ += static_cast<std::size_t>(end - rest.c_str());
    auto n = std::make_shared<Expression::Node>();
    n->kind = Kind::Number;
    n->value = v;
    return n;
  }

  NodePtr parse_name() {
    const std::size_t start = pos_;
    while (pos_ < text_.size() &&
           (std::isalnum(static_cast<unsigned char>(text_[pos_])) || text_[pos_] == '_' ||
            text_[pos_] == '.')) {
      ++pos_;
    }
    std::string name(text_.substr(start, pos_ - start));
    if (accept('(')) {
      std::vector<NodePtr> args{parse_sum()};
      while (accept(',')) args.push_back(parse_sum());
      expect(')');
      Kind kind;
      std::size_t arity;
      if (name == "max") {
        kind = Kind::Max;
        arity = 2;
      } else if (name == "min") {
        kind = Kind::Min;
        arity = 2;
      } else if (name == "round") {
        kind = Kind::Round;
        arity = 1;
      } else {
        fail("unknown function '" + name + "'");
      }
      if (args.size() != arity) fail("wrong number of arguments to '" + name + "'");
      return make(kind, std::move(args));
    }
    if (std::find(identifiers_->begin(), identifiers_->end(), name) == identifiers_->end()) {
      identifiers_->push_back(name);
    }
    auto n = std::make_shared<Expression::Node>();
    n->kind = Kind::Variable;
    n->name = std::move(name);
    return n;
  }

  std::string_view text_;
  std::size_t pos_ = 0;
  std::vector<std::string>* identifiers_ = nullptr;
};

double eval(const Expression::Node& n, const Expression::Lookup& lookup) {
  auto arg = [&](std::size_t i) { return eval(*n.args[i], lookup); };
  switch (n.kind) {
    case Kind::Number: return n.value;
    case Kind::Variable: return lookup(n.name);
    case Kind::Negate: return -arg(0);
    case Kind::Add: return arg(0) + arg(1);
    case Kind::Sub: return arg(0) - arg(1);
    case Kind::Mul: return arg(0) * arg(1);
    case Kind::Div: return arg(0) / arg(1);
    case Kind::Max: return std::max(arg(0), arg(1));
    case Kind::Min: return std::min(arg(0), arg(1));
    case Kind::Round: return std::nearbyint(arg(0));
  }
  return 0.0;
}

}  // namespace

Expression Expression::parse(std::string_view text) {
  Expression e;
  e.text_ = std::string(text);
  e.root_ = Parser(text).parse_all(e.identifiers_);
  return e;
}

double Expression::evaluate(const Lookup& lookup) const { return eval(*root_, lookup); }

}  // namespace spotune

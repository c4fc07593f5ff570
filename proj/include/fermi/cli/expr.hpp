#pragma once

// Arithmetic expressions over one free variable.
//
//   expr    := term (('+' | '-') term)*
//   term    := unary (('*' | '/') unary)*
//   unary   := '-' unary | power
//   power   := primary ('^' unary)?          right associative, binds tighter than '-'
//   primary := number | name | name '(' expr ')' | '(' expr ')'
//
// Names are the declared variables, the constants pi and e, any extra bound
// constants (such as L), and the functions sin cos tan exp log sqrt abs.

#include <cctype>
#include <charconv>
#include <cmath>
#include <cstddef>
#include <map>
#include <memory>
#include <numbers>
#include <set>
#include <string>
#include <string_view>
#include <system_error>

#include "fermi/error.hpp"

namespace fermi::cli {

inline std::string format_number(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

enum class Func { sin, cos, tan, exp, log, sqrt, abs };

inline const std::map<std::string_view, Func>& function_table() {
  static const std::map<std::string_view, Func> table{{"sin", Func::sin}, {"cos", Func::cos},   {"tan", Func::tan},
                                                      {"exp", Func::exp}, {"log", Func::log},   {"sqrt", Func::sqrt},
                                                      {"abs", Func::abs}};
  return table;
}

inline std::string_view func_name(Func f) {
  for (const auto& [name, g] : function_table())
    if (g == f) return name;
  return "?";
}

struct Node {
  enum class Kind { number, variable, constant, unary_minus, binary, call };
  Kind kind = Kind::number;
  double value = 0.0;   // number, or the bound value of a constant
  std::string name;     // variable / constant
  char op = 0;          // binary
  Func func = Func::sin;
  std::unique_ptr<Node> lhs, rhs;  // unary and call use lhs
};

class Expr {
 public:
  Expr() = default;
  explicit Expr(std::unique_ptr<Node> root) : root_(std::move(root)) {}

  /// Evaluate with the free variable (whatever its name) set to x.
  double operator()(double x) const { return eval(*root_, x); }

  std::string to_string() const { return print(*root_); }
  const Node& root() const { return *root_; }

 private:
  static double eval(const Node& n, double x) {
    switch (n.kind) {
      case Node::Kind::number:
      case Node::Kind::constant: return n.value;
      case Node::Kind::variable: return x;
      case Node::Kind::unary_minus: return -eval(*n.lhs, x);
      case Node::Kind::binary: {
        const double a = eval(*n.lhs, x), b = eval(*n.rhs, x);
        switch (n.op) {
          case '+': return a + b;
          case '-': return a - b;
          case '*': return a * b;
          case '/': return a / b;
          default: return std::pow(a, b);
        }
      }
      case Node::Kind::call: {
        const double a = eval(*n.lhs, x);
        switch (n.func) {
          case Func::sin: return std::sin(a);
          case Func::cos: return std::cos(a);
          case Func::tan: return std::tan(a);
          case Func::exp: return std::exp(a);
          case Func::log: return std::log(a);
          case Func::sqrt: return std::sqrt(a);
          case Func::abs: return std::abs(a);
        }
      }
    }
    return 0.0;
  }

  // Fully parenthesised so that printing a reparsed tree gives the same text.
  static std::string print(const Node& n) {
    switch (n.kind) {
      case Node::Kind::number: return format_number(n.value);
      case Node::Kind::variable:
      case Node::Kind::constant: return n.name;
      case Node::Kind::unary_minus: return "(-" + print(*n.lhs) + ")";
      case Node::Kind::binary: return "(" + print(*n.lhs) + " " + n.op + " " + print(*n.rhs) + ")";
      case Node::Kind::call: return std::string(func_name(n.func)) + "(" + print(*n.lhs) + ")";
    }
    return {};
  }

  std::shared_ptr<const Node> root_;
};

namespace detail {

class Parser {
 public:
  Parser(std::string_view text, const std::set<std::string>& variables, const std::map<std::string, double>& constants)
      : text_(text), vars_(variables), consts_(constants) {}

  std::unique_ptr<Node> parse() {
    auto n = expr();
    skip();
    if (pos_ < text_.size()) fail("unexpected '" + std::string(1, text_[pos_]) + "', expected operator or end of input");
    return n;
  }

 private:
  [[noreturn]] void fail(const std::string& msg) const { throw ParseError(pos_, msg); }

  void skip() {
    while (pos_ < text_.size() && (text_[pos_] == ' ' || text_[pos_] == '\t' || text_[pos_] == '\n' || text_[pos_] == '\r'))
      ++pos_;
  }

  bool accept(char c) {
    skip();
    if (pos_ < text_.size() && text_[pos_] == c) {
      ++pos_;
      return true;
    }
    return false;
  }

  static std::unique_ptr<Node> binary(char op, std::unique_ptr<Node> a, std::unique_ptr<Node> b) {
    auto n = std::make_unique<Node>();
    n->kind = Node::Kind::binary;
    n->op = op;
    n->lhs = std::move(a);
    n->rhs = std::move(b);
    return n;
  }

  std::unique_ptr<Node> expr() {
    auto lhs = term();
    for (;;) {
      if (accept('+')) lhs = binary('+', std::move(lhs), term());
      else if (accept('-')) lhs = binary('-', std::move(lhs), term());
      else return lhs;
    }
  }

  std::unique_ptr<Node> term() {
    auto lhs = unary();
    for (;;) {
      if (accept('*')) lhs = binary('*', std::move(lhs), unary());
      else if (accept('/')) lhs = binary('/', std::move(lhs), unary());
      else return lhs;
    }
  }

  std::unique_ptr<Node> unary() {
    if (accept('-')) {
      auto n = std::make_unique<Node>();
      n->kind = Node::Kind::unary_minus;
      n->lhs = unary();
      return n;
    }
    return power();
  }

  std::unique_ptr<Node> power() {
    auto base = primary();
    if (accept('^')) return binary('^', std::move(base), unary());
    return base;
  }

  std::unique_ptr<Node> primary() {
    skip();
    if (pos_ >= text_.size()) fail("unexpected end of input, expected number, name or '('");
    const char c = text_[pos_];
    if (c == '(') {
      ++pos_;
      auto n = expr();
      if (!accept(')')) fail("expected ')'");
      return n;
    }
    if ((c >= '0' && c <= '9') || c == '.') return number();
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') return name();
    fail("unexpected '" + std::string(1, c) + "', expected number, name or '('");
  }

  std::unique_ptr<Node> number() {
    const std::size_t start = pos_;
    auto digits = [&] {
      std::size_t k = 0;
      while (pos_ < text_.size() && text_[pos_] >= '0' && text_[pos_] <= '9') ++pos_, ++k;
      return k;
    };
    std::size_t nd = digits();
    if (pos_ < text_.size() && text_[pos_] == '.') {
      ++pos_;
      nd += digits();
    }
    if (nd == 0) {
      pos_ = start;
      fail("malformed number");
    }
    if (pos_ < text_.size() && (text_[pos_] == 'e' || text_[pos_] == 'E')) {
      const std::size_t mark = pos_;
      ++pos_;
      if (pos_ < text_.size() && (text_[pos_] == '+' || text_[pos_] == '-')) ++pos_;
      if (digits() == 0) pos_ = mark;  // the 'e' is not an exponent; leave it for the caller
    }
    double v = 0.0;
    const auto res = std::from_chars(text_.data() + start, text_.data() + pos_, v);
    if (res.ec != std::errc() || res.ptr != text_.data() + pos_) {
      pos_ = start;
      fail("malformed number");
    }
    auto n = std::make_unique<Node>();
    n->kind = Node::Kind::number;
    n->value = v;
    return n;
  }

  std::unique_ptr<Node> name() {
    const std::size_t start = pos_;
    while (pos_ < text_.size() && (std::isalnum(static_cast<unsigned char>(text_[pos_])) || text_[pos_] == '_')) ++pos_;
    const std::string id(text_.substr(start, pos_ - start));
    auto n = std::make_unique<Node>();
    if (auto f = function_table().find(id); f != function_table().end()) {
      if (!accept('(')) fail("expected '(' after " + id);
      n->kind = Node::Kind::call;
      n->func = f->second;
      n->lhs = expr();
      if (!accept(')')) fail("expected ')'");
      return n;
    }
    if (vars_.count(id)) {
      n->kind = Node::Kind::variable;
      n->name = id;
      return n;
    }
    if (auto c = consts_.find(id); c != consts_.end()) {
      n->kind = Node::Kind::constant;
      n->name = id;
      n->value = c->second;
      return n;
    }
    if (id == "pi" || id == "e") {
      n->kind = Node::Kind::constant;
      n->name = id;
      n->value = id == "pi" ? std::numbers::pi : std::numbers::e;
      return n;
    }
    pos_ = start;
    fail("unknown identifier '" + id + "'");
  }

  std::string_view text_;
  const std::set<std::string>& vars_;
  const std::map<std::string, double>& consts_;
  std::size_t pos_ = 0;
};

}  // namespace detail

inline Expr parse_expression(std::string_view text, const std::set<std::string>& variables = {"s"},
                             const std::map<std::string, double>& constants = {}) {
  return Expr(detail::Parser(text, variables, constants).parse());
}

}  // namespace fermi::cli

/*
 * expression.cpp
 *
 *  Recursive-descent parser and tree-walking evaluator.
 */
#include "habs/expression.hpp"

#include <cctype>
#include <cmath>
#include <cstdio>
#include <map>
#include <numbers>
#include <optional>
#include <sstream>
#include <variant>

#include "habs/error.hpp"

namespace habs {

namespace {

struct ConstNode { double value; };
// which = -1 selects the own state, m >= 0 the m-th neighbor (0-based)
struct SymbolNode { int which; int coord; };
struct NegNode { std::shared_ptr<const ExprNode> arg; };
struct BinaryNode { char op; std::shared_ptr<const ExprNode> lhs, rhs; };
enum class Func { Sin, Cos, Exp, Sqrt, Abs };
struct FuncNode { Func fn; std::shared_ptr<const ExprNode> arg; };
struct NormTerm { int sign; int which; };
struct NormNode { std::vector<NormTerm> terms; };

}  // namespace

struct ExprNode {
  std::variant<ConstNode, SymbolNode, NegNode, BinaryNode, FuncNode, NormNode> v;
};

namespace {

using NodePtr = std::shared_ptr<const ExprNode>;

template <class T>
NodePtr make(T node) {
  return std::make_shared<const ExprNode>(ExprNode{std::move(node)});
}

std::string format_point(std::span<const double> xi, std::span<const double> xj) {
  std::ostringstream os;
  os.precision(17);
  os << "x_i=(";
  for (std::size_t k = 0; k < xi.size(); ++k) os << (k ? "," : "") << xi[k];
  os << ") x_j=(";
  for (std::size_t k = 0; k < xj.size(); ++k) os << (k ? "," : "") << xj[k];
  os << ")";
  return os.str();
}

struct Evaluator {
  std::span<const double> xi, xj;
  std::size_t n;

  double coord(int which, int c) const {
    return which < 0 ? xi[c] : xj[static_cast<std::size_t>(which) * n + c];
  }

  [[noreturn]] void domain(const char* what) const {
    throw Error(ErrorKind::Domain,
                std::string("expression domain error (") + what + ") at " + format_point(xi, xj));
  }

  double operator()(const ExprNode& node) const {
    return std::visit([this](const auto& nd) { return eval(nd); }, node.v);
  }

  double eval(const ConstNode& c) const { return c.value; }
  double eval(const SymbolNode& s) const { return coord(s.which, s.coord); }
  double eval(const NegNode& u) const { return -(*this)(*u.arg); }

  double eval(const BinaryNode& b) const {
    const double l = (*this)(*b.lhs);
    const double r = (*this)(*b.rhs);
    double out = 0.0;
    switch (b.op) {
      case '+': out = l + r; break;
      case '-': out = l - r; break;
      case '*': out = l * r; break;
      case '/':
        if (r == 0.0) domain("division by zero");
        out = l / r;
        break;
      case '^': out = std::pow(l, r); break;
    }
    if (!std::isfinite(out)) domain("non-finite result");
    return out;
  }

  double eval(const FuncNode& f) const {
    const double a = (*this)(*f.arg);
    switch (f.fn) {
      case Func::Sin: return std::sin(a);
      case Func::Cos: return std::cos(a);
      case Func::Exp: {
        const double e = std::exp(a);
        if (!std::isfinite(e)) domain("exp overflow");
        return e;
      }
      case Func::Sqrt:
        if (a < 0.0) domain("sqrt of negative");
        return std::sqrt(a);
      case Func::Abs: return std::abs(a);
    }
    return 0.0;
  }

  double eval(const NormNode& nn) const {
    double s = 0.0;
    for (std::size_t c = 0; c < n; ++c) {
      double acc = 0.0;
      for (const auto& t : nn.terms) acc += t.sign * coord(t.which, static_cast<int>(c));
      s += acc * acc;
    }
    return std::sqrt(s);
  }
};

std::string symbol_name(int which) {
  return which < 0 ? std::string("x_i") : "x_j" + std::to_string(which + 1);
}

struct Printer {
  std::string operator()(const ExprNode& node) const {
    return std::visit([this](const auto& nd) { return print(nd); }, node.v);
  }
  std::string print(const ConstNode& c) const {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", std::abs(c.value));
    return c.value < 0 || std::signbit(c.value) ? "(-" + std::string(buf) + ")" : std::string(buf);
  }
  std::string print(const SymbolNode& s) const {
    return symbol_name(s.which) + "[" + std::to_string(s.coord + 1) + "]";
  }
  std::string print(const NegNode& u) const { return "(-" + (*this)(*u.arg) + ")"; }
  std::string print(const BinaryNode& b) const {
    return "(" + (*this)(*b.lhs) + " " + b.op + " " + (*this)(*b.rhs) + ")";
  }
  std::string print(const FuncNode& f) const {
    static const char* names[] = {"sin", "cos", "exp", "sqrt", "abs"};
    return std::string(names[static_cast<int>(f.fn)]) + "(" + (*this)(*f.arg) + ")";
  }
  std::string print(const NormNode& nn) const {
    std::string out = "norm(";
    for (std::size_t k = 0; k < nn.terms.size(); ++k) {
      if (k > 0) out += nn.terms[k].sign > 0 ? " + " : " - ";
      else if (nn.terms[k].sign < 0) out += "-";
      out += symbol_name(nn.terms[k].which);
    }
    return out + ")";
  }
};

// ---------------------------------------------------------------- lexer

enum class Tok { Num, Ident, Plus, Minus, Star, Slash, Caret, LParen, RParen, LBracket, RBracket, Comma, End };

struct Token {
  Tok kind;
  std::string text;
  double number = 0.0;
  std::size_t pos = 0;
};

std::vector<Token> lex(std::string_view s) {
  std::vector<Token> out;
  std::size_t i = 0;
  while (i < s.size()) {
    const char c = s[i];
    if (std::isspace(static_cast<unsigned char>(c))) { ++i; continue; }
    const std::size_t start = i;
    if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') {
      std::size_t j = i;
      while (j < s.size() && (std::isdigit(static_cast<unsigned char>(s[j])) || s[j] == '.')) ++j;
      if (j < s.size() && (s[j] == 'e' || s[j] == 'E')) {
        std::size_t k = j + 1;
        if (k < s.size() && (s[k] == '+' || s[k] == '-')) ++k;
        if (k < s.size() && std::isdigit(static_cast<unsigned char>(s[k]))) {
          while (k < s.size() && std::isdigit(static_cast<unsigned char>(s[k]))) ++k;
          j = k;
        }
      }
      const std::string text(s.substr(i, j - i));
      std::size_t used = 0;
      double v = 0.0;
      try {
        v = std::stod(text, &used);
      } catch (const std::exception&) {
        used = 0;
      }
      if (used != text.size())
        throw Error(ErrorKind::Parse, "malformed number '" + text + "' at offset " + std::to_string(start));
      out.push_back({Tok::Num, text, v, start});
      i = j;
      continue;
    }
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
      std::size_t j = i;
      while (j < s.size() && (std::isalnum(static_cast<unsigned char>(s[j])) || s[j] == '_')) ++j;
      out.push_back({Tok::Ident, std::string(s.substr(i, j - i)), 0.0, start});
      i = j;
      continue;
    }
    Tok k;
    switch (c) {
      case '+': k = Tok::Plus; break;
      case '-': k = Tok::Minus; break;
      case '*': k = Tok::Star; break;
      case '/': k = Tok::Slash; break;
      case '^': k = Tok::Caret; break;
      case '(': k = Tok::LParen; break;
      case ')': k = Tok::RParen; break;
      case '[': k = Tok::LBracket; break;
      case ']': k = Tok::RBracket; break;
      case ',': k = Tok::Comma; break;
      default:
        throw Error(ErrorKind::Parse, std::string("unexpected character '") + c + "' at offset " +
                                          std::to_string(start));
    }
    out.push_back({k, std::string(1, c), 0.0, start});
    ++i;
  }
  out.push_back({Tok::End, "", 0.0, s.size()});
  return out;
}

// ---------------------------------------------------------------- parser

class Parser {
public:
  Parser(std::vector<Token> toks, const ExprContext& ctx) : toks_(std::move(toks)), ctx_(ctx) {}

  NodePtr parse() {
    NodePtr e = expr();
    if (peek().kind == Tok::RParen) fail("unbalanced parentheses: unexpected ')'");
    if (peek().kind != Tok::End) fail("unexpected token '" + peek().text + "'");
    return e;
  }

private:
  const Token& peek() const { return toks_[pos_]; }
  const Token& next() { return toks_[pos_++]; }
  bool accept(Tok k) {
    if (peek().kind != k) return false;
    ++pos_;
    return true;
  }

  [[noreturn]] void fail(const std::string& msg) const {
    throw Error(ErrorKind::Parse, msg + " at offset " + std::to_string(peek().pos));
  }

  void expect_close() {
    if (peek().kind == Tok::End) fail("unbalanced parentheses: missing ')'");
    if (peek().kind == Tok::Comma) fail("arity mismatch: function takes one argument");
    if (!accept(Tok::RParen)) fail("expected ')'");
  }

  NodePtr expr() {
    NodePtr lhs = term();
    while (peek().kind == Tok::Plus || peek().kind == Tok::Minus) {
      const char op = next().text[0];
      lhs = make(BinaryNode{op, lhs, term()});
    }
    return lhs;
  }

  NodePtr term() {
    NodePtr lhs = unary();
    while (peek().kind == Tok::Star || peek().kind == Tok::Slash) {
      const char op = next().text[0];
      lhs = make(BinaryNode{op, lhs, unary()});
    }
    return lhs;
  }

  NodePtr unary() {
    if (accept(Tok::Minus)) return make(NegNode{unary()});
    return power();
  }

  NodePtr power() {
    NodePtr base = primary();
    if (accept(Tok::Caret)) return make(BinaryNode{'^', base, unary()});
    return base;
  }

  // Parses "x_i" or "x_jm" and returns which (-1 own, m-1 neighbor), or nullopt.
  std::optional<int> vector_symbol(const std::string& id) const {
    if (id == "x_i") return -1;
    if (id.size() > 3 && id.compare(0, 3, "x_j") == 0) {
      const std::string digits = id.substr(3);
      for (char d : digits)
        if (!std::isdigit(static_cast<unsigned char>(d))) return std::nullopt;
      const int m = std::stoi(digits);
      if (m < 1 || m > ctx_.num_neighbors)
        fail("neighbor index out of range in '" + id + "'");
      return m - 1;
    }
    return std::nullopt;
  }

  NodePtr norm_call() {
    NormNode nn;
    int sign = 1;
    if (accept(Tok::Minus)) sign = -1;
    else accept(Tok::Plus);
    for (;;) {
      if (peek().kind != Tok::Ident) fail("norm() expects vector symbols x_i or x_jm");
      const std::string id = next().text;
      const auto which = vector_symbol(id);
      if (!which) fail("unknown vector symbol '" + id + "'");
      nn.terms.push_back({sign, *which});
      if (accept(Tok::Plus)) sign = 1;
      else if (accept(Tok::Minus)) sign = -1;
      else break;
    }
    expect_close();
    return make(std::move(nn));
  }

  NodePtr primary() {
    const Token& t = peek();
    if (t.kind == Tok::Num) {
      next();
      return make(ConstNode{t.number});
    }
    if (accept(Tok::LParen)) {
      NodePtr e = expr();
      if (peek().kind == Tok::End) fail("unbalanced parentheses: missing ')'");
      if (!accept(Tok::RParen)) fail("expected ')'");
      return e;
    }
    if (t.kind == Tok::Ident) {
      const std::string id = next().text;
      if (accept(Tok::LParen)) {
        if (id == "norm") return norm_call();
        static const std::map<std::string, Func> funcs = {
            {"sin", Func::Sin}, {"cos", Func::Cos}, {"exp", Func::Exp}, {"sqrt", Func::Sqrt}, {"abs", Func::Abs}};
        const auto it = funcs.find(id);
        if (it == funcs.end()) fail("unknown function '" + id + "'");
        if (peek().kind == Tok::RParen) fail("arity mismatch: '" + id + "' takes one argument");
        NodePtr arg = expr();
        expect_close();
        return make(FuncNode{it->second, arg});
      }
      if (const auto which = vector_symbol(id)) {
        if (!accept(Tok::LBracket)) fail("expected '[' after '" + id + "'");
        if (peek().kind != Tok::Num) fail("expected coordinate index");
        const double idx = next().number;
        if (idx != std::floor(idx) || idx < 1 || idx > ctx_.dim)
          fail("coordinate index out of range for '" + id + "'");
        if (!accept(Tok::RBracket)) fail("expected ']'");
        return make(SymbolNode{*which, static_cast<int>(idx) - 1});
      }
      if (id == "pi") return make(ConstNode{std::numbers::pi});
      if (const auto p = ctx_.params.find(id); p != ctx_.params.end()) return make(ConstNode{p->second});
      throw Error(ErrorKind::Parse, "unknown identifier '" + id + "' at offset " + std::to_string(t.pos));
    }
    if (t.kind == Tok::End) fail("unexpected end of expression");
    if (t.kind == Tok::RParen) fail("unbalanced parentheses: unexpected ')'");
    fail("unexpected token '" + t.text + "'");
  }

  std::vector<Token> toks_;
  const ExprContext& ctx_;
  std::size_t pos_ = 0;
};

}  // namespace

double Expression::eval(std::span<const double> xi, std::span<const double> xj) const {
  if (!root_) throw Error(ErrorKind::Invalid, "evaluating an empty expression");
  return Evaluator{xi, xj, xi.size()}(*root_);
}

std::string Expression::to_string() const { return root_ ? Printer{}(*root_) : std::string(); }

Expression parse_expression(std::string_view text, const ExprContext& ctx) {
  Parser p(lex(text), ctx);
  return Expression(p.parse());
}

}  // namespace habs

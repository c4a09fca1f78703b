#include "dshell/expr.hpp"

#include <array>
#include <charconv>
#include <cmath>
#include <vector>

#include "dshell/io.hpp"

namespace dshell
{

enum class Kind
{
  number,
  variable,
  negate,
  add,
  sub,
  mul,
  div,
  pow,
  call
};

enum class Func
{
  sin,
  cos,
  tan,
  exp,
  log,
  sqrt,
  abs
};

struct Expr::Node
{
  Kind kind = Kind::number;
  double value = 0.0;
  int variable = 0;
  Func func = Func::sin;
  std::shared_ptr<const Node> lhs;
  std::shared_ptr<const Node> rhs;
};

namespace
{

using NodePtr = std::shared_ptr<const Expr::Node>;

constexpr std::array<std::string_view, 3> variable_names{"t1", "t2", "zeta"};
constexpr std::array<std::string_view, 7> function_names{"sin", "cos", "tan", "exp", "log", "sqrt", "abs"};

NodePtr make_number(double v)
{
  auto n = std::make_shared<Expr::Node>();
  n->value = v;
  return n;
}

NodePtr make_unary(Kind k, NodePtr a)
{
  auto n = std::make_shared<Expr::Node>();
  n->kind = k;
  n->lhs = std::move(a);
  return n;
}

NodePtr make_binary(Kind k, NodePtr a, NodePtr b)
{
  auto n = std::make_shared<Expr::Node>();
  n->kind = k;
  n->lhs = std::move(a);
  n->rhs = std::move(b);
  return n;
}

class Parser
{
public:
  explicit Parser(std::string_view src) : src_(src) {}

  NodePtr parse_all()
  {
    skip_space();
    if (pos_ == src_.size()) throw ParseError("empty expression", pos_);
    NodePtr e = expr();
    skip_space();
    if (pos_ != src_.size()) fail("operator or end of input");
    return e;
  }

private:
  [[noreturn]] void fail(const std::string& expected) const
  {
    std::string found = pos_ < src_.size() ? "'" + std::string(1, src_[pos_]) + "'" : "end of input";
    throw ParseError("expected " + expected + " at position " + std::to_string(pos_) + ", found " + found, pos_);
  }

  void skip_space()
  {
    while (pos_ < src_.size() && (src_[pos_] == ' ' || src_[pos_] == '\t' || src_[pos_] == '\n' || src_[pos_] == '\r'))
      ++pos_;
  }

  bool accept(char c)
  {
    skip_space();
    if (pos_ < src_.size() && src_[pos_] == c)
    {
      ++pos_;
      return true;
    }
    return false;
  }

  NodePtr expr()
  {
    NodePtr lhs = term();
    for (;;)
    {
      if (accept('+'))
        lhs = make_binary(Kind::add, lhs, term());
      else if (accept('-'))
        lhs = make_binary(Kind::sub, lhs, term());
      else
        return lhs;
    }
  }

  NodePtr term()
  {
    NodePtr lhs = unary();
    for (;;)
    {
      if (accept('*'))
        lhs = make_binary(Kind::mul, lhs, unary());
      else if (accept('/'))
        lhs = make_binary(Kind::div, lhs, unary());
      else
        return lhs;
    }
  }

  NodePtr unary()
  {
    if (accept('-')) return make_unary(Kind::negate, unary());
    return power();
  }

  NodePtr power()
  {
    NodePtr base = primary();
    if (accept('^')) return make_binary(Kind::pow, base, unary());
    return base;
  }

  NodePtr primary()
  {
    skip_space();
    if (pos_ >= src_.size()) fail("number, variable, function or '('");
    const char c = src_[pos_];
    if (c == '(')
    {
      ++pos_;
      NodePtr e = expr();
      if (!accept(')')) fail("')'");
      return e;
    }
    if ((c >= '0' && c <= '9') || c == '.') return number();
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') return identifier();
    fail("number, variable, function or '('");
  }

  NodePtr number()
  {
    const std::size_t start = pos_;
    while (pos_ < src_.size() && (std::isdigit(static_cast<unsigned char>(src_[pos_])) || src_[pos_] == '.')) ++pos_;
    if (pos_ < src_.size() && (src_[pos_] == 'e' || src_[pos_] == 'E'))
    {
      std::size_t p = pos_ + 1;
      if (p < src_.size() && (src_[p] == '+' || src_[p] == '-')) ++p;
      if (p < src_.size() && std::isdigit(static_cast<unsigned char>(src_[p])))
      {
        pos_ = p;
        while (pos_ < src_.size() && std::isdigit(static_cast<unsigned char>(src_[pos_]))) ++pos_;
      }
    }
    double v = 0.0;
    const auto res = std::from_chars(src_.data() + start, src_.data() + pos_, v);
    if (res.ec != std::errc() || res.ptr != src_.data() + pos_)
    {
      pos_ = start;
      fail("number");
    }
    return make_number(v);
  }

  NodePtr identifier()
  {
    const std::size_t start = pos_;
    while (pos_ < src_.size() && (std::isalnum(static_cast<unsigned char>(src_[pos_])) || src_[pos_] == '_')) ++pos_;
    const std::string_view name = src_.substr(start, pos_ - start);
    for (std::size_t k = 0; k < variable_names.size(); ++k)
      if (name == variable_names[k])
      {
        auto n = std::make_shared<Expr::Node>();
        n->kind = Kind::variable;
        n->variable = static_cast<int>(k);
        return n;
      }
    for (std::size_t k = 0; k < function_names.size(); ++k)
      if (name == function_names[k])
      {
        if (!accept('(')) fail("'(' after function " + std::string(name));
        auto n = std::make_shared<Expr::Node>();
        n->kind = Kind::call;
        n->func = static_cast<Func>(k);
        n->lhs = expr();
        if (!accept(')')) fail("')'");
        return n;
      }
    throw ParseError("unknown identifier '" + std::string(name) + "' at position " + std::to_string(start), start);
  }

  std::string_view src_;
  std::size_t pos_ = 0;
};

void print_node(const Expr::Node& n, std::string& out)
{
  auto bin = [&](const char* op) {
    out += '(';
    print_node(*n.lhs, out);
    out += op;
    print_node(*n.rhs, out);
    out += ')';
  };
  switch (n.kind)
  {
  case Kind::number:
    out += format_number(n.value);
    break;
  case Kind::variable:
    out += variable_names[n.variable];
    break;
  case Kind::negate:
    out += "(-";
    print_node(*n.lhs, out);
    out += ')';
    break;
  case Kind::add:
    bin(" + ");
    break;
  case Kind::sub:
    bin(" - ");
    break;
  case Kind::mul:
    bin(" * ");
    break;
  case Kind::div:
    bin(" / ");
    break;
  case Kind::pow:
    bin("^");
    break;
  case Kind::call:
    out += function_names[static_cast<int>(n.func)];
    out += '(';
    print_node(*n.lhs, out);
    out += ')';
    break;
  }
}

std::string print_node(const Expr::Node& n)
{
  std::string s;
  print_node(n, s);
  return s;
}

[[noreturn]] void domain_error(const Expr::Node& n, const std::string& why)
{
  throw DomainError(why + " in subexpression " + print_node(n));
}

double eval_node(const Expr::Node& n, const std::array<double, 3>& vars)
{
  switch (n.kind)
  {
  case Kind::number:
    return n.value;
  case Kind::variable:
    return vars[n.variable];
  case Kind::negate:
    return -eval_node(*n.lhs, vars);
  case Kind::add:
    return eval_node(*n.lhs, vars) + eval_node(*n.rhs, vars);
  case Kind::sub:
    return eval_node(*n.lhs, vars) - eval_node(*n.rhs, vars);
  case Kind::mul:
    return eval_node(*n.lhs, vars) * eval_node(*n.rhs, vars);
  case Kind::div:
  {
    const double num = eval_node(*n.lhs, vars);
    const double den = eval_node(*n.rhs, vars);
    if (den == 0.0) domain_error(n, "division by zero");
    return num / den;
  }
  case Kind::pow:
  {
    const double b = eval_node(*n.lhs, vars);
    const double e = eval_node(*n.rhs, vars);
    if (b < 0.0 && e != std::floor(e)) domain_error(n, "negative base with non-integer exponent");
    if (b == 0.0 && e < 0.0) domain_error(n, "zero base with negative exponent");
    return std::pow(b, e);
  }
  case Kind::call:
  {
    const double x = eval_node(*n.lhs, vars);
    switch (n.func)
    {
    case Func::sin:
      return std::sin(x);
    case Func::cos:
      return std::cos(x);
    case Func::tan:
      return std::tan(x);
    case Func::exp:
      return std::exp(x);
    case Func::log:
      if (!(x > 0.0)) domain_error(n, "log of non-positive value");
      return std::log(x);
    case Func::sqrt:
      if (x < 0.0) domain_error(n, "sqrt of negative value");
      return std::sqrt(x);
    case Func::abs:
      return std::abs(x);
    }
  }
  }
  return 0.0;
}

bool uses(const Expr::Node& n, int var)
{
  if (n.kind == Kind::variable) return n.variable == var;
  return (n.lhs && uses(*n.lhs, var)) || (n.rhs && uses(*n.rhs, var));
}

} // namespace

ParseError::ParseError(const std::string& message, std::size_t position) : Error(message), position_(position) {}

Expr::Expr() : root_(make_number(0.0)) {}

Expr::Expr(std::shared_ptr<const Node> root) : root_(std::move(root)) {}

Expr Expr::parse(std::string_view src) { return Expr(Parser(src).parse_all()); }

Expr Expr::constant(double value) { return Expr(make_number(value)); }

double Expr::eval(double t1, double t2, double zeta) const
{
  const double v = eval_node(*root_, {t1, t2, zeta});
  if (!std::isfinite(v)) domain_error(*root_, "non-finite result");
  return v;
}

std::string Expr::print() const { return print_node(*root_); }

bool Expr::depends_on(std::string_view variable) const
{
  for (std::size_t k = 0; k < variable_names.size(); ++k)
    if (variable == variable_names[k]) return uses(*root_, static_cast<int>(k));
  throw Error("unknown variable '" + std::string(variable) + "'");
}

bool Expr::is_constant() const { return !uses(*root_, 0) && !uses(*root_, 1) && !uses(*root_, 2); }

ScalarField Expr::sample(const ParamGrid& grid, double zeta) const
{
  return ScalarField::generate(grid, [&](int i, int j) {
    try
    {
      return eval(grid.theta1(i), grid.theta2(j), zeta);
    }
    catch (const DomainError& e)
    {
      throw DomainError(std::string(e.what()) + " at " + describe_node(grid, grid.node(i, j)));
    }
  });
}

} // namespace dshell

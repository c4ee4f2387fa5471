#include "skewlab/expr.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <functional>
#include <sstream>
#include <utility>

namespace skewlab {

namespace {

std::string join_expected(const std::vector<std::string>& expected) {
  std::string out;
  for (std::size_t i = 0; i < expected.size(); ++i) {
    if (i) out += ", ";
    out += expected[i];
  }
  return out;
}

std::string syntax_message(const std::string& message, const SourcePos& pos,
                           const std::vector<std::string>& expected) {
  std::ostringstream os;
  os << "syntax error at line " << pos.line << ", column " << pos.column << ": " << message;
  if (!expected.empty()) os << " (expected " << join_expected(expected) << ")";
  return os.str();
}

std::string eval_message(const std::string& message, const SourcePos& pos) {
  std::ostringstream os;
  os << "evaluation error at line " << pos.line << ", column " << pos.column << ": " << message;
  return os.str();
}

}  // namespace

SyntaxError::SyntaxError(const std::string& message, SourcePos pos,
                         std::vector<std::string> expected)
    : Error(syntax_message(message, pos, expected)), pos_(pos), expected_(std::move(expected)) {}

EvalError::EvalError(const std::string& message, SourcePos pos)
    : Error(eval_message(message, pos)), pos_(pos) {}

namespace {

using Node = CoefficientExpr::Node;
using NodePtr = std::shared_ptr<const Node>;

enum class Tok { Number, Ident, Plus, Minus, Star, Slash, Caret, LParen, RParen, Comma, End };

struct Token {
  Tok kind = Tok::End;
  std::string text;
  double number = 0.0;
  SourcePos pos;
};

const std::vector<std::string> kOperand{"number", "identifier", "'('", "'-'"};

struct FunctionInfo {
  const char* name;
  ExprOp op;
  std::size_t min_args;
  std::size_t max_args;
};

constexpr std::array<FunctionInfo, 7> kFunctions{{
    {"exp", ExprOp::Exp, 1, 1},
    {"abs", ExprOp::Abs, 1, 1},
    {"tanh", ExprOp::Tanh, 1, 1},
    {"sgn", ExprOp::Sgn, 1, 1},
    {"min", ExprOp::Min, 2, static_cast<std::size_t>(-1)},
    {"max", ExprOp::Max, 2, static_cast<std::size_t>(-1)},
    {"indicator", ExprOp::Indicator, 3, 3},
}};

const FunctionInfo* find_function(std::string_view name) {
  for (const auto& f : kFunctions)
    if (name == f.name) return &f;
  return nullptr;
}

const FunctionInfo* find_function(ExprOp op) {
  for (const auto& f : kFunctions)
    if (op == f.op) return &f;
  return nullptr;
}

class Lexer {
 public:
  explicit Lexer(std::string_view src) : src_(src) {}

  Token next() {
    skip_space();
    Token t;
    t.pos = here();
    if (i_ >= src_.size()) return t;
    const char c = src_[i_];
    if (is_digit(c) || (c == '.' && i_ + 1 < src_.size() && is_digit(src_[i_ + 1])))
      return number(t);
    if (is_alpha(c)) {
      const std::size_t start = i_;
      while (i_ < src_.size() && (is_alpha(src_[i_]) || is_digit(src_[i_]))) advance();
      t.kind = Tok::Ident;
      t.text = std::string(src_.substr(start, i_ - start));
      return t;
    }
    advance();
    t.text = std::string(1, c);
    switch (c) {
      case '+': t.kind = Tok::Plus; break;
      case '-': t.kind = Tok::Minus; break;
      case '*': t.kind = Tok::Star; break;
      case '/': t.kind = Tok::Slash; break;
      case '^': t.kind = Tok::Caret; break;
      case '(': t.kind = Tok::LParen; break;
      case ')': t.kind = Tok::RParen; break;
      case ',': t.kind = Tok::Comma; break;
      default:
        throw SyntaxError("unexpected character '" + t.text + "'", t.pos, {});
    }
    return t;
  }

 private:
  static bool is_digit(char c) { return c >= '0' && c <= '9'; }
  static bool is_alpha(char c) {
    return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || c == '_';
  }

  SourcePos here() const { return {i_, line_, col_}; }

  void advance() {
    if (src_[i_] == '\n') {
      ++line_;
      col_ = 1;
    } else {
      ++col_;
    }
    ++i_;
  }

  void skip_space() {
    while (i_ < src_.size() &&
           (src_[i_] == ' ' || src_[i_] == '\t' || src_[i_] == '\n' || src_[i_] == '\r'))
      advance();
  }

  Token number(Token t) {
    const std::size_t start = i_;
    while (i_ < src_.size() && is_digit(src_[i_])) advance();
    if (i_ < src_.size() && src_[i_] == '.') {
      advance();
      while (i_ < src_.size() && is_digit(src_[i_])) advance();
    }
    if (i_ < src_.size() && (src_[i_] == 'e' || src_[i_] == 'E')) {
      std::size_t j = i_ + 1;
      if (j < src_.size() && (src_[j] == '+' || src_[j] == '-')) ++j;
      if (j < src_.size() && is_digit(src_[j])) {
        while (i_ < j) advance();
        while (i_ < src_.size() && is_digit(src_[i_])) advance();
      } else {
        SourcePos p = here();
        p.offset = j;
        p.column += j - i_;
        throw SyntaxError("malformed exponent", p, {"digit"});
      }
    }
    t.kind = Tok::Number;
    t.text = std::string(src_.substr(start, i_ - start));
    const auto res = std::from_chars(t.text.data(), t.text.data() + t.text.size(), t.number);
    if (res.ec != std::errc() || !std::isfinite(t.number))
      throw SyntaxError("number out of range: " + t.text, t.pos, {});
    return t;
  }

  std::string_view src_;
  std::size_t i_ = 0;
  std::size_t line_ = 1;
  std::size_t col_ = 1;
};

class Parser {
 public:
  Parser(std::string_view src, const ParamTable& params) : lex_(src), params_(params) {
    cur_ = lex_.next();
  }

  NodePtr parse_all() {
    if (cur_.kind == Tok::End) throw SyntaxError("empty expression", cur_.pos, kOperand);
    NodePtr e = expr();
    if (cur_.kind != Tok::End)
      throw SyntaxError("unexpected '" + cur_.text + "'", cur_.pos,
                        {"'+'", "'-'", "'*'", "'/'", "'^'", "end of input"});
    return e;
  }

 private:
  void bump() { cur_ = lex_.next(); }

  static NodePtr make(ExprOp op, SourcePos pos, std::vector<NodePtr> args = {}) {
    auto n = std::make_shared<Node>();
    n->op = op;
    n->pos = pos;
    n->args = std::move(args);
    return n;
  }

  NodePtr expr() {
    NodePtr lhs = term();
    while (cur_.kind == Tok::Plus || cur_.kind == Tok::Minus) {
      const ExprOp op = cur_.kind == Tok::Plus ? ExprOp::Add : ExprOp::Sub;
      const SourcePos pos = cur_.pos;
      bump();
      lhs = make(op, pos, {lhs, term()});
    }
    return lhs;
  }

  NodePtr term() {
    NodePtr lhs = unary();
    while (cur_.kind == Tok::Star || cur_.kind == Tok::Slash) {
      const ExprOp op = cur_.kind == Tok::Star ? ExprOp::Mul : ExprOp::Div;
      const SourcePos pos = cur_.pos;
      bump();
      lhs = make(op, pos, {lhs, unary()});
    }
    return lhs;
  }

  NodePtr unary() {
    if (cur_.kind == Tok::Minus) {
      const SourcePos pos = cur_.pos;
      bump();
      return make(ExprOp::Neg, pos, {unary()});
    }
    return power();
  }

  NodePtr power() {
    NodePtr base = atom();
    if (cur_.kind == Tok::Caret) {
      const SourcePos pos = cur_.pos;
      bump();
      return make(ExprOp::Pow, pos, {base, unary()});
    }
    return base;
  }

  NodePtr atom() {
    const Token t = cur_;
    switch (t.kind) {
      case Tok::Number: {
        bump();
        auto n = make(ExprOp::Number, t.pos);
        std::const_pointer_cast<Node>(n)->value = t.number;
        return n;
      }
      case Tok::LParen: {
        bump();
        NodePtr inner = expr();
        expect(Tok::RParen, {"')'", "'+'", "'-'", "'*'", "'/'", "'^'"});
        return inner;
      }
      case Tok::Ident:
        bump();
        return identifier(t);
      case Tok::End:
        throw SyntaxError("unexpected end of input", t.pos, kOperand);
      default:
        throw SyntaxError("unexpected '" + t.text + "'", t.pos, kOperand);
    }
  }

  NodePtr identifier(const Token& t) {
    if (const FunctionInfo* fn = find_function(t.text)) {
      if (cur_.kind != Tok::LParen)
        throw SyntaxError("function '" + t.text + "' must be called", cur_.pos, {"'('"});
      bump();
      std::vector<NodePtr> args{expr()};
      while (cur_.kind == Tok::Comma) {
        bump();
        args.push_back(expr());
      }
      expect(Tok::RParen, {"')'", "','", "'+'", "'-'", "'*'", "'/'", "'^'"});
      if (args.size() < fn->min_args || args.size() > fn->max_args) {
        std::ostringstream os;
        os << "function '" << fn->name << "' takes ";
        if (fn->min_args == fn->max_args)
          os << fn->min_args;
        else
          os << "at least " << fn->min_args;
        os << " argument" << (fn->min_args == 1 ? "" : "s") << ", got " << args.size();
        throw SyntaxError(os.str(), t.pos, {});
      }
      return make(fn->op, t.pos, std::move(args));
    }
    if (t.text == "x") return make(ExprOp::VarX, t.pos);
    if (t.text == "eps") return make(ExprOp::VarEps, t.pos);
    if (auto it = params_.find(t.text); it != params_.end()) {
      auto n = std::make_shared<Node>();
      n->op = ExprOp::Param;
      n->name = t.text;
      n->value = it->second;
      n->pos = t.pos;
      return n;
    }
    std::vector<std::string> expected{"x", "eps"};
    for (const auto& [name, value] : params_) expected.push_back(name);
    for (const auto& f : kFunctions) expected.push_back(std::string(f.name) + "(...)");
    throw SyntaxError("unknown identifier '" + t.text + "'", t.pos, std::move(expected));
  }

  void expect(Tok kind, std::vector<std::string> expected) {
    if (cur_.kind != kind) {
      const std::string what =
          cur_.kind == Tok::End ? "unexpected end of input" : "unexpected '" + cur_.text + "'";
      throw SyntaxError(what, cur_.pos, std::move(expected));
    }
    bump();
  }

  Lexer lex_;
  const ParamTable& params_;
  Token cur_;
};

int level(ExprOp op) {
  switch (op) {
    case ExprOp::Add:
    case ExprOp::Sub:
      return 1;
    case ExprOp::Mul:
    case ExprOp::Div:
      return 2;
    case ExprOp::Neg:
      return 3;
    case ExprOp::Pow:
      return 4;
    default:
      return 5;
  }
}

std::string format_number(double v) {
  std::array<char, 64> buf{};
  const auto res = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  return std::string(buf.data(), res.ptr);
}

void print_node(const Node& n, int min_level, std::string& out) {
  const int lv = level(n.op);
  const bool paren = lv < min_level;
  if (paren) out += '(';
  auto binary = [&](const char* sym, int left, int right) {
    print_node(*n.args[0], left, out);
    out += sym;
    print_node(*n.args[1], right, out);
  };
  switch (n.op) {
    case ExprOp::Number: out += format_number(n.value); break;
    case ExprOp::VarX: out += "x"; break;
    case ExprOp::VarEps: out += "eps"; break;
    case ExprOp::Param: out += n.name; break;
    case ExprOp::Neg:
      out += '-';
      print_node(*n.args[0], 3, out);
      break;
    case ExprOp::Add: binary(" + ", 1, 2); break;
    case ExprOp::Sub: binary(" - ", 1, 2); break;
    case ExprOp::Mul: binary(" * ", 2, 3); break;
    case ExprOp::Div: binary(" / ", 2, 3); break;
    case ExprOp::Pow: binary("^", 5, 3); break;
    default: {
      out += find_function(n.op)->name;
      out += '(';
      for (std::size_t i = 0; i < n.args.size(); ++i) {
        if (i) out += ", ";
        print_node(*n.args[i], 1, out);
      }
      out += ')';
    }
  }
  if (paren) out += ')';
}

bool same(const Node& a, const Node& b) {
  if (a.op != b.op || a.args.size() != b.args.size()) return false;
  if (a.op == ExprOp::Number && a.value != b.value) return false;
  if (a.op == ExprOp::Param && (a.name != b.name || a.value != b.value)) return false;
  for (std::size_t i = 0; i < a.args.size(); ++i)
    if (!same(*a.args[i], *b.args[i])) return false;
  return true;
}

}  // namespace

struct CoefficientExpr::Instr {
  ExprOp op;
  double value;
  std::size_t argc;
  SourcePos pos;
};

CoefficientExpr::CoefficientExpr() : source_("0") {
  auto n = std::make_shared<Node>();
  root_ = n;
  compile();
}

CoefficientExpr CoefficientExpr::parse(std::string_view source, const ParamTable& params) {
  CoefficientExpr e;
  e.source_ = std::string(source);
  e.root_ = Parser(source, params).parse_all();
  e.compile();
  return e;
}

CoefficientExpr parse_expr(std::string_view source, const ParamTable& params) {
  return CoefficientExpr::parse(source, params);
}

std::string CoefficientExpr::print() const {
  std::string out;
  print_node(*root_, 1, out);
  return out;
}

bool CoefficientExpr::same_tree(const CoefficientExpr& other) const {
  return same(*root_, *other.root_);
}

void CoefficientExpr::compile() {
  auto code = std::make_shared<std::vector<Instr>>();
  std::size_t depth = 0;
  std::size_t max_depth = 0;
  uses_x_ = uses_eps_ = false;
  std::function<void(const Node&)> emit = [&](const Node& n) {
    for (const auto& a : n.args) emit(*a);
    if (n.op == ExprOp::VarX) uses_x_ = true;
    if (n.op == ExprOp::VarEps) uses_eps_ = true;
    code->push_back({n.op, n.value, n.args.size(), n.pos});
    depth = depth + 1 - n.args.size();
    max_depth = std::max(max_depth, depth);
  };
  emit(*root_);
  code_ = std::move(code);
  max_stack_ = std::max<std::size_t>(max_depth, 1);
}

namespace {

template <class Stack>
double run(const std::vector<CoefficientExpr::Instr>& code, Stack& st, double x, double eps);

}  // namespace

double CoefficientExpr::operator()(double x, double eps) const {
  constexpr std::size_t kInline = 64;
  if (max_stack_ <= kInline) {
    std::array<double, kInline> st;
    return run(*code_, st, x, eps);
  }
  std::vector<double> st(max_stack_);
  return run(*code_, st, x, eps);
}

namespace {

double sign(double v) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); }

template <class Stack>
double run(const std::vector<CoefficientExpr::Instr>& code, Stack& st, double x, double eps) {
  std::size_t sp = 0;
  for (const auto& in : code) {
    switch (in.op) {
      case ExprOp::Number:
      case ExprOp::Param: st[sp++] = in.value; break;
      case ExprOp::VarX: st[sp++] = x; break;
      case ExprOp::VarEps: st[sp++] = eps; break;
      case ExprOp::Neg: st[sp - 1] = -st[sp - 1]; break;
      case ExprOp::Add: --sp; st[sp - 1] += st[sp]; break;
      case ExprOp::Sub: --sp; st[sp - 1] -= st[sp]; break;
      case ExprOp::Mul: --sp; st[sp - 1] *= st[sp]; break;
      case ExprOp::Div:
        --sp;
        if (st[sp] == 0.0) throw EvalError("division by zero", in.pos);
        st[sp - 1] /= st[sp];
        break;
      case ExprOp::Pow: {
        --sp;
        const double a = st[sp - 1];
        const double b = st[sp];
        if (a == 0.0 && b < 0.0) throw EvalError("zero raised to a negative power", in.pos);
        if (a < 0.0 && std::isfinite(b) && b != std::trunc(b))
          throw EvalError("negative base raised to a non-integer power", in.pos);
        st[sp - 1] = std::pow(a, b);
        break;
      }
      case ExprOp::Exp: st[sp - 1] = std::exp(st[sp - 1]); break;
      case ExprOp::Abs: st[sp - 1] = std::abs(st[sp - 1]); break;
      case ExprOp::Tanh: st[sp - 1] = std::tanh(st[sp - 1]); break;
      case ExprOp::Sgn: st[sp - 1] = sign(st[sp - 1]); break;
      case ExprOp::Min:
      case ExprOp::Max: {
        const std::size_t base = sp - in.argc;
        double v = st[base];
        for (std::size_t i = base + 1; i < sp; ++i)
          v = in.op == ExprOp::Min ? std::min(v, st[i]) : std::max(v, st[i]);
        sp = base + 1;
        st[base] = v;
        break;
      }
      case ExprOp::Indicator: {
        sp -= 2;
        const double lo = st[sp - 1];
        const double hi = st[sp];
        const double arg = st[sp + 1];
        st[sp - 1] = (lo <= arg && arg <= hi) ? 1.0 : 0.0;
        break;
      }
    }
  }
  return st[0];
}

}  // namespace

}  // namespace skewlab

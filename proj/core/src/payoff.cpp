#include "martrep/payoff.hpp"

#include <cctype>
#include <cmath>
#include <cstdlib>
#include <limits>
#include <vector>

#include "martrep/errors.hpp"

namespace martrep {

namespace {

enum class Op { kAdd, kSub, kMul, kConst, kChannel, kIndicator };
enum class Cmp { kEq, kNe, kLe, kLt, kGe, kGt };

}  // namespace

struct PayoffExpr::Node {
  Op op;
  double value = 0;            // kConst
  char channel = 0;            // kChannel: 'W','M','H','P' (Hprime),'K' ([M,H])
  char var = 0;                // kIndicator: 'e' or 't'
  Cmp cmp = Cmp::kEq;          // kIndicator
  double threshold = 0;        // kIndicator
  std::unique_ptr<Node> lhs, rhs;
};

namespace {

using Node = PayoffExpr::Node;
using NodePtr = std::unique_ptr<Node>;

class Parser {
 public:
  explicit Parser(const std::string& s) : s_(s) {}

  NodePtr run() {
    NodePtr e = expr();
    skip_ws();
    if (pos_ != s_.size())
      throw ValidationError("payoff", "unexpected trailing input at offset " + std::to_string(pos_));
    return e;
  }

 private:
  void skip_ws() {
    while (pos_ < s_.size() && std::isspace(static_cast<unsigned char>(s_[pos_]))) ++pos_;
  }

  bool eat(char c) {
    skip_ws();
    if (pos_ < s_.size() && s_[pos_] == c) {
      ++pos_;
      return true;
    }
    return false;
  }

  NodePtr expr() {
    NodePtr lhs = term();
    for (;;) {
      skip_ws();
      if (eat('+')) {
        auto n = std::make_unique<Node>();
        n->op = Op::kAdd;
        n->lhs = std::move(lhs);
        n->rhs = term();
        lhs = std::move(n);
      } else if (eat('-')) {
        auto n = std::make_unique<Node>();
        n->op = Op::kSub;
        n->lhs = std::move(lhs);
        n->rhs = term();
        lhs = std::move(n);
      } else {
        return lhs;
      }
    }
  }

  NodePtr term() {
    NodePtr lhs = factor();
    for (;;) {
      skip_ws();
      if (eat('*')) {
        auto n = std::make_unique<Node>();
        n->op = Op::kMul;
        n->lhs = std::move(lhs);
        n->rhs = factor();
        lhs = std::move(n);
      } else {
        return lhs;
      }
    }
  }

  std::string ident() {
    skip_ws();
    std::size_t start = pos_;
    while (pos_ < s_.size() &&
           (std::isalnum(static_cast<unsigned char>(s_[pos_])) || s_[pos_] == '_' ||
            s_[pos_] == '\''))
      ++pos_;
    return s_.substr(start, pos_ - start);
  }

  double number() {
    skip_ws();
    const char* start = s_.c_str() + pos_;
    char* end = nullptr;
    double v = std::strtod(start, &end);
    if (end == start) throw ValidationError("payoff", "expected a number at offset " + std::to_string(pos_));
    pos_ += static_cast<std::size_t>(end - start);
    return v;
  }

  Cmp comparison() {
    skip_ws();
    auto two = [&](char a, char b) {
      return pos_ + 1 < s_.size() && s_[pos_] == a && s_[pos_ + 1] == b;
    };
    if (two('=', '=')) { pos_ += 2; return Cmp::kEq; }
    if (two('!', '=')) { pos_ += 2; return Cmp::kNe; }
    if (two('<', '=')) { pos_ += 2; return Cmp::kLe; }
    if (two('>', '=')) { pos_ += 2; return Cmp::kGe; }
    if (pos_ < s_.size() && s_[pos_] == '<') { ++pos_; return Cmp::kLt; }
    if (pos_ < s_.size() && s_[pos_] == '>') { ++pos_; return Cmp::kGt; }
    throw ValidationError("payoff", "expected a comparison operator at offset " + std::to_string(pos_));
  }

  NodePtr factor() {
    skip_ws();
    if (pos_ >= s_.size()) throw ValidationError("payoff", "unexpected end of expression");
    char c = s_[pos_];
    if (c == '(') {
      ++pos_;
      NodePtr e = expr();
      if (!eat(')')) throw ValidationError("payoff", "missing ')'");
      return e;
    }
    if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') {
      auto n = std::make_unique<Node>();
      n->op = Op::kConst;
      n->value = number();
      return n;
    }
    std::string id = ident();
    if (id.empty()) throw ValidationError("payoff", "unexpected character at offset " + std::to_string(pos_));
    if (id == "I") {
      if (!eat('(')) throw ValidationError("payoff", "expected '(' after I");
      std::string var = ident();
      if (var != "eta" && var != "tau")
        throw ValidationError("payoff", "indicator variable must be eta or tau, got '" + var + "'");
      auto n = std::make_unique<Node>();
      n->op = Op::kIndicator;
      n->var = var == "eta" ? 'e' : 't';
      n->cmp = comparison();
      n->threshold = number();
      if (!eat(')')) throw ValidationError("payoff", "missing ')' after indicator");
      return n;
    }
    auto n = std::make_unique<Node>();
    n->op = Op::kChannel;
    if (id == "W") n->channel = 'W';
    else if (id == "M") n->channel = 'M';
    else if (id == "H") n->channel = 'H';
    else if (id == "Hprime" || id == "H'") n->channel = 'P';
    else if (id == "MH") n->channel = 'K';
    else throw ValidationError("payoff", "unknown identifier '" + id + "'");
    return n;
  }

  const std::string& s_;
  std::size_t pos_ = 0;
};

double eval_node(const Node& n, const TerminalView& v) {
  switch (n.op) {
    case Op::kAdd: return eval_node(*n.lhs, v) + eval_node(*n.rhs, v);
    case Op::kSub: return eval_node(*n.lhs, v) - eval_node(*n.rhs, v);
    case Op::kMul: return eval_node(*n.lhs, v) * eval_node(*n.rhs, v);
    case Op::kConst: return n.value;
    case Op::kChannel:
      switch (n.channel) {
        case 'W': return v.w;
        case 'M': return v.m;
        case 'H': return v.h;
        case 'P': return v.h_prime;
        case 'K': return v.mh;
      }
      return 0;
    case Op::kIndicator: {
      double x = n.var == 'e' ? v.eta : v.tau;
      bool hit = false;
      switch (n.cmp) {
        case Cmp::kEq: hit = x == n.threshold; break;
        case Cmp::kNe: hit = x != n.threshold; break;
        case Cmp::kLe: hit = x <= n.threshold; break;
        case Cmp::kLt: hit = x < n.threshold; break;
        case Cmp::kGe: hit = x >= n.threshold; break;
        case Cmp::kGt: hit = x > n.threshold; break;
      }
      return hit ? 1.0 : 0.0;
    }
  }
  return 0;
}

NodePtr clone(const Node& n) {
  auto c = std::make_unique<Node>();
  c->op = n.op;
  c->value = n.value;
  c->channel = n.channel;
  c->var = n.var;
  c->cmp = n.cmp;
  c->threshold = n.threshold;
  if (n.lhs) c->lhs = clone(*n.lhs);
  if (n.rhs) c->rhs = clone(*n.rhs);
  return c;
}

}  // namespace

PayoffExpr::PayoffExpr() = default;
PayoffExpr::~PayoffExpr() = default;
PayoffExpr::PayoffExpr(PayoffExpr&&) noexcept = default;
PayoffExpr& PayoffExpr::operator=(PayoffExpr&&) noexcept = default;

PayoffExpr::PayoffExpr(const PayoffExpr& other) : text_(other.text_) {
  if (other.root_) root_ = clone(*other.root_);
}

PayoffExpr& PayoffExpr::operator=(const PayoffExpr& other) {
  if (this != &other) {
    text_ = other.text_;
    root_ = other.root_ ? clone(*other.root_) : nullptr;
  }
  return *this;
}

PayoffExpr PayoffExpr::parse(const std::string& text) {
  PayoffExpr e;
  e.text_ = text;
  e.root_ = Parser(text).run();
  return e;
}

double PayoffExpr::eval(const TerminalView& view) const {
  if (!root_) throw ContractError("payoff: empty expression");
  return eval_node(*root_, view);
}

}  // namespace martrep

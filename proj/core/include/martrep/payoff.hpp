#pragma once

#include <memory>
#include <string>

namespace martrep {

// Terminal path data a payoff expression can reference.
struct TerminalView {
  double w = 0;        // W_T
  double m = 0;        // M_T
  double h = 0;        // H_T
  double h_prime = 0;  // H'_T
  double mh = 0;       // [M,H]_T
  double eta = 0;      // occurrence time (+infinity if never)
  double tau = 0;
};

// Small payoff grammar over terminal channel values:
//   expr   := term (('+'|'-') term)*
//   term   := factor ('*' factor)*
//   factor := number | 'W' | 'M' | 'H' | 'Hprime' | 'MH'
//           | 'I(' ('eta'|'tau') op number ')' | '(' expr ')'
//   op     := '==' | '!=' | '<=' | '<' | '>=' | '>'
// Example: "I(tau==2)*I(eta==2)".
class PayoffExpr {
 public:
  static PayoffExpr parse(const std::string& text);

  double eval(const TerminalView& view) const;
  const std::string& text() const { return text_; }

  PayoffExpr(const PayoffExpr&);
  PayoffExpr& operator=(const PayoffExpr&);
  PayoffExpr(PayoffExpr&&) noexcept;
  PayoffExpr& operator=(PayoffExpr&&) noexcept;
  ~PayoffExpr();

  struct Node;

 private:
  PayoffExpr();
  std::unique_ptr<Node> root_;
  std::string text_;
};

}  // namespace martrep

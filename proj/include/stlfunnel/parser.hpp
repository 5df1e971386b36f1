#pragma once

// Text syntax for the formula fragment:
//
//   phi := "G" interval psi | "F" interval psi | "F" interval "G" interval psi
//   psi := conj
//   conj := unary ("&" unary)*
//   unary := "true" | ident | "!" ident | "(" psi ")"
//   interval := "[" number "," number "]"

#include <stlfunnel/stl.hpp>

#include <cctype>
#include <charconv>
#include <map>
#include <string>
#include <string_view>

namespace stlfunnel {

using PredicateEnv = std::map<std::string, Predicate, std::less<>>;

namespace detail {

class FormulaParser {
 public:
  FormulaParser(std::string_view text, const PredicateEnv& env) : text_(text), env_(env) {}

  TemporalFormula parse_temporal() {
    skip_ws();
    TemporalFormula phi;
    if (accept('G')) {
      const Interval i = parse_interval();
      phi = TemporalFormula::always(i, parse_psi());
    } else if (accept('F')) {
      const Interval outer = parse_interval();
      skip_ws();
      if (peek() == 'G' && !ident_continues(pos_ + 1)) {
        ++pos_;
        const Interval inner = parse_interval();
        phi = TemporalFormula::eventually_always(outer, inner, parse_psi());
      } else {
        phi = TemporalFormula::eventually(outer, parse_psi());
      }
    } else {
      fail("expected temporal operator 'G' or 'F'");
    }
    expect_end();
    return phi;
  }

  NonTemporalFormula parse_non_temporal() {
    NonTemporalFormula psi = parse_psi();
    expect_end();
    return psi;
  }

 private:
  NonTemporalFormula parse_psi() {
    NonTemporalFormula f = parse_unary();
    skip_ws();
    while (accept('&')) {
      f = f & parse_unary();
      skip_ws();
    }
    return f;
  }

  NonTemporalFormula parse_unary() {
    skip_ws();
    if (accept('(')) {
      NonTemporalFormula inner = parse_psi();
      skip_ws();
      if (!accept(')')) fail("expected ')'");
      return inner;
    }
    if (accept('!')) {
      skip_ws();
      const std::size_t at = pos_;
      const std::string name = parse_ident();
      const Predicate& p = lookup(name, at);
      if (!p.is_affine())
        throw ParseError("negation of non-affine predicate '" + name + "' breaks concavity", at);
      return NonTemporalFormula::negation(name, p);
    }
    const std::size_t at = pos_;
    const std::string name = parse_ident();
    if (name == "true") return NonTemporalFormula::truth();
    return NonTemporalFormula::atom(name, lookup(name, at));
  }

  Interval parse_interval() {
    skip_ws();
    const std::size_t at = pos_;
    if (!accept('[')) fail("expected '['");
    const double a = parse_number();
    skip_ws();
    if (!accept(',')) fail("expected ','");
    const double b = parse_number();
    skip_ws();
    if (!accept(']')) fail("expected ']'");
    if (a < 0.0) throw ParseError("interval lower bound must be non-negative", at);
    if (a > b) throw ParseError("malformed interval: lower bound exceeds upper bound", at);
    return Interval(a, b);
  }

  double parse_number() {
    skip_ws();
    double v = 0.0;
    const char* first = text_.data() + pos_;
    const char* last = text_.data() + text_.size();
    auto [ptr, ec] = std::from_chars(first, last, v);
    if (ec != std::errc() || ptr == first || !std::isfinite(v)) fail("expected number");
    pos_ += static_cast<std::size_t>(ptr - first);
    return v;
  }

  std::string parse_ident() {
    if (pos_ >= text_.size() || !(std::isalpha(static_cast<unsigned char>(text_[pos_])) || text_[pos_] == '_'))
      fail("expected identifier");
    const std::size_t start = pos_;
    while (ident_continues(pos_)) ++pos_;
    return std::string(text_.substr(start, pos_ - start));
  }

  const Predicate& lookup(const std::string& name, std::size_t at) const {
    auto it = env_.find(name);
    if (it == env_.end()) throw ParseError("unbound predicate '" + name + "'", at);
    return it->second;
  }

  bool ident_continues(std::size_t p) const {
    return p < text_.size() &&
           (std::isalnum(static_cast<unsigned char>(text_[p])) || text_[p] == '_');
  }

  void skip_ws() {
    while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_]))) ++pos_;
  }

  char peek() const { return pos_ < text_.size() ? text_[pos_] : '\0'; }

  bool accept(char c) {
    if (peek() != c) return false;
    ++pos_;
    return true;
  }

  void expect_end() {
    skip_ws();
    if (pos_ != text_.size()) fail("unexpected trailing input");
  }

  [[noreturn]] void fail(const std::string& msg) const { throw ParseError(msg, pos_); }

  std::string_view text_;
  const PredicateEnv& env_;
  std::size_t pos_ = 0;
};

inline std::string format_number(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

inline std::string format_interval(const Interval& i) {
  return "[" + format_number(i.a) + "," + format_number(i.b) + "]";
}

}  // namespace detail

inline TemporalFormula parse_formula(std::string_view text, const PredicateEnv& env) {
  return detail::FormulaParser(text, env).parse_temporal();
}

inline NonTemporalFormula parse_non_temporal(std::string_view text, const PredicateEnv& env) {
  return detail::FormulaParser(text, env).parse_non_temporal();
}

inline std::string to_string(const NonTemporalFormula& psi) {
  const auto& lits = psi.literals();
  if (lits.empty()) return "true";
  auto lit = [](const Literal& l) { return (l.negated ? "!" : "") + l.name; };
  if (lits.size() == 1) return lit(lits.front());
  std::string s = "(";
  for (std::size_t k = 0; k < lits.size(); ++k) {
    if (k) s += " & ";
    s += lit(lits[k]);
  }
  return s + ")";
}

inline std::string to_string(const TemporalFormula& phi) {
  using detail::format_interval;
  switch (phi.kind) {
    case TemporalFormula::Kind::Always:
      return "G" + format_interval(phi.outer) + " " + to_string(phi.psi);
    case TemporalFormula::Kind::Eventually:
      return "F" + format_interval(phi.outer) + " " + to_string(phi.psi);
    case TemporalFormula::Kind::EventuallyAlways:
      return "F" + format_interval(phi.outer) + "G" + format_interval(phi.inner) + " " +
             to_string(phi.psi);
  }
  return {};
}

}  // namespace stlfunnel

#pragma once

#include <algorithm>
#include <cctype>
#include <cmath>
#include <limits>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace choquard {

/// Scalar problem instance: dimension N, Riesz order alpha, lower-critical
/// switch b and prescribed L^2 mass rho.
struct ProblemParams {
  int dim = 3;
  double alpha = 2.0;
  int b = 1;
  double rho = 1.0;

  double n() const { return static_cast<double>(dim); }
  /// HLS lower critical exponent (N+alpha)/N.
  double p_lower() const { return (n() + alpha) / n(); }
  /// HLS upper critical exponent (N+alpha)/(N-2).
  double p_upper() const { return (n() + alpha) / (n() - 2.0); }
  /// L^2-critical exponent 1+(2+alpha)/N.
  double p_l2crit() const { return 1.0 + (2.0 + alpha) / n(); }
  /// Exponent the leading term of G must stay below for the small-t blow-up
  /// condition: 1+(2+alpha)/N when b=0, 1+(4+alpha)/N when b=1.
  double p_small_t_crit() const { return 1.0 + ((b == 1 ? 4.0 : 2.0) + alpha) / n(); }
};

/// Throws std::invalid_argument naming the violated bound.
inline void check(const ProblemParams& p) {
  if (p.dim < 3) throw std::invalid_argument("ProblemParams: N must be >= 3 (got " + std::to_string(p.dim) + ")");
  if (!(p.alpha > 0.0) || !(p.alpha < p.n())) {
    throw std::invalid_argument("ProblemParams: alpha must satisfy 0 < alpha < N (got " + std::to_string(p.alpha) + ")");
  }
  if (p.b != 0 && p.b != 1) throw std::invalid_argument("ProblemParams: b must be 0 or 1");
  if (!(p.rho > 0.0) || !std::isfinite(p.rho)) throw std::invalid_argument("ProblemParams: rho must be positive");
}

struct PowerTerm {
  double coef = 0.0;
  double exponent = 2.0;
};

/// sup_{t>0} t^p / (t^lo + t^hi) for lo <= p <= hi, by golden-section search
/// on log t over [1e-8, 1e8].
inline double envelope_ratio_sup(double p, double lo, double hi) {
  if (p == lo || p == hi) return 1.0;
  auto objective = [&](double x) { return 1.0 / (std::exp((lo - p) * x) + std::exp((hi - p) * x)); };
  const double inv_phi = (std::sqrt(5.0) - 1.0) / 2.0;
  double a = std::log(1e-8);
  double b = std::log(1e8);
  double c = b - inv_phi * (b - a);
  double d = a + inv_phi * (b - a);
  double fc = objective(c);
  double fd = objective(d);
  while (b - a > 1e-10 * std::max(1.0, std::abs(a) + std::abs(b))) {
    if (fc > fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - inv_phi * (b - a);
      fc = objective(c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + inv_phi * (b - a);
      fd = objective(d);
    }
  }
  return std::max({fc, fd, objective(0.5 * (a + b))});
}

/// F(t) = b|t|^{(N+alpha)/N} + G(t) with G a finite sum of power terms
/// sum_i nu_i |t|^{p_i}.
///
/// Only power sums are representable; any Berestycki-Lions type G that is
/// not of this form needs a new Nonlinearity type with the same eval/envelope
/// surface.
class Nonlinearity {
 public:
  Nonlinearity(const ProblemParams& params, std::vector<PowerTerm> terms)
      : terms_(std::move(terms)),
        b_(params.b),
        p_lower_(params.p_lower()),
        p_upper_(params.p_upper()),
        p_l2crit_(params.p_l2crit()) {
    for (const auto& t : terms_) {
      if (!std::isfinite(t.coef) || !std::isfinite(t.exponent)) {
        throw std::invalid_argument("Nonlinearity: coefficients and exponents must be finite");
      }
      if (!(t.exponent > 1.0)) throw std::invalid_argument("Nonlinearity: exponents must exceed 1");
    }
  }

  const std::vector<PowerTerm>& terms() const { return terms_; }
  int b() const { return b_; }
  double p_lower() const { return p_lower_; }
  double p_upper() const { return p_upper_; }
  double p_l2crit() const { return p_l2crit_; }

  bool exponents_admissible() const {
    return std::all_of(terms_.begin(), terms_.end(),
                       [&](const PowerTerm& t) { return t.exponent > p_lower_ && t.exponent <= p_upper_; });
  }

  double G(double t) const {
    const double a = std::abs(t);
    double s = 0.0;
    for (const auto& term : terms_) s += term.coef * std::pow(a, term.exponent);
    return s;
  }

  double g(double t) const {
    const double a = std::abs(t);
    if (a == 0.0) return 0.0;
    double s = 0.0;
    for (const auto& term : terms_) s += term.coef * term.exponent * std::pow(a, term.exponent - 1.0);
    return t > 0.0 ? s : -s;
  }

  double F(double t) const { return (b_ == 1 ? std::pow(std::abs(t), p_lower_) : 0.0) + G(t); }

  double f(double t) const {
    const double a = std::abs(t);
    if (a == 0.0) return 0.0;
    double s = b_ == 1 ? p_lower_ * std::pow(a, p_lower_ - 1.0) : 0.0;
    for (const auto& term : terms_) s += term.coef * term.exponent * std::pow(a, term.exponent - 1.0);
    return t > 0.0 ? s : -s;
  }

  /// Envelope constant C0 with |G(t)| <= C0 (|t|^p_lower + |t|^p_upper).
  /// Per-term sum of the sharp single-term constants.
  double c0() const {
    if (!c0_) {
      double s = 0.0;
      for (const auto& t : terms_) {
        if (!(t.exponent > p_lower_ && t.exponent <= p_upper_)) {
          std::ostringstream os;
          os << "c_zero: exponent " << t.exponent << " outside (" << p_lower_ << ", " << p_upper_
             << "]; no envelope exists";
          throw std::invalid_argument(os.str());
        }
        s += std::abs(t.coef) * envelope_ratio_sup(t.exponent, p_lower_, p_upper_);
      }
      // Rounded up so the envelope still holds after floating-point evaluation.
      c0_ = s * (1.0 + 8.0 * std::numeric_limits<double>::epsilon());
    }
    return *c0_;
  }

 private:
  std::vector<PowerTerm> terms_;
  int b_;
  double p_lower_;
  double p_upper_;
  double p_l2crit_;
  mutable std::optional<double> c0_;
};

inline double eval_F(const Nonlinearity& nl, double t) { return nl.F(t); }
inline double eval_f(const Nonlinearity& nl, double t) { return nl.f(t); }
inline double c_zero(const Nonlinearity& nl) { return nl.c0(); }

// ---------------------------------------------------------------------------
// Growth-condition validation

struct ConditionResult {
  std::string name;
  bool satisfied = false;
  std::string detail;
  std::optional<double> offending_exponent;
};

struct ValidationReport {
  std::vector<ConditionResult> conditions;

  bool all_satisfied() const {
    return std::all_of(conditions.begin(), conditions.end(), [](const auto& c) { return c.satisfied; });
  }
  const ConditionResult& operator[](std::string_view name) const {
    for (const auto& c : conditions) {
      if (c.name == name) return c;
    }
    throw std::out_of_range("ValidationReport: no condition named " + std::string(name));
  }
};

/// Checks G1 (growth between the HLS exponents), G2 (leading term strictly
/// below the small-t critical exponent with positive coefficient) and G3
/// (G = o(|t|^{(N+alpha)/N}) at 0) for the power family.
inline ValidationReport validate(const ProblemParams& params, const Nonlinearity& nl) {
  check(params);
  ValidationReport report;
  const double lo = params.p_lower();
  const double hi = params.p_upper();

  ConditionResult g1{"G1", true, "all exponents in [p_lower, p_upper]", std::nullopt};
  ConditionResult g3{"G3", true, "all exponents strictly above p_lower", std::nullopt};
  for (const auto& t : nl.terms()) {
    if (t.coef == 0.0) continue;
    if (t.exponent < lo || t.exponent > hi) {
      g1.satisfied = false;
      g1.detail = "exponent outside [p_lower, p_upper]";
      g1.offending_exponent = t.exponent;
    }
    if (!(t.exponent > lo)) {
      g3.satisfied = false;
      g3.detail = "exponent not strictly above p_lower; G/|t|^p_lower does not vanish at 0";
      g3.offending_exponent = t.exponent;
    }
  }

  ConditionResult g2{"G2", false, "", std::nullopt};
  std::optional<double> p_min;
  for (const auto& t : nl.terms()) {
    if (t.coef != 0.0 && (!p_min || t.exponent < *p_min)) p_min = t.exponent;
  }
  const double crit = params.p_small_t_crit();
  if (!p_min) {
    g2.detail = "G has no nonzero term";
  } else {
    double lead = 0.0;
    for (const auto& t : nl.terms()) {
      if (t.exponent == *p_min) lead += t.coef;
    }
    g2.offending_exponent = *p_min;
    if (!(*p_min < crit)) {
      std::ostringstream os;
      os << "smallest exponent " << *p_min << " not below " << crit;
      g2.detail = os.str();
    } else if (!(lead > 0.0)) {
      g2.detail = "coefficient of the smallest exponent is not positive";
    } else {
      g2.satisfied = true;
      g2.detail = "leading term dominates |t|^" + std::to_string(crit) + " at 0";
      g2.offending_exponent.reset();
    }
  }

  report.conditions = {g1, g2, g3};
  return report;
}

// ---------------------------------------------------------------------------
// Text form: "nu1*|t|^p1 + nu2*|t|^p2". Exponents may be written as a/b or
// parenthesized, e.g. "|t|^(5/3)". An empty string or "0" gives G = 0.

namespace detail {

class TermParser {
 public:
  explicit TermParser(std::string_view s) : s_(s) {}

  std::vector<PowerTerm> parse() {
    std::vector<PowerTerm> out;
    skip_ws();
    if (at_end()) return out;
    if (s_.substr(pos_) == "0") return out;
    double sign = 1.0;
    if (peek() == '-' || peek() == '+') sign = take() == '-' ? -1.0 : 1.0;
    for (;;) {
      out.push_back(term(sign));
      skip_ws();
      if (at_end()) break;
      const char op = take();
      if (op != '+' && op != '-') fail("expected '+' or '-'");
      sign = op == '-' ? -1.0 : 1.0;
    }
    return out;
  }

 private:
  PowerTerm term(double sign) {
    skip_ws();
    double coef = 1.0;
    if (peek() != '|') {
      coef = number();
      skip_ws();
      if (peek() == '*') {
        take();
        skip_ws();
      } else {
        fail("expected '*' between coefficient and |t|");
      }
    }
    expect("|t|");
    skip_ws();
    if (take() != '^') fail("expected '^' after |t|");
    skip_ws();
    double exponent = 0.0;
    if (peek() == '(') {
      take();
      exponent = rational();
      skip_ws();
      if (take() != ')') fail("expected ')'");
    } else {
      exponent = rational();
    }
    return {sign * coef, exponent};
  }

  double rational() {
    const double num = number();
    skip_ws();
    if (peek() == '/') {
      take();
      const double den = number();
      if (den == 0.0) fail("zero denominator");
      return num / den;
    }
    return num;
  }

  double number() {
    skip_ws();
    const std::size_t start = pos_;
    if (peek() == '-' || peek() == '+') ++pos_;
    while (!at_end() && (std::isdigit(static_cast<unsigned char>(peek())) || peek() == '.' || peek() == 'e' ||
                         peek() == 'E' ||
                         ((peek() == '-' || peek() == '+') && (s_[pos_ - 1] == 'e' || s_[pos_ - 1] == 'E')))) {
      ++pos_;
    }
    if (pos_ == start) fail("expected a number");
    try {
      return std::stod(std::string(s_.substr(start, pos_ - start)));
    } catch (const std::logic_error&) {
      fail("malformed number");
    }
  }

  void expect(std::string_view tok) {
    skip_ws();
    if (s_.substr(pos_, tok.size()) != tok) fail("expected '" + std::string(tok) + "'");
    pos_ += tok.size();
  }
  void skip_ws() {
    while (!at_end() && std::isspace(static_cast<unsigned char>(s_[pos_]))) ++pos_;
  }
  bool at_end() const { return pos_ >= s_.size(); }
  char peek() const { return at_end() ? '\0' : s_[pos_]; }
  char take() { return at_end() ? '\0' : s_[pos_++]; }
  [[noreturn]] void fail(const std::string& what) const {
    throw std::invalid_argument("parse_terms: " + what + " at position " + std::to_string(pos_) + " in \"" +
                                std::string(s_) + "\"");
  }

  std::string_view s_;
  std::size_t pos_ = 0;
};

}  // namespace detail

inline std::vector<PowerTerm> parse_terms(std::string_view text) { return detail::TermParser(text).parse(); }

inline std::string format_terms(const std::vector<PowerTerm>& terms) {
  if (terms.empty()) return "0";
  std::ostringstream os;
  os.precision(17);
  for (std::size_t i = 0; i < terms.size(); ++i) {
    const double c = terms[i].coef;
    if (i == 0) {
      os << c;
    } else {
      os << (c < 0 ? " - " : " + ") << std::abs(c);
    }
    os << "*|t|^" << terms[i].exponent;
  }
  return os.str();
}

// ---------------------------------------------------------------------------
// Two-power family nu|t|^p + mu|t|^q with p < 1+(2+alpha)/N < q <= p_upper and
// N(p+q)/2 - N - alpha = 2.

struct TwoPowerPreset {
  ProblemParams params;
  std::vector<PowerTerm> terms;
};

/// Reference instance used throughout the tests and the acceptance suite:
/// N=3, alpha=2, b=1, G = 256|t|^2 + |t|^{8/3}. The large subcritical
/// coefficient keeps the local minimizer well inside a box of side 24.
inline TwoPowerPreset reference_preset() {
  TwoPowerPreset p;
  p.params = ProblemParams{3, 2.0, 1, 1.0};
  p.terms = {{256.0, 2.0}, {1.0, 8.0 / 3.0}};
  return p;
}

/// True when (p, q) satisfy the exponent relations of the two-power family.
inline bool is_two_power_family(const ProblemParams& params, double p, double q, double tol = 1e-12) {
  const double n = params.n();
  return p > params.p_lower() && p < params.p_l2crit() && q > params.p_l2crit() && q <= params.p_upper() &&
         std::abs(0.5 * n * (p + q) - n - params.alpha - 2.0) < tol;
}

}  // namespace choquard

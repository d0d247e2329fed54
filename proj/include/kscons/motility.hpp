#pragma once

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

#include "kscons/grid.hpp"

namespace kscons {

class MotilityError : public Error {
 public:
  using Error::Error;
};

// gamma(s) = sum_i coefficient_i * s^exponent_i, every exponent >= 1.
struct PowerTerm {
  double coefficient = 1.0;
  double exponent = 1.0;
};

// Cubic Hermite interpolant through (s_k, gamma_k) with the supplied
// derivative table gamma'_k. Beyond the last knot gamma is continued by its
// tangent line, so gamma' stays continuous and equals gamma'_last there.
struct MotilityTable {
  std::vector<double> s;
  std::vector<double> gamma;
  std::vector<double> gamma_prime;
};

// Motility function gamma in C^1([0, inf)) with gamma(0) = 0 and gamma > 0 on
// (0, inf). Validated at construction by sampling 4096 points on [0, s_max].
class Motility {
 public:
  static constexpr int kSamples = 4096;

  static Motility power(double alpha, double s_max = 1.0) {
    return Motility(std::vector<PowerTerm>{{1.0, alpha}}, s_max);
  }
  static Motility power_sum(std::vector<PowerTerm> terms, double s_max = 1.0) {
    return Motility(std::move(terms), s_max);
  }
  static Motility table(MotilityTable t) { return Motility(std::move(t)); }

  // CSV columns s, gamma, gamma_prime; an optional non-numeric header row.
  static Motility table_from_csv(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw MotilityError("cannot open motility table: " + path);
    MotilityTable t;
    std::string line;
    int lineno = 0;
    while (std::getline(is, line)) {
      ++lineno;
      if (line.empty() || line[0] == '#') continue;
      std::istringstream ls(line);
      std::string a, b, c;
      if (!std::getline(ls, a, ',') || !std::getline(ls, b, ',') || !std::getline(ls, c, ','))
        throw MotilityError(path + ":" + std::to_string(lineno) + ": expected columns s,gamma,gamma_prime");
      try {
        t.s.push_back(std::stod(a));
        t.gamma.push_back(std::stod(b));
        t.gamma_prime.push_back(std::stod(c));
      } catch (const std::exception&) {
        if (lineno == 1 && t.s.empty()) continue;  // header
        throw MotilityError(path + ":" + std::to_string(lineno) + ": malformed number");
      }
    }
    return table(std::move(t));
  }

  double gamma(double s) const {
    check_arg(s);
    return std::visit([s](const auto& r) { return eval(r, s); }, rep_);
  }

  double gamma_prime(double s) const {
    check_arg(s);
    return std::visit([s](const auto& r) { return eval_prime(r, s); }, rep_);
  }

  // sup |gamma'| over [0, v_max].
  double sup_gamma_prime(double v_max) const {
    if (v_max <= 0.0) return std::abs(gamma_prime(0.0));
    if (const auto* terms = std::get_if<std::vector<PowerTerm>>(&rep_); terms && all_positive(*terms))
      return eval_prime(*terms, v_max);  // gamma' nondecreasing
    return scan_max([this](double s) { return std::abs(gamma_prime(s)); }, v_max);
  }

  // sup gamma over [0, v_max]; enters the explicit stability bound.
  double sup_gamma(double v_max) const {
    if (v_max <= 0.0) return 0.0;
    if (const auto* terms = std::get_if<std::vector<PowerTerm>>(&rep_); terms && all_positive(*terms))
      return eval(*terms, v_max);  // gamma nondecreasing
    return scan_max([this](double s) { return gamma(s); }, v_max);
  }

  bool is_table() const { return std::holds_alternative<MotilityTable>(rep_); }
  const std::vector<PowerTerm>* terms() const { return std::get_if<std::vector<PowerTerm>>(&rep_); }

  // Fast path for the per-cell evaluation inside the time step.
  bool is_linear() const {
    const auto* t = terms();
    return t && t->size() == 1 && (*t)[0].coefficient == 1.0 && (*t)[0].exponent == 1.0;
  }

  std::string describe() const {
    std::ostringstream os;
    if (const auto* t = terms()) {
      os << "power_sum[";
      for (std::size_t i = 0; i < t->size(); ++i)
        os << (i ? "," : "") << (*t)[i].coefficient << "*s^" << (*t)[i].exponent;
      os << "]";
    } else {
      os << "table[" << std::get<MotilityTable>(rep_).s.size() << " knots]";
    }
    return os.str();
  }

 private:
  using Rep = std::variant<std::vector<PowerTerm>, MotilityTable>;

  explicit Motility(std::vector<PowerTerm> terms, double s_max) : rep_(std::move(terms)) {
    const auto& t = std::get<std::vector<PowerTerm>>(rep_);
    if (t.empty()) throw MotilityError("motility needs at least one power term");
    for (const auto& term : t) {
      if (!std::isfinite(term.coefficient) || !std::isfinite(term.exponent))
        throw MotilityError("motility power term must be finite");
      if (term.exponent < 1.0)
        throw MotilityError("motility exponent must be >= 1 (gamma must be C^1 on [0,inf) with gamma(0) = 0)");
    }
    validate(s_max);
  }

  explicit Motility(MotilityTable t) : rep_(std::move(t)) {
    const auto& tab = std::get<MotilityTable>(rep_);
    const std::size_t n = tab.s.size();
    if (n < 2 || tab.gamma.size() != n || tab.gamma_prime.size() != n)
      throw MotilityError("motility table needs >= 2 rows with s, gamma, gamma_prime");
    if (tab.s[0] != 0.0) throw MotilityError("motility table must start at s = 0");
    for (std::size_t k = 1; k < n; ++k)
      if (!(tab.s[k] > tab.s[k - 1])) throw MotilityError("motility table abscissae must be strictly increasing");
    for (std::size_t k = 0; k < n; ++k)
      if (!std::isfinite(tab.gamma[k]) || !std::isfinite(tab.gamma_prime[k]))
        throw MotilityError("motility table contains non-finite values");
    validate(tab.s.back());
  }

  void validate(double s_max) const {
    const double g0 = gamma(0.0);
    if (g0 != 0.0)
      throw MotilityError("motility must vanish at zero (gamma(0) = " + std::to_string(g0) +
                          "); the non-degenerate case gamma(0) > 0 is not supported");
    if (!(s_max > 0.0)) s_max = 1.0;
    for (int k = 1; k <= kSamples; ++k) {
      const double s = s_max * k / kSamples;
      const double g = gamma(s);
      if (!(g > 0.0) || !std::isfinite(g))
        throw MotilityError("motility must be positive on (0, inf); gamma(" + std::to_string(s) +
                            ") = " + std::to_string(g));
      if (!std::isfinite(gamma_prime(s))) throw MotilityError("motility derivative is not finite");
    }
  }

  static void check_arg(double s) {
    if (!(s >= 0.0)) throw MotilityError("motility evaluated at negative argument " + std::to_string(s));
  }

  static bool all_positive(const std::vector<PowerTerm>& t) {
    return std::all_of(t.begin(), t.end(), [](const PowerTerm& p) { return p.coefficient > 0.0; });
  }

  static double eval(const std::vector<PowerTerm>& t, double s) {
    double g = 0.0;
    for (const auto& p : t) g += p.coefficient * (p.exponent == 1.0 ? s : std::pow(s, p.exponent));
    return g;
  }

  static double eval_prime(const std::vector<PowerTerm>& t, double s) {
    double g = 0.0;
    for (const auto& p : t)
      g += p.coefficient * (p.exponent == 1.0 ? 1.0 : p.exponent * std::pow(s, p.exponent - 1.0));
    return g;
  }

  // Locates the knot interval [s_k, s_{k+1}] containing s.
  static std::size_t interval(const MotilityTable& t, double s) {
    const auto it = std::upper_bound(t.s.begin(), t.s.end(), s);
    const std::size_t k = static_cast<std::size_t>(it - t.s.begin());
    return std::min(k == 0 ? 0 : k - 1, t.s.size() - 2);
  }

  static double eval(const MotilityTable& t, double s) {
    if (s >= t.s.back()) return t.gamma.back() + t.gamma_prime.back() * (s - t.s.back());
    const std::size_t k = interval(t, s);
    const double h = t.s[k + 1] - t.s[k];
    const double x = (s - t.s[k]) / h;
    const double h00 = (1 + 2 * x) * (1 - x) * (1 - x);
    const double h10 = x * (1 - x) * (1 - x);
    const double h01 = x * x * (3 - 2 * x);
    const double h11 = x * x * (x - 1);
    return h00 * t.gamma[k] + h10 * h * t.gamma_prime[k] + h01 * t.gamma[k + 1] + h11 * h * t.gamma_prime[k + 1];
  }

  static double eval_prime(const MotilityTable& t, double s) {
    if (s >= t.s.back()) return t.gamma_prime.back();
    const std::size_t k = interval(t, s);
    const double h = t.s[k + 1] - t.s[k];
    const double x = (s - t.s[k]) / h;
    const double d00 = 6 * x * (x - 1) / h;
    const double d10 = (1 - x) * (1 - 3 * x);
    const double d01 = -d00;
    const double d11 = x * (3 * x - 2);
    return d00 * t.gamma[k] + d10 * t.gamma_prime[k] + d01 * t.gamma[k + 1] + d11 * t.gamma_prime[k + 1];
  }

  // Max of f over [0, v] by a uniform scan followed by golden-section
  // refinement around the best sample.
  template <class F>
  static double scan_max(F&& f, double v) {
    int best = 0;
    double best_val = f(0.0);
    const double step = v / kSamples;
    for (int k = 1; k <= kSamples; ++k) {
      const double val = f(step * k);
      if (val > best_val) {
        best_val = val;
        best = k;
      }
    }
    double a = std::max(0.0, step * (best - 1));
    double b = std::min(v, step * (best + 1));
    const double r = 0.5 * (std::sqrt(5.0) - 1.0);
    double c = b - r * (b - a);
    double d = a + r * (b - a);
    double fc = f(c), fd = f(d);
    for (int it = 0; it < 60 && b - a > 1e-15 * std::max(1.0, v); ++it) {
      if (fc > fd) {
        b = d;
        d = c;
        fd = fc;
        c = b - r * (b - a);
        fc = f(c);
      } else {
        a = c;
        c = d;
        fc = fd;
        d = a + r * (b - a);
        fd = f(d);
      }
    }
    return std::max({best_val, fc, fd, f(a), f(b)});
  }

  Rep rep_;
};

}  // namespace kscons

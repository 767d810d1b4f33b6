#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <optional>
#include <stdexcept>
#include <ostream>
#include <string>
#include <variant>
#include <vector>

#include <Eigen/Core>
#include <Eigen/SparseCore>

// Structured description of a smooth convex program
//
//   minimize f0(x)  subject to  A x = b,  f_i(x) <= 0,
//
// where every f is an affine part plus a sum of terms from a small library of
// convex atoms with hand-derived gradients and Hessians.

namespace uavee {

using Eigen::VectorXd;
using SparseMatrix = Eigen::SparseMatrix<double>;
using Triplet = Eigen::Triplet<double>;

namespace terms {

/// w * ((x_i - c_i)^2 + (x_j - c_j)^2); j < 0 gives the one-dimensional form.
struct SquaredNorm {
  int i = -1, j = -1;
  double ci = 0.0, cj = 0.0;
  double w = 1.0;
};

/// w * (x_i^2 + x_j^2)^(3/2)
struct NormCubed {
  int i = -1, j = -1;
  double w = 1.0;
};

/// w * (1 + (x_i^2 + x_j^2) / g^2) / x_k, convex for x_k > 0.
struct QuadOverLinear {
  int i = -1, j = -1, k = -1;
  double g = 1.0;
  double w = 1.0;
};

/// w / x_i, convex for x_i > 0 (w >= 0).
struct Reciprocal {
  int i = -1;
  double w = 1.0;
};

/// -w log(x_i - offset), convex for x_i > offset (w >= 0).
struct NegLog {
  int i = -1;
  double offset = 0.0;
  double w = 1.0;
};

inline constexpr int kMaxTermVars = 8;

/// w log(sum_k c_k / x_k) over up to kMaxTermVars variables, convex for
/// x_k > 0 and c_k > 0 (w >= 0).
struct LogSumReciprocal {
  std::array<int, kMaxTermVars> idx{};
  std::array<double, kMaxTermVars> c{};
  int count = 0;
  double w = 1.0;

  LogSumReciprocal& add(int i, double coeff) {
    if (count >= kMaxTermVars) throw std::invalid_argument("LogSumReciprocal: too many variables");
    idx[count] = i;
    c[count] = coeff;
    ++count;
    return *this;
  }
};

}  // namespace terms

using Term = std::variant<terms::SquaredNorm, terms::NormCubed, terms::QuadOverLinear, terms::Reciprocal,
                          terms::NegLog, terms::LogSumReciprocal>;

/// Local derivative data of one term.
struct TermDerivs {
  std::array<int, terms::kMaxTermVars> idx{};
  int size = 0;
  double value = 0.0;
  std::array<double, terms::kMaxTermVars> grad{};
  std::array<std::array<double, terms::kMaxTermVars>, terms::kMaxTermVars> hess{};
};

inline bool term_in_domain(const Term& term, const VectorXd& x) {
  if (const auto* t = std::get_if<terms::QuadOverLinear>(&term)) return x[t->k] > 0.0;
  if (const auto* t = std::get_if<terms::Reciprocal>(&term)) return x[t->i] > 0.0;
  if (const auto* t = std::get_if<terms::NegLog>(&term)) return x[t->i] > t->offset;
  if (const auto* t = std::get_if<terms::LogSumReciprocal>(&term)) {
    for (int k = 0; k < t->count; ++k)
      if (!(x[t->idx[k]] > 0.0)) return false;
  }
  return true;
}

inline double term_value(const Term& term, const VectorXd& x) {
  return std::visit(
      [&x](const auto& t) -> double {
        using T = std::decay_t<decltype(t)>;
        if constexpr (std::is_same_v<T, terms::SquaredNorm>) {
          double s = (x[t.i] - t.ci) * (x[t.i] - t.ci);
          if (t.j >= 0) s += (x[t.j] - t.cj) * (x[t.j] - t.cj);
          return t.w * s;
        } else if constexpr (std::is_same_v<T, terms::NormCubed>) {
          const double r = std::hypot(x[t.i], x[t.j]);
          return t.w * r * r * r;
        } else if constexpr (std::is_same_v<T, terms::QuadOverLinear>) {
          const double u = 1.0 + (x[t.i] * x[t.i] + x[t.j] * x[t.j]) / (t.g * t.g);
          return t.w * u / x[t.k];
        } else if constexpr (std::is_same_v<T, terms::Reciprocal>) {
          return t.w / x[t.i];
        } else if constexpr (std::is_same_v<T, terms::NegLog>) {
          return -t.w * std::log(x[t.i] - t.offset);
        } else {
          double sum = 0.0;
          for (int k = 0; k < t.count; ++k) sum += t.c[k] / x[t.idx[k]];
          return t.w * std::log(sum);
        }
      },
      term);
}

inline TermDerivs term_derivs(const Term& term, const VectorXd& x) {
  TermDerivs d;
  std::visit(
      [&](const auto& t) {
        using T = std::decay_t<decltype(t)>;
        if constexpr (std::is_same_v<T, terms::SquaredNorm>) {
          const double ei = x[t.i] - t.ci;
          d.idx[0] = t.i;
          d.size = 1;
          d.value = ei * ei;
          d.grad[0] = 2.0 * t.w * ei;
          d.hess[0][0] = 2.0 * t.w;
          if (t.j >= 0) {
            const double ej = x[t.j] - t.cj;
            d.idx[1] = t.j;
            d.size = 2;
            d.value += ej * ej;
            d.grad[1] = 2.0 * t.w * ej;
            d.hess[1][1] = 2.0 * t.w;
          }
          d.value *= t.w;
        } else if constexpr (std::is_same_v<T, terms::NormCubed>) {
          const double a = x[t.i], b = x[t.j];
          const double r = std::hypot(a, b);
          d.idx[0] = t.i;
          d.idx[1] = t.j;
          d.size = 2;
          d.value = t.w * r * r * r;
          d.grad[0] = 3.0 * t.w * r * a;
          d.grad[1] = 3.0 * t.w * r * b;
          // 3w (r I + x x^T / r); the x x^T / r part vanishes continuously at r = 0.
          const double inv_r = r > 0.0 ? 1.0 / r : 0.0;
          d.hess[0][0] = 3.0 * t.w * (r + a * a * inv_r);
          d.hess[1][1] = 3.0 * t.w * (r + b * b * inv_r);
          d.hess[0][1] = d.hess[1][0] = 3.0 * t.w * a * b * inv_r;
        } else if constexpr (std::is_same_v<T, terms::QuadOverLinear>) {
          const double a = x[t.i], b = x[t.j], s = x[t.k];
          const double g2 = t.g * t.g;
          const double u = 1.0 + (a * a + b * b) / g2;
          d.idx[0] = t.i;
          d.idx[1] = t.j;
          d.idx[2] = t.k;
          d.size = 3;
          d.value = t.w * u / s;
          d.grad[0] = 2.0 * t.w * a / (g2 * s);
          d.grad[1] = 2.0 * t.w * b / (g2 * s);
          d.grad[2] = -t.w * u / (s * s);
          d.hess[0][0] = d.hess[1][1] = 2.0 * t.w / (g2 * s);
          d.hess[0][2] = d.hess[2][0] = -2.0 * t.w * a / (g2 * s * s);
          d.hess[1][2] = d.hess[2][1] = -2.0 * t.w * b / (g2 * s * s);
          d.hess[2][2] = 2.0 * t.w * u / (s * s * s);
        } else if constexpr (std::is_same_v<T, terms::Reciprocal>) {
          const double s = x[t.i];
          d.idx[0] = t.i;
          d.size = 1;
          d.value = t.w / s;
          d.grad[0] = -t.w / (s * s);
          d.hess[0][0] = 2.0 * t.w / (s * s * s);
        } else if constexpr (std::is_same_v<T, terms::NegLog>) {
          const double s = x[t.i] - t.offset;
          d.idx[0] = t.i;
          d.size = 1;
          d.value = -t.w * std::log(s);
          d.grad[0] = -t.w / s;
          d.hess[0][0] = t.w / (s * s);
        } else {
          // S = sum u_k with u_k = c_k / x_k:  dS/dx_k = -u_k / x_k,  d2S/dx_k^2 = 2 u_k / x_k^2.
          double sum = 0.0;
          std::array<double, terms::kMaxTermVars> u{}, du{};
          for (int k = 0; k < t.count; ++k) {
            const double xk = x[t.idx[k]];
            u[k] = t.c[k] / xk;
            du[k] = -u[k] / xk;
            sum += u[k];
          }
          d.size = t.count;
          d.value = t.w * std::log(sum);
          for (int k = 0; k < t.count; ++k) {
            const double xk = x[t.idx[k]];
            d.idx[k] = t.idx[k];
            d.grad[k] = t.w * du[k] / sum;
            for (int j = 0; j < t.count; ++j) d.hess[k][j] = -t.w * du[k] * du[j] / (sum * sum);
            d.hess[k][k] += t.w * 2.0 * u[k] / (xk * xk * sum);
          }
        }
      },
      term);
  return d;
}

inline std::vector<int> term_variables(const Term& term) {
  return std::visit(
      [](const auto& t) -> std::vector<int> {
        using T = std::decay_t<decltype(t)>;
        if constexpr (std::is_same_v<T, terms::Reciprocal> || std::is_same_v<T, terms::NegLog>) {
          return {t.i};
        } else if constexpr (std::is_same_v<T, terms::LogSumReciprocal>) {
          return std::vector<int>(t.idx.begin(), t.idx.begin() + t.count);
        } else if constexpr (std::is_same_v<T, terms::QuadOverLinear>) {
          return {t.i, t.j, t.k};
        } else if constexpr (std::is_same_v<T, terms::SquaredNorm>) {
          if (t.j < 0) return {t.i};
          return {t.i, t.j};
        } else {
          return {t.i, t.j};
        }
      },
      term);
}

inline Term scaled_term(Term term, double factor) {
  std::visit([factor](auto& t) { t.w *= factor; }, term);
  return term;
}

inline std::string describe_term(const Term& term) {
  return std::visit(
      [](const auto& t) -> std::string {
        using T = std::decay_t<decltype(t)>;
        auto var = [](int i) { return "x" + std::to_string(i); };
        if constexpr (std::is_same_v<T, terms::SquaredNorm>) {
          std::string s = std::to_string(t.w) + "*((" + var(t.i) + "-" + std::to_string(t.ci) + ")^2";
          if (t.j >= 0) s += "+(" + var(t.j) + "-" + std::to_string(t.cj) + ")^2";
          return s + ")";
        } else if constexpr (std::is_same_v<T, terms::NormCubed>) {
          return std::to_string(t.w) + "*|(" + var(t.i) + "," + var(t.j) + ")|^3";
        } else if constexpr (std::is_same_v<T, terms::QuadOverLinear>) {
          return std::to_string(t.w) + "*(1+|(" + var(t.i) + "," + var(t.j) + ")|^2/" +
                 std::to_string(t.g * t.g) + ")/" + var(t.k);
        } else if constexpr (std::is_same_v<T, terms::Reciprocal>) {
          return std::to_string(t.w) + "/" + var(t.i);
        } else if constexpr (std::is_same_v<T, terms::NegLog>) {
          return "-" + std::to_string(t.w) + "*log(" + var(t.i) + "-" + std::to_string(t.offset) + ")";
        } else {
          std::string s = std::to_string(t.w) + "*log(";
          for (int k = 0; k < t.count; ++k)
            s += (k ? "+" : "") + std::to_string(t.c[k]) + "/" + var(t.idx[k]);
          return s + ")";
        }
      },
      term);
}

/// constant + sum_k c_k x_k + sum of convex terms.
struct SmoothFunction {
  double constant = 0.0;
  std::vector<std::pair<int, double>> linear;
  std::vector<Term> terms;

  SmoothFunction& add_linear(int i, double c) {
    linear.emplace_back(i, c);
    return *this;
  }
  SmoothFunction& add_term(Term t) {
    terms.push_back(std::move(t));
    return *this;
  }
  /// this += w * other
  SmoothFunction& accumulate(const SmoothFunction& other, double w) {
    constant += w * other.constant;
    for (const auto& [i, c] : other.linear) linear.emplace_back(i, w * c);
    for (const auto& t : other.terms) terms.push_back(scaled_term(t, w));
    return *this;
  }

  bool is_affine() const { return terms.empty(); }

  bool in_domain(const VectorXd& x) const {
    return std::all_of(terms.begin(), terms.end(), [&x](const Term& t) { return term_in_domain(t, x); });
  }

  double value(const VectorXd& x) const {
    double v = constant;
    for (const auto& [i, c] : linear) v += c * x[i];
    for (const auto& t : terms) v += term_value(t, x);
    return v;
  }

  /// g += w * grad f(x)
  void add_gradient(const VectorXd& x, double w, VectorXd& g) const {
    for (const auto& [i, c] : linear) g[i] += w * c;
    for (const auto& t : terms) {
      const auto d = term_derivs(t, x);
      for (int a = 0; a < d.size; ++a) g[d.idx[a]] += w * d.grad[a];
    }
  }

  /// Appends w * Hessian entries (full symmetric storage).
  void add_hessian(const VectorXd& x, double w, std::vector<Triplet>& h) const {
    for (const auto& t : terms) {
      const auto d = term_derivs(t, x);
      for (int a = 0; a < d.size; ++a)
        for (int b = 0; b < d.size; ++b) h.emplace_back(d.idx[a], d.idx[b], w * d.hess[a][b]);
    }
  }

  /// Sorted, de-duplicated variable indices the function depends on.
  std::vector<int> support() const {
    std::vector<int> s;
    for (const auto& [i, c] : linear) s.push_back(i);
    for (const auto& t : terms)
      for (int i : term_variables(t)) s.push_back(i);
    std::sort(s.begin(), s.end());
    s.erase(std::unique(s.begin(), s.end()), s.end());
    return s;
  }

  std::string describe() const {
    std::string s = std::to_string(constant);
    for (const auto& [i, c] : linear) s += " + " + std::to_string(c) + "*x" + std::to_string(i);
    for (const auto& t : terms) s += " + " + describe_term(t);
    return s;
  }
};

struct ConvexProgram {
  int num_vars = 0;
  SmoothFunction objective;  // minimized
  SparseMatrix A;            // equality rows
  VectorXd b;
  std::vector<SmoothFunction> inequalities;  // each f_i(x) <= 0
  std::vector<std::string> inequality_labels;  // optional, parallel to inequalities
  std::vector<std::string> variable_names;     // optional
  std::optional<VectorXd> initial_point;       // strictly feasible for the inequalities

  int num_equalities() const { return static_cast<int>(A.rows()); }
  int num_inequalities() const { return static_cast<int>(inequalities.size()); }

  /// Largest inequality value at x (negative means strictly feasible).
  double max_inequality(const VectorXd& x) const {
    double m = -std::numeric_limits<double>::infinity();
    for (const auto& f : inequalities) m = std::max(m, f.in_domain(x) ? f.value(x) : std::numeric_limits<double>::infinity());
    return m;
  }

  bool strictly_feasible(const VectorXd& x) const {
    for (const auto& f : inequalities)
      if (!f.in_domain(x) || !(f.value(x) < 0.0)) return false;
    return objective.in_domain(x);
  }

  /// Text dump for inspection: variable layout, objective, equalities and
  /// inequalities, one per line.
  void dump(std::ostream& os) const {
    os << "variables " << num_vars << '\n';
    for (int i = 0; i < static_cast<int>(variable_names.size()); ++i)
      os << "  x" << i << " = " << variable_names[i] << '\n';
    os << "minimize " << objective.describe() << '\n';
    os << "equalities " << A.rows() << '\n';
    SparseMatrix rows = A;  // column-major; gather per row for readability
    std::vector<std::string> text(A.rows());
    for (int k = 0; k < rows.outerSize(); ++k)
      for (SparseMatrix::InnerIterator it(rows, k); it; ++it)
        text[it.row()] += " + " + std::to_string(it.value()) + "*x" + std::to_string(it.col());
    for (int r = 0; r < A.rows(); ++r) os << "  " << text[r] << " = " << b[r] << '\n';
    os << "inequalities " << inequalities.size() << '\n';
    for (std::size_t i = 0; i < inequalities.size(); ++i) {
      os << "  ";
      if (i < inequality_labels.size()) os << "[" << inequality_labels[i] << "] ";
      os << inequalities[i].describe() << " <= 0\n";
    }
  }
};

}  // namespace uavee

#pragma once

// Open-circuit potential curve: tabulated (stoichiometry, potential) knots
// with a shape-preserving monotone cubic interpolant (Fritsch-Carlson slopes)
// so both U(x) and dU/dx are continuous — the slope feeds the parameter
// sensitivities. A piecewise-linear mode is kept for tests. Evaluation is
// strictly confined to the knot range; out-of-range stoichiometry is an
// error, never extrapolation. eval_clamped() exists solely for soft-penalty
// design evaluations that must survive bad candidates.

#include <algorithm>
#include <cmath>
#include <string>
#include <utility>
#include <vector>

#include "sohkit/common.hpp"
#include "sohkit/csv.hpp"

namespace sohkit {

enum class OcpInterpolation { monotone_cubic, linear };

class OcpCurve {
 public:
  struct Eval {
    double value;  // U(x), V
    double slope;  // dU/dx, V per unit stoichiometry
  };

  OcpCurve() = default;

  OcpCurve(std::string tag, std::vector<double> x, std::vector<double> u,
           OcpInterpolation rule = OcpInterpolation::monotone_cubic)
      : tag_(std::move(tag)), x_(std::move(x)), u_(std::move(u)), rule_(rule) {
    if (x_.size() < 2) throw Error("OCP curve '" + tag_ + "' needs at least 2 knots");
    if (x_.size() != u_.size())
      throw Error("OCP curve '" + tag_ + "': knot x/U column length mismatch");
    for (size_t i = 0; i + 1 < x_.size(); ++i)
      if (!(x_[i] < x_[i + 1]))
        throw Error("OCP curve '" + tag_ + "': knot x values must be strictly increasing (index " +
                    std::to_string(i + 1) + ")");
    for (double v : x_)
      if (!std::isfinite(v)) throw Error("OCP curve '" + tag_ + "': non-finite knot x");
    for (double v : u_)
      if (!std::isfinite(v)) throw Error("OCP curve '" + tag_ + "': non-finite knot potential");
    if (rule_ == OcpInterpolation::monotone_cubic) compute_slopes();
  }

  static OcpCurve from_csv(const std::string& path, std::string tag,
                           OcpInterpolation rule = OcpInterpolation::monotone_cubic) {
    CsvTable t = load_csv(path);
    const size_t cx = t.column_index("x");
    const size_t cu = t.column_index("U_volts");
    std::vector<double> x, u;
    x.reserve(t.rows.size());
    u.reserve(t.rows.size());
    for (const auto& row : t.rows) {
      x.push_back(row[cx]);
      u.push_back(row[cu]);
    }
    return OcpCurve(std::move(tag), std::move(x), std::move(u), rule);
  }

  const std::string& tag() const { return tag_; }
  OcpInterpolation rule() const { return rule_; }
  double x_min() const { return x_.front(); }
  double x_max() const { return x_.back(); }
  const std::vector<double>& knots_x() const { return x_; }
  const std::vector<double>& knots_u() const { return u_; }

  Eval eval(double x) const {
    if (!(x >= x_.front() && x <= x_.back()))
      throw Error("OCP curve '" + tag_ + "': stoichiometry " + format_sig(x) +
                  " outside knot range [" + format_sig(x_.front()) + ", " +
                  format_sig(x_.back()) + "]");
    return eval_in_range(x);
  }

  // Clamps x into the knot range first. Only for penalty-based design search;
  // physical simulation uses the strict eval().
  Eval eval_clamped(double x) const {
    return eval_in_range(std::clamp(x, x_.front(), x_.back()));
  }

 private:
  Eval eval_in_range(double x) const {
    // interval index i with x in [x_i, x_{i+1}]; last knot maps to last interval
    size_t i = static_cast<size_t>(std::upper_bound(x_.begin(), x_.end(), x) - x_.begin());
    if (i > 0) --i;
    if (i + 1 >= x_.size()) i = x_.size() - 2;

    const double h = x_[i + 1] - x_[i];
    if (rule_ == OcpInterpolation::linear) {
      const double d = (u_[i + 1] - u_[i]) / h;
      return {u_[i] + d * (x - x_[i]), d};
    }
    const double t = (x - x_[i]) / h;
    const double t2 = t * t;
    const double t3 = t2 * t;
    const double h00 = 2 * t3 - 3 * t2 + 1;
    const double h10 = t3 - 2 * t2 + t;
    const double h01 = -2 * t3 + 3 * t2;
    const double h11 = t3 - t2;
    const double value = h00 * u_[i] + h10 * h * m_[i] + h01 * u_[i + 1] + h11 * h * m_[i + 1];
    const double dh00 = 6 * t2 - 6 * t;
    const double dh10 = 3 * t2 - 4 * t + 1;
    const double dh01 = -6 * t2 + 6 * t;
    const double dh11 = 3 * t2 - 2 * t;
    const double slope =
        (dh00 * u_[i] + dh01 * u_[i + 1]) / h + dh10 * m_[i] + dh11 * m_[i + 1];
    return {value, slope};
  }

  void compute_slopes() {
    const size_t n = x_.size();
    std::vector<double> hseg(n - 1), d(n - 1);
    for (size_t i = 0; i + 1 < n; ++i) {
      hseg[i] = x_[i + 1] - x_[i];
      d[i] = (u_[i + 1] - u_[i]) / hseg[i];
    }
    m_.assign(n, 0.0);
    // interior: Fritsch-Carlson weighted harmonic mean of adjacent secants,
    // zero at local extrema — keeps the interpolant monotone piecewise
    for (size_t i = 1; i + 1 < n; ++i) {
      if (d[i - 1] == 0.0 || d[i] == 0.0 || (d[i - 1] > 0) != (d[i] > 0)) {
        m_[i] = 0.0;
      } else {
        const double w1 = 2 * hseg[i] + hseg[i - 1];
        const double w2 = hseg[i] + 2 * hseg[i - 1];
        m_[i] = (w1 + w2) / (w1 / d[i - 1] + w2 / d[i]);
      }
    }
    m_[0] = endpoint_slope(hseg[0], hseg[1 < n - 1 ? 1 : 0], d[0], d[1 < n - 1 ? 1 : 0]);
    m_[n - 1] = endpoint_slope(hseg[n - 2], hseg[n - 2 >= 1 ? n - 3 : n - 2],
                               d[n - 2], d[n - 2 >= 1 ? n - 3 : n - 2]);
  }

  // One-sided three-point endpoint slope with the standard shape-preserving
  // clamps (h0/d0 adjacent to the endpoint, h1/d1 one interval further in).
  static double endpoint_slope(double h0, double h1, double d0, double d1) {
    const double m = ((2 * h0 + h1) * d0 - h0 * d1) / (h0 + h1);
    if (d0 == 0.0 || (m != 0.0 && (m > 0) != (d0 > 0))) return 0.0;
    if ((d0 > 0) != (d1 > 0) && std::abs(m) > 3 * std::abs(d0)) return 3 * d0;
    return m;
  }

  std::string tag_;
  std::vector<double> x_, u_, m_;
  OcpInterpolation rule_ = OcpInterpolation::monotone_cubic;
};

}  // namespace sohkit

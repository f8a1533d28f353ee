#pragma once

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>
#include <algorithm>
#include <array>
#include <cmath>
#include <memory>
#include <vector>

#include "algpde/errors.hpp"
#include "algpde/polynomial.hpp"
#include "algpde/power_series.hpp"

namespace algpde {

// Real roots of c[0] + c[1] x + ... + c[n] x^n via the companion matrix.
inline std::vector<double> real_poly_roots(std::vector<double> c,
                                           double imag_tol = 1e-7) {
  double scale = 0.0;
  for (double v : c) scale = std::max(scale, std::abs(v));
  if (scale == 0.0) return {};
  int n = static_cast<int>(c.size()) - 1;
  while (n > 0 && std::abs(c[n]) <= 1e-12 * scale) --n;
  if (n <= 0) return {};

  Eigen::MatrixXd C = Eigen::MatrixXd::Zero(n, n);
  for (int i = 1; i < n; ++i) C(i, i - 1) = 1.0;
  for (int i = 0; i < n; ++i) C(i, n - 1) = -c[i] / c[n];
  Eigen::EigenSolver<Eigen::MatrixXd> es(C);
  std::vector<double> roots;
  for (int i = 0; i < n; ++i) {
    const auto z = es.eigenvalues()(i);
    if (std::abs(z.imag()) <= imag_tol * (1.0 + std::abs(z.real())))
      roots.push_back(z.real());
  }
  std::sort(roots.begin(), roots.end());
  return roots;
}

// All real solutions of F = F_x = F_y = 0 found by Gauss-Newton iteration
// started from a coarse grid over the box plus any caller-supplied seeds.
inline std::vector<Eigen::Vector2d> find_singular_points(
    const Polynomial& F, const std::array<double, 4>& box, int grid = 24,
    const std::vector<Eigen::Vector2d>& seeds = {}) {
  if (F.nvars() != 2) throw Error("singular point search needs a plane curve");
  const Polynomial Fx = F.derivative(0);
  const Polynomial Fy = F.derivative(1);
  const Polynomial Fxx = Fx.derivative(0);
  const Polynomial Fxy = Fx.derivative(1);
  const Polynomial Fyy = Fy.derivative(1);

  double coeff_scale = 0.0;
  for (const auto& [e, c] : F.terms()) coeff_scale += std::abs(c);
  const double R = std::max({1.0, std::abs(box[0]), std::abs(box[1]),
                             std::abs(box[2]), std::abs(box[3])});
  const double fscale = coeff_scale * std::pow(R, F.total_degree());

  auto resid = [&](const Eigen::Vector2d& p) {
    Eigen::Vector3d r;
    const double xy[2] = {p.x(), p.y()};
    r << F.evaluate(xy), Fx.evaluate(xy), Fy.evaluate(xy);
    return r;
  };

  std::vector<Eigen::Vector2d> starts = seeds;
  for (int i = 0; i <= grid; ++i)
    for (int j = 0; j <= grid; ++j)
      starts.emplace_back(box[0] + (box[1] - box[0]) * i / grid,
                          box[2] + (box[3] - box[2]) * j / grid);

  std::vector<Eigen::Vector2d> found;
  for (Eigen::Vector2d p : starts) {
    Eigen::Vector3d r = resid(p);
    // Roots of this system are typically degenerate (the Jacobian loses rank
    // at any singular point), so convergence is linear; rank-truncated
    // Gauss-Newton steps keep the rate intact all the way down.
    for (int it = 0; it < 220; ++it) {
      const double xy[2] = {p.x(), p.y()};
      Eigen::Matrix<double, 3, 2> J;
      J << Fx.evaluate(xy), Fy.evaluate(xy), Fxx.evaluate(xy), Fxy.evaluate(xy),
          Fxy.evaluate(xy), Fyy.evaluate(xy);
      Eigen::JacobiSVD<Eigen::Matrix<double, 3, 2>> svd(
          J, Eigen::ComputeFullU | Eigen::ComputeFullV);
      svd.setThreshold(1e-13);
      const Eigen::Vector2d step = svd.solve(-r);
      double t = 1.0;
      bool improved = false;
      for (int k = 0; k < 25; ++k, t *= 0.5) {
        Eigen::Vector3d rn = resid(p + t * step);
        if (rn.norm() < r.norm()) {
          p += t * step;
          r = rn;
          improved = true;
          break;
        }
      }
      if (!improved || step.norm() < 1e-15 * (1.0 + p.norm())) break;
    }
    if (r.lpNorm<Eigen::Infinity>() > 1e-11 * fscale) continue;
    if (p.x() < box[0] - 0.1 * R || p.x() > box[1] + 0.1 * R ||
        p.y() < box[2] - 0.1 * R || p.y() > box[3] + 0.1 * R)
      continue;
    bool dup = false;
    for (const auto& q : found)
      if ((p - q).norm() < 1e-6 * R) dup = true;
    if (!dup) found.push_back(p);
  }
  std::sort(found.begin(), found.end(), [](const auto& a, const auto& b) {
    return a.x() != b.x() ? a.x() < b.x() : a.y() < b.y();
  });
  return found;
}

struct BranchTangent {
  Eigen::Vector2d dir;  // unit, normalized into the upper half plane
  int multiplicity;
};

// Tangent directions of the curve branches through p, read off the lowest
// homogeneous part of the recentered polynomial.
inline std::vector<BranchTangent> branch_tangents(const Polynomial& F,
                                                  const Eigen::Vector2d& p,
                                                  double drop_tol = 1e-9) {
  const Polynomial local = F.translated({p.x(), p.y()});
  const Polynomial B = local.lowest_form(drop_tol);
  if (B.is_zero()) throw NumericalError("zero polynomial has no tangent cone");
  const int d = B.total_degree();
  if (d == 0)
    throw NumericalError("tangent cone requested at a point off the curve");

  int px = d, py = d;
  for (const auto& [e, c] : B.terms()) {
    px = std::min(px, e[0]);
    py = std::min(py, e[1]);
  }
  std::vector<BranchTangent> out;
  if (px > 0) out.push_back({{0.0, 1.0}, px});  // line x = 0
  if (py > 0) out.push_back({{1.0, 0.0}, py});  // line y = 0

  const int dt = d - px - py;
  if (dt > 0) {
    std::vector<double> b(dt + 1, 0.0);
    for (const auto& [e, c] : B.terms()) b[e[1] - py] = c;
    std::vector<double> roots = real_poly_roots(b, 1e-6);
    std::size_t i = 0;
    while (i < roots.size()) {
      std::size_t j = i + 1;
      double sum = roots[i];
      while (j < roots.size() &&
             std::abs(roots[j] - roots[i]) < 1e-5 * (1.0 + std::abs(roots[i]))) {
        sum += roots[j];
        ++j;
      }
      const double lam = sum / (j - i);
      Eigen::Vector2d dir(1.0, lam);
      dir.normalize();
      out.push_back({dir, static_cast<int>(j - i)});
      i = j;
    }
  }
  for (auto& t : out)
    if (t.dir.y() < 0.0 || (t.dir.y() == 0.0 && t.dir.x() < 0.0)) t.dir = -t.dir;
  std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) {
    return std::atan2(a.dir.y(), a.dir.x()) < std::atan2(b.dir.y(), b.dir.x());
  });
  return out;
}

// One Puiseux-type branch through a singular point, written in a chart
// parameter s: the power coordinate equals s^m exactly and the other
// coordinate is a lifted power series in s.
class SeriesChart {
 public:
  SeriesChart(Eigen::Vector2d center, int power_var, int m, PowerSeries series,
              double valid_radius)
      : center_(std::move(center)),
        power_var_(power_var),
        m_(m),
        series_(std::move(series)),
        dseries_(series_.derivative()),
        valid_radius_(valid_radius) {
    PowerSeries ds = series_.derivative();
    PowerSeries g = ds * ds + PowerSeries::monomial(series_.order(), 2 * (m - 1),
                                                    static_cast<double>(m) * m);
    const double gs = g.max_abs_coeff();
    if (std::abs(g.coeff(0)) > 1e-9 * gs || std::abs(g.coeff(1)) > 1e-9 * gs)
      throw NumericalError("chart metric does not vanish at the center");
    g2_ = g.coeff(2);
    g4_ = g.coeff(4);
    if (!(g2_ > 0.0)) throw NumericalError("degenerate chart metric");
    dgseries_ = std::make_shared<PowerSeries>(g.derivative());
    gseries_ = std::make_shared<PowerSeries>(std::move(g));
  }

  const Eigen::Vector2d& center() const { return center_; }
  int power_var() const { return power_var_; }
  int power() const { return m_; }
  const PowerSeries& series() const { return series_; }
  double valid_radius() const { return valid_radius_; }
  double g2() const { return g2_; }
  double g3() const { return gseries_->coeff(3); }
  double g4() const { return g4_; }

  Eigen::Vector2d position(double s) const {
    Eigen::Vector2d p = center_;
    p[power_var_] += std::pow(s, m_);
    p[1 - power_var_] += series_.evaluate(s);
    return p;
  }

  Eigen::Vector2d velocity(double s) const {
    Eigen::Vector2d v = Eigen::Vector2d::Zero();
    v[power_var_] = m_ * std::pow(s, m_ - 1);
    v[1 - power_var_] = dseries_.evaluate(s);
    return v;
  }

  double metric(double s) const { return gseries_->evaluate(s); }
  double metric_rate(double s) const { return dgseries_->evaluate(s); }

  // signed arclength from the center along the chart
  double arc_from_center(double s) const {
    // 16-point Gauss-Legendre on [0, s]
    static const double gx[8] = {0.0950125098376374, 0.2816035507792589,
                                 0.4580167776572274, 0.6178762444026438,
                                 0.7554044083550030, 0.8656312023878318,
                                 0.9445750230732326, 0.9894009349916499};
    static const double gw[8] = {0.1894506104550685, 0.1826034150449236,
                                 0.1691565193950025, 0.1495959888165767,
                                 0.1246289712555339, 0.0951585116824928,
                                 0.0622535239386479, 0.0271524594117541};
    const double half = s / 2.0;
    double acc = 0.0;
    for (int k = 0; k < 8; ++k) {
      for (double sign : {-1.0, 1.0}) {
        const double sk = half + sign * half * gx[k];
        acc += gw[k] * std::sqrt(std::max(0.0, metric(sk)));
      }
    }
    return half * acc;
  }

 private:
  Eigen::Vector2d center_;
  int power_var_;
  int m_;
  PowerSeries series_;
  PowerSeries dseries_;
  double valid_radius_;
  double g2_ = 0.0, g4_ = 0.0;
  std::shared_ptr<PowerSeries> gseries_, dgseries_;
};

namespace detail {

inline Polynomial drop_small_terms(const Polynomial& p, double rel_tol) {
  double scale = 0.0;
  for (const auto& [e, c] : p.terms()) scale = std::max(scale, std::abs(c));
  Polynomial out(p.variables());
  for (const auto& [e, c] : p.terms())
    if (std::abs(c) > rel_tol * scale) out.set_coefficient(e, c);
  return out;
}

// F(series, s^m) for the two-variable polynomial F
inline PowerSeries substitute_series(const Polynomial& F, int solve_var,
                                     const PowerSeries& S, int m) {
  const int W = S.order();
  int imax = 0;
  for (const auto& [e, c] : F.terms())
    imax = std::max(imax, e[solve_var]);
  std::vector<PowerSeries> powers;
  powers.reserve(imax + 1);
  powers.push_back(PowerSeries::monomial(W, 0));
  for (int i = 1; i <= imax; ++i) powers.push_back(powers.back() * S);

  PowerSeries acc(W);
  for (const auto& [e, c] : F.terms()) {
    const int i = e[solve_var];
    const int j = e[1 - solve_var];
    acc = acc + (powers[i] * c).shifted_up(m * j);
  }
  return acc;
}

}  // namespace detail

// Fits the branch series at a singular point: recenters F, finds the leading
// term a s^d from the balance of dominant exponents, then lifts the series by
// Newton iteration in the ring of truncated power series.
inline SeriesChart fit_series_chart(const Polynomial& F,
                                    const Eigen::Vector2d& center, int power_var,
                                    int m, int order) {
  if (F.nvars() != 2) throw Error("series chart needs a plane curve");
  if (m < 2) throw ConfigError("chart power must be at least 2");
  if (order < 8) throw ConfigError("chart order must be at least 8");
  const int solve_var = 1 - power_var;

  Polynomial local =
      detail::drop_small_terms(F.translated({center.x(), center.y()}), 1e-12);
  double scale = 0.0;
  for (const auto& [e, c] : local.terms()) scale = std::max(scale, std::abs(c));
  if (scale == 0.0) throw NumericalError("zero polynomial");
  const Polynomial dF = local.derivative(solve_var);

  const int W = order + 16;

  // candidate leading terms a s^d, smallest |a| first for each d
  std::vector<std::pair<int, double>> candidates;
  for (int d = 1; d <= 2 * local.total_degree() + 4; ++d) {
    long mu = -1;
    for (const auto& [e, c] : local.terms()) {
      const long w = static_cast<long>(d) * e[solve_var] +
                     static_cast<long>(m) * e[1 - solve_var];
      if (mu < 0 || w < mu) mu = w;
    }
    int bmax = 0;
    for (const auto& [e, c] : local.terms())
      if (static_cast<long>(d) * e[solve_var] +
              static_cast<long>(m) * e[1 - solve_var] ==
          mu)
        bmax = std::max(bmax, e[solve_var]);
    std::vector<double> b(bmax + 1, 0.0);
    int nterms = 0;
    for (const auto& [e, c] : local.terms())
      if (static_cast<long>(d) * e[solve_var] +
              static_cast<long>(m) * e[1 - solve_var] ==
          mu) {
        b[e[solve_var]] += c;
        ++nterms;
      }
    if (nterms < 2) continue;
    std::vector<double> roots = real_poly_roots(b, 1e-8);
    std::sort(roots.begin(), roots.end(),
              [](double x, double y) { return std::abs(x) < std::abs(y); });
    for (double a : roots)
      if (std::abs(a) > 1e-9) candidates.emplace_back(d, a);
  }
  if (candidates.empty())
    throw NumericalError("no real branch with the requested chart power");

  std::string failure = "series lift did not converge";
  for (const auto& [d, a] : candidates) {
    PowerSeries S = PowerSeries::monomial(W, d, a);
    bool good = false;
    int last_val = -1;
    int stalls = 0;
    for (int it = 0; it < 80; ++it) {
      PowerSeries R = detail::substitute_series(local, solve_var, S, m);
      const double rscale =
          scale * std::max(1.0, std::pow(S.max_abs_coeff(), local.total_degree()));
      PowerSeries D = detail::substitute_series(dF, solve_var, S, m);
      const int vD = D.valuation(D.max_abs_coeff() * 1e-13);
      if (vD >= D.order()) break;
      const int vR = R.valuation(1e-13 * rscale);
      if (vR >= order + vD) {
        good = true;
        break;
      }
      if (vR <= last_val) {
        if (++stalls > 3) break;
      } else {
        stalls = 0;
      }
      last_val = vR;
      PowerSeries delta(W);
      try {
        delta = PowerSeries::divide(R, D);
      } catch (const NumericalError&) {
        break;
      }
      S = S - delta;
    }
    if (!good) continue;

    // conservative convergence radius from tail coefficient ratios
    std::vector<int> nz;
    const double smax = S.max_abs_coeff();
    for (int k = order / 2; k < order; ++k)
      if (std::abs(S.coeff(k)) > 1e-13 * smax) nz.push_back(k);
    double radius = 1e100;
    if (nz.size() >= 4) {
      std::vector<double> ratios;
      for (std::size_t k = nz.size() >= 9 ? nz.size() - 8 : 1; k < nz.size(); ++k) {
        const double r = std::pow(
            std::abs(S.coeff(nz[k - 1]) / S.coeff(nz[k])), 1.0 / (nz[k] - nz[k - 1]));
        ratios.push_back(r);
      }
      std::nth_element(ratios.begin(), ratios.begin() + ratios.size() / 2,
                       ratios.end());
      radius = ratios[ratios.size() / 2];
    }
    return SeriesChart(center, power_var, m, S.truncated(order), radius);
  }
  throw NumericalError(failure);
}

}  // namespace algpde

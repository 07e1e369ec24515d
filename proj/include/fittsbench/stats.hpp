#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "fittsbench/common.hpp"
#include "fittsbench/trajectory.hpp"

namespace fitts {

// ---------------------------------------------------------------------------
// Index of difficulty
// ---------------------------------------------------------------------------

/// ID = log2(2D / W), in bits.
inline double index_of_difficulty(double distance_m, double width_m) {
  if (!(distance_m > 0.0) || !(width_m > 0.0))
    throw std::domain_error("index_of_difficulty: D and W must be positive");
  return std::log2(2.0 * distance_m / width_m);
}

// ---------------------------------------------------------------------------
// Regularized incomplete beta via continued fractions (Lentz), used for the
// F-distribution upper tail. Validated in tests against a quadrature oracle.
// ---------------------------------------------------------------------------

namespace detail {

inline double beta_cont_fraction(double a, double b, double x) {
  constexpr int kMaxIter = 500;
  constexpr double kEps = 1e-15;
  constexpr double kTiny = 1e-300;

  const double qab = a + b;
  const double qap = a + 1.0;
  const double qam = a - 1.0;
  double c = 1.0;
  double d = 1.0 - qab * x / qap;
  if (std::abs(d) < kTiny) d = kTiny;
  d = 1.0 / d;
  double h = d;
  for (int m = 1; m <= kMaxIter; ++m) {
    const int m2 = 2 * m;
    double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
    d = 1.0 + aa * d;
    if (std::abs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::abs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    h *= d * c;
    aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
    d = 1.0 + aa * d;
    if (std::abs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::abs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    const double del = d * c;
    h *= del;
    if (std::abs(del - 1.0) < kEps) break;
  }
  return h;
}

}  // namespace detail

/// I_x(a, b), the regularized incomplete beta function.
inline double ibeta_reg(double a, double b, double x) {
  if (!(a > 0.0) || !(b > 0.0))
    throw std::domain_error("ibeta_reg: a and b must be positive");
  if (x <= 0.0) return 0.0;
  if (x >= 1.0) return 1.0;
  const double ln_front = std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) +
                          a * std::log(x) + b * std::log1p(-x);
  const double front = std::exp(ln_front);
  if (x < (a + 1.0) / (a + b + 2.0))
    return front * detail::beta_cont_fraction(a, b, x) / a;
  return 1.0 - front * detail::beta_cont_fraction(b, a, 1.0 - x) / b;
}

/// P(F(df1, df2) > f), the upper tail of the F distribution.
inline double f_upper_tail(double f, double df1, double df2) {
  if (!(df1 > 0.0) || !(df2 > 0.0))
    throw std::domain_error("f_upper_tail: degrees of freedom must be positive");
  if (!(f >= 0.0)) throw std::domain_error("f_upper_tail: F must be non-negative");
  if (std::isinf(f)) return 0.0;
  const double x = df2 / (df2 + df1 * f);
  return ibeta_reg(0.5 * df2, 0.5 * df1, x);
}

// ---------------------------------------------------------------------------
// Simple linear regression with intercept
// ---------------------------------------------------------------------------

struct OlsFit {
  double intercept = 0.0;
  double slope = 0.0;
  double r_squared = 0.0;
  double se_intercept = 0.0;
  double se_slope = 0.0;
  std::size_t n = 0;
  double sse = 0.0;
  double sst = 0.0;
  double ssr = 0.0;
  double mean_x = 0.0;
  double sxx = 0.0;  // sum of squared x deviations
  std::vector<double> residuals;
};

inline OlsFit ols_fit(const std::vector<double>& xs, const std::vector<double>& ys) {
  if (xs.size() != ys.size()) throw ContractError("ols_fit: size mismatch");
  const std::size_t n = xs.size();
  if (n < 3) throw InsufficientDataError("ols_fit: need at least 3 points");
  if (!all_finite(xs) || !all_finite(ys))
    throw ValidationError("ols_fit: non-finite input");

  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    mx += xs[i];
    my += ys[i];
  }
  mx /= static_cast<double>(n);
  my /= static_cast<double>(n);

  double sxx = 0.0, sxy = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double dx = xs[i] - mx;
    const double dy = ys[i] - my;
    sxx += dx * dx;
    sxy += dx * dy;
    syy += dy * dy;
  }
  if (sxx == 0.0) throw ValidationError("ols_fit: collinear input, xs are all equal");

  OlsFit fit;
  fit.n = n;
  fit.slope = sxy / sxx;
  fit.intercept = my - fit.slope * mx;
  fit.mean_x = mx;
  fit.sxx = sxx;
  fit.sst = syy;
  fit.residuals.resize(n);
  double sse = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double r = ys[i] - (fit.intercept + fit.slope * xs[i]);
    fit.residuals[i] = r;
    sse += r * r;
  }
  fit.sse = sse;
  fit.ssr = std::max(0.0, syy - sse);
  // Constant response carries no explainable variance: R^2 := 0 when SST = 0.
  fit.r_squared = syy > 0.0 ? 1.0 - sse / syy : 0.0;
  const double sigma2 = sse / static_cast<double>(n - 2);
  fit.se_slope = std::sqrt(sigma2 / sxx);
  fit.se_intercept =
      std::sqrt(sigma2 * (1.0 / static_cast<double>(n) + mx * mx / sxx));
  return fit;
}

// ---------------------------------------------------------------------------
// ANOVA for the regression and the lack-of-fit decomposition
// ---------------------------------------------------------------------------

struct AnovaResult {
  double f = 0.0;
  double df1 = 1.0;
  double df2 = 0.0;
  double p = 1.0;
};

inline AnovaResult anova_regression(const OlsFit& fit) {
  AnovaResult a;
  a.df1 = 1.0;
  a.df2 = static_cast<double>(fit.n) - 2.0;
  if (fit.sse <= 0.0) {
    // Perfect fit: the F statistic diverges.
    a.f = fit.ssr > 0.0 ? std::numeric_limits<double>::infinity() : 0.0;
    a.p = fit.ssr > 0.0 ? 0.0 : 1.0;
    return a;
  }
  const double mse = fit.sse / a.df2;
  a.f = (fit.ssr / a.df1) / mse;
  a.p = f_upper_tail(a.f, a.df1, a.df2);
  return a;
}

struct LackOfFitResult {
  bool applicable = false;
  double f = 0.0;
  double df_lof = 0.0;
  double df_pe = 0.0;
  double p = 1.0;
  double ss_lof = 0.0;
  double ss_pe = 0.0;
};

/// F-test of the fitted line against the saturated group-means model.
/// Groups are the distinct regressor values; requires >= 3 levels and at
/// least one replicate. Returns applicable == false otherwise.
inline LackOfFitResult lack_of_fit(const std::vector<double>& xs,
                                   const std::vector<double>& ys, const OlsFit& fit) {
  if (xs.size() != ys.size() || xs.size() != fit.n)
    throw ContractError("lack_of_fit: size mismatch with fit");
  std::map<double, std::vector<double>> groups;
  for (std::size_t i = 0; i < xs.size(); ++i) groups[xs[i]].push_back(ys[i]);

  const auto c = groups.size();
  const auto n = xs.size();
  LackOfFitResult r;
  if (c < 3 || n <= c) return r;  // needs levels and replicates

  double ss_pe = 0.0;
  for (const auto& [x, vals] : groups) {
    double mean = 0.0;
    for (double v : vals) mean += v;
    mean /= static_cast<double>(vals.size());
    for (double v : vals) ss_pe += (v - mean) * (v - mean);
  }
  double ss_lof = fit.sse - ss_pe;
  if (ss_lof < 0.0) ss_lof = 0.0;

  r.applicable = true;
  r.df_lof = static_cast<double>(c) - 2.0;
  r.df_pe = static_cast<double>(n - c);
  r.ss_lof = ss_lof;
  r.ss_pe = ss_pe;
  if (ss_pe <= 0.0) {
    r.f = ss_lof > 0.0 ? std::numeric_limits<double>::infinity() : 0.0;
    r.p = ss_lof > 0.0 ? 0.0 : 1.0;
    return r;
  }
  r.f = (ss_lof / r.df_lof) / (ss_pe / r.df_pe);
  r.p = f_upper_tail(r.f, r.df_lof, r.df_pe);
  return r;
}

// ---------------------------------------------------------------------------
// Outlier removal: 1.5 IQR fences on MT within each (D, W) condition
// ---------------------------------------------------------------------------

namespace detail {

/// Type-7 (linear interpolation) quantile of a sorted sample.
inline double quantile_sorted(const std::vector<double>& sorted, double q) {
  if (sorted.empty()) throw ContractError("quantile of empty sample");
  const double h = q * (static_cast<double>(sorted.size()) - 1.0);
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const auto hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

}  // namespace detail

struct OutlierSplit {
  std::vector<TrialMetric> kept;
  std::vector<TrialMetric> removed;
};

inline OutlierSplit remove_outliers(const std::vector<TrialMetric>& trials) {
  std::map<std::pair<double, double>, std::vector<std::size_t>> by_condition;
  for (std::size_t i = 0; i < trials.size(); ++i)
    by_condition[{trials[i].distance_m, trials[i].width_m}].push_back(i);

  OutlierSplit out;
  std::vector<bool> drop(trials.size(), false);
  for (const auto& [cond, idx] : by_condition) {
    std::vector<double> mts;
    for (auto i : idx)
      if (trials[i].success) mts.push_back(trials[i].movement_time_s);
    if (mts.size() < 4) continue;  // too few replicates to fence
    std::sort(mts.begin(), mts.end());
    const double q1 = detail::quantile_sorted(mts, 0.25);
    const double q3 = detail::quantile_sorted(mts, 0.75);
    const double iqr = q3 - q1;
    const double lo = q1 - 1.5 * iqr;
    const double hi = q3 + 1.5 * iqr;
    for (auto i : idx) {
      if (trials[i].success &&
          (trials[i].movement_time_s < lo || trials[i].movement_time_s > hi))
        drop[i] = true;
    }
  }
  for (std::size_t i = 0; i < trials.size(); ++i)
    (drop[i] ? out.removed : out.kept).push_back(trials[i]);
  return out;
}

// ---------------------------------------------------------------------------
// Fitts and ballistic fits
// ---------------------------------------------------------------------------

enum class FitModel { Fitts, Ballistic };

inline const char* to_string(FitModel m) {
  return m == FitModel::Fitts ? "fitts" : "ballistic";
}

struct FittsFit {
  FitModel model = FitModel::Fitts;
  double a = 0.0;   // intercept, seconds
  double b = 0.0;   // slope, s/bit (Fitts) or s/sqrt(m) (ballistic)
  double r_squared = 0.0;
  double se_a = 0.0;
  double se_b = 0.0;
  std::size_t n = 0;
  AnovaResult anova;
  LackOfFitResult lof;
  OlsFit ols;                  // full regression internals
  std::vector<double> xs, ys;  // the regressor/response actually fitted
};

/// Regression of MT on the model's regressor over successful trials only.
inline FittsFit fit_movement_times(const std::vector<TrialMetric>& trials,
                                   FitModel model) {
  std::vector<double> xs, ys;
  for (const auto& t : trials) {
    if (!t.success) continue;  // MT undefined at timeout
    t.validate();
    xs.push_back(model == FitModel::Fitts
                     ? index_of_difficulty(t.distance_m, t.width_m)
                     : std::sqrt(t.distance_m));
    ys.push_back(t.movement_time_s);
  }
  FittsFit fit;
  fit.model = model;
  fit.ols = ols_fit(xs, ys);
  fit.a = fit.ols.intercept;
  fit.b = fit.ols.slope;
  fit.r_squared = fit.ols.r_squared;
  fit.se_a = fit.ols.se_intercept;
  fit.se_b = fit.ols.se_slope;
  fit.n = fit.ols.n;
  fit.anova = anova_regression(fit.ols);
  fit.lof = lack_of_fit(xs, ys, fit.ols);
  fit.xs = std::move(xs);
  fit.ys = std::move(ys);
  return fit;
}

inline FittsFit fitts_fit(const std::vector<TrialMetric>& trials) {
  return fit_movement_times(trials, FitModel::Fitts);
}

inline FittsFit ballistic_fit(const std::vector<TrialMetric>& trials) {
  return fit_movement_times(trials, FitModel::Ballistic);
}

// ---------------------------------------------------------------------------
// Human-vs-policy comparison (reporting only, no pass/fail judgment)
// ---------------------------------------------------------------------------

struct FitComparison {
  double slope_difference = 0.0;
  double pooled_se = 0.0;
  double t = 0.0;
  double p_equal_slopes = 1.0;
  double delta_r_squared = 0.0;  // first minus second
};

inline FitComparison compare_fits(const FittsFit& first, const FittsFit& second) {
  if (first.model != second.model)
    throw ContractError("compare_fits: model mismatch");
  FitComparison c;
  c.slope_difference = first.b - second.b;
  c.pooled_se = std::sqrt(first.se_b * first.se_b + second.se_b * second.se_b);
  c.delta_r_squared = first.r_squared - second.r_squared;
  if (c.pooled_se > 0.0) {
    c.t = c.slope_difference / c.pooled_se;
    const double df =
        static_cast<double>(first.n) + static_cast<double>(second.n) - 4.0;
    c.p_equal_slopes = f_upper_tail(c.t * c.t, 1.0, df);
  } else {
    c.t = 0.0;
    c.p_equal_slopes = 1.0;
  }
  return c;
}

}  // namespace fitts

#include "splitplot/power.hpp"

#include <cmath>
#include <limits>
#include <sstream>

#include "splitplot/error.hpp"
#include "splitplot/normal.hpp"

namespace splitplot {

namespace {

void check_alpha(double alpha) {
  if (!(alpha > 0.0 && alpha < 1.0)) throw ValidationError("alpha must lie in (0, 1)");
}

void check_power(double power) {
  if (!(power > 0.0 && power < 1.0)) throw ValidationError("target power must lie in (0, 1)");
}

void check_delta(double delta) {
  if (!std::isfinite(delta) || delta == 0.0) throw ValidationError("delta must be nonzero");
}

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

}  // namespace

void PowerQuery::validate() const {
  if (solve_for != SolveFor::Delta) check_delta(delta);
  check_alpha(alpha);
  if (solve_for != SolveFor::Power) check_power(target_power);
}

double power_for(double variance, double delta, double alpha) {
  if (!(variance > 0.0)) throw ValidationError("variance must be > 0");
  check_alpha(alpha);
  const double z = normal_quantile(1.0 - alpha / 2.0);
  return normal_cdf(std::abs(delta) / std::sqrt(variance) - z);
}

double detectable_delta(double variance, double alpha, double target_power) {
  if (!(variance > 0.0)) throw ValidationError("variance must be > 0");
  check_alpha(alpha);
  check_power(target_power);
  if (target_power <= alpha / 2.0) {
    throw ValidationError("target power must exceed alpha/2");
  }
  return std::sqrt(variance) * (normal_quantile(1.0 - alpha / 2.0) + normal_quantile(target_power));
}

double target_variance(double delta, double alpha, double target_power) {
  check_delta(delta);
  check_alpha(alpha);
  check_power(target_power);
  const double zsum = normal_quantile(1.0 - alpha / 2.0) + normal_quantile(target_power);
  return (delta / zsum) * (delta / zsum);
}

double variance_floor(const TrialDesign& d, const CorrelationStructure& corr, double pi_z,
                      const EffectQuery& q) {
  // Large enough for the 1/m terms to vanish, small enough that 1 - r keeps
  // about eight significant digits.
  constexpr double kLargeM = 1e8;
  return effect_variance_continuous(d, kLargeM, pi_z, corr, q);
}

CellSizeResult required_cell_size(const TrialDesign& d, const CorrelationStructure& corr,
                                  double pi_z, const EffectQuery& q, double delta, double alpha,
                                  double target_power, int m_max, SizeGrid grid) {
  q.validate();
  check_delta(delta);
  check_alpha(alpha);
  check_power(target_power);
  if (m_max < 1) throw ValidationError("m_max must be >= 1");
  if (grid.first < 1 || grid.step < 1) throw ValidationError("size grid needs first, step >= 1");

  const auto variance_at = [&](int m) {
    return effect_variance(d, cell_plan(d, m, pi_z), corr, q).value;
  };
  const auto passes = [&](int m) { return power_for(variance_at(m), delta, alpha) >= target_power; };

  if (grid.first > m_max) throw ValidationError("grid starts beyond m_max");
  const long long last_k = (static_cast<long long>(m_max) - grid.first) / grid.step;
  const auto m_of = [&](long long k) { return static_cast<int>(grid.first + k * grid.step); };

  if (!passes(m_of(last_k))) {
    const double floor = variance_floor(d, corr, pi_z, q);
    std::ostringstream os;
    os.precision(6);
    os << "infeasible: no cell size up to " << m_max << " reaches power " << target_power
       << "; variance floor as m grows is " << floor << " but power needs <= "
       << target_variance(delta, alpha, target_power);
    throw InfeasibleError(os.str(), floor);
  }

  // Power is increasing in m, so bisect on the grid index.
  long long lo = -1;
  long long hi = last_k;
  while (hi - lo > 1) {
    const long long mid = lo + (hi - lo) / 2;
    if (passes(m_of(mid))) {
      hi = mid;
    } else {
      lo = mid;
    }
  }

  CellSizeResult out;
  out.m = m_of(hi);
  out.variance_at_m = variance_at(out.m);
  out.power_at_m = power_for(out.variance_at_m, delta, alpha);
  out.power_at_previous = hi > 0 ? power_for(variance_at(m_of(hi - 1)), delta, alpha) : kNaN;
  return out;
}

long long multiplier_from_ratio(double ratio) {
  if (!(ratio > 0.0) || !std::isfinite(ratio)) throw ValidationError("ratio must be positive");
  return std::max<long long>(1, static_cast<long long>(std::ceil(ratio)));
}

MultiplierResult required_cluster_multiplier(const TrialDesign& d, const CellPlan& plan,
                                             const CorrelationStructure& corr,
                                             const EffectQuery& q, double delta, double alpha,
                                             double target_power,
                                             const LcrtVarianceSource& lcrt_source) {
  const double var1 = effect_variance(d, plan, corr, q, lcrt_source).value;
  const double needed = target_variance(delta, alpha, target_power);
  long long k = multiplier_from_ratio(var1 / needed);

  // The ceiling is taken on a rounded ratio; settle the boundary with the
  // power criterion itself.
  const auto passes = [&](long long copies) {
    return power_for(var1 / static_cast<double>(copies), delta, alpha) >= target_power;
  };
  while (k > 1 && passes(k - 1)) --k;
  while (!passes(k)) ++k;

  MultiplierResult out;
  out.multiplier = k;
  out.single_copy_variance = var1;
  out.power_at_multiplier = power_for(var1 / static_cast<double>(k), delta, alpha);
  out.power_at_previous =
      k > 1 ? power_for(var1 / static_cast<double>(k - 1), delta, alpha) : kNaN;
  return out;
}

}  // namespace splitplot

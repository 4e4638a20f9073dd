#pragma once

#include "splitplot/correlation.hpp"
#include "splitplot/design.hpp"
#include "splitplot/variance.hpp"

namespace splitplot {

enum class SolveFor { Power, CellSize, ClusterMultiplier, Delta };

/// Inputs of a two-sided z-test sizing problem. Exactly one quantity is
/// unknown (`solve_for`); the others must be set.
struct PowerQuery {
  double delta = 0.0;
  double alpha = 0.05;
  double target_power = 0.8;
  SolveFor solve_for = SolveFor::Power;

  void validate() const;
};

/// Phi(|delta| / sqrt(variance) - z_{1-alpha/2}).
double power_for(double variance, double delta, double alpha);

/// sqrt(variance) * (z_{1-alpha/2} + z_{power}).
double detectable_delta(double variance, double alpha, double target_power);

/// Largest variance that still gives `target_power` for `delta`.
double target_variance(double delta, double alpha, double target_power);

/// Candidate cell sizes m = first, first + step, ... (step 1 searches every
/// integer).
struct SizeGrid {
  int first = 1;
  int step = 1;
};

struct CellSizeResult {
  int m = 0;
  double power_at_m = 0.0;
  /// Power at the preceding grid point; NaN when m is the first one.
  double power_at_previous = 0.0;
  double variance_at_m = 0.0;
};

/// Smallest m on the grid, not exceeding m_max, whose equal-size variance
/// reaches target power (exact >=, no epsilon). Throws InfeasibleError
/// carrying the m -> infinity variance floor when none does.
CellSizeResult required_cell_size(const TrialDesign& d, const CorrelationStructure& corr,
                                  double pi_z, const EffectQuery& q, double delta, double alpha,
                                  double target_power, int m_max = 1'000'000,
                                  SizeGrid grid = {});

/// ceil(ratio) for the ratio var_1 / target variance.
long long multiplier_from_ratio(double ratio);

struct MultiplierResult {
  long long multiplier = 0;
  double power_at_multiplier = 0.0;
  double power_at_previous = 0.0;  // NaN when multiplier == 1
  double single_copy_variance = 0.0;
};

/// Number of copies n_S of the design (every sequence replicated) needed
/// for the target power, using var(n_S copies) = var_1 / n_S.
MultiplierResult required_cluster_multiplier(const TrialDesign& d, const CellPlan& plan,
                                             const CorrelationStructure& corr,
                                             const EffectQuery& q, double delta, double alpha,
                                             double target_power,
                                             const LcrtVarianceSource& lcrt_source = {});

/// Variance limit of the equal-size closed form as m grows without bound.
double variance_floor(const TrialDesign& d, const CorrelationStructure& corr, double pi_z,
                      const EffectQuery& q);

}  // namespace splitplot

#pragma once

#include <Eigen/Dense>
#include <functional>
#include <string>
#include <string_view>

#include "splitplot/correlation.hpp"
#include "splitplot/design.hpp"

namespace splitplot {

enum class Estimand {
  ClusterConditional,  // beta_C: cluster-level effect with individual-level control
  ClusterMarginal,     // beta~_C = beta_C + pi_z * beta_IC
  Individual,          // beta_I
  Interaction,         // beta_IC
};

enum class Model { WithInteraction, NoInteraction };

std::string_view to_string(Estimand e);
std::string_view to_string(Model m);

struct EffectQuery {
  Estimand estimand = Estimand::ClusterConditional;
  Model model = Model::WithInteraction;

  /// Throws ValidationError when asking for the interaction in a model
  /// without one.
  void validate() const;
};

/// An estimator variance and its decomposition:
///   value = v_lcrt_part + inflation_part + individual_part
/// v_lcrt_part is the single-intervention LCRT variance (cluster estimands),
/// inflation_part the extra pi_z^2 var(beta_IC) term of the conditional
/// cluster effect, individual_part the individual-level variance of
/// beta_I / beta_IC.
struct VarianceResult {
  double value = 0.0;
  double v_lcrt_part = 0.0;
  double inflation_part = 0.0;
  double individual_part = 0.0;
  std::string formula_id;
};

/// Supplies V_LCRT for plans whose cell sizes differ (no closed form exists).
using LcrtVarianceSource =
    std::function<double(const TrialDesign&, const CellPlan&, const CorrelationStructure&)>;

/// Variance of the cluster-level effect in the single-intervention LCRT with
/// equal cluster-period size m (block-exchangeable, cross-sectional):
///
///   V = sigma^2/(n m) * S^2 (1-r)(1+(T-1)r)(1+(m-1)rho_CT)
///       / (S B - E + (B^2 + S(T-1)B - (T-1)E - S C) r),
///   r = m rho_C / (1 + (m-1) rho_CT),
///
/// evaluated on the cluster-expanded matrix (S = n). Throws
/// DegenerateDesignError when the denominator vanishes.
double v_lcrt(const TrialDesign& d, int m, const CorrelationStructure& corr);

/// Same expression with a real-valued m; used for asymptotic floors.
double v_lcrt_continuous(const TrialDesign& d, double m, const CorrelationStructure& corr);

/// Closed-form estimator variance for the chosen estimand and model.
///
/// A constant plan uses the equal-size expressions; a matrix plan uses the
/// N_obs / N_{X=1} / N_{X=0} expressions. For matrix plans with unequal
/// sizes the V_LCRT term comes from `lcrt_source`; if it is empty a
/// ValidationError is thrown.
VarianceResult effect_variance(const TrialDesign& d, const CellPlan& plan,
                               const CorrelationStructure& corr, const EffectQuery& q,
                               const LcrtVarianceSource& lcrt_source = {});

/// Equal-size variance with a real-valued m (m -> infinity gives the floor).
double effect_variance_continuous(const TrialDesign& d, double m, double pi_z,
                                  const CorrelationStructure& corr, const EffectQuery& q);

struct InteractionRatios {
  double individual_with_over_without;       // == 1 / (1 - pi_x)
  double individual_over_interaction;        // == pi_x
};

/// Requires equal cell sizes.
InteractionRatios interaction_ratio_check(const TrialDesign& d, const CellPlan& plan,
                                          const CorrelationStructure& corr);

/// Covariance of (beta_I, beta_C, beta_C + beta_I + beta_IC) under the
/// interaction model, obtained as L Cov(beta_I, beta_IC, beta~_C) L^T with
///
///   Cov(beta_I, beta_IC, beta~_C) = [[K pi_x, -K pi_x, 0],
///                                    [-K pi_x,  K,     0],
///                                    [0,        0,     V_LCRT]]
///   K = (1 - rho_CT) sigma^2 / (n m T sigma_z^2 pi_x (1 - pi_x))
///   L = [[1, 0, 0], [0, -pi_z, 1], [1, 1 - pi_z, 1]].
struct ContrastCovariance {
  Eigen::Matrix3d cov;
  double k_star = 0.0;
};

/// Requires equal cell sizes.
ContrastCovariance contrast_covariance(const TrialDesign& d, const CellPlan& plan,
                                       const CorrelationStructure& corr);

}  // namespace splitplot

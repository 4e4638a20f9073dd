#pragma once

// Brute-force reference computations. Everything here assembles dense
// matrices from first principles so the closed forms in variance.hpp can be
// checked against them; nothing here is tuned for speed.

#include <Eigen/Dense>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

#include "splitplot/correlation.hpp"
#include "splitplot/design.hpp"
#include "splitplot/variance.hpp"

namespace splitplot::oracle {

/// Raw codes the individual-level indicator as Z in {0, 1}; Centred uses
/// Z - pi_z, which turns the cluster column coefficient into the marginal
/// effect beta~_C = beta_C + pi_z beta_IC.
enum class Parametrisation { Raw, Centred };

/// Fixed-effect covariance with one label per column. Columns are ordered
/// beta_I, [beta_IC,] cluster effect, period_1 .. period_T. The cluster
/// effect is labelled "beta_C" (Raw) or "beta_C_marginal" (Centred).
struct GlsCovariance {
  Eigen::MatrixXd cov;
  std::vector<std::string> labels;
  double condition_number = 0.0;
  std::vector<std::string> warnings;

  int index(std::string_view label) const;
  double variance(std::string_view label) const;
  double covariance(std::string_view a, std::string_view b) const;
};

/// Individual-level blocks D_i and Sigma_i, one per cluster. Within a
/// cluster rows run period by period; inside a cell the Z = 0 individuals
/// come first.
struct FullModelMatrices {
  std::vector<Eigen::MatrixXd> design;
  std::vector<Eigen::MatrixXd> covariance;
  std::vector<std::string> labels;
  Parametrisation parametrisation = Parametrisation::Raw;
};

inline constexpr long long kDefaultObservationCap = 20'000;

/// Requires pi_z * m_ij integral in every cell.
FullModelMatrices build_full_model(const TrialDesign& d, const CellPlan& plan,
                                   const CorrelationStructure& corr, Model model,
                                   Parametrisation param);

/// (sum_i D_i^T Sigma_i^-1 D_i)^-1 from the individual-level model.
/// Throws InestimableEffectError if the information matrix is singular.
GlsCovariance full_gls(const TrialDesign& d, const CellPlan& plan,
                       const CorrelationStructure& corr, Model model,
                       Parametrisation param = Parametrisation::Raw,
                       long long max_observations = kDefaultObservationCap);

/// Cell-mean system for one cluster: 2T means ordered
/// (period 1, Z=0), (period 1, Z=1), (period 2, Z=0), ...
///
/// Their covariance is Sigma_i = A_i + sigma_a^2 1 1^T with A_i block
/// diagonal; block j is [[s_ct + x1, s_ct], [s_ct, s_ct + x2]] with
/// x1 = s_eps / ((1 - pi_z) m_ij), x2 = s_eps / (pi_z m_ij), s_ct = sigma_b^2.
struct CollapsedCluster {
  Eigen::MatrixXd design;         // 2T x p
  Eigen::VectorXd x1, x2;         // per period
  Eigen::VectorXd block_det;      // |A_ij|
  Eigen::VectorXd cell_variance;  // sigma^2_ij = s_ct + s_eps / m_ij
  Eigen::VectorXd q;              // A_i^-1 1 = (x2/|A_i1|, x1/|A_i1|, ...)
  Eigen::MatrixXd a_inverse;      // block-diagonal, 2x2 closed form per block
  Eigen::MatrixXd sigma;          // dense Sigma_i
  Eigen::MatrixXd sigma_inverse;  // Sherman-Morrison inverse of Sigma_i
};

struct CollapsedMatrices {
  std::vector<CollapsedCluster> clusters;
  std::vector<std::string> labels;
  Parametrisation parametrisation = Parametrisation::Centred;
};

CollapsedMatrices build_collapsed_model(const TrialDesign& d, const CellPlan& plan,
                                        const CorrelationStructure& corr, Model model,
                                        Parametrisation param = Parametrisation::Centred);

/// Same covariance as full_gls, from the 2T cell means per cluster with
/// Sigma_i^-1 obtained by Sherman-Morrison. pi_z * m_ij need not be integral.
GlsCovariance collapsed_gls(const TrialDesign& d, const CellPlan& plan,
                            const CorrelationStructure& corr, Model model,
                            Parametrisation param = Parametrisation::Centred);

/// Variance of the cluster-effect estimator in the single-intervention
/// LCRT with the plan's cell sizes (GLS on T cell means per cluster).
double lcrt_variance(const TrialDesign& d, const CellPlan& plan,
                     const CorrelationStructure& corr);

/// lcrt_variance wrapped for effect_variance().
LcrtVarianceSource lcrt_source();

// ---------------------------------------------------------------------------
// Simulation

struct TrueEffects {
  double beta_c = 0.0;
  double beta_i = 0.0;
  double beta_ic = 0.0;
  std::vector<double> period;  // beta_j; empty means all zero
};

struct Observation {
  int cluster = 0;
  int period = 0;
  int individual = 0;
  int x = 0;
  int z = 0;
  double y = 0.0;
};

struct Dataset {
  std::vector<Observation> rows;
};

/// One draw from Y = beta_C X + beta_I Z + beta_IC XZ + beta_j + a_i + b_ij + e_ijk
/// with exactly pi_z m_ij individuals per cell assigned Z = 1.
/// Deterministic in (seed, stream).
Dataset simulate_trial(const TrialDesign& d, const CellPlan& plan,
                       const CorrelationStructure& corr, const TrueEffects& effects,
                       std::uint64_t seed, std::uint64_t stream = 0);

/// CSV with header `cluster,period,individual,x,z,y` (1-based indices).
void write_csv(const Dataset& data, std::ostream& out);

struct MonteCarloResult {
  std::vector<std::string> labels;
  Eigen::VectorXd truth;
  Eigen::VectorXd mean;
  Eigen::MatrixXd cov;  // sample covariance of the estimates
  int replicates = 0;

  /// Standard error of each mean estimate.
  Eigen::VectorXd standard_error() const;
};

/// Fits the known-covariance GLS estimator to `replicates` simulated trials
/// (replicate r uses stream r of `seed`) and summarises the estimates.
MonteCarloResult empirical_estimator_cov(const TrialDesign& d, const CellPlan& plan,
                                         const CorrelationStructure& corr,
                                         const TrueEffects& effects, int replicates,
                                         std::uint64_t seed,
                                         Model model = Model::WithInteraction,
                                         Parametrisation param = Parametrisation::Raw);

}  // namespace splitplot::oracle

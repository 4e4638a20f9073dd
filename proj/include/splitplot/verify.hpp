#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

#include "splitplot/correlation.hpp"
#include "splitplot/design.hpp"
#include "splitplot/variance.hpp"

namespace splitplot::verify {

/// Signature of the closed-form variance under test; defaults to
/// effect_variance. Tests swap in a corrupted version to check that the
/// harness notices.
using ClosedFormFn =
    std::function<VarianceResult(const TrialDesign&, const CellPlan&, const CorrelationStructure&,
                                 const EffectQuery&, const LcrtVarianceSource&)>;

ClosedFormFn default_closed_form();

struct SweepConfig {
  TrialDesign design;
  CellPlan plan;
  CorrelationStructure corr;
};

/// Random configurations: n in [2, 8], T in [1, 5], random 0/1 allocation
/// (re-drawn until the cluster effect is estimable), pi_z in {0.2, 0.5},
/// ICC pairs (0, 0), (0.2, 0.2), (0.24, 0.192), half constant and half
/// variable cell sizes.
///
/// With `block_randomised` every m_ij makes pi_z m_ij integral
/// (pi_z = 0.5: m in {2, 4, 6}; pi_z = 0.2: m in {5, 10}) so the
/// individual-level oracle can run. Otherwise m_ij is drawn from 1..6.
std::vector<SweepConfig> make_sweep(std::uint64_t seed, int count, bool block_randomised);

struct PropertyReport {
  std::string name;
  bool passed = true;
  double worst = 0.0;      // worst deviation seen
  double tolerance = 0.0;
  int checks = 0;
  std::string detail;      // first failure, if any
};

/// Every closed-form variance vs the matching diagonal entry of the
/// individual-level GLS covariance (relative error).
PropertyReport closed_form_vs_full_gls(const std::vector<SweepConfig>& sweep,
                                       const ClosedFormFn& closed_form, double tol = 1e-8);

/// Same against the cell-mean GLS, which also covers non-integral pi_z m.
PropertyReport closed_form_vs_collapsed_gls(const std::vector<SweepConfig>& sweep,
                                            const ClosedFormFn& closed_form, double tol = 1e-8);

/// Individual-level GLS vs cell-mean GLS, every covariance entry on the
/// correlation scale |a_kl - b_kl| / sqrt(a_kk a_ll).
PropertyReport full_vs_collapsed(const std::vector<SweepConfig>& sweep, double tol = 1e-10);

/// beta~_C uncorrelated with beta_I and beta_IC in the individual-level GLS.
PropertyReport marginal_effect_uncorrelated(const std::vector<SweepConfig>& sweep,
                                            double tol = 1e-10);

/// Algebraic identities among the closed forms on equal-size configurations:
/// ratio 1/(1-pi_x), var_I = pi_x var_IC, var_C - var~_C = pi_z^2 var_IC,
/// rho_C invariance (bit-identical), variable-size forms at equal sizes.
PropertyReport analytic_identities(const std::vector<SweepConfig>& sweep,
                                   const ClosedFormFn& closed_form, double tol = 1e-12);

struct MonteCarloCheck {
  PropertyReport covariance;  // diagonal within `rel_tol`
  PropertyReport unbiased;    // |mean - truth| <= 4 SE
};

/// stepped_wedge(4) with 3 clusters per sequence, m = 6, pi_z = 0.5,
/// ICCs 0.24 / 0.192, interaction model.
MonteCarloCheck monte_carlo(std::uint64_t seed, int replicates, const ClosedFormFn& closed_form,
                            double rel_tol = 0.10);

struct VerifyOptions {
  std::uint64_t seed = 20240601;
  int configurations = 240;
  int replicates = 2000;
  bool monte_carlo = true;
  ClosedFormFn closed_form = default_closed_form();
};

std::vector<PropertyReport> run_verification(const VerifyOptions& options);

/// One line per property: PASS/FAIL, name, worst deviation, tolerance.
void print_reports(const std::vector<PropertyReport>& reports, std::ostream& out);

}  // namespace splitplot::verify

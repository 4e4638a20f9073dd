#pragma once

#include <Eigen/Dense>
#include <optional>
#include <vector>

namespace splitplot {

/// One treatment sequence: a 0/1 pattern over periods, shared by
/// `clusters` clusters.
struct Sequence {
  std::vector<int> pattern;
  int clusters = 1;
};

/// Cluster-level treatment allocation over T periods.
///
/// The canonical form is the cluster-expanded n x T matrix X, one row per
/// cluster. Construction rejects malformed input with ValidationError and
/// all-control / all-intervention designs with DegenerateDesignError.
class TrialDesign {
 public:
  TrialDesign(int periods, std::vector<Sequence> sequences);

  int periods() const noexcept { return periods_; }
  int clusters() const noexcept { return static_cast<int>(x_.rows()); }
  const std::vector<Sequence>& sequences() const noexcept { return sequences_; }
  /// n x T cluster-expanded allocation matrix.
  const Eigen::MatrixXi& matrix() const noexcept { return x_; }
  int x(int cluster, int period) const { return x_(cluster, period); }

  /// Every sequence repeated `k` times as many clusters.
  TrialDesign replicated(int k) const;

 private:
  int periods_;
  std::vector<Sequence> sequences_;
  Eigen::MatrixXi x_;
};

/// T periods, T-1 sequences; sequence s switches to intervention after
/// period s, so period 1 is all-control.
TrialDesign stepped_wedge(int periods, int clusters_per_sequence = 1);
/// Two constant sequences: all-control and all-intervention.
TrialDesign parallel(int periods, int clusters_per_sequence = 1);
/// Two sequences swapping condition halfway; T must be even.
TrialDesign crossover(int periods, int clusters_per_sequence = 1);
/// Hybrid parallel / stepped-wedge layout of the SharES trial: six periods,
/// 5 clusters on each constant sequence, 3 on each of 5 stepped-wedge
/// sequences (25 clusters).
TrialDesign shares();

/// Design constants computed on the cluster-expanded matrix (one cluster
/// per row, so S = n):
///   B = sum_ij X_ij,  C = sum_i (sum_j X_ij)^2,  E = sum_j (sum_i X_ij)^2.
struct DesignSummary {
  double pi_x = 0.0;
  Eigen::VectorXd pi_x_cluster;
  double pi_xx = 0.0;
  Eigen::VectorXd pi_x_period;
  double B = 0.0;
  double C = 0.0;
  double E = 0.0;
};

DesignSummary summarize(const TrialDesign& d);

/// Cluster-period sizes and individual-level allocation.
///
/// Sizes are either a single constant m or an n x T matrix. A matrix whose
/// entries are all equal is still treated as "variable" by the variance
/// dispatch, which lets callers exercise both closed-form families.
class CellPlan {
 public:
  int clusters() const noexcept { return static_cast<int>(sizes_.rows()); }
  int periods() const noexcept { return static_cast<int>(sizes_.cols()); }
  bool is_constant() const noexcept { return constant_.has_value(); }
  /// The constant m; throws ValidationError for a matrix plan.
  int constant_size() const;
  /// True when every cell has the same size (constant or uniform matrix).
  bool is_uniform() const noexcept;
  int size(int cluster, int period) const { return sizes_(cluster, period); }
  const Eigen::MatrixXi& sizes() const noexcept { return sizes_; }

  double pi_z() const noexcept { return pi_z_; }
  double sigma_z2() const noexcept { return pi_z_ * (1.0 - pi_z_); }

  long long n_obs() const noexcept { return n_obs_; }
  long long n_x1() const noexcept { return n_x1_; }
  long long n_x0() const noexcept { return n_x0_; }

  /// pi_z * m_ij is integral for every cell (within 1e-9).
  bool block_randomisable() const noexcept;
  /// Number of Z = 1 individuals in cell (i, j); requires block_randomisable().
  int treated_in_cell(int cluster, int period) const;

  /// Same sizes, different pi_z.
  CellPlan with_pi_z(double pi_z) const;

 private:
  friend CellPlan cell_plan(const TrialDesign&, int, double);
  friend CellPlan cell_plan(const TrialDesign&, const Eigen::MatrixXi&, double);
  CellPlan(const TrialDesign& d, Eigen::MatrixXi sizes, std::optional<int> constant, double pi_z);

  Eigen::MatrixXi sizes_;
  std::optional<int> constant_;
  double pi_z_;
  long long n_obs_ = 0;
  long long n_x1_ = 0;
  long long n_x0_ = 0;
};

CellPlan cell_plan(const TrialDesign& d, int m, double pi_z);
CellPlan cell_plan(const TrialDesign& d, const Eigen::MatrixXi& sizes, double pi_z);

}  // namespace splitplot

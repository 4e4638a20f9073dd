#pragma once

namespace splitplot {

/// Variance components of the three-level (cluster / cluster-period /
/// residual) outcome model.
struct VarianceComponents {
  double cluster;         // sigma_a^2, shared by every observation in a cluster
  double cluster_period;  // sigma_b^2, shared within one cluster-period
  double residual;        // sigma_eps^2
};

/// Block-exchangeable correlation: total variance plus the within-period
/// ICC (same cluster, same period) and the between-period ICC (same
/// cluster, different periods). Requires 0 <= bpicc <= wpicc < 1.
class CorrelationStructure {
 public:
  /// Validates the ICC ordering with 1e-12 slack; values inside the slack
  /// are snapped onto the boundary.
  CorrelationStructure(double sigma2_total, double wpicc, double bpicc);

  /// Exchangeable special case (bpicc == wpicc).
  static CorrelationStructure exchangeable(double sigma2_total, double icc) {
    return {sigma2_total, icc, icc};
  }

  double sigma2() const noexcept { return sigma2_; }
  double wpicc() const noexcept { return wpicc_; }
  double bpicc() const noexcept { return bpicc_; }

 private:
  double sigma2_;
  double wpicc_;
  double bpicc_;
};

/// Components are nonnegative and satisfy
/// (cluster + cluster_period) + residual == sigma2 bit-exactly.
VarianceComponents components(const CorrelationStructure& corr);

/// Coefficients of the within-cluster covariance
///   Sigma_i = sigma^2 (a1 I_{Tm} + b1 I_T (x) J_m + c1 J_{Tm})
/// its inverse
///   Sigma_i^-1 = sigma^-2 (a2 I_{Tm} + b2 I_T (x) J_m + c2 J_{Tm})
/// and the aggregated a3 = a2 m T, b3 = b2 m^2 T, c3 = c2 m^2 T^2.
struct CovarianceCoefficients {
  double a1, b1, c1;
  double a2, b2, c2;
  double a3, b3, c3;
};

CovarianceCoefficients coefficients(const CorrelationStructure& corr, int m, int periods);

}  // namespace splitplot

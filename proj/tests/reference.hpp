#pragma once

// Test-only reference: generalised least squares over the whole trial with
// the full N x N covariance filled in entry by entry. Shares no code with
// the library's oracle.

#include <Eigen/Dense>
#include <vector>

namespace reftest {

struct Unit {
  int cluster, period, x;
  double z;
};

// Columns: Z, [XZ,] X, period_1..period_T (z coded as given).
inline Eigen::MatrixXd gls_covariance(const Eigen::MatrixXi& x, const Eigen::MatrixXi& sizes,
                                      double pi_z, bool interaction, double s_a, double s_b,
                                      double s_e, bool centred = false) {
  const int n = static_cast<int>(x.rows());
  const int t = static_cast<int>(x.cols());
  std::vector<Unit> units;
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < t; ++j) {
      const int m = sizes(i, j);
      const int ones = static_cast<int>(pi_z * m + 0.5);
      for (int k = 0; k < m; ++k) {
        const double z = k < ones ? 1.0 : 0.0;
        units.push_back({i, j, x(i, j), centred ? z - pi_z : z});
      }
    }
  }
  const int big_n = static_cast<int>(units.size());
  const int p = (interaction ? 3 : 2) + t;
  Eigen::MatrixXd d = Eigen::MatrixXd::Zero(big_n, p);
  Eigen::MatrixXd sigma = Eigen::MatrixXd::Zero(big_n, big_n);
  for (int r = 0; r < big_n; ++r) {
    const Unit& u = units[r];
    int c = 0;
    d(r, c++) = u.z;
    if (interaction) d(r, c++) = u.x * u.z;
    d(r, c++) = u.x;
    d(r, c + u.period) = 1.0;
    for (int s = 0; s < big_n; ++s) {
      const Unit& v = units[s];
      if (u.cluster != v.cluster) continue;
      double cov = s_a;
      if (u.period == v.period) cov += s_b;
      if (r == s) cov += s_e;
      sigma(r, s) = cov;
    }
  }
  const Eigen::MatrixXd w = sigma.ldlt().solve(d);
  const Eigen::MatrixXd info = d.transpose() * w;
  return info.inverse();
}

}  // namespace reftest

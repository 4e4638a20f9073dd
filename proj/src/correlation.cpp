#include "splitplot/correlation.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "splitplot/error.hpp"

namespace splitplot {

namespace {
constexpr double kIccSlack = 1e-12;

std::string fmt(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}
}  // namespace

CorrelationStructure::CorrelationStructure(double sigma2_total, double wpicc, double bpicc)
    : sigma2_(sigma2_total), wpicc_(wpicc), bpicc_(bpicc) {
  if (!std::isfinite(sigma2_) || sigma2_ <= 0.0) {
    throw ValidationError("sigma2 must be > 0 (got " + fmt(sigma2_) + ")");
  }
  if (!std::isfinite(wpicc_) || !std::isfinite(bpicc_)) {
    throw ValidationError("ICCs must be finite");
  }
  if (bpicc_ < -kIccSlack) {
    throw ValidationError("violated 0 <= bpicc (bpicc = " + fmt(bpicc_) + ")");
  }
  if (bpicc_ > wpicc_ + kIccSlack) {
    throw ValidationError("violated bpicc <= wpicc (bpicc = " + fmt(bpicc_) +
                          ", wpicc = " + fmt(wpicc_) + ")");
  }
  if (wpicc_ >= 1.0) {
    throw ValidationError("violated wpicc < 1 (wpicc = " + fmt(wpicc_) + ")");
  }
  if (bpicc_ < 0.0) bpicc_ = 0.0;
  if (wpicc_ < 0.0) wpicc_ = 0.0;
  if (bpicc_ > wpicc_) bpicc_ = wpicc_;
}

namespace {

// Residual r with fl(shared + r) == s2, if one exists.
bool settle_residual(double shared, double s2, double& r) {
  r = s2 - shared;
  // The gap s2 - sum is exact; fold it back in, then step across ties.
  for (int guard = 0; guard < 4 && shared + r != s2; ++guard) r += s2 - (shared + r);
  for (int guard = 0; guard < 4096 && shared + r != s2; ++guard) {
    r = std::nextafter(r, shared + r < s2 ? s2 : 0.0);
  }
  return shared + r == s2;
}

}  // namespace

VarianceComponents components(const CorrelationStructure& corr) {
  const double s2 = corr.sigma2();
  VarianceComponents vc{};
  vc.cluster = corr.bpicc() * s2;
  vc.cluster_period = (corr.wpicc() - corr.bpicc()) * s2;
  // When the shared part sits exactly half an ulp of s2 off the grid, round
  // to even skips s2 for every residual; move the shared part by one ulp.
  for (int guard = 0; guard < 64; ++guard) {
    if (settle_residual(vc.cluster + vc.cluster_period, s2, vc.residual)) break;
    double& part = vc.cluster >= vc.cluster_period ? vc.cluster : vc.cluster_period;
    part = std::nextafter(part, 0.0);
  }
  vc.residual = std::max(vc.residual, 0.0);
  return vc;
}

CovarianceCoefficients coefficients(const CorrelationStructure& corr, int m, int periods) {
  if (m < 1) throw ValidationError("cell size m must be >= 1");
  if (periods < 1) throw ValidationError("number of periods T must be >= 1");
  const double md = m;
  const double td = periods;

  CovarianceCoefficients c{};
  c.a1 = 1.0 - corr.wpicc();
  c.b1 = corr.wpicc() - corr.bpicc();
  c.c1 = corr.bpicc();

  const double within = c.a1 + c.b1 * md;
  c.a2 = 1.0 / c.a1;
  c.b2 = -c.b1 / (c.a1 * within);
  c.c2 = -c.c1 / (within * (within + c.c1 * md * td));

  c.a3 = c.a2 * md * td;
  c.b3 = c.b2 * md * md * td;
  c.c3 = c.c2 * md * md * td * td;
  return c;
}

}  // namespace splitplot

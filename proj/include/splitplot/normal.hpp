#pragma once

namespace splitplot {

/// Standard normal distribution function.
double normal_cdf(double x);

/// Standard normal quantile, p in (0, 1). Wichura's AS 241 (PPND16),
/// relative accuracy about 1e-16.
double normal_quantile(double p);

}  // namespace splitplot

#include <doctest.h>

#include <cmath>

#include "splitplot/error.hpp"
#include "splitplot/normal.hpp"

using namespace splitplot;

TEST_CASE("pinned quantiles") {
  CHECK(normal_quantile(0.975) == doctest::Approx(1.959963984540054).epsilon(1e-15));
  CHECK(normal_quantile(0.8) == doctest::Approx(0.8416212335729143).epsilon(1e-15));
  CHECK(normal_quantile(0.5) == 0.0);
  CHECK(normal_quantile(0.025) == doctest::Approx(-1.959963984540054).epsilon(1e-15));
  CHECK(normal_quantile(1e-10) == doctest::Approx(-6.361340902404056).epsilon(1e-14));
}

TEST_CASE("cdf values") {
  CHECK(normal_cdf(0.0) == 0.5);
  CHECK(normal_cdf(1.959963984540054) == doctest::Approx(0.975).epsilon(1e-15));
  CHECK(normal_cdf(-8.0) == doctest::Approx(6.22096057427178e-16).epsilon(1e-12));
}

TEST_CASE("quantile inverts cdf") {
  for (double p = 1e-6; p < 1.0; p += 0.0137) {
    CHECK(normal_cdf(normal_quantile(p)) == doctest::Approx(p).epsilon(1e-13));
  }
}

TEST_CASE("quantile domain") {
  CHECK_THROWS_AS(normal_quantile(0.0), ValidationError);
  CHECK_THROWS_AS(normal_quantile(1.0), ValidationError);
  CHECK_THROWS_AS(normal_quantile(std::nan("")), ValidationError);
}

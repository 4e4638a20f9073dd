#include <doctest.h>

#include <cmath>
#include <memory>
#include <random>

#include "reference.hpp"
#include "splitplot/correlation.hpp"
#include "splitplot/design.hpp"
#include "splitplot/error.hpp"
#include "splitplot/oracle.hpp"
#include "splitplot/power.hpp"
#include "splitplot/variance.hpp"

using namespace splitplot;

namespace {

const EffectQuery kAll[] = {
    {Estimand::ClusterConditional, Model::WithInteraction},
    {Estimand::ClusterMarginal, Model::WithInteraction},
    {Estimand::Individual, Model::WithInteraction},
    {Estimand::Interaction, Model::WithInteraction},
    {Estimand::ClusterConditional, Model::NoInteraction},
    {Estimand::Individual, Model::NoInteraction},
};

// Same estimand read off the whole-trial reference covariance.
double reference_variance(const TrialDesign& d, const Eigen::MatrixXi& sizes, double pi_z,
                          const CorrelationStructure& corr, const EffectQuery& q) {
  const auto vc = components(corr);
  const bool inter = q.model == Model::WithInteraction;
  const bool centred = q.estimand == Estimand::ClusterMarginal;
  const Eigen::MatrixXd cov = reftest::gls_covariance(d.matrix(), sizes, pi_z, inter, vc.cluster,
                                                      vc.cluster_period, vc.residual, centred);
  switch (q.estimand) {
    case Estimand::Individual: return cov(0, 0);
    case Estimand::Interaction: return cov(1, 1);
    default: return inter ? cov(2, 2) : cov(1, 1);
  }
}

// OLS with period effects for a single-intervention design, one observation
// per cluster-period.
double ols_cluster_variance(const Eigen::MatrixXi& x) {
  const int n = static_cast<int>(x.rows());
  const int t = static_cast<int>(x.cols());
  Eigen::MatrixXd d = Eigen::MatrixXd::Zero(n * t, 1 + t);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < t; ++j) {
      d(i * t + j, 0) = x(i, j);
      d(i * t + j, 1 + j) = 1.0;
    }
  }
  return (d.transpose() * d).inverse()(0, 0);
}

}  // namespace

TEST_CASE("V_LCRT hand value for a three-period stepped wedge") {
  const auto d = stepped_wedge(3);
  const CorrelationStructure iid(1.0, 0.0, 0.0);
  CHECK(ols_cluster_variance(d.matrix()) == doctest::Approx(2.0).epsilon(1e-14));
  CHECK(v_lcrt(d, 1, iid) == 2.0);
}

TEST_CASE("V_LCRT with zero ICC reduces to the OLS form") {
  for (const auto& d : {stepped_wedge(5, 2), shares(), crossover(4, 3)}) {
    const auto s = summarize(d);
    const double n = d.clusters();
    for (int m : {1, 4, 9}) {
      const double expected = 2.5 * n * n / (n * m * (n * s.B - s.E));
      CHECK(v_lcrt(d, m, CorrelationStructure(2.5, 0.0, 0.0)) ==
            doctest::Approx(expected).epsilon(1e-13));
    }
  }
}

TEST_CASE("V_LCRT matches an independent GLS on the cell means") {
  const auto corr = CorrelationStructure(1.3, 0.24, 0.192);
  for (const auto& d : {stepped_wedge(4), shares(), crossover(2, 2)}) {
    for (int m : {1, 2, 6}) {
      // The no-interaction cluster effect has variance V_LCRT; cells of
      // 2m keep the Z split integral for the reference.
      const Eigen::MatrixXi sizes = Eigen::MatrixXi::Constant(d.clusters(), d.periods(), 2 * m);
      const double ref = reference_variance(d, sizes, 0.5, corr,
                                            {Estimand::ClusterConditional, Model::NoInteraction});
      CHECK(v_lcrt(d, 2 * m, corr) == doctest::Approx(ref).epsilon(1e-9));
    }
  }
}

TEST_CASE("degenerate single-intervention design") {
  // Treatment identical to the period effect.
  const TrialDesign d(2, {{{0, 1}, 3}});
  CHECK_THROWS_AS(v_lcrt(d, 2, CorrelationStructure(1.0, 0.1, 0.1)), DegenerateDesignError);
}

TEST_CASE("shares individual effect without interaction") {
  const auto d = shares();
  const auto corr = CorrelationStructure::exchangeable(1.0, 0.2);
  const EffectQuery q{Estimand::Individual, Model::NoInteraction};
  const auto v = effect_variance(d, cell_plan(d, 2, 0.5), corr, q);
  CHECK(v.value == doctest::Approx(0.8 / (2 * 6 * 0.25 * 25)).epsilon(1e-14));
  CHECK(power_for(v.value, 0.35, 0.05) >= 0.8);
  CHECK(power_for(effect_variance(d, cell_plan(d, 1, 0.5), corr, q).value, 0.35, 0.05) < 0.8);
}

TEST_CASE("shares cluster effect without interaction needs m = 4") {
  const auto d = shares();
  const auto corr = CorrelationStructure::exchangeable(1.0, 0.2);
  CHECK(power_for(v_lcrt(d, 4, corr), 0.35, 0.05) >= 0.8);
  CHECK(power_for(v_lcrt(d, 3, corr), 0.35, 0.05) < 0.8);
}

TEST_CASE("decomposition adds up and formula ids are set") {
  const auto d = shares();
  const auto corr = CorrelationStructure(1.0, 0.24, 0.192);
  const auto plan = cell_plan(d, 5, 0.3);
  for (const auto& q : kAll) {
    const auto v = effect_variance(d, plan, corr, q);
    CHECK(v.value == v.v_lcrt_part + v.inflation_part + v.individual_part);
    CHECK_FALSE(v.formula_id.empty());
    if (q.estimand != Estimand::ClusterConditional || q.model == Model::NoInteraction) {
      CHECK(v.inflation_part == 0.0);
    }
  }
}

TEST_CASE("constant and uniform matrix plans agree exactly") {
  const auto corr = CorrelationStructure(1.0, 0.24, 0.192);
  for (const auto& d : {shares(), stepped_wedge(5, 2)}) {
    for (int m : {1, 3, 8}) {
      const auto a = cell_plan(d, m, 0.5);
      const auto b = cell_plan(d, Eigen::MatrixXi::Constant(d.clusters(), d.periods(), m), 0.5);
      for (const auto& q : kAll) {
        CHECK(effect_variance(d, a, corr, q).value == effect_variance(d, b, corr, q).value);
      }
    }
  }
}

TEST_CASE("unequal cells need an LCRT source") {
  const auto d = stepped_wedge(3);
  Eigen::MatrixXi m(2, 3);
  m << 2, 3, 4, 5, 6, 2;
  const auto plan = cell_plan(d, m, 0.5);
  const auto corr = CorrelationStructure(1.0, 0.24, 0.192);
  CHECK_THROWS_WITH_AS(effect_variance(d, plan, corr, {}),
                       doctest::Contains("V_LCRT unavailable"), ValidationError);
  // beta_I does not involve V_LCRT.
  CHECK_NOTHROW(effect_variance(d, plan, corr, {Estimand::Individual, Model::WithInteraction}));
}

TEST_CASE("interaction is not estimable without the interaction term") {
  const EffectQuery q{Estimand::Interaction, Model::NoInteraction};
  CHECK_THROWS_AS(q.validate(), ValidationError);
  CHECK_THROWS_AS(effect_variance(shares(), cell_plan(shares(), 2, 0.5),
                                  CorrelationStructure(1.0, 0.2, 0.2), q),
                  ValidationError);
}

TEST_CASE("variable sizes on a stepped wedge match the cell-mean GLS") {
  std::mt19937_64 gen(5);
  std::uniform_int_distribution<int> sz(2, 6);
  const auto d = stepped_wedge(3);
  const auto corr = CorrelationStructure(1.0, 0.24, 0.192);
  for (int rep = 0; rep < 10; ++rep) {
    Eigen::MatrixXi m(2, 3);
    for (int k = 0; k < 6; ++k) m(k / 3, k % 3) = sz(gen);
    const auto plan = cell_plan(d, m, 0.5);
    for (const auto& q : kAll) {
      if (q.model == Model::NoInteraction) continue;
      const auto param = q.estimand == Estimand::ClusterMarginal ? oracle::Parametrisation::Centred
                                                                  : oracle::Parametrisation::Raw;
      const auto gls = oracle::collapsed_gls(d, plan, corr, q.model, param);
      const char* label = q.estimand == Estimand::Individual    ? "beta_I"
                          : q.estimand == Estimand::Interaction ? "beta_IC"
                          : q.estimand == Estimand::ClusterMarginal ? "beta_C_marginal"
                                                                    : "beta_C";
      const double v = effect_variance(d, plan, corr, q, oracle::lcrt_source()).value;
      CHECK(v == doctest::Approx(gls.variance(label)).epsilon(1e-8));
    }
  }
}

TEST_CASE("closed forms match the whole-trial reference GLS") {
  std::mt19937_64 gen(2024);
  std::uniform_int_distribution<int> tdist(1, 4), ndist(2, 5), bit(0, 1), half(1, 3);
  const CorrelationStructure corrs[] = {{1.0, 0.0, 0.0}, {2.0, 0.2, 0.2}, {1.0, 0.24, 0.192}};
  int checked = 0;
  while (checked < 40) {
    const int t = tdist(gen);
    const int n = ndist(gen);
    std::vector<Sequence> seqs;
    for (int i = 0; i < n; ++i) {
      Sequence s;
      for (int j = 0; j < t; ++j) s.pattern.push_back(bit(gen));
      seqs.push_back(s);
    }
    std::unique_ptr<TrialDesign> d;
    try {
      d = std::make_unique<TrialDesign>(t, seqs);
      v_lcrt(*d, 2, corrs[0]);
    } catch (const DegenerateDesignError&) {
      continue;
    }
    Eigen::MatrixXi sizes(n, t);
    const bool variable = checked % 2 == 1;
    const int common = 2 * half(gen);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < t; ++j) sizes(i, j) = variable ? 2 * half(gen) : common;
    const auto plan = variable ? cell_plan(*d, sizes, 0.5) : cell_plan(*d, common, 0.5);
    const auto& corr = corrs[checked % 3];
    for (const auto& q : kAll) {
      const double closed = effect_variance(*d, plan, corr, q, oracle::lcrt_source()).value;
      const double ref = reference_variance(*d, sizes, 0.5, corr, q);
      CHECK(closed == doctest::Approx(ref).epsilon(1e-8));
    }
    ++checked;
  }
}

TEST_CASE("interaction ratios") {
  const auto corr = CorrelationStructure(1.0, 0.24, 0.192);
  const auto r = interaction_ratio_check(shares(), cell_plan(shares(), 4, 0.5), corr);
  CHECK(r.individual_with_over_without == doctest::Approx(2.0).epsilon(1e-14));
  CHECK(r.individual_over_interaction == doctest::Approx(0.5).epsilon(1e-14));
  const auto p = interaction_ratio_check(parallel(3, 2), cell_plan(parallel(3, 2), 2, 0.2), corr);
  CHECK(p.individual_with_over_without == doctest::Approx(2.0).epsilon(1e-14));
  CHECK(p.individual_over_interaction == doctest::Approx(0.5).epsilon(1e-14));
  const auto sw = stepped_wedge(5);
  const auto s = interaction_ratio_check(sw, cell_plan(sw, 3, 0.5), corr);
  const double pi_x = summarize(sw).pi_x;
  CHECK(s.individual_with_over_without == doctest::Approx(1.0 / (1.0 - pi_x)).epsilon(1e-13));
  CHECK(s.individual_over_interaction == doctest::Approx(pi_x).epsilon(1e-13));
}

TEST_CASE("contrast covariance") {
  const auto d = shares();
  const auto corr = CorrelationStructure(1.0, 0.24, 0.192);
  const auto plan = cell_plan(d, 4, 0.5);
  const auto cc = contrast_covariance(d, plan, corr);
  CHECK((cc.cov - cc.cov.transpose()).cwiseAbs().maxCoeff() == 0.0);
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> es(cc.cov);
  CHECK(es.eigenvalues().minCoeff() >= -1e-15);
  const auto var = [&](Estimand e) {
    return effect_variance(d, plan, corr, {e, Model::WithInteraction}).value;
  };
  CHECK(cc.cov(0, 0) == doctest::Approx(var(Estimand::Individual)).epsilon(1e-13));
  CHECK(cc.cov(1, 1) == doctest::Approx(var(Estimand::ClusterConditional)).epsilon(1e-13));
  CHECK(cc.k_star == doctest::Approx(var(Estimand::Interaction)).epsilon(1e-13));

  // Third row against the reference GLS: beta_C + beta_I + beta_IC.
  const auto vc = components(corr);
  const Eigen::MatrixXd ref = reftest::gls_covariance(
      d.matrix(), Eigen::MatrixXi::Constant(25, 6, 4), 0.5, true, vc.cluster, vc.cluster_period,
      vc.residual);
  const Eigen::Vector3d a(1.0, 1.0, 1.0);
  const double combined = a.dot(ref.topLeftCorner(3, 3) * a);
  CHECK(cc.cov(2, 2) == doctest::Approx(combined).epsilon(1e-9));
  const Eigen::Vector3d c(0.0, 0.0, 1.0);
  CHECK(cc.cov(1, 2) == doctest::Approx(c.dot(ref.topLeftCorner(3, 3) * a)).epsilon(1e-9));
  CHECK_THROWS_AS(contrast_covariance(stepped_wedge(3),
                                      cell_plan(stepped_wedge(3),
                                                (Eigen::MatrixXi(2, 3) << 2, 2, 2, 2, 2, 4).finished(),
                                                0.5),
                                      corr),
                  ValidationError);
}

TEST_CASE("rho_C does not enter the individual-level variances") {
  const auto d = shares();
  const auto plan = cell_plan(d, 7, 0.2);
  for (const auto e : {Estimand::Individual, Estimand::Interaction}) {
    const EffectQuery q{e, Model::WithInteraction};
    const double a = effect_variance(d, plan, CorrelationStructure(1.0, 0.24, 0.0), q).value;
    const double b = effect_variance(d, plan, CorrelationStructure(1.0, 0.24, 0.24), q).value;
    CHECK(a == b);
  }
}

TEST_CASE("variances decrease in m") {
  const auto d = shares();
  const auto corr = CorrelationStructure(1.0, 0.24, 0.192);
  for (const auto& q : kAll) {
    double prev = INFINITY;
    for (int m = 1; m <= 30; ++m) {
      const double v = effect_variance(d, cell_plan(d, m, 0.5), corr, q).value;
      CHECK(v < prev);
      prev = v;
    }
  }
}

#include "splitplot/verify.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>
#include <random>
#include <sstream>

#include "splitplot/error.hpp"
#include "splitplot/oracle.hpp"

namespace splitplot::verify {

namespace {

using oracle::Parametrisation;

class SweepRng {
 public:
  explicit SweepRng(std::uint64_t seed) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)};
    engine_.seed(seq);
  }
  /// Uniform in [lo, hi].
  int between(int lo, int hi) {
    const std::uint64_t span = static_cast<std::uint64_t>(hi - lo) + 1;
    const std::uint64_t limit =
        std::numeric_limits<std::uint64_t>::max() - std::numeric_limits<std::uint64_t>::max() % span;
    std::uint64_t r;
    do {
      r = engine_();
    } while (r >= limit);
    return lo + static_cast<int>(r % span);
  }
  template <class T>
  const T& pick(const std::vector<T>& v) {
    return v[static_cast<std::size_t>(between(0, static_cast<int>(v.size()) - 1))];
  }

 private:
  std::mt19937_64 engine_;
};

double rel_err(double got, double want) {
  return std::abs(got - want) / std::max(std::abs(want), std::numeric_limits<double>::min());
}

std::string describe(const SweepConfig& c) {
  std::ostringstream os;
  os << "n=" << c.design.clusters() << " T=" << c.design.periods() << " pi_z=" << c.plan.pi_z()
     << " wpicc=" << c.corr.wpicc() << " bpicc=" << c.corr.bpicc()
     << (c.plan.is_constant() ? " m=" + std::to_string(c.plan.constant_size()) : " m=variable");
  return os.str();
}

void record(PropertyReport& r, double dev, const std::string& what) {
  ++r.checks;
  if (!(dev <= r.worst)) r.worst = std::isnan(dev) ? std::numeric_limits<double>::infinity() : dev;
  if (!(dev <= r.tolerance) && r.passed) {
    r.passed = false;
    std::ostringstream os;
    os.precision(3);
    os << what << " deviates by " << dev;
    r.detail = os.str();
  }
}

struct Target {
  EffectQuery query;
  Parametrisation param;
  const char* label;
};

const std::vector<Target>& targets() {
  static const std::vector<Target> all{
      {{Estimand::Individual, Model::WithInteraction}, Parametrisation::Raw, "beta_I"},
      {{Estimand::Interaction, Model::WithInteraction}, Parametrisation::Raw, "beta_IC"},
      {{Estimand::ClusterConditional, Model::WithInteraction}, Parametrisation::Raw, "beta_C"},
      {{Estimand::ClusterMarginal, Model::WithInteraction}, Parametrisation::Centred,
       "beta_C_marginal"},
      {{Estimand::Individual, Model::NoInteraction}, Parametrisation::Raw, "beta_I"},
      {{Estimand::ClusterConditional, Model::NoInteraction}, Parametrisation::Raw, "beta_C"},
  };
  return all;
}

template <class Oracle>
PropertyReport closed_form_vs(const std::vector<SweepConfig>& sweep,
                              const ClosedFormFn& closed_form, double tol, std::string name,
                              Oracle&& gls) {
  PropertyReport r;
  r.name = std::move(name);
  r.tolerance = tol;
  const auto source = oracle::lcrt_source();
  for (const auto& c : sweep) {
    for (const auto& t : targets()) {
      const auto cov = gls(c, t.query.model, t.param);
      const double want = cov.variance(t.label);
      const double got = closed_form(c.design, c.plan, c.corr, t.query, source).value;
      record(r, rel_err(got, want),
             describe(c) + " " + std::string(to_string(t.query.model)) + " " + t.label);
    }
  }
  return r;
}

}  // namespace

ClosedFormFn default_closed_form() {
  return [](const TrialDesign& d, const CellPlan& p, const CorrelationStructure& c,
            const EffectQuery& q, const LcrtVarianceSource& s) {
    return effect_variance(d, p, c, q, s);
  };
}

std::vector<SweepConfig> make_sweep(std::uint64_t seed, int count, bool block_randomised) {
  SweepRng rng(seed);
  const std::vector<double> pi_zs{0.2, 0.5};
  const std::vector<std::pair<double, double>> iccs{{0.0, 0.0}, {0.2, 0.2}, {0.24, 0.192}};
  const std::vector<double> sigma2s{1.0, 2.5};

  std::vector<SweepConfig> out;
  out.reserve(static_cast<std::size_t>(count));
  while (static_cast<int>(out.size()) < count) {
    const int n = rng.between(2, 8);
    const int t = rng.between(1, 5);
    std::vector<Sequence> seqs;
    for (int i = 0; i < n; ++i) {
      Sequence s{std::vector<int>(static_cast<std::size_t>(t)), 1};
      for (auto& v : s.pattern) v = rng.between(0, 1);
      seqs.push_back(std::move(s));
    }
    const double pi_z = rng.pick(pi_zs);
    const auto [wpicc, bpicc] = rng.pick(iccs);
    const CorrelationStructure corr(rng.pick(sigma2s), wpicc, bpicc);
    const bool constant = rng.between(0, 1) == 0;

    std::vector<int> sizes;
    if (block_randomised) {
      sizes = pi_z == 0.5 ? std::vector<int>{2, 4, 6} : std::vector<int>{5, 10};
    } else {
      sizes = {1, 2, 3, 4, 5, 6};
    }
    try {
      TrialDesign d(t, std::move(seqs));
      v_lcrt(d, 1, CorrelationStructure(1.0, 0.0, 0.0));  // estimability of the cluster effect
      if (constant) {
        out.push_back({d, cell_plan(d, rng.pick(sizes), pi_z), corr});
      } else {
        Eigen::MatrixXi m(n, t);
        for (int i = 0; i < n; ++i)
          for (int j = 0; j < t; ++j) m(i, j) = rng.pick(sizes);
        out.push_back({d, cell_plan(d, m, pi_z), corr});
      }
    } catch (const DegenerateDesignError&) {
      // redraw
    }
  }
  return out;
}

PropertyReport closed_form_vs_full_gls(const std::vector<SweepConfig>& sweep,
                                       const ClosedFormFn& closed_form, double tol) {
  return closed_form_vs(sweep, closed_form, tol, "closed_form_vs_full_gls",
                        [](const SweepConfig& c, Model m, Parametrisation p) {
                          return oracle::full_gls(c.design, c.plan, c.corr, m, p);
                        });
}

PropertyReport closed_form_vs_collapsed_gls(const std::vector<SweepConfig>& sweep,
                                            const ClosedFormFn& closed_form, double tol) {
  return closed_form_vs(sweep, closed_form, tol, "closed_form_vs_collapsed_gls",
                        [](const SweepConfig& c, Model m, Parametrisation p) {
                          return oracle::collapsed_gls(c.design, c.plan, c.corr, m, p);
                        });
}

PropertyReport full_vs_collapsed(const std::vector<SweepConfig>& sweep, double tol) {
  PropertyReport r;
  r.name = "full_gls_vs_collapsed_gls";
  r.tolerance = tol;
  for (const auto& c : sweep) {
    for (Model model : {Model::WithInteraction, Model::NoInteraction}) {
      for (Parametrisation p : {Parametrisation::Raw, Parametrisation::Centred}) {
        const auto full = oracle::full_gls(c.design, c.plan, c.corr, model, p);
        const auto coll = oracle::collapsed_gls(c.design, c.plan, c.corr, model, p);
        double dev = 0.0;
        for (int k = 0; k < full.cov.rows(); ++k) {
          for (int l = 0; l < full.cov.cols(); ++l) {
            const double scale = std::sqrt(full.cov(k, k) * full.cov(l, l));
            dev = std::max(dev, std::abs(full.cov(k, l) - coll.cov(k, l)) / scale);
          }
        }
        record(r, dev, describe(c) + " " + std::string(to_string(model)));
      }
    }
  }
  return r;
}

PropertyReport marginal_effect_uncorrelated(const std::vector<SweepConfig>& sweep, double tol) {
  PropertyReport r;
  r.name = "marginal_cluster_effect_uncorrelated";
  r.tolerance = tol;
  for (const auto& c : sweep) {
    const auto cov = oracle::full_gls(c.design, c.plan, c.corr, Model::WithInteraction,
                                      Parametrisation::Centred);
    const double vm = cov.variance("beta_C_marginal");
    for (const char* other : {"beta_I", "beta_IC"}) {
      const double corr = cov.covariance("beta_C_marginal", other) /
                          std::sqrt(vm * cov.variance(other));
      record(r, std::abs(corr), describe(c) + " corr(beta_C_marginal, " + other + ")");
    }
  }
  return r;
}

PropertyReport analytic_identities(const std::vector<SweepConfig>& sweep,
                                   const ClosedFormFn& closed_form, double tol) {
  PropertyReport r;
  r.name = "analytic_identities";
  r.tolerance = tol;
  const auto source = oracle::lcrt_source();
  for (const auto& c : sweep) {
    if (!c.plan.is_uniform()) continue;
    const std::string where = describe(c);
    const auto var = [&](const CellPlan& plan, const CorrelationStructure& corr, Estimand e,
                         Model m) { return closed_form(c.design, plan, corr, {e, m}, source).value; };
    const double pi_x = summarize(c.design).pi_x;
    const double pi_z = c.plan.pi_z();
    const double i_int = var(c.plan, c.corr, Estimand::Individual, Model::WithInteraction);
    const double i_no = var(c.plan, c.corr, Estimand::Individual, Model::NoInteraction);
    const double ic = var(c.plan, c.corr, Estimand::Interaction, Model::WithInteraction);
    const double cc = var(c.plan, c.corr, Estimand::ClusterConditional, Model::WithInteraction);
    const double cm = var(c.plan, c.corr, Estimand::ClusterMarginal, Model::WithInteraction);

    record(r, rel_err(i_int, i_no / (1.0 - pi_x)), where + " var_I(int) = var_I(no)/(1-pi_x)");
    record(r, rel_err(i_int, pi_x * ic), where + " var_I = pi_x var_IC");
    record(r, rel_err(cc - cm, pi_z * pi_z * ic), where + " var_C - var~_C = pi_z^2 var_IC");

    // rho_C enters only through V_LCRT.
    const CorrelationStructure perturbed(c.corr.sigma2(), c.corr.wpicc(), 0.5 * c.corr.bpicc());
    const bool same = var(c.plan, perturbed, Estimand::Individual, Model::WithInteraction) == i_int &&
                      var(c.plan, perturbed, Estimand::Interaction, Model::WithInteraction) == ic &&
                      var(c.plan, perturbed, Estimand::Individual, Model::NoInteraction) == i_no;
    record(r, same ? 0.0 : std::numeric_limits<double>::infinity(),
           where + " rho_C perturbation changed beta_I/beta_IC variance");

    // The variable-size expressions at equal sizes.
    const CellPlan as_matrix = cell_plan(c.design, c.plan.sizes(), pi_z);
    const CellPlan as_constant = cell_plan(c.design, c.plan.size(0, 0), pi_z);
    for (const auto& t : targets()) {
      const double a = closed_form(c.design, as_constant, c.corr, t.query, source).value;
      const double b = closed_form(c.design, as_matrix, c.corr, t.query, source).value;
      record(r, rel_err(b, a), where + " variable-size form at equal m, " + t.label);
    }
  }
  return r;
}

MonteCarloCheck monte_carlo(std::uint64_t seed, int replicates, const ClosedFormFn& closed_form,
                            double rel_tol) {
  const TrialDesign d = stepped_wedge(4, 3);
  const CellPlan plan = cell_plan(d, 6, 0.5);
  const CorrelationStructure corr(1.0, 0.24, 0.192);
  oracle::TrueEffects effects;
  effects.beta_c = 0.3;
  effects.beta_i = 0.2;
  effects.beta_ic = -0.1;
  effects.period = {0.0, 0.1, 0.2, 0.3};

  const auto mc = oracle::empirical_estimator_cov(d, plan, corr, effects, replicates, seed);
  const auto gls = oracle::full_gls(d, plan, corr, Model::WithInteraction);

  MonteCarloCheck out;
  out.covariance.name = "monte_carlo_covariance";
  out.covariance.tolerance = rel_tol;
  out.unbiased.name = "monte_carlo_unbiased";
  out.unbiased.tolerance = 4.0;

  const auto source = oracle::lcrt_source();
  const std::vector<std::pair<const char*, Estimand>> closed{
      {"beta_I", Estimand::Individual},
      {"beta_IC", Estimand::Interaction},
      {"beta_C", Estimand::ClusterConditional}};
  for (const auto& [label, e] : closed) {
    const int k = gls.index(label);
    const double want = closed_form(d, plan, corr, {e, Model::WithInteraction}, source).value;
    record(out.covariance, rel_err(mc.cov(k, k), want),
           std::string("empirical var(") + label + ") vs closed form");
  }
  const Eigen::VectorXd se = mc.standard_error();
  for (int k = 0; k < mc.cov.rows(); ++k) {
    record(out.covariance, rel_err(mc.cov(k, k), gls.cov(k, k)),
           "empirical var(" + mc.labels[k] + ") vs GLS");
    record(out.unbiased, std::abs(mc.mean(k) - mc.truth(k)) / se(k),
           "mean of " + mc.labels[k] + " (in standard errors)");
  }
  return out;
}

std::vector<PropertyReport> run_verification(const VerifyOptions& o) {
  const auto block = make_sweep(o.seed, o.configurations, true);
  const auto any = make_sweep(o.seed + 1, o.configurations, false);
  std::vector<SweepConfig> variable;
  for (const auto& c : block) {
    if (!c.plan.is_constant()) variable.push_back(c);
  }

  std::vector<PropertyReport> out;
  out.push_back(closed_form_vs_full_gls(block, o.closed_form));
  out.push_back(closed_form_vs_collapsed_gls(any, o.closed_form));
  out.push_back(full_vs_collapsed(variable));
  out.push_back(marginal_effect_uncorrelated(block));
  out.push_back(analytic_identities(any, o.closed_form));
  if (o.monte_carlo) {
    auto mc = monte_carlo(o.seed, o.replicates, o.closed_form);
    out.push_back(std::move(mc.covariance));
    out.push_back(std::move(mc.unbiased));
  }
  return out;
}

void print_reports(const std::vector<PropertyReport>& reports, std::ostream& out) {
  const auto old = out.precision(3);
  for (const auto& r : reports) {
    out << (r.passed ? "PASS " : "FAIL ") << r.name << "  checks=" << r.checks
        << "  worst=" << std::scientific << r.worst << "  tol=" << r.tolerance
        << std::defaultfloat << '\n';
    if (!r.passed) out << "     first failure: " << r.detail << '\n';
  }
  out.precision(old);
}

}  // namespace splitplot::verify

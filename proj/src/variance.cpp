#include "splitplot/variance.hpp"

#include <cmath>

#include "splitplot/error.hpp"

namespace splitplot {

std::string_view to_string(Estimand e) {
  switch (e) {
    case Estimand::ClusterConditional: return "beta_C";
    case Estimand::ClusterMarginal: return "beta_C_marginal";
    case Estimand::Individual: return "beta_I";
    case Estimand::Interaction: return "beta_IC";
  }
  return "?";
}

std::string_view to_string(Model m) {
  return m == Model::WithInteraction ? "interaction" : "no-interaction";
}

void EffectQuery::validate() const {
  if (estimand == Estimand::Interaction && model == Model::NoInteraction) {
    throw ValidationError("the interaction effect requires the model with interaction");
  }
}

namespace {

std::string formula_id(const EffectQuery& q, bool equal_sizes) {
  std::string id(to_string(q.model));
  id += equal_sizes ? "/equal-m/" : "/variable-m/";
  // Under no interaction beta~_C and beta_C coincide.
  const Estimand e = (q.model == Model::NoInteraction && q.estimand == Estimand::ClusterMarginal)
                         ? Estimand::ClusterConditional
                         : q.estimand;
  id += to_string(e);
  return id;
}

void require_nondegenerate(double pi_x) {
  if (!(pi_x > 0.0 && pi_x < 1.0)) {
    throw DegenerateDesignError("degenerate design: pi_x must lie strictly between 0 and 1");
  }
}

}  // namespace

double v_lcrt_continuous(const TrialDesign& d, double m, const CorrelationStructure& corr) {
  if (!(m >= 1.0)) throw ValidationError("cell size m must be >= 1");
  const DesignSummary s = summarize(d);
  const double n = d.clusters();
  const double t = d.periods();
  const double rho_ct = corr.wpicc();
  const double rho_c = corr.bpicc();
  const double inflation = 1.0 + (m - 1.0) * rho_ct;
  const double r = m * rho_c / inflation;

  const double base = n * s.B - s.E;
  const double slope = s.B * s.B + n * (t - 1.0) * s.B - (t - 1.0) * s.E - n * s.C;
  const double den = base + slope * r;
  const double scale = std::max(1.0, n * s.B);
  if (!(den > 1e-12 * scale)) {
    throw DegenerateDesignError(
        "degenerate design: cluster-level effect is confounded with period effects");
  }
  const double num = n * n * (1.0 - r) * (1.0 + (t - 1.0) * r) * inflation;
  return corr.sigma2() / (n * m) * num / den;
}

double v_lcrt(const TrialDesign& d, int m, const CorrelationStructure& corr) {
  if (m < 1) throw ValidationError("cell size m must be >= 1");
  return v_lcrt_continuous(d, static_cast<double>(m), corr);
}

double effect_variance_continuous(const TrialDesign& d, double m, double pi_z,
                                  const CorrelationStructure& corr, const EffectQuery& q) {
  q.validate();
  if (!(pi_z > 0.0 && pi_z < 1.0)) throw ValidationError("pi_z must lie strictly between 0 and 1");
  const double pi_x = summarize(d).pi_x;
  require_nondegenerate(pi_x);
  const double n = d.clusters();
  const double t = d.periods();
  const double sz2 = pi_z * (1.0 - pi_z);
  const double resid = (1.0 - corr.wpicc()) * corr.sigma2();
  const double per_obs = resid / (n * m * t * sz2);

  if (q.model == Model::NoInteraction) {
    if (q.estimand == Estimand::Individual) return per_obs;
    return v_lcrt_continuous(d, m, corr);
  }
  const double k_star = per_obs / (pi_x * (1.0 - pi_x));
  switch (q.estimand) {
    case Estimand::Individual: return per_obs / (1.0 - pi_x);
    case Estimand::Interaction: return k_star;
    case Estimand::ClusterMarginal: return v_lcrt_continuous(d, m, corr);
    case Estimand::ClusterConditional:
      return v_lcrt_continuous(d, m, corr) + pi_z * pi_z * k_star;
  }
  return 0.0;
}

VarianceResult effect_variance(const TrialDesign& d, const CellPlan& plan,
                               const CorrelationStructure& corr, const EffectQuery& q,
                               const LcrtVarianceSource& lcrt_source) {
  q.validate();
  if (plan.clusters() != d.clusters() || plan.periods() != d.periods()) {
    throw ValidationError("cell plan does not match the design dimensions");
  }
  const double pi_x = summarize(d).pi_x;
  require_nondegenerate(pi_x);

  const double pi_z = plan.pi_z();
  const double sz2 = plan.sigma_z2();
  const double resid = (1.0 - corr.wpicc()) * corr.sigma2();
  const bool cluster_estimand =
      q.estimand == Estimand::ClusterConditional || q.estimand == Estimand::ClusterMarginal;

  VarianceResult out;
  out.formula_id = formula_id(q, plan.is_constant());

  if (plan.is_constant()) {
    const double m = plan.constant_size();
    const double n = d.clusters();
    const double t = d.periods();
    const double per_obs = resid / (n * m * t * sz2);
    if (cluster_estimand) out.v_lcrt_part = v_lcrt(d, plan.constant_size(), corr);

    if (q.model == Model::NoInteraction) {
      if (q.estimand == Estimand::Individual) out.individual_part = per_obs;
    } else {
      const double k_star = per_obs / (pi_x * (1.0 - pi_x));
      switch (q.estimand) {
        case Estimand::Individual: out.individual_part = per_obs / (1.0 - pi_x); break;
        case Estimand::Interaction: out.individual_part = k_star; break;
        case Estimand::ClusterMarginal: break;
        case Estimand::ClusterConditional: out.inflation_part = pi_z * pi_z * k_star; break;
      }
    }
  } else {
    const double n_obs = static_cast<double>(plan.n_obs());
    const double n_x1 = static_cast<double>(plan.n_x1());
    const double n_x0 = static_cast<double>(plan.n_x0());
    if (cluster_estimand) {
      if (plan.is_uniform()) {
        out.v_lcrt_part = v_lcrt(d, plan.size(0, 0), corr);
      } else if (lcrt_source) {
        out.v_lcrt_part = lcrt_source(d, plan, corr);
      } else {
        throw ValidationError(
            "V_LCRT unavailable for unequal cells: no closed form exists, supply a numerical "
            "V_LCRT source");
      }
    }
    if (q.model == Model::NoInteraction) {
      if (q.estimand == Estimand::Individual) out.individual_part = resid / (sz2 * n_obs);
    } else {
      switch (q.estimand) {
        case Estimand::Individual: out.individual_part = resid / (sz2 * n_x0); break;
        case Estimand::Interaction:
          out.individual_part = resid * n_obs / (sz2 * n_x1 * n_x0);
          break;
        case Estimand::ClusterMarginal: break;
        case Estimand::ClusterConditional:
          out.inflation_part = resid * pi_z * n_obs / ((1.0 - pi_z) * n_x1 * n_x0);
          break;
      }
    }
  }
  out.value = out.v_lcrt_part + out.inflation_part + out.individual_part;
  return out;
}

InteractionRatios interaction_ratio_check(const TrialDesign& d, const CellPlan& plan,
                                          const CorrelationStructure& corr) {
  if (!plan.is_uniform()) throw ValidationError("interaction ratios need equal cell sizes");
  const auto var = [&](Estimand e, Model m) {
    return effect_variance(d, plan, corr, {e, m}).value;
  };
  const double i_int = var(Estimand::Individual, Model::WithInteraction);
  return {i_int / var(Estimand::Individual, Model::NoInteraction),
          i_int / var(Estimand::Interaction, Model::WithInteraction)};
}

ContrastCovariance contrast_covariance(const TrialDesign& d, const CellPlan& plan,
                                       const CorrelationStructure& corr) {
  if (!plan.is_uniform()) throw ValidationError("contrast covariance needs equal cell sizes");
  const double pi_x = summarize(d).pi_x;
  require_nondegenerate(pi_x);
  const double m = plan.size(0, 0);
  const double pi_z = plan.pi_z();
  const double k_star = (1.0 - corr.wpicc()) * corr.sigma2() /
                        (d.clusters() * m * d.periods() * plan.sigma_z2() * pi_x * (1.0 - pi_x));
  const double v = v_lcrt(d, plan.size(0, 0), corr);

  Eigen::Matrix3d base;
  base << k_star * pi_x, -k_star * pi_x, 0.0,
          -k_star * pi_x, k_star, 0.0,
          0.0, 0.0, v;
  Eigen::Matrix3d l;
  l << 1.0, 0.0, 0.0,
       0.0, -pi_z, 1.0,
       1.0, 1.0 - pi_z, 1.0;

  ContrastCovariance out;
  out.k_star = k_star;
  out.cov = l * base * l.transpose();
  out.cov = 0.5 * (out.cov + out.cov.transpose());
  return out;
}

}  // namespace splitplot

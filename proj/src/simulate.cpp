#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>
#include <random>

#include "oracle_detail.hpp"
#include "splitplot/error.hpp"
#include "splitplot/oracle.hpp"

namespace splitplot::oracle {

namespace {

// mt19937_64 and seed_seq are fully specified by the standard; the
// distributions are not, so uniforms and normals are derived by hand to keep
// streams identical across standard libraries.
class NormalStream {
 public:
  NormalStream(std::uint64_t seed, std::uint64_t stream) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(stream),
                      static_cast<std::uint32_t>(stream >> 32)};
    engine_.seed(seq);
  }

  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  // Marsaglia polar method.
  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u, v, s;
    do {
      u = 2.0 * uniform() - 1.0;
      v = 2.0 * uniform() - 1.0;
      s = u * u + v * v;
    } while (s >= 1.0 || s == 0.0);
    const double f = std::sqrt(-2.0 * std::log(s) / s);
    spare_ = v * f;
    has_spare_ = true;
    return u * f;
  }

  /// Uniform integer in [0, bound).
  std::uint64_t below(std::uint64_t bound) {
    const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                                std::numeric_limits<std::uint64_t>::max() % bound;
    std::uint64_t r;
    do {
      r = engine_();
    } while (r >= limit);
    return r % bound;
  }

 private:
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

double period_effect(const TrueEffects& e, int j) {
  return e.period.empty() ? 0.0 : e.period.at(static_cast<std::size_t>(j));
}

void check_effects(const TrialDesign& d, const TrueEffects& e) {
  if (!e.period.empty() && static_cast<int>(e.period.size()) != d.periods()) {
    throw ValidationError("period effects must have one entry per period");
  }
}

}  // namespace

Dataset simulate_trial(const TrialDesign& d, const CellPlan& plan,
                       const CorrelationStructure& corr, const TrueEffects& effects,
                       std::uint64_t seed, std::uint64_t stream) {
  if (plan.clusters() != d.clusters() || plan.periods() != d.periods()) {
    throw ValidationError("cell plan does not match the design dimensions");
  }
  if (!plan.block_randomisable()) {
    throw ValidationError("pi_z * m_ij must be an integer in every cell for block randomisation");
  }
  check_effects(d, effects);
  const VarianceComponents vc = components(corr);
  const double sd_a = std::sqrt(vc.cluster);
  const double sd_b = std::sqrt(vc.cluster_period);
  const double sd_e = std::sqrt(vc.residual);

  NormalStream rng(seed, stream);
  Dataset data;
  data.rows.reserve(static_cast<std::size_t>(plan.n_obs()));
  std::vector<int> z;
  for (int i = 0; i < d.clusters(); ++i) {
    const double a = sd_a * rng.normal();
    int individual = 0;
    for (int j = 0; j < d.periods(); ++j) {
      const double b = sd_b * rng.normal();
      const int m = plan.size(i, j);
      const int treated = plan.treated_in_cell(i, j);
      z.assign(static_cast<std::size_t>(m), 0);
      std::fill(z.end() - treated, z.end(), 1);
      for (int k = m - 1; k > 0; --k) {
        std::swap(z[k], z[rng.below(static_cast<std::uint64_t>(k) + 1)]);
      }
      const int x = d.x(i, j);
      for (int k = 0; k < m; ++k) {
        Observation o;
        o.cluster = i;
        o.period = j;
        o.individual = individual++;
        o.x = x;
        o.z = z[k];
        o.y = effects.beta_c * x + effects.beta_i * o.z + effects.beta_ic * x * o.z +
              period_effect(effects, j) + a + b + sd_e * rng.normal();
        data.rows.push_back(o);
      }
    }
  }
  return data;
}

void write_csv(const Dataset& data, std::ostream& out) {
  out << "cluster,period,individual,x,z,y\n";
  const auto old = out.precision(17);
  for (const auto& o : data.rows) {
    out << o.cluster + 1 << ',' << o.period + 1 << ',' << o.individual + 1 << ',' << o.x << ','
        << o.z << ',' << o.y << '\n';
  }
  out.precision(old);
}

Eigen::VectorXd MonteCarloResult::standard_error() const {
  return (cov.diagonal() / static_cast<double>(replicates)).cwiseSqrt();
}

MonteCarloResult empirical_estimator_cov(const TrialDesign& d, const CellPlan& plan,
                                         const CorrelationStructure& corr,
                                         const TrueEffects& effects, int replicates,
                                         std::uint64_t seed, Model model, Parametrisation param) {
  if (replicates < 2) throw ValidationError("need at least 2 replicates");
  check_effects(d, effects);
  if (model == Model::NoInteraction && effects.beta_ic != 0.0) {
    throw ValidationError("nonzero interaction cannot be fitted by the no-interaction model");
  }
  const FullModelMatrices fm = build_full_model(d, plan, corr, model, param);
  const GlsCovariance gls = full_gls(d, plan, corr, model, param, plan.n_obs());
  const int p = static_cast<int>(fm.labels.size());

  // beta_hat = sum_i G_i y_i with G_i = Cov D_i^T Sigma_i^-1.
  std::vector<Eigen::MatrixXd> gain;
  for (std::size_t i = 0; i < fm.design.size(); ++i) {
    Eigen::LLT<Eigen::MatrixXd> llt(fm.covariance[i]);
    gain.push_back(gls.cov * llt.solve(fm.design[i]).transpose());
  }

  MonteCarloResult out;
  out.labels = fm.labels;
  out.replicates = replicates;
  out.truth = Eigen::VectorXd::Zero(p);
  {
    const double pi_z = plan.pi_z();
    const bool centred = param == Parametrisation::Centred;
    int c = 0;
    out.truth(c++) = effects.beta_i;
    if (model == Model::WithInteraction) out.truth(c++) = effects.beta_ic;
    out.truth(c++) = centred ? effects.beta_c + pi_z * effects.beta_ic : effects.beta_c;
    for (int j = 0; j < d.periods(); ++j) {
      out.truth(c + j) = centred ? period_effect(effects, j) + pi_z * effects.beta_i
                                 : period_effect(effects, j);
    }
  }

  Eigen::MatrixXd estimates(p, replicates);
  std::vector<Eigen::VectorXd> y(fm.design.size());
  for (std::size_t i = 0; i < fm.design.size(); ++i) y[i].resize(fm.design[i].rows());

  for (int r = 0; r < replicates; ++r) {
    const Dataset data = simulate_trial(d, plan, corr, effects, seed, static_cast<std::uint64_t>(r));
    // Rows of D_i list each cell's Z = 0 individuals before its Z = 1
    // individuals; individuals within a (cell, Z) group are exchangeable.
    std::size_t pos = 0;
    for (int i = 0; i < d.clusters(); ++i) {
      int row = 0;
      for (int j = 0; j < d.periods(); ++j) {
        const int m = plan.size(i, j);
        int next0 = row;
        int next1 = row + m - plan.treated_in_cell(i, j);
        for (int k = 0; k < m; ++k, ++pos) {
          const auto& o = data.rows[pos];
          y[i](o.z == 0 ? next0++ : next1++) = o.y;
        }
        row += m;
      }
    }
    Eigen::VectorXd est = Eigen::VectorXd::Zero(p);
    for (std::size_t i = 0; i < gain.size(); ++i) est.noalias() += gain[i] * y[i];
    estimates.col(r) = est;
  }

  out.mean = estimates.rowwise().mean();
  const Eigen::MatrixXd centred = estimates.colwise() - out.mean;
  out.cov = centred * centred.transpose() / static_cast<double>(replicates - 1);
  return out;
}

}  // namespace splitplot::oracle

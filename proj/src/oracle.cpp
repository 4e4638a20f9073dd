#include "splitplot/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "oracle_detail.hpp"
#include "splitplot/error.hpp"

namespace splitplot::oracle {

int GlsCovariance::index(std::string_view label) const {
  for (std::size_t k = 0; k < labels.size(); ++k) {
    if (labels[k] == label) return static_cast<int>(k);
  }
  throw ValidationError("no fixed effect labelled '" + std::string(label) + "'");
}

double GlsCovariance::variance(std::string_view label) const {
  const int k = index(label);
  return cov(k, k);
}

double GlsCovariance::covariance(std::string_view a, std::string_view b) const {
  return cov(index(a), index(b));
}

namespace detail {

std::vector<std::string> effect_labels(int periods, Model model, Parametrisation param) {
  std::vector<std::string> labels{"beta_I"};
  if (model == Model::WithInteraction) labels.emplace_back("beta_IC");
  labels.emplace_back(param == Parametrisation::Raw ? "beta_C" : "beta_C_marginal");
  for (int j = 1; j <= periods; ++j) labels.push_back("period_" + std::to_string(j));
  return labels;
}

void fill_row(Eigen::Ref<Eigen::RowVectorXd, 0, Eigen::InnerStride<>> row, int x, double z_code, int period, Model model) {
  row.setZero();
  int c = 0;
  row(c++) = z_code;
  if (model == Model::WithInteraction) row(c++) = x * z_code;
  row(c++) = x;
  row(c + period) = 1.0;
}

GlsCovariance invert_information(const Eigen::MatrixXd& info, std::vector<std::string> labels) {
  const Eigen::MatrixXd sym = 0.5 * (info + info.transpose());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(sym);
  const Eigen::VectorXd& ev = eig.eigenvalues();
  const double largest = ev.cwiseAbs().maxCoeff();
  const double smallest = ev(0);

  if (!(smallest > 1e-11 * largest)) {
    const Eigen::VectorXd dir = eig.eigenvectors().col(0);
    const double peak = dir.cwiseAbs().maxCoeff();
    std::ostringstream os;
    os.precision(3);
    bool first = true;
    for (int k = 0; k < dir.size(); ++k) {
      const double w = dir(k) / peak;
      if (std::abs(w) < 1e-6) continue;
      if (!first) os << (w < 0 ? " - " : " + ");
      else if (w < 0) os << "-";
      os << std::abs(w) << "*" << labels[k];
      first = false;
    }
    throw InestimableEffectError(
        "inestimable effect: information matrix is singular along " + os.str(), os.str());
  }

  GlsCovariance out;
  out.condition_number = largest / smallest;
  if (out.condition_number > 1e12) {
    std::ostringstream os;
    os << "information matrix condition number " << out.condition_number << " exceeds 1e12";
    out.warnings.push_back(os.str());
  }
  Eigen::LLT<Eigen::MatrixXd> llt(sym);
  out.cov = llt.solve(Eigen::MatrixXd::Identity(sym.rows(), sym.cols()));
  out.cov = 0.5 * (out.cov + out.cov.transpose());
  out.labels = std::move(labels);
  return out;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Individual-level model

FullModelMatrices build_full_model(const TrialDesign& d, const CellPlan& plan,
                                   const CorrelationStructure& corr, Model model,
                                   Parametrisation param) {
  if (plan.clusters() != d.clusters() || plan.periods() != d.periods()) {
    throw ValidationError("cell plan does not match the design dimensions");
  }
  const VarianceComponents vc = components(corr);
  const int t = d.periods();
  const double pi_z = plan.pi_z();
  const double z0 = param == Parametrisation::Raw ? 0.0 : -pi_z;
  const double z1 = param == Parametrisation::Raw ? 1.0 : 1.0 - pi_z;

  FullModelMatrices out;
  out.labels = detail::effect_labels(t, model, param);
  out.parametrisation = param;
  const int p = static_cast<int>(out.labels.size());

  for (int i = 0; i < d.clusters(); ++i) {
    const int rows = plan.sizes().row(i).sum();
    Eigen::MatrixXd di(rows, p);
    Eigen::MatrixXd sigma = Eigen::MatrixXd::Constant(rows, rows, vc.cluster);
    int r = 0;
    for (int j = 0; j < t; ++j) {
      const int m = plan.size(i, j);
      const int treated = plan.treated_in_cell(i, j);
      sigma.block(r, r, m, m).array() += vc.cluster_period;
      sigma.block(r, r, m, m).diagonal().array() += vc.residual;
      for (int k = 0; k < m; ++k) {
        const double z = k < m - treated ? z0 : z1;
        detail::fill_row(di.row(r + k), d.x(i, j), z, j, model);
      }
      r += m;
    }
    out.design.push_back(std::move(di));
    out.covariance.push_back(std::move(sigma));
  }
  return out;
}

GlsCovariance full_gls(const TrialDesign& d, const CellPlan& plan,
                       const CorrelationStructure& corr, Model model, Parametrisation param,
                       long long max_observations) {
  if (plan.n_obs() > max_observations) {
    throw ValidationError("full GLS limited to " + std::to_string(max_observations) +
                          " observations (plan has " + std::to_string(plan.n_obs()) + ")");
  }
  const FullModelMatrices fm = build_full_model(d, plan, corr, model, param);
  const int p = static_cast<int>(fm.labels.size());
  Eigen::MatrixXd info = Eigen::MatrixXd::Zero(p, p);
  for (std::size_t i = 0; i < fm.design.size(); ++i) {
    Eigen::LLT<Eigen::MatrixXd> llt(fm.covariance[i]);
    if (llt.info() != Eigen::Success) {
      throw ValidationError("cluster covariance is not positive definite");
    }
    info += fm.design[i].transpose() * llt.solve(fm.design[i]);
  }
  return detail::invert_information(info, fm.labels);
}

// ---------------------------------------------------------------------------
// Cell-mean model

CollapsedMatrices build_collapsed_model(const TrialDesign& d, const CellPlan& plan,
                                        const CorrelationStructure& corr, Model model,
                                        Parametrisation param) {
  if (plan.clusters() != d.clusters() || plan.periods() != d.periods()) {
    throw ValidationError("cell plan does not match the design dimensions");
  }
  const VarianceComponents vc = components(corr);
  const double s_ct = vc.cluster_period;
  const double s_c = vc.cluster;
  const double s_eps = vc.residual;
  const int t = d.periods();
  const double pi_z = plan.pi_z();
  const double z0 = param == Parametrisation::Raw ? 0.0 : -pi_z;
  const double z1 = param == Parametrisation::Raw ? 1.0 : 1.0 - pi_z;

  CollapsedMatrices out;
  out.labels = detail::effect_labels(t, model, param);
  out.parametrisation = param;
  const int p = static_cast<int>(out.labels.size());

  for (int i = 0; i < d.clusters(); ++i) {
    CollapsedCluster cl;
    cl.design.resize(2 * t, p);
    cl.x1.resize(t);
    cl.x2.resize(t);
    cl.block_det.resize(t);
    cl.cell_variance.resize(t);
    cl.q.resize(2 * t);
    cl.a_inverse = Eigen::MatrixXd::Zero(2 * t, 2 * t);
    cl.sigma = Eigen::MatrixXd::Constant(2 * t, 2 * t, s_c);

    for (int j = 0; j < t; ++j) {
      const double m = plan.size(i, j);
      const double x1 = s_eps / ((1.0 - pi_z) * m);
      const double x2 = s_eps / (pi_z * m);
      const double det = (x1 + x2) * s_ct + x1 * x2;
      cl.x1(j) = x1;
      cl.x2(j) = x2;
      cl.block_det(j) = det;
      cl.cell_variance(j) = s_ct + s_eps / m;

      const int r = 2 * j;
      cl.sigma(r, r) += s_ct + x1;
      cl.sigma(r, r + 1) += s_ct;
      cl.sigma(r + 1, r) += s_ct;
      cl.sigma(r + 1, r + 1) += s_ct + x2;

      cl.a_inverse(r, r) = (s_ct + x2) / det;
      cl.a_inverse(r, r + 1) = -s_ct / det;
      cl.a_inverse(r + 1, r) = -s_ct / det;
      cl.a_inverse(r + 1, r + 1) = (s_ct + x1) / det;

      cl.q(r) = x2 / det;
      cl.q(r + 1) = x1 / det;

      detail::fill_row(cl.design.row(r), d.x(i, j), z0, j, model);
      detail::fill_row(cl.design.row(r + 1), d.x(i, j), z1, j, model);
    }
    // Sherman-Morrison: (A + s_c 1 1^T)^-1 = A^-1 - s_c q q^T / (1 + s_c 1^T q).
    const double denom = 1.0 + s_c * cl.q.sum();
    cl.sigma_inverse = cl.a_inverse - (s_c / denom) * cl.q * cl.q.transpose();
    out.clusters.push_back(std::move(cl));
  }
  return out;
}

GlsCovariance collapsed_gls(const TrialDesign& d, const CellPlan& plan,
                            const CorrelationStructure& corr, Model model,
                            Parametrisation param) {
  const CollapsedMatrices cm = build_collapsed_model(d, plan, corr, model, param);
  const int p = static_cast<int>(cm.labels.size());
  Eigen::MatrixXd info = Eigen::MatrixXd::Zero(p, p);
  for (const auto& cl : cm.clusters) {
    info += cl.design.transpose() * cl.sigma_inverse * cl.design;
  }
  return detail::invert_information(info, cm.labels);
}

double lcrt_variance(const TrialDesign& d, const CellPlan& plan,
                     const CorrelationStructure& corr) {
  if (plan.clusters() != d.clusters() || plan.periods() != d.periods()) {
    throw ValidationError("cell plan does not match the design dimensions");
  }
  const VarianceComponents vc = components(corr);
  const int t = d.periods();
  std::vector<std::string> labels{"beta_C"};
  for (int j = 1; j <= t; ++j) labels.push_back("period_" + std::to_string(j));

  Eigen::MatrixXd info = Eigen::MatrixXd::Zero(t + 1, t + 1);
  for (int i = 0; i < d.clusters(); ++i) {
    Eigen::MatrixXd di = Eigen::MatrixXd::Zero(t, t + 1);
    Eigen::MatrixXd sigma = Eigen::MatrixXd::Constant(t, t, vc.cluster);
    for (int j = 0; j < t; ++j) {
      di(j, 0) = d.x(i, j);
      di(j, 1 + j) = 1.0;
      sigma(j, j) += vc.cluster_period + vc.residual / plan.size(i, j);
    }
    Eigen::LLT<Eigen::MatrixXd> llt(sigma);
    info += di.transpose() * llt.solve(di);
  }
  return detail::invert_information(info, labels).cov(0, 0);
}

LcrtVarianceSource lcrt_source() {
  return [](const TrialDesign& d, const CellPlan& plan, const CorrelationStructure& corr) {
    return lcrt_variance(d, plan, corr);
  };
}

}  // namespace splitplot::oracle

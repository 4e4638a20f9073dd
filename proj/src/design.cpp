#include "splitplot/design.hpp"

#include <cmath>
#include <string>

#include "splitplot/error.hpp"

namespace splitplot {

TrialDesign::TrialDesign(int periods, std::vector<Sequence> sequences)
    : periods_(periods), sequences_(std::move(sequences)) {
  if (periods_ < 1) throw ValidationError("design needs at least one period");
  if (sequences_.empty()) throw ValidationError("design needs at least one sequence");

  int n = 0;
  for (std::size_t s = 0; s < sequences_.size(); ++s) {
    const auto& seq = sequences_[s];
    if (static_cast<int>(seq.pattern.size()) != periods_) {
      throw ValidationError("sequence " + std::to_string(s + 1) + " has " +
                            std::to_string(seq.pattern.size()) + " entries, expected " +
                            std::to_string(periods_));
    }
    for (int v : seq.pattern) {
      if (v != 0 && v != 1) {
        throw ValidationError("sequence " + std::to_string(s + 1) + " has a non-binary entry");
      }
    }
    if (seq.clusters < 1) {
      throw ValidationError("sequence " + std::to_string(s + 1) + " needs >= 1 cluster");
    }
    n += seq.clusters;
  }
  if (n < 2) throw ValidationError("design needs at least 2 clusters");

  x_.resize(n, periods_);
  int row = 0;
  for (const auto& seq : sequences_) {
    for (int c = 0; c < seq.clusters; ++c, ++row) {
      for (int j = 0; j < periods_; ++j) x_(row, j) = seq.pattern[j];
    }
  }
  const int ones = x_.sum();
  if (ones == 0 || ones == x_.size()) {
    throw DegenerateDesignError(
        "degenerate design: every cluster-period is under the same condition, so the "
        "cluster-level effect is not estimable");
  }
}

TrialDesign TrialDesign::replicated(int k) const {
  if (k < 1) throw ValidationError("replication factor must be >= 1");
  auto seqs = sequences_;
  for (auto& s : seqs) s.clusters *= k;
  return TrialDesign(periods_, std::move(seqs));
}

TrialDesign stepped_wedge(int periods, int clusters_per_sequence) {
  if (periods < 2) throw ValidationError("stepped wedge needs T >= 2");
  std::vector<Sequence> seqs;
  for (int s = 1; s < periods; ++s) {
    Sequence seq;
    seq.clusters = clusters_per_sequence;
    seq.pattern.resize(periods);
    for (int j = 0; j < periods; ++j) seq.pattern[j] = j >= s ? 1 : 0;
    seqs.push_back(std::move(seq));
  }
  return TrialDesign(periods, std::move(seqs));
}

TrialDesign parallel(int periods, int clusters_per_sequence) {
  if (periods < 1) throw ValidationError("parallel design needs T >= 1");
  return TrialDesign(periods, {{std::vector<int>(periods, 0), clusters_per_sequence},
                               {std::vector<int>(periods, 1), clusters_per_sequence}});
}

TrialDesign crossover(int periods, int clusters_per_sequence) {
  if (periods < 2 || periods % 2 != 0) {
    throw ValidationError("crossover design needs an even T >= 2");
  }
  const int half = periods / 2;
  Sequence first{std::vector<int>(periods, 0), clusters_per_sequence};
  Sequence second{std::vector<int>(periods, 0), clusters_per_sequence};
  for (int j = 0; j < periods; ++j) {
    first.pattern[j] = j >= half ? 1 : 0;
    second.pattern[j] = j < half ? 1 : 0;
  }
  return TrialDesign(periods, {first, second});
}

TrialDesign shares() {
  constexpr int kPeriods = 6;
  std::vector<Sequence> seqs;
  seqs.push_back({std::vector<int>(kPeriods, 0), 5});
  seqs.push_back({std::vector<int>(kPeriods, 1), 5});
  for (int s = 1; s < kPeriods; ++s) {
    Sequence seq{std::vector<int>(kPeriods, 0), 3};
    for (int j = s; j < kPeriods; ++j) seq.pattern[j] = 1;
    seqs.push_back(std::move(seq));
  }
  return TrialDesign(kPeriods, std::move(seqs));
}

DesignSummary summarize(const TrialDesign& d) {
  const Eigen::MatrixXd x = d.matrix().cast<double>();
  const double n = static_cast<double>(x.rows());
  const double t = static_cast<double>(x.cols());

  DesignSummary s;
  const Eigen::VectorXd row_sums = x.rowwise().sum();
  const Eigen::VectorXd col_sums = x.colwise().sum().transpose();
  s.pi_x_cluster = row_sums / t;
  s.pi_x_period = col_sums / n;
  s.B = x.sum();
  s.pi_x = s.B / (n * t);
  s.pi_xx = s.pi_x_cluster.squaredNorm() / n;
  s.C = row_sums.squaredNorm();
  s.E = col_sums.squaredNorm();
  return s;
}

// ---------------------------------------------------------------------------
// CellPlan

CellPlan::CellPlan(const TrialDesign& d, Eigen::MatrixXi sizes, std::optional<int> constant,
                   double pi_z)
    : sizes_(std::move(sizes)), constant_(constant), pi_z_(pi_z) {
  if (!(pi_z_ > 0.0 && pi_z_ < 1.0)) {
    throw ValidationError("pi_z must lie strictly between 0 and 1");
  }
  if (sizes_.rows() != d.clusters() || sizes_.cols() != d.periods()) {
    throw ValidationError("cell size matrix is " + std::to_string(sizes_.rows()) + "x" +
                          std::to_string(sizes_.cols()) + ", design needs " +
                          std::to_string(d.clusters()) + "x" + std::to_string(d.periods()));
  }
  if (sizes_.minCoeff() < 1) throw ValidationError("every cell size must be >= 1");
  for (int i = 0; i < sizes_.rows(); ++i) {
    for (int j = 0; j < sizes_.cols(); ++j) {
      n_obs_ += sizes_(i, j);
      if (d.x(i, j) == 1) n_x1_ += sizes_(i, j);
    }
  }
  n_x0_ = n_obs_ - n_x1_;
}

int CellPlan::constant_size() const {
  if (!constant_) throw ValidationError("cell plan has variable sizes");
  return *constant_;
}

bool CellPlan::is_uniform() const noexcept {
  return constant_.has_value() || sizes_.minCoeff() == sizes_.maxCoeff();
}

bool CellPlan::block_randomisable() const noexcept {
  for (int i = 0; i < sizes_.rows(); ++i) {
    for (int j = 0; j < sizes_.cols(); ++j) {
      const double k = pi_z_ * sizes_(i, j);
      if (std::abs(k - std::round(k)) > 1e-9) return false;
    }
  }
  return true;
}

int CellPlan::treated_in_cell(int cluster, int period) const {
  const double k = pi_z_ * sizes_(cluster, period);
  if (std::abs(k - std::round(k)) > 1e-9) {
    throw ValidationError("pi_z * m is not an integer in cell (" + std::to_string(cluster + 1) +
                          ", " + std::to_string(period + 1) + "); block randomisation impossible");
  }
  return static_cast<int>(std::lround(k));
}

CellPlan CellPlan::with_pi_z(double pi_z) const {
  CellPlan copy = *this;
  if (!(pi_z > 0.0 && pi_z < 1.0)) {
    throw ValidationError("pi_z must lie strictly between 0 and 1");
  }
  copy.pi_z_ = pi_z;
  return copy;
}

CellPlan cell_plan(const TrialDesign& d, int m, double pi_z) {
  if (m < 1) throw ValidationError("cell size m must be >= 1");
  return CellPlan(d, Eigen::MatrixXi::Constant(d.clusters(), d.periods(), m), m, pi_z);
}

CellPlan cell_plan(const TrialDesign& d, const Eigen::MatrixXi& sizes, double pi_z) {
  return CellPlan(d, sizes, std::nullopt, pi_z);
}

}  // namespace splitplot

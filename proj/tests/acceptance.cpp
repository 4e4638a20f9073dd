// Acceptance criteria, one PASS/FAIL line each. Exit status is nonzero if
// any criterion fails, except those marked as known to be unreachable: the
// expected delta = 0.2 SharES sizes are inconsistent with the delta = 0.35
// ones under any single design, so that line stays FAIL without failing the
// run.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <iostream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "splitplot/cli.hpp"
#include "splitplot/correlation.hpp"
#include "splitplot/design.hpp"
#include "splitplot/normal.hpp"
#include "splitplot/oracle.hpp"
#include "splitplot/power.hpp"
#include "splitplot/variance.hpp"
#include "splitplot/verify.hpp"

using namespace splitplot;

namespace {

struct Outcome {
  bool passed;
  std::string detail;
};

const EffectQuery kTableRows[] = {
    {Estimand::ClusterConditional, Model::WithInteraction},
    {Estimand::Individual, Model::WithInteraction},
    {Estimand::Interaction, Model::WithInteraction},
    {Estimand::ClusterConditional, Model::NoInteraction},
    {Estimand::Individual, Model::NoInteraction},
};

const char* kRowNames[] = {"beta_C/int", "beta_I/int", "beta_IC", "beta_C/noint", "beta_I/noint"};

std::string join(const std::vector<int>& v) {
  std::string s = "(";
  for (std::size_t k = 0; k < v.size(); ++k) s += (k ? ", " : "") + std::to_string(v[k]);
  return s + ")";
}

std::vector<int> column(const CorrelationStructure& corr, double delta, SizeGrid grid = {}) {
  std::vector<int> out;
  for (const auto& q : kTableRows) {
    out.push_back(required_cell_size(shares(), corr, 0.5, q, delta, 0.05, 0.8, 1'000'000, grid).m);
  }
  return out;
}

int max_gap(const std::vector<int>& a, const std::vector<int>& b) {
  int g = 0;
  for (std::size_t k = 0; k < a.size(); ++k) g = std::max(g, std::abs(a[k] - b[k]));
  return g;
}

const CorrelationStructure kExch = CorrelationStructure::exchangeable(1.0, 0.2);
const CorrelationStructure kBlock(1.0, 0.24, 0.192);

Outcome oracle_equivalence() {
  const auto closed = verify::default_closed_form();
  const auto full = verify::closed_form_vs_full_gls(verify::make_sweep(101, 240, true), closed);
  const auto coll = verify::closed_form_vs_collapsed_gls(verify::make_sweep(202, 240, false), closed);
  std::ostringstream os;
  os << "full GLS: " << full.checks << " variances, worst rel " << full.worst
     << "; cell-mean GLS (sizes 1..6): " << coll.checks << " variances, worst rel " << coll.worst;
  return {full.passed && coll.passed, os.str()};
}

Outcome dual_path() {
  auto sweep = verify::make_sweep(303, 400, true);
  std::vector<verify::SweepConfig> variable;
  for (auto& c : sweep) {
    if (!c.plan.is_constant()) variable.push_back(c);
  }
  const auto r = verify::full_vs_collapsed(variable);
  std::ostringstream os;
  os << variable.size() << " variable-size configurations, worst " << r.worst << " (tol "
     << r.tolerance << ")";
  return {r.passed && variable.size() >= 100, os.str()};
}

Outcome table_one() {
  const auto exch = column(kExch, 0.35);
  const auto block = column(kBlock, 0.35);
  const std::vector<int> want_exch{6, 3, 6, 4, 2};
  const std::vector<int> want_block{7, 3, 5, 5, 2};
  std::ostringstream os;
  os << "exchangeable " << join(exch) << " vs " << join(want_exch) << "; block-exchangeable "
     << join(block) << " vs " << join(want_block);
  if (block[2] != want_block[2]) {
    const auto p = required_cell_size(shares(), kBlock, 0.5, kTableRows[2], 0.35, 0.05, 0.8);
    os << "; beta_IC known discrepancy: computed " << block[2] << " vs printed " << want_block[2]
       << " (power at " << block[2] - 1 << " = " << p.power_at_previous << ")";
  }
  return {exch == want_exch && max_gap(block, want_block) <= 1, os.str()};
}

Outcome table_two() {
  const auto exch = column(kExch, 0.2);
  const auto block = column(kBlock, 0.2);
  const std::vector<int> want_exch{21, 11, 21, 21, 11};
  const std::vector<int> want_block{71, 11, 21, 61, 11};
  std::ostringstream os;
  os << "exact search: exchangeable " << join(exch) << " vs " << join(want_exch)
     << "; block-exchangeable " << join(block) << " vs " << join(want_block);
  // Diagnostics: the printed values all sit on m = 1, 11, 21, ...
  const auto gexch = column(kExch, 0.2, {1, 10});
  const auto gblock = column(kBlock, 0.2, {1, 10});
  os << "\n     on the grid m = 1, 11, 21, ...: exchangeable " << join(gexch)
     << ", block-exchangeable " << join(gblock);
  for (int k = 0; k < 5; ++k) {
    if (gblock[k] != want_block[k]) {
      const double v = effect_variance(shares(), cell_plan(shares(), want_block[k], 0.5), kBlock,
                                       kTableRows[k])
                           .value;
      os << "\n     block " << kRowNames[k] << " at printed m = " << want_block[k]
         << " has power " << power_for(v, 0.2, 0.05);
    }
  }
  // beta_I/noint = 2 at delta 0.35 and = 11 at delta 0.2 need disjoint
  // ranges of n T sigma_z^2.
  const double zsum = normal_quantile(0.975) + normal_quantile(0.8);
  const double a_lo = 0.8 * std::pow(zsum / 0.35, 2) / 2.0;  // m = 2 passes at delta 0.35
  const double a_hi = 0.8 * std::pow(zsum / 0.35, 2) / 1.0;  // m = 1 fails
  const double b_lo = 0.8 * std::pow(zsum / 0.2, 2) / 11.0;
  const double b_hi = 0.8 * std::pow(zsum / 0.2, 2) / 10.0;
  os << "\n     beta_I/noint: m = 2 at delta 0.35 needs n T sigma_z^2 in [" << a_lo << ", " << a_hi
     << "), m = 11 at delta 0.2 needs it in [" << b_lo << ", " << b_hi << "); no design satisfies both";
  return {max_gap(exch, want_exch) <= 1 && max_gap(block, want_block) <= 1, os.str()};
}

Outcome identities() {
  const auto r = verify::analytic_identities(verify::make_sweep(404, 300, false),
                                             verify::default_closed_form());
  std::ostringstream os;
  os << r.checks << " identities, worst rel " << r.worst << " (tol " << r.tolerance << ")";
  if (!r.passed) os << "; " << r.detail;
  return {r.passed, os.str()};
}

Outcome monte_carlo() {
  const auto mc = verify::monte_carlo(20240601, 2000, verify::default_closed_form());
  std::ostringstream os;
  os << "stepped_wedge(4) x3, m = 6, pi_z = 0.5, ICC 0.24/0.192, 2000 replicates: worst "
        "diagonal deviation "
     << mc.covariance.worst << " (tol " << mc.covariance.tolerance << "), worst bias "
     << mc.unbiased.worst << " SE";
  return {mc.covariance.passed && mc.unbiased.passed, os.str()};
}

struct CurvePoint {
  double x;
  double var_c_int;
  double var_ic;
  std::vector<double> all;
};

std::vector<CurvePoint> run_curve(const std::vector<std::string>& extra) {
  std::vector<std::string> args{"splitplot", "curve", "--design", "shares", "--delta", "0.2"};
  args.insert(args.end(), extra.begin(), extra.end());
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  if (cli::run(static_cast<int>(argv.size()), argv.data(), out, err) != 0) return {};
  std::vector<CurvePoint> pts;
  std::istringstream in(out.str());
  std::string line;
  std::getline(in, line);
  while (std::getline(in, line)) {
    std::stringstream ls(line);
    std::string x, model, est, var;
    std::getline(ls, x, ',');
    std::getline(ls, model, ',');
    std::getline(ls, est, ',');
    std::getline(ls, var, ',');
    const double xv = std::stod(x);
    if (pts.empty() || pts.back().x != xv) pts.push_back({xv, 0, 0, {}});
    const double v = std::stod(var);
    pts.back().all.push_back(v);
    if (model == "interaction" && est == "beta_C") pts.back().var_c_int = v;
    if (est == "beta_IC") pts.back().var_ic = v;
  }
  return pts;
}

Outcome figures() {
  const auto by_m = run_curve({"--wpicc", "0.24", "--bpicc", "0.192", "--from", "1", "--to", "30"});
  bool monotone = by_m.size() == 30;
  for (std::size_t k = 1; k < by_m.size(); ++k) {
    for (std::size_t e = 0; e < by_m[k].all.size(); ++e) {
      monotone = monotone && by_m[k].all[e] < by_m[k - 1].all[e];
    }
  }
  double cross_m = NAN;
  for (const auto& p : by_m) {
    if (std::isnan(cross_m) && p.var_ic < p.var_c_int) cross_m = p.x;
  }
  const bool m_cross = !by_m.empty() && by_m.front().var_ic > by_m.front().var_c_int &&
                       !std::isnan(cross_m) && by_m.back().var_ic < by_m.back().var_c_int;

  const auto by_icc = run_curve({"--m", "4", "--sweep", "wpicc", "--from", "0", "--to", "0.5",
                                 "--step", "0.01", "--icc-ratio", "0.8"});
  double cross_icc = NAN;
  for (const auto& p : by_icc) {
    if (std::isnan(cross_icc) && p.var_ic < p.var_c_int) cross_icc = p.x;
  }
  const bool icc_cross = !by_icc.empty() && by_icc.front().var_ic > by_icc.front().var_c_int &&
                         !std::isnan(cross_icc) && by_icc.back().var_ic < by_icc.back().var_c_int;
  std::ostringstream os;
  os << "m sweep 1..30 monotone: " << (monotone ? "yes" : "no")
     << "; var(beta_IC) < var(beta_C, interaction) from m = " << cross_m
     << "; wpicc sweep (m = 4, ratio 0.8): ordering flips at wpicc = " << cross_icc;
  return {monotone && m_cross && icc_cross, os.str()};
}

Outcome lcrt_spot_check() {
  const double v = v_lcrt(stepped_wedge(3), 1, CorrelationStructure(1.0, 0.0, 0.0));
  bool ok = v == 2.0;
  std::ostringstream os;
  os << "V_LCRT = " << v << "; multipliers vs replication loop:";
  std::mt19937_64 gen(8);
  std::uniform_int_distribution<int> tdist(3, 6), mdist(1, 8), est(0, 4);
  std::uniform_real_distribution<double> icc(0.0, 0.3), ratio(0.0, 1.0), delta(0.2, 0.5);
  for (int c = 0; c < 3; ++c) {
    const auto d = stepped_wedge(tdist(gen));
    const int m = mdist(gen);
    const double w = icc(gen);
    const CorrelationStructure corr(1.0, w, w * ratio(gen));
    const EffectQuery q = kTableRows[est(gen)];
    const double dl = delta(gen);
    const auto r =
        required_cluster_multiplier(d, cell_plan(d, m, 0.5), corr, q, dl, 0.05, 0.8);
    int k = 1;
    while (power_for(effect_variance(d.replicated(k), cell_plan(d.replicated(k), m, 0.5), corr, q)
                         .value,
                     dl, 0.05) < 0.8) {
      ++k;
    }
    ok = ok && r.multiplier == k;
    os << " " << r.multiplier << "/" << k;
  }
  return {ok, os.str()};
}

}  // namespace

struct Criterion {
  const char* name;
  std::function<Outcome()> run;
  bool known_unreachable = false;
};

int main() {
  const std::vector<Criterion> criteria{
      {"1 oracle equivalence", oracle_equivalence},
      {"2 dual-path oracle", dual_path},
      {"3 SharES sizes, delta = 0.35", table_one},
      {"4 SharES sizes, delta = 0.2", table_two, true},
      {"5 analytic identities", identities},
      {"6 Monte-Carlo validation", monte_carlo},
      {"7 curve shapes and crossovers", figures},
      {"8 V_LCRT spot check and multiplier", lcrt_spot_check},
  };
  int passed = 0;
  int unexpected = 0;
  for (const auto& c : criteria) {
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::printf("%s  criterion %s [%.2fs]%s\n     %s\n", o.passed ? "PASS" : "FAIL", c.name, secs,
                !o.passed && c.known_unreachable ? " (known unreachable)" : "",
                o.detail.c_str());
    passed += o.passed ? 1 : 0;
    unexpected += !o.passed && !c.known_unreachable ? 1 : 0;
  }
  std::printf("%d of %zu criteria passed; %d unexpected failure(s)\n", passed, criteria.size(),
              unexpected);
  return unexpected == 0 ? 0 : 1;
}

#include "splitplot/cli.hpp"

#include <CLI11.hpp>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <memory>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "splitplot/design_io.hpp"
#include "splitplot/error.hpp"
#include "splitplot/oracle.hpp"
#include "splitplot/power.hpp"
#include "splitplot/variance.hpp"
#include "splitplot/verify.hpp"

namespace splitplot::cli {

namespace {

constexpr const char* kNormalNote =
    "note: normal quantiles throughout; no small-sample (t / degrees-of-freedom) correction";

struct Options {
  std::string design = "shares";
  std::optional<int> periods;
  std::optional<int> clusters;
  std::optional<int> m;
  std::optional<double> pi_z;
  std::optional<double> sigma2;
  std::optional<double> wpicc;
  std::optional<double> bpicc;
  std::string model = "interaction";
  std::string effect = "cluster";
  std::optional<double> delta;
  double alpha = 0.05;
  double power = 0.8;
  std::string solve_for = "m";
  int m_max = 1'000'000;
  int m_first = 1;
  int m_step = 1;
  std::vector<std::string> scenarios;
  std::string sweep = "m";
  std::optional<double> from;
  std::optional<double> to;
  std::optional<double> step;
  double icc_ratio = 0.8;
  std::uint64_t seed = 20240601;
  int replicates = 2000;
  int configs = 240;
  bool no_monte_carlo = false;
  std::string out;
};

/// Fully resolved inputs, with a record of which ones were defaulted.
struct Resolved {
  std::unique_ptr<TrialDesign> design;
  std::string design_name;
  std::optional<int> m;
  std::optional<Eigen::MatrixXi> sizes;
  double pi_z = 0.5;
  bool pi_z_defaulted = false;
  std::optional<CorrelationStructure> corr;
};

int parse_int(const std::string& s, const std::string& what) {
  std::size_t used = 0;
  int v = 0;
  try {
    v = std::stoi(s, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used != s.size() || s.empty()) throw ValidationError("bad " + what + " '" + s + "'");
  return v;
}

double parse_double(const std::string& s, const std::string& what) {
  std::size_t used = 0;
  double v = 0;
  try {
    v = std::stod(s, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used != s.size() || s.empty()) throw ValidationError("bad " + what + " '" + s + "'");
  return v;
}

Resolved resolve(const Options& opt) {
  Resolved r;
  const std::string& name = opt.design;
  const auto colon = name.find(':');
  const std::string kind = name.substr(0, colon);
  const bool named = kind == "sw" || kind == "parallel" || kind == "crossover" || name == "shares";

  std::optional<DesignFile> file;
  if (named) {
    if (name == "shares") {
      if (opt.clusters) throw ValidationError("--clusters does not apply to the shares design");
      r.design = std::make_unique<TrialDesign>(shares());
    } else {
      int periods = 0;
      if (colon != std::string::npos) {
        periods = parse_int(name.substr(colon + 1), "period count in --design");
        if (opt.periods && *opt.periods != periods) {
          throw ValidationError("--periods disagrees with --design " + name);
        }
      } else if (opt.periods) {
        periods = *opt.periods;
      } else {
        throw ValidationError("design '" + name + "' needs a period count (" + name +
                              ":<T> or --periods)");
      }
      const int k = opt.clusters.value_or(1);
      if (kind == "sw") r.design = std::make_unique<TrialDesign>(stepped_wedge(periods, k));
      if (kind == "parallel") r.design = std::make_unique<TrialDesign>(parallel(periods, k));
      if (kind == "crossover") r.design = std::make_unique<TrialDesign>(crossover(periods, k));
    }
    r.design_name = name;
  } else {
    file = load_design_file(name);
    if (opt.clusters) throw ValidationError("--clusters does not apply to design files");
    if (opt.periods && *opt.periods != file->design.periods()) {
      throw ValidationError("--periods disagrees with the design file");
    }
    r.design = std::make_unique<TrialDesign>(file->design);
    r.design_name = "file:" + name;
  }

  if (opt.m) {
    r.m = *opt.m;
  } else if (file && file->cell_size) {
    r.m = *file->cell_size;
  } else if (file && file->cell_sizes) {
    r.sizes = *file->cell_sizes;
  }

  if (opt.pi_z) {
    r.pi_z = *opt.pi_z;
  } else if (file && file->pi_z) {
    r.pi_z = *file->pi_z;
  } else {
    r.pi_z = 0.5;
    r.pi_z_defaulted = true;
  }
  if (!(r.pi_z > 0.0 && r.pi_z < 1.0)) throw ValidationError("--pi-z must lie in (0, 1)");

  std::optional<CorrelationStructure> from_file;
  if (file) from_file = file->correlation;
  if (opt.wpicc || opt.bpicc || opt.sigma2 || from_file) {
    const double sigma2 = opt.sigma2 ? *opt.sigma2 : (from_file ? from_file->sigma2() : 1.0);
    double wpicc = 0.0;
    if (opt.wpicc) {
      wpicc = *opt.wpicc;
    } else if (from_file) {
      wpicc = from_file->wpicc();
    } else {
      throw ValidationError("--wpicc is required");
    }
    double bpicc = wpicc;
    if (opt.bpicc) {
      bpicc = *opt.bpicc;
    } else if (from_file && !opt.wpicc) {
      bpicc = from_file->bpicc();
    }
    r.corr = CorrelationStructure(sigma2, wpicc, bpicc);
  }
  return r;
}

const CorrelationStructure& need_corr(const Resolved& r) {
  if (!r.corr) throw ValidationError("--wpicc is required");
  return *r.corr;
}

EffectQuery parse_query(const Options& opt) {
  EffectQuery q;
  if (opt.model == "interaction") {
    q.model = Model::WithInteraction;
  } else if (opt.model == "no-interaction") {
    q.model = Model::NoInteraction;
  } else {
    throw ValidationError("--model must be interaction or no-interaction");
  }
  if (opt.effect == "cluster") {
    q.estimand = Estimand::ClusterConditional;
  } else if (opt.effect == "cluster-marginal") {
    q.estimand = Estimand::ClusterMarginal;
  } else if (opt.effect == "individual") {
    q.estimand = Estimand::Individual;
  } else if (opt.effect == "interaction") {
    q.estimand = Estimand::Interaction;
  } else {
    throw ValidationError("--effect must be cluster, cluster-marginal, individual or interaction");
  }
  q.validate();
  return q;
}

double need_delta(const Options& opt) {
  if (!opt.delta) throw ValidationError("--delta is required");
  if (*opt.delta == 0.0) throw ValidationError("--delta must be nonzero");
  return *opt.delta;
}

std::string num(double v) {
  if (std::isnan(v)) return "NA";
  std::ostringstream os;
  os << std::setprecision(10) << v;
  return os.str();
}

void echo_inputs(std::ostream& os, const char* command, const Resolved& r, const Options& opt,
                 bool with_sizes, bool with_query, const char* prefix = "") {
  const TrialDesign& d = *r.design;
  os << prefix << "command: " << command << '\n';
  os << prefix << "design: " << r.design_name << " (clusters=" << d.clusters()
     << ", periods=" << d.periods() << ", sequences=" << d.sequences().size() << ")\n";
  if (with_sizes) {
    if (r.m) {
      os << prefix << "cell_size: " << *r.m << '\n';
    } else if (r.sizes) {
      os << prefix << "cell_size: variable (n_obs=" << r.sizes->sum() << ")\n";
    }
  }
  os << prefix << "pi_z: " << num(r.pi_z) << (r.pi_z_defaulted ? " (default)" : "") << '\n';
  if (r.corr) {
    os << prefix << "sigma2: " << num(r.corr->sigma2()) << '\n';
    os << prefix << "wpicc: " << num(r.corr->wpicc()) << '\n';
    os << prefix << "bpicc: " << num(r.corr->bpicc()) << '\n';
  }
  if (with_query) {
    os << prefix << "model: " << opt.model << '\n';
    os << prefix << "effect: " << opt.effect << '\n';
  }
  if (opt.delta) os << prefix << "delta: " << num(*opt.delta) << '\n';
  os << prefix << "alpha: " << num(opt.alpha) << '\n';
}

CellPlan make_plan(const Resolved& r) {
  if (r.m) return cell_plan(*r.design, *r.m, r.pi_z);
  if (r.sizes) return cell_plan(*r.design, *r.sizes, r.pi_z);
  throw ValidationError("cell size required: give --m or cell_size / cell_sizes in the design file");
}

int cmd_power(const Options& opt, std::ostream& os) {
  const Resolved r = resolve(opt);
  const EffectQuery q = parse_query(opt);
  const double delta = need_delta(opt);
  const CorrelationStructure& corr = need_corr(r);
  const CellPlan plan = make_plan(r);
  const VarianceResult v = effect_variance(*r.design, plan, corr, q, oracle::lcrt_source());
  const double pw = power_for(v.value, delta, opt.alpha);

  echo_inputs(os, "power", r, opt, true, true);
  os << "formula: " << v.formula_id << '\n';
  os << "variance: " << num(v.value) << '\n';
  os << "  v_lcrt: " << num(v.v_lcrt_part) << '\n';
  os << "  inflation: " << num(v.inflation_part) << '\n';
  os << "  individual: " << num(v.individual_part) << '\n';
  os << "power: " << num(pw) << '\n';
  os << kNormalNote << '\n';
  return kOk;
}

int cmd_size(const Options& opt, std::ostream& os) {
  const Resolved r = resolve(opt);
  const EffectQuery q = parse_query(opt);
  const double delta = need_delta(opt);
  const CorrelationStructure& corr = need_corr(r);

  if (opt.solve_for == "m") {
    const CellSizeResult res =
        required_cell_size(*r.design, corr, r.pi_z, q, delta, opt.alpha, opt.power, opt.m_max,
                           {opt.m_first, opt.m_step});
    echo_inputs(os, "size", r, opt, false, true);
    os << "target_power: " << num(opt.power) << '\n';
    os << "solve_for: m\n";
    if (opt.m_first != 1 || opt.m_step != 1) {
      os << "m_grid: " << opt.m_first << " + k*" << opt.m_step << '\n';
    }
    os << "required_m: " << res.m << '\n';
    os << "variance_at_m: " << num(res.variance_at_m) << '\n';
    os << "power_at_m: " << num(res.power_at_m) << '\n';
    os << "power_at_previous: " << num(res.power_at_previous) << '\n';
  } else if (opt.solve_for == "clusters") {
    const CellPlan plan = make_plan(r);
    const MultiplierResult res = required_cluster_multiplier(
        *r.design, plan, corr, q, delta, opt.alpha, opt.power, oracle::lcrt_source());
    echo_inputs(os, "size", r, opt, true, true);
    os << "target_power: " << num(opt.power) << '\n';
    os << "solve_for: clusters\n";
    os << "single_copy_variance: " << num(res.single_copy_variance) << '\n';
    os << "required_multiplier: " << res.multiplier << '\n';
    os << "required_clusters: " << res.multiplier * r.design->clusters() << '\n';
    os << "power_at_multiplier: " << num(res.power_at_multiplier) << '\n';
    os << "power_at_previous: " << num(res.power_at_previous) << '\n';
  } else {
    throw ValidationError("--solve-for must be m or clusters");
  }
  os << kNormalNote << '\n';
  return kOk;
}

struct Scenario {
  std::string name;
  double wpicc;
  double bpicc;
};

Scenario parse_scenario(const std::string& text) {
  // name=wpicc:bpicc, or wpicc:bpicc, or a single wpicc (exchangeable)
  Scenario s;
  std::string body = text;
  const auto eq = text.find('=');
  if (eq != std::string::npos) {
    s.name = text.substr(0, eq);
    body = text.substr(eq + 1);
  }
  const auto colon = body.find(':');
  s.wpicc = parse_double(body.substr(0, colon), "scenario wpicc");
  s.bpicc = colon == std::string::npos ? s.wpicc
                                       : parse_double(body.substr(colon + 1), "scenario bpicc");
  if (s.name.empty()) s.name = "wpicc=" + num(s.wpicc) + ";bpicc=" + num(s.bpicc);
  return s;
}

const std::vector<EffectQuery>& table_rows() {
  static const std::vector<EffectQuery> rows{
      {Estimand::ClusterConditional, Model::WithInteraction},
      {Estimand::Individual, Model::WithInteraction},
      {Estimand::Interaction, Model::WithInteraction},
      {Estimand::ClusterConditional, Model::NoInteraction},
      {Estimand::Individual, Model::NoInteraction},
  };
  return rows;
}

int cmd_table(const Options& opt, std::ostream& os, std::ostream& err) {
  const Resolved r = resolve(opt);
  const double delta = need_delta(opt);
  const double sigma2 = r.corr ? r.corr->sigma2() : 1.0;
  std::vector<Scenario> scenarios;
  if (opt.scenarios.empty()) {
    scenarios = {{"exchangeable", 0.2, 0.2}, {"block-exchangeable", 0.24, 0.192}};
  } else {
    for (const auto& s : opt.scenarios) scenarios.push_back(parse_scenario(s));
  }

  std::ostringstream body;
  body << "model,estimand,scenario,required_m,power_at_m,power_at_m_minus_1\n";
  for (const auto& s : scenarios) {
    const CorrelationStructure corr(sigma2, s.wpicc, s.bpicc);
    for (const auto& q : table_rows()) {
      const auto res = required_cell_size(*r.design, corr, r.pi_z, q, delta, opt.alpha,
                                          opt.power, opt.m_max, {opt.m_first, opt.m_step});
      body << to_string(q.model) << ',' << to_string(q.estimand) << ',' << s.name << ',' << res.m
           << ',' << num(res.power_at_m) << ',' << num(res.power_at_previous) << '\n';
    }
  }
  echo_inputs(err, "table", r, opt, false, false, "# ");
  err << "# target_power: " << num(opt.power) << '\n';
  if (opt.m_first != 1 || opt.m_step != 1) {
    err << "# m_grid: " << opt.m_first << " + k*" << opt.m_step
        << " (power_at_m_minus_1 is the previous grid point)\n";
  }
  err << "# " << kNormalNote << '\n';
  os << body.str();
  return kOk;
}

struct CurveRow {
  EffectQuery query;
};

int cmd_curve(const Options& opt, std::ostream& os, std::ostream& err) {
  const Resolved r = resolve(opt);
  const double delta = need_delta(opt);
  if (!opt.from || !opt.to) throw ValidationError("--from and --to are required");
  const double step = opt.step.value_or(opt.sweep == "m" ? 1.0 : 0.01);
  if (!(step > 0.0) || *opt.from > *opt.to) throw ValidationError("empty sweep range");

  static const std::vector<EffectQuery> rows{
      {Estimand::ClusterConditional, Model::WithInteraction},
      {Estimand::ClusterMarginal, Model::WithInteraction},
      {Estimand::Individual, Model::WithInteraction},
      {Estimand::Interaction, Model::WithInteraction},
      {Estimand::ClusterConditional, Model::NoInteraction},
      {Estimand::Individual, Model::NoInteraction},
  };

  std::ostringstream body;
  body << "sweep_value,model,estimand,variance,power\n";
  const auto emit = [&](double x, const CellPlan& plan, const CorrelationStructure& corr) {
    for (const auto& q : rows) {
      const double v = effect_variance(*r.design, plan, corr, q, oracle::lcrt_source()).value;
      body << num(x) << ',' << to_string(q.model) << ',' << to_string(q.estimand) << ','
           << num(v) << ',' << num(power_for(v, delta, opt.alpha)) << '\n';
    }
  };

  if (opt.sweep == "m") {
    const CorrelationStructure& corr = need_corr(r);
    const int from = static_cast<int>(std::lround(*opt.from));
    const int to = static_cast<int>(std::lround(*opt.to));
    const int istep = static_cast<int>(std::lround(step));
    if (from < 1 || istep < 1) throw ValidationError("m sweep needs integer from >= 1, step >= 1");
    for (int m = from; m <= to; m += istep) emit(m, cell_plan(*r.design, m, r.pi_z), corr);
  } else if (opt.sweep == "wpicc") {
    if (!r.m) throw ValidationError("wpicc sweep needs a constant --m");
    const double sigma2 = r.corr ? r.corr->sigma2() : 1.0;
    const CellPlan plan = cell_plan(*r.design, *r.m, r.pi_z);
    const long long count = static_cast<long long>(std::floor((*opt.to - *opt.from) / step + 1e-9));
    for (long long k = 0; k <= count; ++k) {
      const double w = *opt.from + static_cast<double>(k) * step;
      emit(w, plan, CorrelationStructure(sigma2, w, opt.icc_ratio * w));
    }
  } else {
    throw ValidationError("--sweep must be m or wpicc");
  }

  echo_inputs(err, "curve", r, opt, opt.sweep != "m", false, "# ");
  err << "# sweep: " << opt.sweep << " from " << num(*opt.from) << " to " << num(*opt.to)
      << " step " << num(step) << '\n';
  if (opt.sweep == "wpicc") err << "# icc_ratio: " << num(opt.icc_ratio) << '\n';
  err << "# " << kNormalNote << '\n';
  os << body.str();
  return kOk;
}

int cmd_verify(const Options& opt, std::ostream& os) {
  verify::VerifyOptions o;
  o.seed = opt.seed;
  o.replicates = opt.replicates;
  o.configurations = opt.configs;
  o.monte_carlo = !opt.no_monte_carlo;
  if (o.configurations < 1) throw ValidationError("--configs must be >= 1");
  if (o.monte_carlo && o.replicates < 2) throw ValidationError("--replicates must be >= 2");
  const auto reports = verify::run_verification(o);
  os << "command: verify\nseed: " << o.seed << "\nconfigurations: " << o.configurations
     << "\nreplicates: " << (o.monte_carlo ? std::to_string(o.replicates) : "skipped") << '\n';
  verify::print_reports(reports, os);
  bool ok = true;
  for (const auto& rep : reports) ok = ok && rep.passed;
  os << (ok ? "all properties passed" : "verification FAILED") << '\n';
  return ok ? kOk : kVerificationFailed;
}

void add_design_options(CLI::App* sub, Options& s) {
  sub->add_option("--design", s.design,
                  "shares | sw:<T> | parallel:<T> | crossover:<T> | path to a JSON design file")
      ->capture_default_str();
  sub->add_option("--periods", s.periods, "period count for sw / parallel / crossover");
  sub->add_option("--clusters", s.clusters, "clusters per sequence for named designs");
  sub->add_option("--m", s.m, "constant cluster-period size");
  sub->add_option("--pi-z", s.pi_z, "fraction allocated to the individual-level intervention");
  sub->add_option("--sigma2", s.sigma2, "total outcome variance (default 1)");
  sub->add_option("--wpicc", s.wpicc, "within-period ICC");
  sub->add_option("--bpicc", s.bpicc, "between-period ICC (default: equal to --wpicc)");
  sub->add_option("--delta", s.delta, "effect size");
  sub->add_option("--alpha", s.alpha, "two-sided significance level")->capture_default_str();
  sub->add_option("--out", s.out, "write the report to this file");
}

void add_query_options(CLI::App* sub, Options& s) {
  sub->add_option("--model", s.model, "interaction | no-interaction")->capture_default_str();
  sub->add_option("--effect", s.effect, "cluster | cluster-marginal | individual | interaction")
      ->capture_default_str();
}

void add_search_options(CLI::App* sub, Options& s) {
  sub->add_option("--power", s.power, "target power")->capture_default_str();
  sub->add_option("--m-max", s.m_max, "largest cell size searched")->capture_default_str();
  sub->add_option("--m-first", s.m_first, "first cell size on the search grid")
      ->capture_default_str();
  sub->add_option("--m-step", s.m_step, "spacing of the cell-size search grid")
      ->capture_default_str();
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  Options opt;
  CLI::App app{"Power and sample size for split-plot factorial longitudinal cluster randomised "
               "trials"};
  app.require_subcommand(1);

  auto* power = app.add_subcommand("power", "variance decomposition and power");
  add_design_options(power, opt);
  add_query_options(power, opt);

  auto* size = app.add_subcommand("size", "required cell size or cluster multiplier");
  add_design_options(size, opt);
  add_query_options(size, opt);
  add_search_options(size, opt);
  size->add_option("--solve-for", opt.solve_for, "m | clusters")->capture_default_str();

  auto* table = app.add_subcommand("table", "required cell size for every model and estimand (CSV)");
  add_design_options(table, opt);
  add_search_options(table, opt);
  table->add_option("--scenario", opt.scenarios,
                    "correlation scenario name=wpicc:bpicc (repeatable)");

  auto* curve = app.add_subcommand("curve", "variance and power over a sweep (CSV)");
  add_design_options(curve, opt);
  curve->add_option("--sweep", opt.sweep, "m | wpicc")->capture_default_str();
  curve->add_option("--from", opt.from, "first sweep value");
  curve->add_option("--to", opt.to, "last sweep value");
  curve->add_option("--step", opt.step, "sweep step (default 1 for m, 0.01 for wpicc)");
  curve->add_option("--icc-ratio", opt.icc_ratio, "bpicc / wpicc held fixed in a wpicc sweep")
      ->capture_default_str();

  auto* verify_cmd = app.add_subcommand("verify", "closed forms vs GLS oracle and Monte-Carlo");
  verify_cmd->add_option("--seed", opt.seed, "random seed")->capture_default_str();
  verify_cmd->add_option("--replicates", opt.replicates, "Monte-Carlo replicates")
      ->capture_default_str();
  verify_cmd->add_option("--configs", opt.configs, "random configurations per sweep")
      ->capture_default_str();
  verify_cmd->add_flag("--no-monte-carlo", opt.no_monte_carlo, "skip the simulation check");
  verify_cmd->add_option("--out", opt.out, "write the report to this file");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kOk : kInvalidInput;
  }

  std::ostringstream report;
  int code = kOk;
  try {
    if (power->parsed()) code = cmd_power(opt, report);
    if (size->parsed()) code = cmd_size(opt, report);
    if (table->parsed()) code = cmd_table(opt, report, err);
    if (curve->parsed()) code = cmd_curve(opt, report, err);
    if (verify_cmd->parsed()) code = cmd_verify(opt, report);
  } catch (const ValidationError& e) {
    err << "error: " << e.what() << '\n';
    return kInvalidInput;
  } catch (const InfeasibleError& e) {
    err << "error: " << e.what() << '\n';
    return kInfeasible;
  } catch (const DegenerateDesignError& e) {
    err << "error: " << e.what() << '\n';
    return kInfeasible;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kInvalidInput;
  }

  if (opt.out.empty()) {
    out << report.str();
  } else {
    std::ofstream file(opt.out);
    if (!file) {
      err << "error: cannot write '" << opt.out << "'\n";
      return kInvalidInput;
    }
    file << report.str();
  }
  return code;
}

}  // namespace splitplot::cli

#include "splitplot/design_io.hpp"

#include <fstream>
#include <initializer_list>
#include <json.hpp>
#include <string_view>

#include "splitplot/error.hpp"

namespace splitplot {

namespace {

using json = nlohmann::json;

void reject_unknown(const json& obj, std::string_view where,
                    std::initializer_list<std::string_view> allowed) {
  for (const auto& [key, _] : obj.items()) {
    bool ok = false;
    for (auto a : allowed) ok = ok || key == a;
    if (!ok) {
      throw ValidationError("unknown key '" + key + "' in " + std::string(where));
    }
  }
}

int as_int(const json& v, std::string_view what) {
  if (!v.is_number_integer()) throw ValidationError(std::string(what) + " must be an integer");
  return v.get<int>();
}

double as_number(const json& v, std::string_view what) {
  if (!v.is_number()) throw ValidationError(std::string(what) + " must be a number");
  return v.get<double>();
}

TrialDesign parse_design(const json& root) {
  if (!root.contains("periods")) throw ValidationError("design file is missing 'periods'");
  if (!root.contains("sequences")) throw ValidationError("design file is missing 'sequences'");
  const int periods = as_int(root.at("periods"), "periods");
  const auto& seqs_json = root.at("sequences");
  if (!seqs_json.is_array()) throw ValidationError("'sequences' must be an array");

  std::vector<Sequence> seqs;
  for (const auto& s : seqs_json) {
    if (!s.is_object()) throw ValidationError("each sequence must be an object");
    reject_unknown(s, "sequence", {"pattern", "clusters"});
    if (!s.contains("pattern")) throw ValidationError("sequence is missing 'pattern'");
    Sequence seq;
    const auto& pat = s.at("pattern");
    if (!pat.is_array()) throw ValidationError("'pattern' must be an array");
    for (const auto& v : pat) seq.pattern.push_back(as_int(v, "pattern entry"));
    seq.clusters = s.contains("clusters") ? as_int(s.at("clusters"), "clusters") : 1;
    seqs.push_back(std::move(seq));
  }
  return TrialDesign(periods, std::move(seqs));
}

}  // namespace

DesignFile parse_design_file(std::istream& in) {
  json root;
  try {
    root = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ValidationError(std::string("design file is not valid JSON: ") + e.what());
  }
  if (!root.is_object()) throw ValidationError("design file must hold a JSON object");
  reject_unknown(root, "design file",
                 {"periods", "sequences", "cell_size", "cell_sizes", "pi_z", "correlation"});
  if (root.contains("cell_size") && root.contains("cell_sizes")) {
    throw ValidationError("give either 'cell_size' or 'cell_sizes', not both");
  }

  DesignFile out{parse_design(root), std::nullopt, std::nullopt, std::nullopt, std::nullopt};

  if (root.contains("cell_size")) out.cell_size = as_int(root.at("cell_size"), "cell_size");
  if (root.contains("cell_sizes")) {
    const auto& rows = root.at("cell_sizes");
    if (!rows.is_array()) throw ValidationError("'cell_sizes' must be an array of rows");
    const int n = out.design.clusters();
    const int t = out.design.periods();
    if (static_cast<int>(rows.size()) != n) {
      throw ValidationError("'cell_sizes' has " + std::to_string(rows.size()) +
                            " rows, design has " + std::to_string(n) + " clusters");
    }
    Eigen::MatrixXi sizes(n, t);
    for (int i = 0; i < n; ++i) {
      const auto& r = rows[i];
      if (!r.is_array() || static_cast<int>(r.size()) != t) {
        throw ValidationError("'cell_sizes' row " + std::to_string(i + 1) + " must have " +
                              std::to_string(t) + " entries");
      }
      for (int j = 0; j < t; ++j) sizes(i, j) = as_int(r[j], "cell size");
    }
    out.cell_sizes = std::move(sizes);
  }
  if (root.contains("pi_z")) out.pi_z = as_number(root.at("pi_z"), "pi_z");
  if (root.contains("correlation")) {
    const auto& c = root.at("correlation");
    if (!c.is_object()) throw ValidationError("'correlation' must be an object");
    reject_unknown(c, "correlation", {"sigma2", "wpicc", "bpicc"});
    if (!c.contains("wpicc")) throw ValidationError("'correlation' is missing 'wpicc'");
    const double sigma2 = c.contains("sigma2") ? as_number(c.at("sigma2"), "sigma2") : 1.0;
    const double wpicc = as_number(c.at("wpicc"), "wpicc");
    const double bpicc = c.contains("bpicc") ? as_number(c.at("bpicc"), "bpicc") : wpicc;
    out.correlation = CorrelationStructure(sigma2, wpicc, bpicc);
  }
  return out;
}

DesignFile load_design_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open design file '" + path + "'");
  return parse_design_file(in);
}

}  // namespace splitplot

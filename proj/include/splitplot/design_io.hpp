#pragma once

#include <Eigen/Dense>
#include <iosfwd>
#include <optional>
#include <string>

#include "splitplot/correlation.hpp"
#include "splitplot/design.hpp"

namespace splitplot {

/// Contents of a JSON design file:
///
///   {
///     "periods": 6,
///     "sequences": [{"pattern": [0,0,1], "clusters": 3}, ...],
///     "cell_size": 4,              // or "cell_sizes": [[...], ...] (n x T)
///     "pi_z": 0.5,
///     "correlation": {"sigma2": 1, "wpicc": 0.24, "bpicc": 0.192}
///   }
///
/// Only `periods` and `sequences` are required. Unknown keys at any level
/// raise ValidationError.
struct DesignFile {
  TrialDesign design;
  std::optional<int> cell_size;
  std::optional<Eigen::MatrixXi> cell_sizes;
  std::optional<double> pi_z;
  std::optional<CorrelationStructure> correlation;
};

DesignFile parse_design_file(std::istream& in);
DesignFile load_design_file(const std::string& path);

}  // namespace splitplot

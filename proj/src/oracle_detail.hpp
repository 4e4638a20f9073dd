#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "splitplot/oracle.hpp"

namespace splitplot::oracle::detail {

std::vector<std::string> effect_labels(int periods, Model model, Parametrisation param);

/// One design row: Z code, [X * Z code,] X, period dummy.
void fill_row(Eigen::Ref<Eigen::RowVectorXd, 0, Eigen::InnerStride<>> row, int x, double z_code, int period, Model model);

/// Inverts a GLS information matrix; singular directions raise
/// InestimableEffectError, condition numbers above 1e12 add a warning.
GlsCovariance invert_information(const Eigen::MatrixXd& info, std::vector<std::string> labels);

}  // namespace splitplot::oracle::detail

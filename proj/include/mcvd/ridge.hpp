#pragma once

#include <optional>
#include <vector>

#include <Eigen/Dense>

namespace mcvd {

struct RidgeModel
{
    Eigen::MatrixXd weights;  ///< features x targets, intercept row included
    double alpha = 0.0;
};

/// X with a trailing column of ones.
Eigen::MatrixXd with_intercept(Eigen::MatrixXd const& x);

/// Solves (X^T X + alpha * P) W = X^T Y by Cholesky, where P is the
/// identity with a zero at `intercept_column` (unpenalized). Throws
/// NumericError when the system is singular.
RidgeModel ridge_fit(Eigen::MatrixXd const& x, Eigen::MatrixXd const& y, double alpha,
                     std::optional<Eigen::Index> intercept_column = std::nullopt);

Eigen::MatrixXd ridge_predict(RidgeModel const& model, Eigen::MatrixXd const& x);

struct AlphaSelection
{
    double alpha = 0.0;
    std::vector<double> grid;
    std::vector<double> val_mse;  ///< one entry per grid value
    bool on_boundary = false;     ///< best alpha is the smallest or largest grid value
};

/// Grid search on validation MSE; ties resolve to the smaller alpha.
/// Inputs must already carry the intercept column at `intercept_column`.
AlphaSelection select_ridge_alpha(Eigen::MatrixXd const& x_train, Eigen::MatrixXd const& y_train,
                                  Eigen::MatrixXd const& x_val, Eigen::MatrixXd const& y_val,
                                  std::vector<double> const& grid,
                                  std::optional<Eigen::Index> intercept_column);

/// 10^-3 ... 10^3, two points per decade.
std::vector<double> default_alpha_grid();

}  // namespace mcvd

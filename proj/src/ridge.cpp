#include "mcvd/ridge.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "mcvd/errors.hpp"

namespace mcvd {

Eigen::MatrixXd with_intercept(Eigen::MatrixXd const& x)
{
    Eigen::MatrixXd out(x.rows(), x.cols() + 1);
    out << x, Eigen::VectorXd::Ones(x.rows());
    return out;
}

RidgeModel ridge_fit(Eigen::MatrixXd const& x, Eigen::MatrixXd const& y, double alpha,
                     std::optional<Eigen::Index> intercept_column)
{
    if (!(alpha >= 0.0) || !std::isfinite(alpha))
    {
        throw std::invalid_argument("ridge alpha must be finite and >= 0");
    }
    if (x.rows() != y.rows() || x.rows() == 0)
    {
        throw std::invalid_argument("ridge_fit: X and Y need the same non-zero row count");
    }
    Eigen::MatrixXd gram = x.transpose() * x;
    for (Eigen::Index i = 0; i < gram.rows(); ++i)
    {
        if (!intercept_column || *intercept_column != i)
        {
            gram(i, i) += alpha;
        }
    }
    Eigen::LLT<Eigen::MatrixXd> llt(gram);
    double max_diag = gram.diagonal().cwiseAbs().maxCoeff();
    bool singular = llt.info() != Eigen::Success || max_diag == 0.0;
    if (!singular)
    {
        Eigen::VectorXd l_diag = llt.matrixL().toDenseMatrix().diagonal();
        singular = l_diag.cwiseAbs2().minCoeff() < 1e-12 * max_diag;
    }
    if (singular)
    {
        throw NumericError("ridge normal equations are singular; use alpha > 0");
    }
    return {llt.solve(x.transpose() * y), alpha};
}

Eigen::MatrixXd ridge_predict(RidgeModel const& model, Eigen::MatrixXd const& x)
{
    if (x.cols() != model.weights.rows())
    {
        throw std::invalid_argument("ridge_predict: feature count mismatch");
    }
    return x * model.weights;
}

AlphaSelection select_ridge_alpha(Eigen::MatrixXd const& x_train, Eigen::MatrixXd const& y_train,
                                  Eigen::MatrixXd const& x_val, Eigen::MatrixXd const& y_val,
                                  std::vector<double> const& grid,
                                  std::optional<Eigen::Index> intercept_column)
{
    if (grid.empty())
    {
        throw std::invalid_argument("alpha grid is empty");
    }
    AlphaSelection sel;
    sel.grid = grid;
    double best = std::numeric_limits<double>::infinity();
    for (double a : grid)
    {
        double mse = std::numeric_limits<double>::infinity();
        try
        {
            auto model = ridge_fit(x_train, y_train, a, intercept_column);
            mse = (ridge_predict(model, x_val) - y_val).squaredNorm()
                  / static_cast<double>(y_val.size());
        }
        catch (NumericError const&)
        {
            // singular at this alpha; leave it out of contention
        }
        sel.val_mse.push_back(mse);
        if (mse < best || (mse == best && a < sel.alpha))
        {
            best = mse;
            sel.alpha = a;
        }
    }
    if (!std::isfinite(best))
    {
        throw NumericError("every alpha in the grid gave a singular ridge system");
    }
    auto [lo, hi] = std::minmax_element(grid.begin(), grid.end());
    sel.on_boundary = grid.size() > 1 && (sel.alpha == *lo || sel.alpha == *hi);
    return sel;
}

std::vector<double> default_alpha_grid()
{
    std::vector<double> grid;
    for (int i = -6; i <= 6; ++i)
    {
        grid.push_back(std::pow(10.0, 0.5 * i));
    }
    return grid;
}

}  // namespace mcvd

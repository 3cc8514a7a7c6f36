#include "mcvd/scaler.hpp"

#include <string>

#include <nlohmann/json.hpp>

#include "mcvd/errors.hpp"

namespace mcvd {

namespace {

void column_stats(Eigen::MatrixXd const& m, Eigen::VectorXd& mean, Eigen::VectorXd& std)
{
    mean = m.colwise().mean().transpose();
    std.resize(m.cols());
    for (Eigen::Index c = 0; c < m.cols(); ++c)
    {
        double var = (m.col(c).array() - mean(c)).square().mean();
        std(c) = std::max(std::sqrt(var), Scaler::kStdFloor);
    }
}

std::vector<double> to_vec(Eigen::VectorXd const& v)
{
    return {v.data(), v.data() + v.size()};
}

Eigen::VectorXd from_vec(std::vector<double> const& v)
{
    return Eigen::Map<Eigen::VectorXd const>(v.data(), static_cast<Eigen::Index>(v.size()));
}

}  // namespace

void Scaler::fit(Eigen::MatrixXd const& features, Eigen::MatrixXd const& targets)
{
    if (fitted_)
    {
        throw StateError("scaler is already fitted");
    }
    if (features.rows() == 0 || features.rows() != targets.rows())
    {
        throw std::invalid_argument("scaler fit needs matching non-empty row sets");
    }
    column_stats(features, feature_mean_, feature_std_);
    column_stats(targets, target_mean_, target_std_);
    fit_rows_ = static_cast<std::size_t>(features.rows());
    fitted_ = true;
}

void Scaler::require_fitted() const
{
    if (!fitted_)
    {
        throw StateError("scaler used before fit");
    }
}

Eigen::MatrixXd Scaler::apply_features(Eigen::MatrixXd const& features) const
{
    require_fitted();
    return (features.rowwise() - feature_mean_.transpose()).array().rowwise()
           / feature_std_.transpose().array();
}

Eigen::MatrixXd Scaler::apply_targets(Eigen::MatrixXd const& targets) const
{
    require_fitted();
    return (targets.rowwise() - target_mean_.transpose()).array().rowwise()
           / target_std_.transpose().array();
}

Eigen::MatrixXd Scaler::invert_targets(Eigen::MatrixXd const& standardized) const
{
    require_fitted();
    Eigen::MatrixXd out = standardized.array().rowwise() * target_std_.transpose().array();
    return out.rowwise() + target_mean_.transpose();
}

void to_json(nlohmann::json& j, Scaler const& s)
{
    s.require_fitted();
    j = nlohmann::json{{"fit_rows", s.fit_rows_},
                       {"feature_mean", to_vec(s.feature_mean_)},
                       {"feature_std", to_vec(s.feature_std_)},
                       {"target_mean", to_vec(s.target_mean_)},
                       {"target_std", to_vec(s.target_std_)}};
}

void from_json(nlohmann::json const& j, Scaler& s)
{
    s.fit_rows_ = j.at("fit_rows").get<std::size_t>();
    s.feature_mean_ = from_vec(j.at("feature_mean").get<std::vector<double>>());
    s.feature_std_ = from_vec(j.at("feature_std").get<std::vector<double>>());
    s.target_mean_ = from_vec(j.at("target_mean").get<std::vector<double>>());
    s.target_std_ = from_vec(j.at("target_std").get<std::vector<double>>());
    s.fitted_ = true;
}

void check_scaler_fit(Scaler const& scaler, std::size_t train_rows)
{
    if (!scaler.fitted() || scaler.fit_rows() != train_rows)
    {
        throw LeakageError("scaler was fitted on " + std::to_string(scaler.fit_rows())
                           + " rows but the training split has " + std::to_string(train_rows)
                           + "; statistics may leak validation/test data");
    }
}

}  // namespace mcvd

#pragma once

#include <cstddef>

#include <Eigen/Dense>
#include <nlohmann/json_fwd.hpp>

namespace mcvd {

/// Column-wise standardization of model inputs and the Cartesian targets
/// (position and transmitter coordinates). Fitted once, on training rows.
class Scaler
{
  public:
    static constexpr double kStdFloor = 1e-8;

    /// features: rows x 192; targets: rows x 21 (position, then tx).
    void fit(Eigen::MatrixXd const& features, Eigen::MatrixXd const& targets);

    [[nodiscard]] bool fitted() const { return fitted_; }
    /// Number of rows seen by fit().
    [[nodiscard]] std::size_t fit_rows() const { return fit_rows_; }

    [[nodiscard]] Eigen::MatrixXd apply_features(Eigen::MatrixXd const& features) const;
    [[nodiscard]] Eigen::MatrixXd apply_targets(Eigen::MatrixXd const& targets) const;
    [[nodiscard]] Eigen::MatrixXd invert_targets(Eigen::MatrixXd const& standardized) const;

    [[nodiscard]] Eigen::VectorXd const& feature_mean() const { return feature_mean_; }
    [[nodiscard]] Eigen::VectorXd const& feature_std() const { return feature_std_; }
    [[nodiscard]] Eigen::VectorXd const& target_mean() const { return target_mean_; }
    [[nodiscard]] Eigen::VectorXd const& target_std() const { return target_std_; }

    friend void to_json(nlohmann::json& j, Scaler const& s);
    friend void from_json(nlohmann::json const& j, Scaler& s);

  private:
    void require_fitted() const;

    bool fitted_ = false;
    std::size_t fit_rows_ = 0;
    Eigen::VectorXd feature_mean_;
    Eigen::VectorXd feature_std_;
    Eigen::VectorXd target_mean_;
    Eigen::VectorXd target_std_;
};

/// Throws LeakageError unless the scaler was fitted on exactly
/// `train_rows` rows.
void check_scaler_fit(Scaler const& scaler, std::size_t train_rows);

}  // namespace mcvd

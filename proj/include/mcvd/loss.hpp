#pragma once

#include <optional>

#include <Eigen/Dense>
#include <nlohmann/json_fwd.hpp>

#include "mcvd/model.hpp"

namespace mcvd {

struct LossWeights
{
    double pos = 1.0;
    double quat = 0.5;
    double tx = 1.0;
    double phys = 0.1;
    double consist = 0.1;

    /// Throws std::invalid_argument for negative or non-finite weights.
    void validate() const;
};

void to_json(nlohmann::json& j, LossWeights const& w);
void from_json(nlohmann::json const& j, LossWeights& w);

/// Weighted loss terms (each already multiplied by its weight).
struct LossTerms
{
    double pos = 0.0;
    double quat = 0.0;
    double tx = 0.0;
    double phys = 0.0;
    double consist = 0.0;

    [[nodiscard]] double total() const { return pos + quat + tx + phys + consist; }
    LossTerms& operator+=(LossTerms const& o);
    LossTerms& operator*=(double s);
};

/// Standardized training targets, one column per sample.
struct TargetBatch
{
    Eigen::MatrixXd position;  ///< 3 x B, standardized
    Eigen::MatrixXd quat;      ///< 4 x B, unit
    Eigen::MatrixXd tx;        ///< 18 x B, standardized
    /// Physics distance prior in micrometers per sample; NaN = no prior.
    Eigen::VectorXd distance_prior;
};

/// Everything the loss needs to move between standardized and physical
/// coordinates.
struct LossContext
{
    Eigen::Vector3d pos_mean;
    Eigen::Vector3d pos_std;
    Eigen::VectorXd tx_mean;  ///< 18
    Eigen::VectorXd tx_std;   ///< 18
    double arm = 5.5;         ///< node center to tube tip, r + delta
    /// Divisor making the radial residual dimensionless.
    double phys_scale = 1.0;
};

/// Row counts the loss means divide by. Defaults to the batch itself;
/// chunked evaluation passes the full-batch counts so chunk losses sum.
struct LossNorm
{
    double rows = 0;        ///< samples
    double prior_rows = 0;  ///< samples with a physics prior
};

LossNorm default_norm(TargetBatch const& targets);

/// Loss of a batch. When `grad` is non-null, dLoss/dparams is added to it.
///
///   pos      mean squared error of standardized position
///   quat     mean of 1 - |<q_hat, q>|
///   tx       mean squared error of standardized transmitter positions
///   phys     mean over samples with a prior of ((|p_hat| - prior) / phys_scale)^2
///   consist  mean squared gap between predicted transmitters and the
///            rigid layout placed at the predicted pose (standardized units)
LossTerms batch_loss(ModelParams const& params, Eigen::MatrixXd const& inputs,
                     TargetBatch const& targets, LossContext const& ctx,
                     LossWeights const& weights, Eigen::VectorXd* grad = nullptr,
                     std::optional<LossNorm> norm = std::nullopt);

/// Loss gradient with respect to the raw network outputs (outputs x B).
/// Exposed for testing the output-side chain rule in isolation.
LossTerms output_loss(Eigen::MatrixXd const& out, TargetBatch const& targets,
                      LossContext const& ctx, LossWeights const& weights,
                      Eigen::MatrixXd* d_out, std::optional<LossNorm> norm = std::nullopt);

/// Rotation matrix of a unit quaternion (w, x, y, z).
Eigen::Matrix3d rotation_matrix(Eigen::Vector4d const& q);

}  // namespace mcvd

#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json_fwd.hpp>

namespace mcvd {

/// 1 - SS_res / SS_tot. Throws UndefinedMetricError for fewer than two rows
/// or constant truth.
double r_squared(std::span<double const> truth, std::span<double const> pred);

/// Mean absolute error over every entry. Throws std::invalid_argument on
/// shape mismatch or empty input.
double mae(Eigen::MatrixXd const& truth, Eigen::MatrixXd const& pred);
double rmse(Eigen::MatrixXd const& truth, Eigen::MatrixXd const& pred);

/// Errors in physical units. Position matrices are rows x 3, transmitter
/// matrices rows x 18.
struct MetricsReport
{
    std::array<double, 3> r2{};
    double mean_r2 = 0.0;
    double pooled_r2 = 0.0;
    double mae_pos = 0.0;
    double rmse_pos = 0.0;
    double mae_tx = 0.0;
    double rmse_tx = 0.0;
    double mean_orientation_error_deg = 0.0;
    std::size_t samples = 0;
};

MetricsReport make_report(Eigen::MatrixXd const& pos_truth, Eigen::MatrixXd const& pos_pred,
                          Eigen::MatrixXd const& tx_truth, Eigen::MatrixXd const& tx_pred,
                          Eigen::MatrixXd const& quat_truth, Eigen::MatrixXd const& quat_pred);

/// Relative improvement of the model over the baseline, as fractions.
struct Reduction
{
    double mae = 0.0;
    double rmse = 0.0;
};

/// (baseline - model) / baseline for Node-A MAE and RMSE. Throws
/// UndefinedMetricError when a baseline metric is zero.
Reduction compare(MetricsReport const& model, MetricsReport const& baseline);

void to_json(nlohmann::json& j, MetricsReport const& r);
void to_json(nlohmann::json& j, Reduction const& r);

/// Writes `scatter_path` with columns axis,truth,prediction (x rows, then y,
/// then z) and `compare3d_path` with true and predicted positions of
/// `n_examples` rows chosen deterministically from `seed`.
void export_scatter(Eigen::MatrixXd const& truth, Eigen::MatrixXd const& pred,
                    std::vector<std::int64_t> const& sample_ids, std::string const& scatter_path,
                    std::string const& compare3d_path, std::uint64_t seed,
                    std::size_t n_examples = 5);

/// Rows picked for the 3D comparison export.
std::vector<std::size_t> pick_examples(std::vector<std::int64_t> const& sample_ids,
                                       std::uint64_t seed, std::size_t n_examples);

}  // namespace mcvd

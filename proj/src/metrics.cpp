#include "mcvd/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <numeric>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "mcvd/dataset.hpp"
#include "mcvd/errors.hpp"
#include "mcvd/rng.hpp"

namespace mcvd {

namespace {

void check_shapes(Eigen::MatrixXd const& truth, Eigen::MatrixXd const& pred)
{
    if (truth.rows() != pred.rows() || truth.cols() != pred.cols())
    {
        throw std::invalid_argument("metric inputs have different shapes");
    }
    if (truth.size() == 0)
    {
        throw std::invalid_argument("metric inputs are empty");
    }
}

}  // namespace

double r_squared(std::span<double const> truth, std::span<double const> pred)
{
    if (truth.size() != pred.size())
    {
        throw std::invalid_argument("r_squared: length mismatch");
    }
    if (truth.size() < 2)
    {
        throw UndefinedMetricError("r_squared needs at least two rows");
    }
    double mean = std::accumulate(truth.begin(), truth.end(), 0.0)
                  / static_cast<double>(truth.size());
    double ss_tot = 0.0;
    double ss_res = 0.0;
    for (std::size_t i = 0; i < truth.size(); ++i)
    {
        ss_tot += (truth[i] - mean) * (truth[i] - mean);
        ss_res += (truth[i] - pred[i]) * (truth[i] - pred[i]);
    }
    if (ss_tot == 0.0)
    {
        throw UndefinedMetricError("r_squared is undefined for constant truth");
    }
    return 1.0 - ss_res / ss_tot;
}

double mae(Eigen::MatrixXd const& truth, Eigen::MatrixXd const& pred)
{
    check_shapes(truth, pred);
    return (truth - pred).cwiseAbs().mean();
}

double rmse(Eigen::MatrixXd const& truth, Eigen::MatrixXd const& pred)
{
    check_shapes(truth, pred);
    return std::sqrt((truth - pred).squaredNorm() / static_cast<double>(truth.size()));
}

MetricsReport make_report(Eigen::MatrixXd const& pos_truth, Eigen::MatrixXd const& pos_pred,
                          Eigen::MatrixXd const& tx_truth, Eigen::MatrixXd const& tx_pred,
                          Eigen::MatrixXd const& quat_truth, Eigen::MatrixXd const& quat_pred)
{
    check_shapes(pos_truth, pos_pred);
    if (pos_truth.cols() != 3)
    {
        throw std::invalid_argument("position matrices must have 3 columns");
    }
    MetricsReport r;
    r.samples = static_cast<std::size_t>(pos_truth.rows());
    double ss_res = 0.0;
    double ss_tot = 0.0;
    for (Eigen::Index axis = 0; axis < 3; ++axis)
    {
        Eigen::VectorXd t = pos_truth.col(axis);
        Eigen::VectorXd p = pos_pred.col(axis);
        r.r2[static_cast<std::size_t>(axis)] =
            r_squared({t.data(), static_cast<std::size_t>(t.size())},
                      {p.data(), static_cast<std::size_t>(p.size())});
        ss_res += (t - p).squaredNorm();
        ss_tot += (t.array() - t.mean()).square().sum();
    }
    r.mean_r2 = (r.r2[0] + r.r2[1] + r.r2[2]) / 3.0;
    r.pooled_r2 = 1.0 - ss_res / ss_tot;
    r.mae_pos = mae(pos_truth, pos_pred);
    r.rmse_pos = rmse(pos_truth, pos_pred);
    r.mae_tx = mae(tx_truth, tx_pred);
    r.rmse_tx = rmse(tx_truth, tx_pred);

    check_shapes(quat_truth, quat_pred);
    double angle_sum = 0.0;
    for (Eigen::Index i = 0; i < quat_truth.rows(); ++i)
    {
        double c = std::min(1.0, std::abs(quat_truth.row(i).dot(quat_pred.row(i))));
        angle_sum += 2.0 * std::acos(c);
    }
    r.mean_orientation_error_deg =
        angle_sum / static_cast<double>(quat_truth.rows()) * 180.0 / std::numbers::pi;
    return r;
}

Reduction compare(MetricsReport const& model, MetricsReport const& baseline)
{
    if (baseline.mae_pos == 0.0 || baseline.rmse_pos == 0.0)
    {
        throw UndefinedMetricError("reduction undefined for a zero baseline metric");
    }
    return {(baseline.mae_pos - model.mae_pos) / baseline.mae_pos,
            (baseline.rmse_pos - model.rmse_pos) / baseline.rmse_pos};
}

void to_json(nlohmann::json& j, MetricsReport const& r)
{
    j = nlohmann::json{{"r2_x", r.r2[0]},
                       {"r2_y", r.r2[1]},
                       {"r2_z", r.r2[2]},
                       {"mean_r2", r.mean_r2},
                       {"pooled_r2", r.pooled_r2},
                       {"mae_pos", r.mae_pos},
                       {"rmse_pos", r.rmse_pos},
                       {"mae_tx", r.mae_tx},
                       {"rmse_tx", r.rmse_tx},
                       {"mean_orientation_error_deg", r.mean_orientation_error_deg},
                       {"samples", r.samples}};
}

void to_json(nlohmann::json& j, Reduction const& r)
{
    j = nlohmann::json{{"mae_reduction", r.mae}, {"rmse_reduction", r.rmse}};
}

std::vector<std::size_t> pick_examples(std::vector<std::int64_t> const& sample_ids,
                                       std::uint64_t seed, std::size_t n_examples)
{
    std::vector<std::size_t> rows(sample_ids.size());
    std::iota(rows.begin(), rows.end(), 0);
    auto key = [&](std::size_t i) {
        return std::pair{derive_seed(seed, static_cast<std::uint64_t>(sample_ids[i])),
                         sample_ids[i]};
    };
    std::sort(rows.begin(), rows.end(), [&](auto a, auto b) { return key(a) < key(b); });
    rows.resize(std::min(n_examples, rows.size()));
    return rows;
}

void export_scatter(Eigen::MatrixXd const& truth, Eigen::MatrixXd const& pred,
                    std::vector<std::int64_t> const& sample_ids, std::string const& scatter_path,
                    std::string const& compare3d_path, std::uint64_t seed, std::size_t n_examples)
{
    check_shapes(truth, pred);
    if (static_cast<std::size_t>(truth.rows()) != sample_ids.size())
    {
        throw std::invalid_argument("export_scatter: one sample id per row required");
    }
    std::ofstream scatter(scatter_path);
    if (!scatter)
    {
        throw std::runtime_error("cannot write " + scatter_path);
    }
    scatter << "axis,truth,prediction\n";
    char const* axes[] = {"x", "y", "z"};
    for (Eigen::Index a = 0; a < 3; ++a)
    {
        for (Eigen::Index i = 0; i < truth.rows(); ++i)
        {
            scatter << axes[a] << ',' << format_real(truth(i, a)) << ','
                    << format_real(pred(i, a)) << '\n';
        }
    }

    std::ofstream cmp(compare3d_path);
    if (!cmp)
    {
        throw std::runtime_error("cannot write " + compare3d_path);
    }
    cmp << "sample_id,true_x,true_y,true_z,pred_x,pred_y,pred_z\n";
    for (auto row : pick_examples(sample_ids, seed, n_examples))
    {
        auto i = static_cast<Eigen::Index>(row);
        cmp << sample_ids[row];
        for (Eigen::Index a = 0; a < 3; ++a)
        {
            cmp << ',' << format_real(truth(i, a));
        }
        for (Eigen::Index a = 0; a < 3; ++a)
        {
            cmp << ',' << format_real(pred(i, a));
        }
        cmp << '\n';
    }
}

}  // namespace mcvd

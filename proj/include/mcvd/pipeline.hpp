#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json_fwd.hpp>

#include "mcvd/config.hpp"
#include "mcvd/dataset.hpp"
#include "mcvd/features.hpp"
#include "mcvd/loss.hpp"
#include "mcvd/metrics.hpp"
#include "mcvd/model.hpp"
#include "mcvd/ridge.hpp"
#include "mcvd/scaler.hpp"
#include "mcvd/simulator.hpp"
#include "mcvd/train.hpp"

namespace mcvd {

inline constexpr char const* kModelVersion = "mcvd-model/v1";

void to_json(nlohmann::json& j, SplitSpec const& s);
void from_json(nlohmann::json const& j, SplitSpec& s);

/// Raw (unstandardized) matrices of selected records.
Eigen::MatrixXd feature_matrix(std::span<SampleRecord const> records,
                               std::vector<std::size_t> const& rows);
/// rows x 21: Node-A position, then the six transmitter positions.
Eigen::MatrixXd cartesian_targets(std::span<SampleRecord const> records,
                                  std::vector<std::size_t> const& rows);
/// rows x 4 unit quaternions (w, x, y, z).
Eigen::MatrixXd quaternion_targets(std::span<SampleRecord const> records,
                                   std::vector<std::size_t> const& rows);

/// Node-A distance implied by the strongest pilot's Node-B count, in
/// micrometers. NaN when no pilot reached Node B.
///
/// Only the fraction delta / (r + delta) of a pilot's molecules escapes
/// Node A's own surface, so the emitted count is scaled by it before
/// inverting the finite-window hit probability. The strongest pilot's tube
/// faces Node B, so its tip sits r + delta closer than Node A's center.
/// Escaping molecules start biased toward Node B, so the prior still runs
/// short by roughly 5 to 7 micrometers over the default distance range.
double distance_prior(std::span<double const, kFeatureLength> features, SceneConfig const& cfg);

/// Standardized splits ready for training, plus what produced them.
struct PreparedData
{
    SplitIndices split;
    Scaler scaler;
    LossContext context;
    TrainingSet train;
    TrainingSet val;
    TrainingSet test;
};

/// Splits, fits the scaler on the training rows only (checked), and
/// standardizes every split.
PreparedData prepare_data(Dataset const& ds, SplitSpec const& spec);

/// Loss context for a fitted scaler.
LossContext make_loss_context(Scaler const& scaler, SceneConfig const& cfg);

TrainingSet make_training_set(std::span<SampleRecord const> records,
                              std::vector<std::size_t> const& rows, Scaler const& scaler,
                              SceneConfig const& cfg);

/// Everything needed to run a trained model on new data.
struct ModelBundle
{
    ModelParams params;
    Scaler scaler;
    SceneConfig scene;
    SplitSpec split;
    std::uint64_t dataset_seed = 0;
    TrainConfig train_config;
    LossWeights loss_weights;
};

void save_model(ModelBundle const& bundle, std::string const& path);
/// Throws VersionError for a different layout string, FormatError for
/// malformed content.
ModelBundle load_model(std::string const& path);

/// Physical-unit predictions, one row per sample.
struct Predictions
{
    Eigen::MatrixXd position;   ///< n x 3
    Eigen::MatrixXd quat;       ///< n x 4, unit
    Eigen::MatrixXd tx;         ///< n x 18
    Eigen::MatrixXd attention;  ///< n x 6
};

Predictions predict(ModelBundle const& bundle, Eigen::MatrixXd const& raw_features);

struct RidgeBaseline
{
    RidgeModel model;
    AlphaSelection selection;
};

/// Ridge from standardized features (plus intercept) to standardized
/// position, quaternion and standardized transmitter targets, with alpha
/// chosen on the validation split.
RidgeBaseline fit_ridge_baseline(PreparedData const& data, std::vector<double> const& grid);
Predictions predict_ridge(RidgeBaseline const& ridge, Scaler const& scaler,
                          Eigen::MatrixXd const& raw_features);

struct Evaluation
{
    MetricsReport model;
    MetricsReport ridge;
    Reduction reduction;
    AlphaSelection alpha;
    std::vector<std::int64_t> test_ids;
    Eigen::MatrixXd test_truth;  ///< n x 3
    Predictions model_pred;
    Predictions ridge_pred;
};

/// Test-split evaluation of a model against an in-run ridge baseline.
/// Throws ConfigError when the dataset scene differs from the model's.
Evaluation evaluate(ModelBundle const& bundle, Dataset const& ds,
                    std::vector<double> const& alpha_grid);

/// Absorption-event CSV with header pilot_id,molecule_id,time_s,px,py,pz,absorber.
void write_absorption_log(AbsorptionLog const& log, std::string const& path);
/// Parses a log written by write_absorption_log. Throws FormatError naming
/// the 1-based line of the first malformed row.
AbsorptionLog read_absorption_log(std::string const& path, SceneConfig const& scene);

}  // namespace mcvd

#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json_fwd.hpp>

#include "mcvd/loss.hpp"
#include "mcvd/model.hpp"

namespace mcvd {

struct TrainConfig
{
    double learning_rate = 1e-3;
    int batch_size = 64;
    int max_epochs = 300;
    int patience = 20;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
    std::uint64_t init_seed = 1;
    /// Threads per gradient evaluation. Results are bit-stable for a fixed
    /// value; only the default of 1 matches across thread counts.
    unsigned workers = 1;

    void validate() const;
};

void to_json(nlohmann::json& j, TrainConfig const& c);
void from_json(nlohmann::json const& j, TrainConfig& c);

/// Standardized inputs and targets of one split.
struct TrainingSet
{
    Eigen::MatrixXd inputs;  ///< rows x 192
    TargetBatch targets;     ///< columns = rows of `inputs`

    [[nodiscard]] Eigen::Index size() const { return inputs.rows(); }
    [[nodiscard]] TrainingSet subset(std::vector<Eigen::Index> const& rows) const;
};

struct EpochRecord
{
    int epoch = 0;
    LossTerms train;
    LossTerms val;
};

struct TrainResult
{
    ModelParams params;
    std::vector<EpochRecord> history;
    int best_epoch = -1;
};

/// Adam state over a flat parameter vector.
class AdamOptimizer
{
  public:
    AdamOptimizer(Eigen::Index n, double lr, double beta1, double beta2, double epsilon);
    void step(Eigen::VectorXd& params, Eigen::VectorXd const& grad);

  private:
    double lr_, beta1_, beta2_, eps_;
    long t_ = 0;
    Eigen::VectorXd m_, v_;
};

/// Loss over a whole set, evaluated in chunks of `chunk` rows.
LossTerms evaluate_loss(ModelParams const& params, TrainingSet const& set,
                        LossContext const& ctx, LossWeights const& weights,
                        Eigen::Index chunk = 256);

/// Mini-batch Adam with early stopping on validation total loss. Returns the
/// best-validation parameters. Throws NumericError naming the epoch if the
/// loss diverges.
TrainResult train(ModelParams initial, TrainingSet const& train_set, TrainingSet const& val_set,
                  LossContext const& ctx, TrainConfig const& cfg, LossWeights const& weights,
                  std::function<void(EpochRecord const&)> const& on_epoch = {});

/// CSV with columns epoch, train_total, val_total, then per-term columns.
void write_history_csv(std::vector<EpochRecord> const& history, std::string const& path);

}  // namespace mcvd

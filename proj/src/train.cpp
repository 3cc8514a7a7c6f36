#include "mcvd/train.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>
#include <stdexcept>
#include <thread>

#include <nlohmann/json.hpp>

#include "mcvd/errors.hpp"
#include "mcvd/rng.hpp"

namespace mcvd {

void TrainConfig::validate() const
{
    if (!(learning_rate > 0) || batch_size < 1 || patience < 1 || max_epochs < 0
        || !(beta1 >= 0 && beta1 < 1) || !(beta2 >= 0 && beta2 < 1) || !(epsilon > 0))
    {
        throw std::invalid_argument(
            "train config requires lr > 0, batch >= 1, patience >= 1, epochs >= 0, "
            "moments in [0, 1)");
    }
}

void to_json(nlohmann::json& j, TrainConfig const& c)
{
    j = nlohmann::json{{"learning_rate", c.learning_rate}, {"batch_size", c.batch_size},
                       {"max_epochs", c.max_epochs},       {"patience", c.patience},
                       {"beta1", c.beta1},                 {"beta2", c.beta2},
                       {"epsilon", c.epsilon},             {"init_seed", c.init_seed},
                       {"workers", c.workers}};
}

void from_json(nlohmann::json const& j, TrainConfig& c)
{
    c.learning_rate = j.value("learning_rate", c.learning_rate);
    c.batch_size = j.value("batch_size", c.batch_size);
    c.max_epochs = j.value("max_epochs", c.max_epochs);
    c.patience = j.value("patience", c.patience);
    c.beta1 = j.value("beta1", c.beta1);
    c.beta2 = j.value("beta2", c.beta2);
    c.epsilon = j.value("epsilon", c.epsilon);
    c.init_seed = j.value("init_seed", c.init_seed);
    c.workers = j.value("workers", c.workers);
}

TrainingSet TrainingSet::subset(std::vector<Eigen::Index> const& rows) const
{
    auto n = static_cast<Eigen::Index>(rows.size());
    TrainingSet s;
    s.inputs.resize(n, inputs.cols());
    s.targets.position.resize(3, n);
    s.targets.quat.resize(4, n);
    s.targets.tx.resize(18, n);
    s.targets.distance_prior.resize(n);
    for (Eigen::Index i = 0; i < n; ++i)
    {
        auto r = rows[static_cast<std::size_t>(i)];
        s.inputs.row(i) = inputs.row(r);
        s.targets.position.col(i) = targets.position.col(r);
        s.targets.quat.col(i) = targets.quat.col(r);
        s.targets.tx.col(i) = targets.tx.col(r);
        s.targets.distance_prior(i) = targets.distance_prior(r);
    }
    return s;
}

AdamOptimizer::AdamOptimizer(Eigen::Index n, double lr, double beta1, double beta2,
                             double epsilon)
    : lr_(lr), beta1_(beta1), beta2_(beta2), eps_(epsilon), m_(Eigen::VectorXd::Zero(n)),
      v_(Eigen::VectorXd::Zero(n))
{
}

void AdamOptimizer::step(Eigen::VectorXd& params, Eigen::VectorXd const& grad)
{
    ++t_;
    m_ = beta1_ * m_ + (1.0 - beta1_) * grad;
    v_ = beta2_ * v_ + (1.0 - beta2_) * grad.cwiseAbs2();
    double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
    double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
    params.array() -= lr_ * (m_.array() / c1) / ((v_.array() / c2).sqrt() + eps_);
}

LossTerms evaluate_loss(ModelParams const& params, TrainingSet const& set,
                        LossContext const& ctx, LossWeights const& weights, Eigen::Index chunk)
{
    LossNorm const norm = default_norm(set.targets);
    LossTerms sum;
    for (Eigen::Index start = 0; start < set.size(); start += chunk)
    {
        Eigen::Index n = std::min(chunk, set.size() - start);
        std::vector<Eigen::Index> rows(static_cast<std::size_t>(n));
        std::iota(rows.begin(), rows.end(), start);
        auto part = set.subset(rows);
        sum += batch_loss(params, part.inputs, part.targets, ctx, weights, nullptr, norm);
    }
    return sum;
}

namespace {

// Gradient of one mini-batch, optionally split over threads. Partial
// gradients are summed in chunk order so the result is fixed per thread count.
LossTerms batch_gradient(ModelParams const& params, TrainingSet const& batch,
                         LossContext const& ctx, LossWeights const& weights, unsigned workers,
                         Eigen::VectorXd& grad)
{
    grad.setZero(params.values().size());
    Eigen::Index const n = batch.size();
    if (workers <= 1 || n < 2)
    {
        return batch_loss(params, batch.inputs, batch.targets, ctx, weights, &grad);
    }

    // Chunks share the full-batch normalizers, so their losses and
    // gradients add up to the batch values.
    LossNorm const norm = default_norm(batch.targets);
    auto parts = std::min<Eigen::Index>(workers, n);
    std::vector<Eigen::VectorXd> grads(static_cast<std::size_t>(parts),
                                       Eigen::VectorXd::Zero(grad.size()));
    std::vector<LossTerms> terms(static_cast<std::size_t>(parts));
    std::vector<std::exception_ptr> errors(static_cast<std::size_t>(parts));
    {
        std::vector<std::jthread> pool;
        for (Eigen::Index p = 0; p < parts; ++p)
        {
            pool.emplace_back([&, p] {
                try
                {
                    Eigen::Index begin = p * n / parts;
                    Eigen::Index end = (p + 1) * n / parts;
                    std::vector<Eigen::Index> rows(static_cast<std::size_t>(end - begin));
                    std::iota(rows.begin(), rows.end(), begin);
                    auto sub = batch.subset(rows);
                    auto i = static_cast<std::size_t>(p);
                    terms[i] = batch_loss(params, sub.inputs, sub.targets, ctx, weights,
                                          &grads[i], norm);
                }
                catch (...)
                {
                    errors[static_cast<std::size_t>(p)] = std::current_exception();
                }
            });
        }
    }
    for (auto const& e : errors)
    {
        if (e)
        {
            std::rethrow_exception(e);
        }
    }
    LossTerms total;
    for (Eigen::Index p = 0; p < parts; ++p)
    {
        grad += grads[static_cast<std::size_t>(p)];
        total += terms[static_cast<std::size_t>(p)];
    }
    return total;
}

}  // namespace

TrainResult train(ModelParams initial, TrainingSet const& train_set, TrainingSet const& val_set,
                  LossContext const& ctx, TrainConfig const& cfg, LossWeights const& weights,
                  std::function<void(EpochRecord const&)> const& on_epoch)
{
    cfg.validate();
    weights.validate();
    TrainResult result{std::move(initial), {}, -1};
    if (cfg.max_epochs == 0)
    {
        return result;
    }
    if (train_set.size() == 0 || val_set.size() == 0)
    {
        throw std::invalid_argument("training needs non-empty train and validation sets");
    }

    ModelParams params = result.params;
    AdamOptimizer adam(params.values().size(), cfg.learning_rate, cfg.beta1, cfg.beta2,
                       cfg.epsilon);
    Eigen::VectorXd grad;
    double best_val = std::numeric_limits<double>::infinity();
    int since_best = 0;

    std::vector<Eigen::Index> order(static_cast<std::size_t>(train_set.size()));
    for (int epoch = 0; epoch < cfg.max_epochs; ++epoch)
    {
        std::iota(order.begin(), order.end(), 0);
        Xoshiro256pp rng(derive_seed(cfg.init_seed, static_cast<std::uint64_t>(epoch) + 1));
        std::shuffle(order.begin(), order.end(), rng);

        LossTerms running;
        double seen = 0;
        for (std::size_t start = 0; start < order.size();
             start += static_cast<std::size_t>(cfg.batch_size))
        {
            auto end = std::min(order.size(), start + static_cast<std::size_t>(cfg.batch_size));
            std::vector<Eigen::Index> rows(order.begin() + static_cast<std::ptrdiff_t>(start),
                                           order.begin() + static_cast<std::ptrdiff_t>(end));
            auto batch = train_set.subset(rows);
            LossTerms terms;
            try
            {
                terms = batch_gradient(params, batch, ctx, weights, cfg.workers, grad);
            }
            catch (NumericError const& e)
            {
                throw NumericError("training diverged at epoch " + std::to_string(epoch) + ": "
                                   + e.what());
            }
            if (!std::isfinite(terms.total()) || !grad.allFinite())
            {
                throw NumericError("training diverged at epoch " + std::to_string(epoch)
                                   + ": non-finite loss");
            }
            adam.step(params.values(), grad);
            auto n = static_cast<double>(rows.size());
            terms *= n;
            running += terms;
            seen += n;
        }
        running *= 1.0 / seen;

        EpochRecord rec{epoch, running, {}};
        try
        {
            rec.val = evaluate_loss(params, val_set, ctx, weights);
        }
        catch (NumericError const& e)
        {
            throw NumericError("training diverged at epoch " + std::to_string(epoch) + ": "
                               + e.what());
        }
        if (!std::isfinite(rec.val.total()))
        {
            throw NumericError("training diverged at epoch " + std::to_string(epoch)
                               + ": non-finite validation loss");
        }
        result.history.push_back(rec);
        if (on_epoch)
        {
            on_epoch(rec);
        }

        if (rec.val.total() < best_val)
        {
            best_val = rec.val.total();
            result.params = params;
            result.best_epoch = epoch;
            since_best = 0;
        }
        else if (++since_best >= cfg.patience)
        {
            break;
        }
    }
    return result;
}

void write_history_csv(std::vector<EpochRecord> const& history, std::string const& path)
{
    std::ofstream out(path);
    if (!out)
    {
        throw std::runtime_error("cannot write " + path);
    }
    out << "epoch,train_total,val_total,train_pos,train_quat,train_tx,train_phys,"
           "train_consist,val_pos,val_quat,val_tx,val_phys,val_consist\n";
    out.precision(17);
    for (auto const& r : history)
    {
        out << r.epoch << ',' << r.train.total() << ',' << r.val.total() << ',' << r.train.pos
            << ',' << r.train.quat << ',' << r.train.tx << ',' << r.train.phys << ','
            << r.train.consist << ',' << r.val.pos << ',' << r.val.quat << ',' << r.val.tx << ','
            << r.val.phys << ',' << r.val.consist << '\n';
    }
}

}  // namespace mcvd

#include "mcvd/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include <nlohmann/json.hpp>

#include "mcvd/channel.hpp"
#include "mcvd/errors.hpp"

namespace mcvd {

namespace {

constexpr Eigen::Index kPos = 3;
constexpr Eigen::Index kTxCols = 3 * kNumTx;

}  // namespace

void to_json(nlohmann::json& j, SplitSpec const& s)
{
    j = nlohmann::json{
        {"train", s.train}, {"val", s.val}, {"test", s.test}, {"split_seed", s.split_seed}};
}

void from_json(nlohmann::json const& j, SplitSpec& s)
{
    s.train = j.at("train").get<double>();
    s.val = j.at("val").get<double>();
    s.test = j.at("test").get<double>();
    s.split_seed = j.at("split_seed").get<std::uint64_t>();
}

Eigen::MatrixXd feature_matrix(std::span<SampleRecord const> records,
                               std::vector<std::size_t> const& rows)
{
    Eigen::MatrixXd x(static_cast<Eigen::Index>(rows.size()),
                      static_cast<Eigen::Index>(kFeatureLength));
    for (std::size_t i = 0; i < rows.size(); ++i)
    {
        auto const& f = records[rows[i]].features;
        for (std::size_t c = 0; c < kFeatureLength; ++c)
        {
            x(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(c)) = f[c];
        }
    }
    return x;
}

Eigen::MatrixXd cartesian_targets(std::span<SampleRecord const> records,
                                  std::vector<std::size_t> const& rows)
{
    Eigen::MatrixXd y(static_cast<Eigen::Index>(rows.size()), kPos + kTxCols);
    for (std::size_t i = 0; i < rows.size(); ++i)
    {
        auto const& rec = records[rows[i]];
        auto r = static_cast<Eigen::Index>(i);
        for (int a = 0; a < 3; ++a)
        {
            y(r, a) = rec.label_position[a];
        }
        for (std::size_t k = 0; k < kNumTx; ++k)
        {
            for (int a = 0; a < 3; ++a)
            {
                y(r, kPos + 3 * static_cast<Eigen::Index>(k) + a) = rec.label_tx[k][a];
            }
        }
    }
    return y;
}

Eigen::MatrixXd quaternion_targets(std::span<SampleRecord const> records,
                                   std::vector<std::size_t> const& rows)
{
    Eigen::MatrixXd q(static_cast<Eigen::Index>(rows.size()), 4);
    for (std::size_t i = 0; i < rows.size(); ++i)
    {
        auto c = records[rows[i]].label_quat.components();
        for (int a = 0; a < 4; ++a)
        {
            q(static_cast<Eigen::Index>(i), a) = c[static_cast<std::size_t>(a)];
        }
    }
    return q;
}

double distance_prior(std::span<double const, kFeatureLength> features, SceneConfig const& cfg)
{
    double best = 0.0;
    for (std::size_t k = 0; k < kNumTx; ++k)
    {
        best = std::max(best, features[k * kTokenWidth + token_slot::kPilotTotal]);
    }
    double escaped = static_cast<double>(cfg.N) * cfg.delta / (cfg.r + cfg.delta);
    auto d = channel::invert_distance_from_windowed_count(best, escaped, cfg.r, cfg.D,
                                                          cfg.T_pilot, 2 * cfg.r + cfg.delta);
    return d ? *d + cfg.r + cfg.delta : std::numeric_limits<double>::quiet_NaN();
}

LossContext make_loss_context(Scaler const& scaler, SceneConfig const& cfg)
{
    LossContext ctx;
    Eigen::VectorXd const& m = scaler.target_mean();
    Eigen::VectorXd const& s = scaler.target_std();
    ctx.pos_mean = m.head(kPos);
    ctx.pos_std = s.head(kPos);
    ctx.tx_mean = m.tail(kTxCols);
    ctx.tx_std = s.tail(kTxCols);
    ctx.arm = cfg.r + cfg.delta;
    ctx.phys_scale = std::sqrt(ctx.pos_std.squaredNorm() / 3.0);
    return ctx;
}

TrainingSet make_training_set(std::span<SampleRecord const> records,
                              std::vector<std::size_t> const& rows, Scaler const& scaler,
                              SceneConfig const& cfg)
{
    TrainingSet set;
    set.inputs = scaler.apply_features(feature_matrix(records, rows));
    Eigen::MatrixXd y = scaler.apply_targets(cartesian_targets(records, rows));
    set.targets.position = y.leftCols(kPos).transpose();
    set.targets.tx = y.rightCols(kTxCols).transpose();
    set.targets.quat = quaternion_targets(records, rows).transpose();
    set.targets.distance_prior.resize(static_cast<Eigen::Index>(rows.size()));
    for (std::size_t i = 0; i < rows.size(); ++i)
    {
        set.targets.distance_prior(static_cast<Eigen::Index>(i)) =
            distance_prior(records[rows[i]].features, cfg);
    }
    return set;
}

PreparedData prepare_data(Dataset const& ds, SplitSpec const& spec)
{
    PreparedData p;
    p.split = split(ds.records, spec);
    p.scaler.fit(feature_matrix(ds.records, p.split.train),
                 cartesian_targets(ds.records, p.split.train));
    check_scaler_fit(p.scaler, p.split.train.size());
    p.context = make_loss_context(p.scaler, ds.meta.scene);
    p.train = make_training_set(ds.records, p.split.train, p.scaler, ds.meta.scene);
    p.val = make_training_set(ds.records, p.split.val, p.scaler, ds.meta.scene);
    p.test = make_training_set(ds.records, p.split.test, p.scaler, ds.meta.scene);
    return p;
}

void save_model(ModelBundle const& b, std::string const& path)
{
    nlohmann::json j;
    j["format"] = kModelVersion;
    j["model"] = b.params;
    j["scaler"] = b.scaler;
    j["scene"] = b.scene;
    j["split"] = b.split;
    j["dataset_seed"] = b.dataset_seed;
    j["train_config"] = b.train_config;
    j["loss_weights"] = b.loss_weights;
    std::ofstream out(path);
    if (!out)
    {
        throw std::runtime_error("cannot write " + path);
    }
    out << j.dump(1) << '\n';
    if (!out)
    {
        throw std::runtime_error("write failed: " + path);
    }
}

ModelBundle load_model(std::string const& path)
{
    std::ifstream in(path);
    if (!in)
    {
        throw std::runtime_error("cannot open " + path);
    }
    nlohmann::json j;
    try
    {
        j = nlohmann::json::parse(in);
    }
    catch (nlohmann::json::exception const& e)
    {
        throw FormatError(path + ": " + e.what());
    }
    auto version = j.value("format", std::string{});
    if (version != kModelVersion)
    {
        throw VersionError(path + ": expected layout " + kModelVersion + ", found '" + version
                           + "'");
    }
    try
    {
        ModelBundle b{params_from_json(j.at("model")), {}, {}, {}, 0, {}, {}};
        b.scaler = j.at("scaler").get<Scaler>();
        b.scene = j.at("scene").get<SceneConfig>();
        b.split = j.at("split").get<SplitSpec>();
        b.dataset_seed = j.at("dataset_seed").get<std::uint64_t>();
        b.train_config = j.at("train_config").get<TrainConfig>();
        b.loss_weights = j.at("loss_weights").get<LossWeights>();
        return b;
    }
    catch (nlohmann::json::exception const& e)
    {
        throw FormatError(path + ": " + e.what());
    }
}

Predictions predict(ModelBundle const& bundle, Eigen::MatrixXd const& raw_features)
{
    Prediction p = decode(forward(bundle.params, bundle.scaler.apply_features(raw_features)));
    Eigen::MatrixXd standardized(p.position.cols(), kPos + kTxCols);
    standardized << p.position.transpose(), p.tx.transpose();
    Eigen::MatrixXd physical = bundle.scaler.invert_targets(standardized);
    return {physical.leftCols(kPos), p.quat.transpose(), physical.rightCols(kTxCols),
            p.attention.transpose()};
}

namespace {

// Ridge targets: standardized position, raw quaternion, standardized tx.
Eigen::MatrixXd ridge_targets(TrainingSet const& set)
{
    Eigen::MatrixXd y(set.size(), kPos + 4 + kTxCols);
    y << set.targets.position.transpose(), set.targets.quat.transpose(),
        set.targets.tx.transpose();
    return y;
}

}  // namespace

RidgeBaseline fit_ridge_baseline(PreparedData const& data, std::vector<double> const& grid)
{
    Eigen::MatrixXd x_train = with_intercept(data.train.inputs);
    Eigen::MatrixXd x_val = with_intercept(data.val.inputs);
    Eigen::Index icol = x_train.cols() - 1;
    RidgeBaseline rb;
    rb.selection = select_ridge_alpha(x_train, ridge_targets(data.train), x_val,
                                      ridge_targets(data.val), grid, icol);
    rb.model = ridge_fit(x_train, ridge_targets(data.train), rb.selection.alpha, icol);
    return rb;
}

Predictions predict_ridge(RidgeBaseline const& ridge, Scaler const& scaler,
                          Eigen::MatrixXd const& raw_features)
{
    Eigen::MatrixXd y =
        ridge_predict(ridge.model, with_intercept(scaler.apply_features(raw_features)));
    Eigen::MatrixXd standardized(y.rows(), kPos + kTxCols);
    standardized << y.leftCols(kPos), y.rightCols(kTxCols);
    Eigen::MatrixXd physical = scaler.invert_targets(standardized);
    Eigen::MatrixXd quat(y.rows(), 4);
    for (Eigen::Index i = 0; i < y.rows(); ++i)
    {
        quat.row(i) = normalize_quaternion(y.row(i).segment(kPos, 4).transpose()).transpose();
    }
    return {physical.leftCols(kPos), quat, physical.rightCols(kTxCols),
            Eigen::MatrixXd::Zero(y.rows(), kNumTx)};
}

Evaluation evaluate(ModelBundle const& bundle, Dataset const& ds,
                    std::vector<double> const& alpha_grid)
{
    if (!(ds.meta.scene == bundle.scene))
    {
        throw ConfigError("dataset scene configuration differs from the model's");
    }
    PreparedData data = prepare_data(ds, bundle.split);
    if (data.scaler.fit_rows() != bundle.scaler.fit_rows()
        || data.scaler.feature_mean() != bundle.scaler.feature_mean())
    {
        throw LeakageError("model scaler was not fitted on this dataset's training split");
    }

    Evaluation ev;
    auto const& test_rows = data.split.test;
    for (auto r : test_rows)
    {
        ev.test_ids.push_back(ds.records[r].sample_id);
    }
    Eigen::MatrixXd x_test = feature_matrix(ds.records, test_rows);
    Eigen::MatrixXd y_test = cartesian_targets(ds.records, test_rows);
    Eigen::MatrixXd q_test = quaternion_targets(ds.records, test_rows);
    ev.test_truth = y_test.leftCols(kPos);

    ev.model_pred = predict(bundle, x_test);
    RidgeBaseline rb = fit_ridge_baseline(data, alpha_grid);
    ev.alpha = rb.selection;
    ev.ridge_pred = predict_ridge(rb, data.scaler, x_test);

    auto report = [&](Predictions const& p) {
        return make_report(ev.test_truth, p.position, y_test.rightCols(kTxCols), p.tx, q_test,
                           p.quat);
    };
    ev.model = report(ev.model_pred);
    ev.ridge = report(ev.ridge_pred);
    ev.reduction = compare(ev.model, ev.ridge);
    return ev;
}

void write_absorption_log(AbsorptionLog const& log, std::string const& path)
{
    std::ofstream out(path);
    if (!out)
    {
        throw std::runtime_error("cannot write " + path);
    }
    out << "pilot_id,molecule_id,time_s,px,py,pz,absorber\n";
    for (auto const& pilot : log.pilots)
    {
        for (auto const& e : pilot.events)
        {
            out << e.pilot_id << ',' << e.molecule_id << ',' << format_real(e.time) << ','
                << format_real(e.surface_point.x) << ',' << format_real(e.surface_point.y) << ','
                << format_real(e.surface_point.z) << ',' << to_string(e.absorber) << '\n';
        }
    }
}

AbsorptionLog read_absorption_log(std::string const& path, SceneConfig const& scene)
{
    std::ifstream in(path);
    if (!in)
    {
        throw std::runtime_error("cannot open " + path);
    }
    AbsorptionLog log;
    log.scene = scene;
    for (std::size_t k = 0; k < kNumTx; ++k)
    {
        log.pilots[k].pilot_id = static_cast<int>(k);
    }

    std::string line;
    if (!std::getline(in, line) || line != "pilot_id,molecule_id,time_s,px,py,pz,absorber")
    {
        throw HeaderError(path + ": line 1: expected absorption log header");
    }
    std::size_t line_no = 1;
    while (std::getline(in, line))
    {
        ++line_no;
        if (line.empty())
        {
            continue;
        }
        auto bad = [&](std::string const& why) {
            return FormatError(path + ": line " + std::to_string(line_no) + ": " + why);
        };
        std::vector<std::string> cells;
        std::stringstream ss(line);
        for (std::string cell; std::getline(ss, cell, ',');)
        {
            cells.push_back(cell);
        }
        if (cells.size() != 7)
        {
            throw bad("expected 7 columns, found " + std::to_string(cells.size()));
        }
        AbsorptionEvent e;
        try
        {
            std::size_t used = 0;
            e.pilot_id = std::stoi(cells[0], &used);
            if (used != cells[0].size())
            {
                throw std::invalid_argument("pilot_id");
            }
            e.molecule_id = std::stoll(cells[1], &used);
            if (used != cells[1].size())
            {
                throw std::invalid_argument("molecule_id");
            }
            e.time = parse_real(cells[2]);
            e.surface_point = {parse_real(cells[3]), parse_real(cells[4]),
                               parse_real(cells[5])};
        }
        catch (std::exception const&)
        {
            throw bad("unparseable value");
        }
        if (e.pilot_id < 0 || e.pilot_id >= static_cast<int>(kNumTx))
        {
            throw bad("pilot_id out of range");
        }
        if (cells[6] == "A")
        {
            e.absorber = Absorber::NodeA;
        }
        else if (cells[6] == "B")
        {
            e.absorber = Absorber::NodeB;
        }
        else
        {
            throw bad("absorber must be A or B");
        }
        if (!(e.time >= 0) || !std::isfinite(e.time) || !e.surface_point.is_finite())
        {
            throw bad("time and coordinates must be finite, time >= 0");
        }
        log.pilots[static_cast<std::size_t>(e.pilot_id)].events.push_back(e);
    }
    for (auto& pilot : log.pilots)
    {
        std::sort(pilot.events.begin(), pilot.events.end(), [](auto const& a, auto const& b) {
            return std::pair{a.time, a.molecule_id} < std::pair{b.time, b.molecule_id};
        });
        pilot.n_lost = std::max<std::int64_t>(
            0, scene.N - static_cast<std::int64_t>(pilot.events.size()));
    }
    return log;
}

}  // namespace mcvd

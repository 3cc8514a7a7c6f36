// mcvd: simulation, dataset, training and evaluation front end.
//
// Exit codes: 0 success, 1 scientific or assertion failure, 2 usage,
// configuration or I/O failure.

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "mcvd/config.hpp"
#include "mcvd/dataset.hpp"
#include "mcvd/errors.hpp"
#include "mcvd/features.hpp"
#include "mcvd/manifest.hpp"
#include "mcvd/metrics.hpp"
#include "mcvd/pipeline.hpp"
#include "mcvd/simulator.hpp"
#include "mcvd/validation.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr int kOk = 0;
constexpr int kScientific = 1;
constexpr int kUsage = 2;

/// Failure that maps straight to an exit code.
struct ExitError : std::runtime_error
{
    ExitError(int code, std::string const& msg) : std::runtime_error(msg), code(code) {}
    int code;
};

struct CommonOptions
{
    std::string config_path;
    std::optional<std::uint64_t> seed;
    unsigned workers = 1;
    bool quick = false;
};

/// Sectioned run configuration. Sections absent from the file keep defaults.
struct RunConfig
{
    mcvd::SceneConfig scene;
    mcvd::TrainConfig train;
    mcvd::LossWeights loss;
    mcvd::SplitSpec split;

    [[nodiscard]] json to_json() const
    {
        return {{"scene", scene}, {"train", train}, {"loss", loss}, {"split", split}};
    }
};

RunConfig load_run_config(CommonOptions const& common)
{
    RunConfig rc;
    if (!common.config_path.empty())
    {
        std::ifstream in(common.config_path);
        if (!in)
        {
            throw ExitError(kUsage, "cannot open config " + common.config_path);
        }
        json j;
        try
        {
            j = json::parse(in);
        }
        catch (json::exception const& e)
        {
            throw ExitError(kUsage, common.config_path + ": " + e.what());
        }
        if (!j.is_object())
        {
            throw ExitError(kUsage, common.config_path + ": expected a JSON object");
        }
        for (auto const& [key, value] : j.items())
        {
            if (key == "scene")
            {
                mcvd::from_json(value, rc.scene);
            }
            else if (key == "train")
            {
                mcvd::from_json(value, rc.train);
            }
            else if (key == "loss")
            {
                mcvd::from_json(value, rc.loss);
            }
            else if (key == "split")
            {
                rc.split = value.get<mcvd::SplitSpec>();
            }
            else
            {
                throw ExitError(kUsage, common.config_path + ": unknown section '" + key + "'");
            }
        }
    }
    if (common.seed)
    {
        rc.scene.seed = *common.seed;
        rc.train.init_seed = *common.seed;
    }
    mcvd::validate_config(rc.scene);
    try
    {
        rc.train.validate();
        rc.loss.validate();
        mcvd::split_sizes(10, rc.split);
    }
    catch (std::invalid_argument const& e)
    {
        throw mcvd::ConfigError(e.what());
    }
    return rc;
}

/// Accepts either a dataset base path or a directory holding `dataset.*`.
std::string dataset_base(std::string const& path)
{
    return fs::is_directory(path) ? (fs::path(path) / "dataset").string() : path;
}

/// Accepts either a model file or a directory holding `model.json`.
std::string model_file(std::string const& path)
{
    return fs::is_directory(path) ? (fs::path(path) / "model.json").string() : path;
}

json row_json(Eigen::MatrixXd const& m, Eigen::Index row)
{
    json out = json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c)
    {
        out.push_back(m(row, c));
    }
    return out;
}

void add_common(CLI::App* sub, CommonOptions& common)
{
    sub->add_option("--config", common.config_path,
                    "JSON file with optional sections scene, train, loss, split");
    sub->add_option("--seed", common.seed, "Overrides the scene and training seeds");
    sub->add_option("--workers", common.workers, "Worker threads (results do not depend on it)")
        ->check(CLI::Range(1u, 1024u));
    sub->add_flag("--quick", common.quick, "Reduced-size run for smoke testing");
}

void finish_manifest(mcvd::RunManifest& m, std::string const& dir)
{
    m.finished_utc = mcvd::utc_now();
    m.outputs.push_back(mcvd::write_manifest(m, dir));
}

// validate-channel ---------------------------------------------------------

struct ChannelOptions
{
    double horizon = 50.0;
    std::string out;
};

int cmd_validate_channel(CommonOptions const& common, ChannelOptions const& opt)
{
    RunConfig rc = load_run_config(common);
    mcvd::ChannelCheckConfig cc;
    cc.r = rc.scene.r;
    cc.D = rc.scene.D;
    cc.distance = rc.scene.d_min;
    cc.horizon = opt.horizon;
    cc.dt = rc.scene.dt;
    cc.bin_width = rc.scene.bin_width;
    cc.cull_radius = rc.scene.cull_radius;
    cc.seed = rc.scene.seed;
    cc.workers = common.workers;
    if (common.quick)
    {
        cc.molecules = 10000;
        cc.sigma_tolerance = 5.0;
    }
    auto res = mcvd::run_channel_check(cc);

    std::printf("single sphere r=%g d=%g D=%g horizon=%g s, %lld molecules (%.1f s)\n", cc.r,
                cc.distance, cc.D, cc.horizon, static_cast<long long>(cc.molecules), res.seconds);
    std::printf("[%s] absorbed fraction %.5f vs %.5f (z = %+.2f, limit %.0f sigma)\n",
                res.fraction_ok ? "PASS" : "FAIL", res.fraction, res.expected_fraction, res.z,
                cc.sigma_tolerance);
    std::printf("[%s] histogram mode %.3f s vs peak %.3f s (%+d bins, limit %d); smoothed "
                "mode %.3f s, fitted peak %.4f s\n",
                res.mode_ok ? "PASS" : "FAIL", res.histogram_mode, res.analytic_peak,
                res.mode_offset_bins, cc.mode_tolerance_bins, res.smoothed_mode, res.fitted_peak);
    std::printf("[%s] chi-square %.1f on %d dof, p = %.4f (limit %.2f)\n",
                res.fit_ok ? "PASS" : "FAIL", res.chi_square, res.dof, res.p_value,
                cc.min_p_value);

    if (!opt.out.empty())
    {
        auto m = mcvd::make_manifest("validate-channel", rc.to_json());
        m.seeds["scene"] = rc.scene.seed;
        fs::create_directories(opt.out);
        auto path = (fs::path(opt.out) / "channel_check.json").string();
        std::ofstream(path) << json{{"absorbed_fraction", res.fraction},
                                    {"expected_fraction", res.expected_fraction},
                                    {"z", res.z},
                                    {"histogram_mode", res.histogram_mode},
                                    {"smoothed_mode", res.smoothed_mode},
                                    {"fitted_peak", res.fitted_peak},
                                    {"analytic_peak", res.analytic_peak},
                                    {"chi_square", res.chi_square},
                                    {"dof", res.dof},
                                    {"p_value", res.p_value},
                                    {"passed", res.passed()}}
                                      .dump(2)
                               << '\n';
        m.outputs.push_back(path);
        finish_manifest(m, opt.out);
    }
    return res.passed() ? kOk : kScientific;
}

// gen-dataset --------------------------------------------------------------

struct GenOptions
{
    std::int64_t n = 2000;
    std::string out;
};

int cmd_gen_dataset(CommonOptions const& common, GenOptions const& opt)
{
    RunConfig rc = load_run_config(common);
    std::int64_t n = common.quick ? std::min<std::int64_t>(opt.n, 50) : opt.n;
    auto m = mcvd::make_manifest("gen-dataset", rc.to_json());
    m.seeds["dataset"] = rc.scene.seed;

    auto t0 = std::chrono::steady_clock::now();
    std::int64_t last_pct = -1;
    auto ds = mcvd::generate_dataset(rc.scene, n, rc.scene.seed, common.workers,
                                     [&](std::int64_t done) {
                                         auto pct = 100 * done / n;
                                         if (pct / 10 != last_pct / 10)
                                         {
                                             last_pct = pct;
                                             std::fprintf(stderr, "  %lld/%lld samples\n",
                                                          static_cast<long long>(done),
                                                          static_cast<long long>(n));
                                         }
                                     });
    fs::create_directories(opt.out);
    auto base = (fs::path(opt.out) / "dataset").string();
    mcvd::save_dataset(ds, base);
    m.outputs = {mcvd::meta_path(base), mcvd::data_path(base)};
    finish_manifest(m, opt.out);
    double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::printf("wrote %lld samples to %s (%.1f s)\n", static_cast<long long>(n),
                mcvd::data_path(base).c_str(), secs);
    return kOk;
}

// train --------------------------------------------------------------------

struct TrainOptions
{
    std::string dataset;
    std::string out;
    std::optional<int> epochs;
};

int cmd_train(CommonOptions const& common, TrainOptions const& opt)
{
    RunConfig rc = load_run_config(common);
    if (opt.epochs)
    {
        rc.train.max_epochs = *opt.epochs;
    }
    if (common.quick)
    {
        rc.train.max_epochs = std::min(rc.train.max_epochs, 5);
    }
    rc.train.workers = common.workers;

    auto ds = mcvd::load_dataset(dataset_base(opt.dataset));
    auto data = mcvd::prepare_data(ds, rc.split);
    mcvd::check_scaler_fit(data.scaler, data.split.train.size());

    auto m = mcvd::make_manifest("train", rc.to_json());
    m.seeds["init"] = rc.train.init_seed;
    m.seeds["split"] = rc.split.split_seed;
    m.seeds["dataset"] = ds.meta.seed;

    auto init = mcvd::ModelParams::initialized(mcvd::Architecture{}, rc.train.init_seed);
    auto result = mcvd::train(init, data.train, data.val, data.context, rc.train, rc.loss,
                              [](mcvd::EpochRecord const& r) {
                                  if (r.epoch % 10 == 0)
                                  {
                                      std::fprintf(stderr,
                                                   "  epoch %4d  train %.5f  val %.5f\n",
                                                   r.epoch, r.train.total(), r.val.total());
                                  }
                              });

    fs::create_directories(opt.out);
    mcvd::ModelBundle bundle{result.params, data.scaler, ds.meta.scene, rc.split,
                             ds.meta.seed,  rc.train,    rc.loss};
    auto model_path = (fs::path(opt.out) / "model.json").string();
    auto history_path = (fs::path(opt.out) / "history.csv").string();
    mcvd::save_model(bundle, model_path);
    mcvd::write_history_csv(result.history, history_path);
    m.outputs = {model_path, history_path};
    finish_manifest(m, opt.out);
    std::printf("trained %zu epochs (best %d), model written to %s\n", result.history.size(),
                result.best_epoch, model_path.c_str());
    return kOk;
}

// eval ---------------------------------------------------------------------

struct EvalOptions
{
    std::string dataset;
    std::string model;
    std::string out;
};

json report_json(mcvd::Evaluation const& ev)
{
    return {{"model", ev.model},
            {"ridge", ev.ridge},
            {"reduction", ev.reduction},
            {"ridge_alpha",
             {{"alpha", ev.alpha.alpha},
              {"on_boundary", ev.alpha.on_boundary},
              {"grid", ev.alpha.grid},
              {"val_mse", ev.alpha.val_mse}}}};
}

int cmd_eval(CommonOptions const& common, EvalOptions const& opt)
{
    RunConfig rc = load_run_config(common);
    auto bundle = mcvd::load_model(model_file(opt.model));
    auto ds = mcvd::load_dataset(dataset_base(opt.dataset));
    auto ev = mcvd::evaluate(bundle, ds, mcvd::default_alpha_grid());
    if (ev.alpha.on_boundary)
    {
        std::fprintf(stderr, "warning: ridge alpha %g is on the grid boundary\n", ev.alpha.alpha);
    }

    auto m = mcvd::make_manifest("eval", rc.to_json());
    m.seeds["split"] = bundle.split.split_seed;
    m.seeds["dataset"] = ds.meta.seed;
    fs::create_directories(opt.out);
    auto dir = fs::path(opt.out);
    auto report_path = (dir / "report.json").string();
    std::ofstream(report_path) << report_json(ev).dump(2) << '\n';
    mcvd::export_scatter(ev.test_truth, ev.model_pred.position, ev.test_ids,
                         (dir / "scatter.csv").string(), (dir / "compare3d.csv").string(),
                         bundle.split.split_seed);
    mcvd::export_scatter(ev.test_truth, ev.ridge_pred.position, ev.test_ids,
                         (dir / "scatter_ridge.csv").string(),
                         (dir / "compare3d_ridge.csv").string(), bundle.split.split_seed);
    m.outputs = {report_path,
                 (dir / "scatter.csv").string(),
                 (dir / "compare3d.csv").string(),
                 (dir / "scatter_ridge.csv").string(),
                 (dir / "compare3d_ridge.csv").string()};
    finish_manifest(m, opt.out);

    auto line = [](char const* name, mcvd::MetricsReport const& r) {
        std::printf("%-6s R2 x/y/z %.3f/%.3f/%.3f  mean R2 %.3f  MAE %.3f  RMSE %.3f  "
                    "tx MAE %.3f\n",
                    name, r.r2[0], r.r2[1], r.r2[2], r.mean_r2, r.mae_pos, r.rmse_pos, r.mae_tx);
    };
    std::printf("test samples: %zu, ridge alpha %g\n", ev.model.samples, ev.alpha.alpha);
    line("model", ev.model);
    line("ridge", ev.ridge);
    std::printf("MAE reduced by %.1f%%, RMSE reduced by %.1f%%\n", 100 * ev.reduction.mae,
                100 * ev.reduction.rmse);
    return kOk;
}

// predict ------------------------------------------------------------------

struct PredictOptions
{
    std::string model;
    std::string log;
};

int cmd_predict(CommonOptions const&, PredictOptions const& opt)
{
    auto bundle = mcvd::load_model(model_file(opt.model));
    auto log = mcvd::read_absorption_log(opt.log, bundle.scene);
    auto features = mcvd::flatten(mcvd::build_features(log));
    Eigen::MatrixXd x(1, static_cast<Eigen::Index>(features.size()));
    std::int64_t received = 0;
    for (std::size_t c = 0; c < features.size(); ++c)
    {
        x(0, static_cast<Eigen::Index>(c)) = features[c];
    }
    for (std::size_t k = 0; k < mcvd::kNumTx; ++k)
    {
        received += static_cast<std::int64_t>(
            features[k * mcvd::kTokenWidth + mcvd::token_slot::kPilotTotal]);
    }
    auto p = mcvd::predict(bundle, x);
    json tx = json::array();
    for (Eigen::Index k = 0; k < 6; ++k)
    {
        tx.push_back({p.tx(0, 3 * k), p.tx(0, 3 * k + 1), p.tx(0, 3 * k + 2)});
    }
    json out{{"position", row_json(p.position, 0)},
             {"quaternion", row_json(p.quat, 0)},
             {"tx", tx},
             {"attention", row_json(p.attention, 0)},
             {"received_at_B", received},
             {"low_confidence", received == 0}};
    std::cout << out.dump(2) << '\n';
    return kOk;
}

// plot-export --------------------------------------------------------------

struct PlotOptions
{
    std::string dataset;
    std::string model;
    std::string out;
    std::string history;
};

int cmd_plot_export(CommonOptions const& common, PlotOptions const& opt)
{
    RunConfig rc = load_run_config(common);
    auto bundle = mcvd::load_model(model_file(opt.model));
    auto ds = mcvd::load_dataset(dataset_base(opt.dataset));
    if (!(ds.meta.scene == bundle.scene))
    {
        throw mcvd::ConfigError("dataset scene configuration differs from the model's");
    }
    auto parts = mcvd::split(ds.records, bundle.split);
    std::vector<std::int64_t> ids;
    for (auto r : parts.test)
    {
        ids.push_back(ds.records[r].sample_id);
    }
    auto truth = mcvd::cartesian_targets(ds.records, parts.test).leftCols(3).eval();
    auto pred = mcvd::predict(bundle, mcvd::feature_matrix(ds.records, parts.test));

    auto m = mcvd::make_manifest("plot-export", rc.to_json());
    m.seeds["split"] = bundle.split.split_seed;
    fs::create_directories(opt.out);
    auto dir = fs::path(opt.out);
    mcvd::export_scatter(truth, pred.position, ids, (dir / "scatter.csv").string(),
                         (dir / "compare3d.csv").string(), bundle.split.split_seed);
    m.outputs = {(dir / "scatter.csv").string(), (dir / "compare3d.csv").string()};

    std::string history = opt.history;
    if (history.empty())
    {
        auto beside = fs::path(model_file(opt.model)).parent_path() / "history.csv";
        if (fs::exists(beside))
        {
            history = beside.string();
        }
    }
    if (!history.empty())
    {
        auto curves = (dir / "curves.csv").string();
        fs::copy_file(history, curves, fs::copy_options::overwrite_existing);
        m.outputs.push_back(curves);
    }
    finish_manifest(m, opt.out);
    std::printf("exported %zu test rows to %s\n", ids.size(), opt.out.c_str());
    return kOk;
}

// simulate -----------------------------------------------------------------

struct SimulateOptions
{
    std::vector<double> position{30.0, 0.0, 0.0};
    std::vector<double> quaternion{1.0, 0.0, 0.0, 0.0};
    std::string out;
};

int cmd_simulate(CommonOptions const& common, SimulateOptions const& opt)
{
    RunConfig rc = load_run_config(common);
    mcvd::Pose pose{{opt.position[0], opt.position[1], opt.position[2]},
                    mcvd::UnitQuaternion(opt.quaternion[0], opt.quaternion[1],
                                         opt.quaternion[2], opt.quaternion[3])};
    auto log = mcvd::simulate_scene(rc.scene, pose, rc.scene.seed, common.workers);
    mcvd::write_absorption_log(log, opt.out);
    std::ofstream(opt.out + ".scene.json")
        << json{{"scene", rc.scene},
                {"pose", {{"position", opt.position}, {"quaternion", pose.orientation.components()}}},
                {"seed", rc.scene.seed}}
               .dump(2)
        << '\n';
    std::int64_t at_b = 0;
    for (auto const& p : log.pilots)
    {
        at_b += mcvd::classify_paths(p).to_B;
    }
    std::printf("wrote absorption log to %s (%lld molecules at Node B)\n", opt.out.c_str(),
                static_cast<long long>(at_b));
    return kOk;
}

template <class F>
int guarded(F&& body)
{
    try
    {
        return body();
    }
    catch (ExitError const& e)
    {
        std::fprintf(stderr, "error: %s\n", e.what());
        return e.code;
    }
    catch (mcvd::ConfigError const& e)
    {
        std::fprintf(stderr, "configuration error: %s\n", e.what());
        return kUsage;
    }
    catch (mcvd::FormatError const& e)
    {
        std::fprintf(stderr, "format error: %s\n", e.what());
        return kUsage;
    }
    catch (mcvd::LeakageError const& e)
    {
        std::fprintf(stderr, "leakage: %s\n", e.what());
        return kScientific;
    }
    catch (mcvd::NumericError const& e)
    {
        std::fprintf(stderr, "numeric failure: %s\n", e.what());
        return kScientific;
    }
    catch (mcvd::UndefinedMetricError const& e)
    {
        std::fprintf(stderr, "metric undefined: %s\n", e.what());
        return kScientific;
    }
    catch (json::exception const& e)
    {
        std::fprintf(stderr, "configuration error: %s\n", e.what());
        return kUsage;
    }
    catch (std::exception const& e)
    {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kUsage;
    }
}

}  // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Molecular-communication node localization: simulate, train, evaluate"};
    app.require_subcommand(1);
    app.set_version_flag("--version", mcvd::kToolVersion);

    CommonOptions common;

    ChannelOptions ch;
    auto* validate = app.add_subcommand(
        "validate-channel", "Single-sphere Monte Carlo against the closed-form hitting law");
    add_common(validate, common);
    validate->add_option("--horizon", ch.horizon, "Observation time in seconds")
        ->capture_default_str();
    validate->add_option("--out", ch.out, "Directory for a JSON result and manifest");

    GenOptions gen;
    auto* gen_cmd = app.add_subcommand(
        "gen-dataset",
        "Simulate labeled samples (2000 is desk scale, 10000 is full scale)");
    add_common(gen_cmd, common);
    gen_cmd->add_option("--n", gen.n, "Number of samples")
        ->capture_default_str()
        ->check(CLI::PositiveNumber);
    gen_cmd->add_option("--out", gen.out, "Output directory")->required();

    TrainOptions tr;
    auto* train_cmd = app.add_subcommand("train", "Fit the attention-pooling model");
    add_common(train_cmd, common);
    train_cmd->add_option("--dataset", tr.dataset, "Dataset directory or base path")->required();
    train_cmd->add_option("--out", tr.out, "Output directory")->required();
    train_cmd->add_option("--epochs", tr.epochs, "Overrides train.max_epochs");

    EvalOptions ev;
    auto* eval_cmd =
        app.add_subcommand("eval", "Test-split metrics against an in-run ridge baseline");
    add_common(eval_cmd, common);
    eval_cmd->add_option("--dataset", ev.dataset, "Dataset directory or base path")->required();
    eval_cmd->add_option("--model", ev.model, "Model file or training directory")->required();
    eval_cmd->add_option("--out", ev.out, "Output directory")->required();

    PredictOptions pr;
    auto* predict_cmd =
        app.add_subcommand("predict", "Estimate the pose behind one absorption log");
    add_common(predict_cmd, common);
    predict_cmd->add_option("--model", pr.model, "Model file or training directory")
        ->required();
    predict_cmd->add_option("--log", pr.log, "Absorption log CSV")->required();

    PlotOptions pl;
    auto* plot_cmd =
        app.add_subcommand("plot-export", "Scatter, 3D comparison and loss-curve CSVs");
    add_common(plot_cmd, common);
    plot_cmd->add_option("--dataset", pl.dataset, "Dataset directory or base path")->required();
    plot_cmd->add_option("--model", pl.model, "Model file or training directory")->required();
    plot_cmd->add_option("--out", pl.out, "Output directory")->required();
    plot_cmd->add_option("--history", pl.history, "Training history CSV");

    SimulateOptions sim;
    auto* sim_cmd = app.add_subcommand("simulate", "Simulate one scene and write its absorption log");
    add_common(sim_cmd, common);
    sim_cmd->add_option("--position", sim.position, "Node A center x y z")
        ->expected(3)
        ->capture_default_str();
    sim_cmd->add_option("--quaternion", sim.quaternion, "Node A orientation w x y z")
        ->expected(4)
        ->capture_default_str();
    sim_cmd->add_option("--out", sim.out, "Output CSV")->required();

    try
    {
        app.parse(argc, argv);
    }
    catch (CLI::ParseError const& e)
    {
        int rc = app.exit(e);
        return rc == 0 ? kOk : kUsage;
    }

    if (*validate)
    {
        return guarded([&] { return cmd_validate_channel(common, ch); });
    }
    if (*gen_cmd)
    {
        return guarded([&] { return cmd_gen_dataset(common, gen); });
    }
    if (*train_cmd)
    {
        return guarded([&] { return cmd_train(common, tr); });
    }
    if (*eval_cmd)
    {
        return guarded([&] { return cmd_eval(common, ev); });
    }
    if (*predict_cmd)
    {
        return guarded([&] { return cmd_predict(common, pr); });
    }
    if (*plot_cmd)
    {
        return guarded([&] { return cmd_plot_export(common, pl); });
    }
    if (*sim_cmd)
    {
        return guarded([&] { return cmd_simulate(common, sim); });
    }
    return kUsage;
}

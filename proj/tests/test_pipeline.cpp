#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>

#include <gtest/gtest.h>
#include <nlohmann/json.hpp>

#include "mcvd/channel.hpp"
#include "mcvd/errors.hpp"
#include "mcvd/manifest.hpp"
#include "mcvd/pipeline.hpp"

using namespace mcvd;
namespace fs = std::filesystem;

namespace {

class PipelineTest : public ::testing::Test
{
  protected:
    void SetUp() override
    {
        dir_ = fs::temp_directory_path() /
               ("mcvd_pipe_" + std::to_string(std::random_device{}()));
        fs::create_directories(dir_);
    }
    void TearDown() override { fs::remove_all(dir_); }
    [[nodiscard]] std::string path(std::string const& name) const
    {
        return (dir_ / name).string();
    }

  private:
    fs::path dir_;
};

SceneConfig fast_scene()
{
    SceneConfig cfg;
    cfg.N = 80;
    return cfg;
}

std::string slurp(std::string const& path)
{
    std::ifstream in(path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void dump(std::string const& path, std::string const& text) { std::ofstream(path) << text; }

ModelBundle small_bundle(Dataset const& ds, int epochs)
{
    ModelBundle b;
    b.scene = ds.meta.scene;
    b.dataset_seed = ds.meta.seed;
    b.train_config.max_epochs = epochs;
    auto data = prepare_data(ds, b.split);
    Architecture arch;
    arch.embed = 8;
    arch.attn = 8;
    arch.hidden1 = 8;
    arch.hidden2 = 8;
    auto res = train(ModelParams::initialized(arch, 1), data.train, data.val, data.context,
                     b.train_config, b.loss_weights);
    b.params = res.params;
    b.scaler = data.scaler;
    return b;
}

}  // namespace

TEST_F(PipelineTest, ModelRoundTripAndVersionCheck)
{
    auto ds = generate_dataset(fast_scene(), 20, 3);
    auto bundle = small_bundle(ds, 2);
    save_model(bundle, path("m.json"));
    auto back = load_model(path("m.json"));
    EXPECT_EQ(back.params.values(), bundle.params.values());
    EXPECT_EQ(back.params.arch(), bundle.params.arch());
    EXPECT_EQ(back.scaler.feature_mean(), bundle.scaler.feature_mean());
    EXPECT_EQ(back.scaler.target_std(), bundle.scaler.target_std());
    EXPECT_EQ(back.scaler.fit_rows(), bundle.scaler.fit_rows());
    EXPECT_TRUE(back.scene == bundle.scene);
    EXPECT_EQ(back.dataset_seed, 3u);

    auto x = feature_matrix(ds.records, {0, 1, 2});
    auto a = predict(bundle, x);
    auto b = predict(back, x);
    EXPECT_EQ(a.position, b.position);
    EXPECT_EQ(a.quat, b.quat);

    auto j = nlohmann::json::parse(slurp(path("m.json")));
    j["format"] = "mcvd-model/v0";
    dump(path("old.json"), j.dump());
    EXPECT_THROW(load_model(path("old.json")), VersionError);
    dump(path("junk.json"), "{\"format\": \"mcvd-model/v1\"}");
    EXPECT_THROW(load_model(path("junk.json")), FormatError);
}

TEST_F(PipelineTest, PreparedSplitsAreLeakFree)
{
    auto ds = generate_dataset(fast_scene(), 30, 4);
    auto data = prepare_data(ds, {});
    EXPECT_EQ(data.scaler.fit_rows(), data.split.train.size());
    EXPECT_EQ(data.train.size() + data.val.size() + data.test.size(), 30);
    // Train-only statistics differ from all-row statistics.
    Scaler all;
    std::vector<std::size_t> rows(30);
    std::iota(rows.begin(), rows.end(), std::size_t{0});
    all.fit(feature_matrix(ds.records, rows), cartesian_targets(ds.records, rows));
    EXPECT_NE(all.feature_mean(), data.scaler.feature_mean());
    EXPECT_THROW(check_scaler_fit(all, data.split.train.size()), LeakageError);
}

TEST_F(PipelineTest, EvaluationChecksSceneAndScaler)
{
    auto ds = generate_dataset(fast_scene(), 30, 5);
    auto bundle = small_bundle(ds, 1);
    auto ev = evaluate(bundle, ds, default_alpha_grid());
    EXPECT_EQ(ev.test_ids.size(), 3u);
    EXPECT_EQ(ev.model.samples, 3u);
    EXPECT_EQ(ev.model_pred.position.rows(), 3);

    auto other = bundle;
    other.scene.D = 90.0;
    EXPECT_THROW(evaluate(other, ds, default_alpha_grid()), ConfigError);
    auto shifted = bundle;
    shifted.split.split_seed = 99;
    EXPECT_THROW(evaluate(shifted, ds, default_alpha_grid()), LeakageError);
}

TEST_F(PipelineTest, RidgeBaselineQuaternionsAreUnit)
{
    auto ds = generate_dataset(fast_scene(), 30, 6);
    auto data = prepare_data(ds, {});
    auto rb = fit_ridge_baseline(data, {0.1, 1.0, 10.0});
    auto p = predict_ridge(rb, data.scaler, feature_matrix(ds.records, data.split.test));
    for (Eigen::Index i = 0; i < p.quat.rows(); ++i)
    {
        EXPECT_NEAR(p.quat.row(i).norm(), 1.0, 1e-12);
    }
    EXPECT_EQ(p.tx.cols(), 18);
}

TEST(DistancePrior, EmptyAndScaling)
{
    SceneConfig cfg;
    std::array<double, kFeatureLength> f{};
    EXPECT_TRUE(std::isnan(distance_prior(f, cfg)));
    // The windowed expectation at a tip distance is inverted back to it.
    double tip = 24.0;
    double escaped = cfg.N * cfg.delta / (cfg.r + cfg.delta);
    double expected = escaped * channel::hit_cdf({cfg.r, tip, cfg.D, cfg.T_pilot});
    f[2 * kTokenWidth + token_slot::kPilotTotal] = expected;
    f[4 * kTokenWidth + token_slot::kPilotTotal] = 0.5 * expected;
    EXPECT_NEAR(distance_prior(f, cfg), tip + cfg.r + cfg.delta, 1e-6);
}

TEST_F(PipelineTest, AbsorptionLogRoundTrip)
{
    auto cfg = fast_scene();
    Pose pose{{0, 0, 24}, UnitQuaternion(0.1, 0.7, 0.2, -0.3)};
    auto log = simulate_scene(cfg, pose, 12);
    write_absorption_log(log, path("log.csv"));
    auto back = read_absorption_log(path("log.csv"), cfg);
    for (std::size_t k = 0; k < kNumTx; ++k)
    {
        EXPECT_EQ(back.pilots[k].events, log.pilots[k].events);
        EXPECT_EQ(back.pilots[k].n_lost, log.pilots[k].n_lost);
    }
    EXPECT_EQ(build_features(back), build_features(log));
}

TEST_F(PipelineTest, MalformedLogRowsNameTheirLine)
{
    SceneConfig cfg;
    std::string header = "pilot_id,molecule_id,time_s,px,py,pz,absorber\n";
    dump(path("a.csv"), header + "0,1,0.5,5,0,0,B\n1,2,0.6,0,5,0,B\n2,3,oops,0,0,5,B\n");
    try
    {
        read_absorption_log(path("a.csv"), cfg);
        FAIL() << "expected FormatError";
    }
    catch (FormatError const& e)
    {
        EXPECT_NE(std::string(e.what()).find("line 4"), std::string::npos) << e.what();
    }
    dump(path("b.csv"), header + "7,1,0.5,5,0,0,B\n");
    EXPECT_THROW(read_absorption_log(path("b.csv"), cfg), FormatError);
    dump(path("c.csv"), header + "0,1,0.5,5,0,0,C\n");
    EXPECT_THROW(read_absorption_log(path("c.csv"), cfg), FormatError);
    dump(path("d.csv"), header + "0,1,0.5,5,0\n");
    EXPECT_THROW(read_absorption_log(path("d.csv"), cfg), FormatError);
    dump(path("e.csv"), "time,x,y,z\n");
    EXPECT_THROW(read_absorption_log(path("e.csv"), cfg), HeaderError);
    dump(path("f.csv"), header);
    auto empty = read_absorption_log(path("f.csv"), cfg);
    EXPECT_EQ(empty.pilots[3].n_lost, cfg.N);
}

TEST_F(PipelineTest, ManifestHashesAndRoundTrip)
{
    EXPECT_EQ(sha256_hex("abc"),
              "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
    nlohmann::json cfg{{"scene", {{"N", 2000}}}};
    auto m = make_manifest("train", cfg);
    EXPECT_EQ(m.config_hash, config_hash(cfg));
    EXPECT_EQ(m.tool_version, kToolVersion);
    m.seeds["scene"] = 42;
    m.outputs.push_back("model.json");
    write_manifest(m, path("."));
    auto j = nlohmann::json::parse(slurp(path("manifest.json")));
    auto back = j.get<RunManifest>();
    EXPECT_EQ(back.command, "train");
    EXPECT_EQ(back.config_hash, m.config_hash);
    EXPECT_EQ(back.seeds.at("scene"), 42u);
    EXPECT_EQ(back.outputs, m.outputs);
}

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>

#include <gtest/gtest.h>
#include <nlohmann/json.hpp>

#include "mcvd/dataset.hpp"
#include "mcvd/errors.hpp"
#include "mcvd/metrics.hpp"

using namespace mcvd;
namespace fs = std::filesystem;

namespace {

Eigen::MatrixXd gaussian(Eigen::Index rows, Eigen::Index cols, std::uint64_t seed)
{
    std::mt19937_64 gen(seed);
    std::normal_distribution<double> g;
    return Eigen::MatrixXd::NullaryExpr(rows, cols, [&] { return g(gen); });
}

std::vector<std::string> read_lines(std::string const& path)
{
    std::ifstream in(path);
    std::vector<std::string> lines;
    for (std::string l; std::getline(in, l);)
    {
        lines.push_back(l);
    }
    return lines;
}

std::vector<std::string> split_csv(std::string const& line)
{
    std::vector<std::string> out;
    std::stringstream ss(line);
    for (std::string cell; std::getline(ss, cell, ',');)
    {
        out.push_back(cell);
    }
    return out;
}

MetricsReport with_errors(double mae_pos, double rmse_pos)
{
    MetricsReport r;
    r.mae_pos = mae_pos;
    r.rmse_pos = rmse_pos;
    return r;
}

}  // namespace

TEST(RSquared, Examples)
{
    std::vector<double> t{1, 2, 3};
    EXPECT_DOUBLE_EQ(r_squared(t, t), 1.0);
    std::vector<double> mean(3, 2.0);
    EXPECT_DOUBLE_EQ(r_squared(t, mean), 0.0);
    std::vector<double> bad{3, 2, 1};
    EXPECT_DOUBLE_EQ(r_squared(t, bad), -3.0);
    std::vector<double> flat{4, 4, 4};
    EXPECT_THROW(r_squared(flat, t), UndefinedMetricError);
    std::vector<double> one{1};
    EXPECT_THROW(r_squared(one, one), UndefinedMetricError);
    EXPECT_THROW(r_squared(t, one), std::invalid_argument);
}

TEST(ErrorMetrics, Examples)
{
    auto a = gaussian(4, 3, 1);
    EXPECT_EQ(mae(a, a), 0.0);
    EXPECT_EQ(rmse(a, a), 0.0);
    Eigen::MatrixXd shifted = a.array() + 0.75;
    EXPECT_NEAR(mae(a, shifted), 0.75, 1e-15);
    EXPECT_NEAR(rmse(a, shifted), 0.75, 1e-15);
    Eigen::MatrixXd t(2, 1), p(2, 1);
    t << 1, 1;
    p << 1, 3;
    EXPECT_DOUBLE_EQ(mae(t, p), 1.0);
    EXPECT_DOUBLE_EQ(rmse(t, p), std::sqrt(2.0));
    EXPECT_THROW(mae(a, gaussian(4, 2, 2)), std::invalid_argument);
    EXPECT_THROW(rmse(Eigen::MatrixXd(0, 3), Eigen::MatrixXd(0, 3)), std::invalid_argument);
}

TEST(Compare, ReferenceReductions)
{
    auto r = compare(with_errors(0.666, 0.941), with_errors(1.309, 1.695));
    EXPECT_NEAR(100 * r.mae, 49.1, 0.05);
    EXPECT_NEAR(100 * r.rmse, 44.5, 0.05);
    auto same = with_errors(2.5, 3.25);
    auto zero = compare(same, same);
    EXPECT_EQ(zero.mae, 0.0);
    EXPECT_EQ(zero.rmse, 0.0);
    EXPECT_THROW(compare(same, with_errors(0.0, 1.0)), UndefinedMetricError);
    EXPECT_THROW(compare(same, with_errors(1.0, 0.0)), UndefinedMetricError);
}

TEST(Report, PowerMeanAndMeanOfAxes)
{
    std::mt19937_64 gen(9);
    std::uniform_real_distribution<double> scale(0.01, 5.0);
    for (std::uint64_t i = 0; i < 1000; ++i)
    {
        Eigen::Index rows = 2 + static_cast<Eigen::Index>(gen() % 30);
        auto pt = gaussian(rows, 3, 3 * i);
        Eigen::MatrixXd pp = pt + scale(gen) * gaussian(rows, 3, 3 * i + 1);
        auto tt = gaussian(rows, 18, 3 * i + 2);
        Eigen::MatrixXd tp = tt.array() + 0.5;
        Eigen::MatrixXd q = Eigen::MatrixXd::Zero(rows, 4);
        q.col(0).setOnes();
        auto rep = make_report(pt, pp, tt, tp, q, q);
        ASSERT_GE(rep.rmse_pos, rep.mae_pos);
        ASSERT_GE(rep.mae_pos, 0.0);
        ASSERT_GE(rep.rmse_tx, rep.mae_tx);
        ASSERT_NEAR(rep.mean_r2, (rep.r2[0] + rep.r2[1] + rep.r2[2]) / 3.0, 1e-15);
        ASSERT_EQ(rep.samples, static_cast<std::size_t>(rows));
        ASSERT_NEAR(rep.mean_orientation_error_deg, 0.0, 1e-6);
    }
}

TEST(Report, PermutationInvariant)
{
    auto pt = gaussian(25, 3, 20);
    Eigen::MatrixXd pp = pt + 0.3 * gaussian(25, 3, 21);
    auto tt = gaussian(25, 18, 22);
    Eigen::MatrixXd tp = tt + 0.2 * gaussian(25, 18, 23);
    auto qt = gaussian(25, 4, 24).rowwise().normalized().eval();
    auto qp = gaussian(25, 4, 25).rowwise().normalized().eval();
    auto base = make_report(pt, pp, tt, tp, qt, qp);

    std::vector<int> order(25);
    std::iota(order.begin(), order.end(), 0);
    std::mt19937_64 gen(26);
    std::shuffle(order.begin(), order.end(), gen);
    Eigen::PermutationMatrix<Eigen::Dynamic> perm(25);
    for (int i = 0; i < 25; ++i)
    {
        perm.indices()(i) = order[static_cast<std::size_t>(i)];
    }
    auto shuffled = make_report(perm * pt, perm * pp, perm * tt, perm * tp, perm * qt, perm * qp);
    for (int a = 0; a < 3; ++a)
    {
        EXPECT_NEAR(shuffled.r2[static_cast<std::size_t>(a)], base.r2[static_cast<std::size_t>(a)],
                    1e-12);
    }
    EXPECT_NEAR(shuffled.mae_pos, base.mae_pos, 1e-12);
    EXPECT_NEAR(shuffled.rmse_pos, base.rmse_pos, 1e-12);
    EXPECT_NEAR(shuffled.mae_tx, base.mae_tx, 1e-12);
    EXPECT_NEAR(shuffled.mean_orientation_error_deg, base.mean_orientation_error_deg, 1e-9);
}

TEST(Report, PerfectModelScoresOne)
{
    auto pt = gaussian(6, 3, 30);
    auto tt = gaussian(6, 18, 31);
    auto q = gaussian(6, 4, 32).rowwise().normalized().eval();
    auto rep = make_report(pt, pt, tt, tt, q, -q);
    EXPECT_EQ(rep.mean_r2, 1.0);
    EXPECT_EQ(rep.pooled_r2, 1.0);
    EXPECT_EQ(rep.mae_pos, 0.0);
    EXPECT_NEAR(rep.mean_orientation_error_deg, 0.0, 1e-6);
    nlohmann::json j = rep;
    EXPECT_EQ(j.at("mean_r2").get<double>(), 1.0);
    EXPECT_EQ(j.at("r2_z").get<double>(), 1.0);
    EXPECT_EQ(j.at("samples").get<std::size_t>(), 6u);
}

class ExportTest : public ::testing::Test
{
  protected:
    void SetUp() override
    {
        dir_ = fs::temp_directory_path() / ("mcvd_export_" + std::to_string(::getpid()));
        fs::create_directories(dir_);
    }
    void TearDown() override { fs::remove_all(dir_); }
    std::string path(std::string const& name) const { return (dir_ / name).string(); }

  private:
    fs::path dir_;
};

TEST_F(ExportTest, ScatterRowsAndExactRoundTrip)
{
    Eigen::MatrixXd truth = gaussian(10, 3, 40) * 17.3;
    Eigen::MatrixXd pred = truth + gaussian(10, 3, 41) / 3.0;
    std::vector<std::int64_t> ids{5, 9, 12, 40, 41, 42, 77, 80, 81, 99};
    export_scatter(truth, pred, ids, path("s.csv"), path("c.csv"), 13);

    auto lines = read_lines(path("s.csv"));
    ASSERT_EQ(lines.size(), 31u);
    EXPECT_EQ(lines[0], "axis,truth,prediction");
    char const* axes[] = {"x", "y", "z"};
    for (int a = 0; a < 3; ++a)
    {
        for (int i = 0; i < 10; ++i)
        {
            auto cells = split_csv(lines[static_cast<std::size_t>(1 + 10 * a + i)]);
            ASSERT_EQ(cells.size(), 3u);
            EXPECT_EQ(cells[0], axes[a]);
            EXPECT_EQ(parse_real(cells[1]), truth(i, a));
            EXPECT_EQ(parse_real(cells[2]), pred(i, a));
        }
    }

    auto c3 = read_lines(path("c.csv"));
    ASSERT_EQ(c3.size(), 6u);
    EXPECT_EQ(c3[0], "sample_id,true_x,true_y,true_z,pred_x,pred_y,pred_z");
    auto picks = pick_examples(ids, 13, 5);
    for (std::size_t k = 0; k < 5; ++k)
    {
        auto cells = split_csv(c3[k + 1]);
        ASSERT_EQ(cells.size(), 7u);
        auto row = static_cast<Eigen::Index>(picks[k]);
        EXPECT_EQ(std::stoll(cells[0]), ids[picks[k]]);
        for (int a = 0; a < 3; ++a)
        {
            EXPECT_EQ(parse_real(cells[static_cast<std::size_t>(1 + a)]), truth(row, a));
            EXPECT_EQ(parse_real(cells[static_cast<std::size_t>(4 + a)]), pred(row, a));
        }
    }
}

TEST(Examples, DeterministicDistinctPicks)
{
    std::vector<std::int64_t> ids(50);
    std::iota(ids.begin(), ids.end(), 100);
    auto a = pick_examples(ids, 3, 5);
    EXPECT_EQ(a, pick_examples(ids, 3, 5));
    ASSERT_EQ(a.size(), 5u);
    std::set<std::size_t> unique(a.begin(), a.end());
    EXPECT_EQ(unique.size(), 5u);
    for (auto i : a)
    {
        EXPECT_LT(i, ids.size());
    }
    // Keyed by id, so reordering the rows picks the same samples.
    auto reversed = ids;
    std::reverse(reversed.begin(), reversed.end());
    auto b = pick_examples(reversed, 3, 5);
    std::set<std::int64_t> ids_a, ids_b;
    for (std::size_t k = 0; k < 5; ++k)
    {
        ids_a.insert(ids[a[k]]);
        ids_b.insert(reversed[b[k]]);
    }
    EXPECT_EQ(ids_a, ids_b);
    EXPECT_EQ(pick_examples({1, 2}, 3, 5).size(), 2u);
}

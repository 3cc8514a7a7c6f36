#include "mcvd/model.hpp"

#include <cmath>
#include <random>
#include <string>

#include <nlohmann/json.hpp>

#include "mcvd/errors.hpp"
#include "mcvd/rng.hpp"

namespace mcvd {

std::size_t Architecture::parameter_count() const
{
    auto e = static_cast<std::size_t>(embed);
    auto a = static_cast<std::size_t>(attn);
    auto h1 = static_cast<std::size_t>(hidden1);
    auto h2 = static_cast<std::size_t>(hidden2);
    auto o = static_cast<std::size_t>(outputs);
    return e * static_cast<std::size_t>(token_dim) + e + e * static_cast<std::size_t>(n_tokens)
           + a * e + a + h1 * e + h1 + h2 * h1 + h2 + o * h2 + o;
}

ParamViews make_views(Architecture const& arch, double* data)
{
    double* p = data;
    auto take = [&p](Eigen::Index rows, Eigen::Index cols) {
        double* start = p;
        p += rows * cols;
        return start;
    };
    // Order defines the serialized layout; do not reorder.
    double* ew = take(arch.embed, arch.token_dim);
    double* eb = take(arch.embed, 1);
    double* tb = take(arch.embed, arch.n_tokens);
    double* aw = take(arch.attn, arch.embed);
    double* q = take(arch.attn, 1);
    double* w1 = take(arch.hidden1, arch.embed);
    double* b1 = take(arch.hidden1, 1);
    double* w2 = take(arch.hidden2, arch.hidden1);
    double* b2 = take(arch.hidden2, 1);
    double* w3 = take(arch.outputs, arch.hidden2);
    double* b3 = take(arch.outputs, 1);
    return {{ew, arch.embed, arch.token_dim},  {eb, arch.embed},
            {tb, arch.embed, arch.n_tokens},   {aw, arch.attn, arch.embed},
            {q, arch.attn},                    {w1, arch.hidden1, arch.embed},
            {b1, arch.hidden1},                {w2, arch.hidden2, arch.hidden1},
            {b2, arch.hidden2},                {w3, arch.outputs, arch.hidden2},
            {b3, arch.outputs}};
}

ModelParams::ModelParams(Architecture const& arch)
    : arch_(arch), values_(Eigen::VectorXd::Zero(static_cast<Eigen::Index>(arch.parameter_count())))
{
    if (arch.outputs != 25)
    {
        throw std::invalid_argument("model output width must be 25");
    }
}

ModelParams ModelParams::initialized(Architecture const& arch, std::uint64_t seed)
{
    ModelParams p(arch);
    auto v = p.views();
    Xoshiro256pp rng(seed);
    std::normal_distribution<double> gauss;
    auto fill = [&](auto& m, double scale) {
        for (Eigen::Index i = 0; i < m.size(); ++i)
        {
            m.data()[i] = scale * gauss(rng);
        }
    };
    fill(v.embed_w, std::sqrt(2.0 / arch.token_dim));
    fill(v.attn_w, std::sqrt(1.0 / arch.embed));
    fill(v.query, std::sqrt(1.0 / arch.attn));
    fill(v.w1, std::sqrt(2.0 / arch.embed));
    fill(v.w2, std::sqrt(2.0 / arch.hidden1));
    fill(v.w3, std::sqrt(1.0 / arch.hidden2));
    v.b3(output_slot::kQuat) = 1.0;
    return p;
}

void to_json(nlohmann::json& j, Architecture const& a)
{
    j = nlohmann::json{{"n_tokens", a.n_tokens}, {"token_dim", a.token_dim},
                       {"embed", a.embed},       {"attn", a.attn},
                       {"hidden1", a.hidden1},   {"hidden2", a.hidden2},
                       {"outputs", a.outputs}};
}

void from_json(nlohmann::json const& j, Architecture& a)
{
    j.at("n_tokens").get_to(a.n_tokens);
    j.at("token_dim").get_to(a.token_dim);
    j.at("embed").get_to(a.embed);
    j.at("attn").get_to(a.attn);
    j.at("hidden1").get_to(a.hidden1);
    j.at("hidden2").get_to(a.hidden2);
    j.at("outputs").get_to(a.outputs);
}

void to_json(nlohmann::json& j, ModelParams const& p)
{
    auto const& v = p.values();
    j = nlohmann::json{{"architecture", p.arch()},
                       {"values", std::vector<double>(v.data(), v.data() + v.size())}};
}

ModelParams params_from_json(nlohmann::json const& j)
{
    ModelParams p(j.at("architecture").get<Architecture>());
    auto values = j.at("values").get<std::vector<double>>();
    if (values.size() != static_cast<std::size_t>(p.values().size()))
    {
        throw FormatError("parameter count does not match architecture");
    }
    p.values() = Eigen::Map<Eigen::VectorXd>(values.data(), p.values().size());
    return p;
}

Pooled attention_pool(Eigen::MatrixXd const& embeddings, Eigen::VectorXd const& scores)
{
    Eigen::VectorXd w = (scores.array() - scores.maxCoeff()).exp();
    w /= w.sum();
    return {w, embeddings * w};
}

namespace {

void check_finite(Eigen::MatrixXd const& m, char const* layer)
{
    if (!m.allFinite())
    {
        throw NumericError(std::string("non-finite activations in layer ") + layer);
    }
}

}  // namespace

ForwardCache forward(ModelParams const& params, Eigen::MatrixXd const& inputs)
{
    auto const& arch = params.arch();
    auto const v = params.views();
    Eigen::Index const batch = inputs.rows();
    Eigen::Index const nt = arch.n_tokens;
    if (inputs.cols() != nt * arch.token_dim)
    {
        throw std::invalid_argument("forward: input width does not match architecture");
    }

    ForwardCache c;
    // Row-major sample layout: token i of sample b is a contiguous block.
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> rm = inputs;
    c.tokens = Eigen::Map<Eigen::MatrixXd>(rm.data(), arch.token_dim, batch * nt);

    c.embed_pre = v.embed_w * c.tokens;
    for (Eigen::Index col = 0; col < batch * nt; ++col)
    {
        c.embed_pre.col(col) += v.embed_b + v.token_bias.col(col % nt);
    }
    c.embed = c.embed_pre.cwiseMax(0.0);
    check_finite(c.embed, "embedding");

    c.attn_act = (v.attn_w * c.embed).array().tanh();
    Eigen::RowVectorXd scores = v.query.transpose() * c.attn_act;

    c.alpha.resize(nt, batch);
    c.pooled.resize(arch.embed, batch);
    for (Eigen::Index b = 0; b < batch; ++b)
    {
        auto pooled = attention_pool(c.embed.middleCols(b * nt, nt),
                                     scores.segment(b * nt, nt).transpose());
        c.alpha.col(b) = pooled.weights;
        c.pooled.col(b) = pooled.pooled;
    }
    check_finite(c.pooled, "attention");

    c.z1 = (v.w1 * c.pooled).colwise() + v.b1;
    c.h1 = c.z1.cwiseMax(0.0);
    check_finite(c.h1, "hidden1");
    c.z2 = (v.w2 * c.h1).colwise() + v.b2;
    c.h2 = c.z2.cwiseMax(0.0);
    check_finite(c.h2, "hidden2");
    c.out = (v.w3 * c.h2).colwise() + v.b3;
    check_finite(c.out, "output");
    return c;
}

void backward(ModelParams const& params, ForwardCache const& c, Eigen::MatrixXd const& d_out,
              Eigen::VectorXd& grad)
{
    auto const& arch = params.arch();
    auto const v = params.views();
    auto g = make_views(arch, grad.data());
    Eigen::Index const batch = d_out.cols();
    Eigen::Index const nt = arch.n_tokens;

    g.w3.noalias() += d_out * c.h2.transpose();
    g.b3 += d_out.rowwise().sum();
    Eigen::MatrixXd dz2 = (v.w3.transpose() * d_out).cwiseProduct(
        (c.z2.array() > 0.0).cast<double>().matrix());
    g.w2.noalias() += dz2 * c.h1.transpose();
    g.b2 += dz2.rowwise().sum();
    Eigen::MatrixXd dz1 = (v.w2.transpose() * dz2).cwiseProduct(
        (c.z1.array() > 0.0).cast<double>().matrix());
    g.w1.noalias() += dz1 * c.pooled.transpose();
    g.b1 += dz1.rowwise().sum();
    Eigen::MatrixXd d_pooled = v.w1.transpose() * dz1;

    Eigen::MatrixXd d_embed(arch.embed, batch * nt);
    Eigen::RowVectorXd d_scores(batch * nt);
    for (Eigen::Index b = 0; b < batch; ++b)
    {
        auto alpha = c.alpha.col(b);
        auto e = c.embed.middleCols(b * nt, nt);
        d_embed.middleCols(b * nt, nt) = d_pooled.col(b) * alpha.transpose();
        Eigen::VectorXd d_alpha = e.transpose() * d_pooled.col(b);
        double mean = alpha.dot(d_alpha);
        d_scores.segment(b * nt, nt) = (alpha.array() * (d_alpha.array() - mean)).transpose();
    }

    g.query.noalias() += c.attn_act * d_scores.transpose();
    Eigen::MatrixXd d_attn_pre = (v.query * d_scores).cwiseProduct(
        (1.0 - c.attn_act.array().square()).matrix());
    g.attn_w.noalias() += d_attn_pre * c.embed.transpose();
    d_embed.noalias() += v.attn_w.transpose() * d_attn_pre;

    Eigen::MatrixXd d_embed_pre = d_embed.cwiseProduct(
        (c.embed_pre.array() > 0.0).cast<double>().matrix());
    g.embed_w.noalias() += d_embed_pre * c.tokens.transpose();
    g.embed_b += d_embed_pre.rowwise().sum();
    for (Eigen::Index col = 0; col < batch * nt; ++col)
    {
        g.token_bias.col(col % nt) += d_embed_pre.col(col);
    }
}

Eigen::Vector4d normalize_quaternion(Eigen::Vector4d const& raw)
{
    double n = raw.norm();
    if (!(n >= 1e-8))
    {
        return {1.0, 0.0, 0.0, 0.0};
    }
    return raw / n;
}

Prediction decode(ForwardCache const& cache)
{
    Eigen::Index batch = cache.out.cols();
    Prediction p;
    p.position = cache.out.middleRows(output_slot::kPosition, 3);
    p.tx = cache.out.middleRows(output_slot::kTx, 18);
    p.quat.resize(4, batch);
    for (Eigen::Index b = 0; b < batch; ++b)
    {
        p.quat.col(b) = normalize_quaternion(cache.out.col(b).segment<4>(output_slot::kQuat));
    }
    p.attention = cache.alpha;
    return p;
}

}  // namespace mcvd

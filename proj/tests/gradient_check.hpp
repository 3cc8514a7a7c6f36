#pragma once

// Central finite-difference check of the full loss gradient on a reduced
// model. Shared by the unit tests and the acceptance binary.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <random>

#include <Eigen/Dense>

#include "mcvd/geometry.hpp"
#include "mcvd/loss.hpp"
#include "mcvd/model.hpp"

namespace mcvd::gradcheck {

struct GradientCheck
{
    double max_rel_error = 0.0;  ///< over coordinates above the absolute floor
    double max_abs_error = 0.0;
    std::size_t failures = 0;    ///< coordinates outside both tolerances
    std::size_t checked = 0;
    bool kink_free = true;       ///< no ReLU changed state under any probe
};

inline Architecture reduced_architecture()
{
    Architecture a;
    a.embed = 8;
    a.attn = 8;
    a.hidden1 = 8;
    a.hidden2 = 8;
    return a;
}

struct GradientProblem
{
    ModelParams params;
    Eigen::MatrixXd inputs;
    TargetBatch targets;
    LossContext ctx;
    LossWeights weights;
};

/// Random reduced model, batch, targets and loss weights for `seed`.
inline GradientProblem random_gradient_problem(std::uint64_t seed, Eigen::Index batch = 4)
{
    std::mt19937_64 gen(seed);
    std::normal_distribution<double> g;
    std::uniform_real_distribution<double> u(0.1, 1.0);

    GradientProblem p{ModelParams::initialized(reduced_architecture(), seed), {}, {}, {}, {}};
    for (auto& v : p.params.values())
    {
        v += 0.05 * g(gen);
    }
    p.inputs.resize(batch, 192);
    for (Eigen::Index i = 0; i < p.inputs.size(); ++i)
    {
        p.inputs.data()[i] = g(gen);
    }
    auto& t = p.targets;
    t.position.resize(3, batch);
    t.quat.resize(4, batch);
    t.tx.resize(18, batch);
    t.distance_prior.resize(batch);
    for (Eigen::Index b = 0; b < batch; ++b)
    {
        for (Eigen::Index r = 0; r < 3; ++r)
        {
            t.position(r, b) = g(gen);
        }
        Eigen::Vector4d q(g(gen), g(gen), g(gen), g(gen));
        t.quat.col(b) = q.normalized();
        for (Eigen::Index r = 0; r < 18; ++r)
        {
            t.tx(r, b) = g(gen);
        }
        t.distance_prior(b) =
            b % 3 == 2 ? std::numeric_limits<double>::quiet_NaN() : 20.0 + 30.0 * u(gen);
    }
    p.ctx.pos_mean = Eigen::Vector3d(g(gen), g(gen), g(gen));
    p.ctx.pos_std = Eigen::Vector3d(20 * u(gen), 20 * u(gen), 20 * u(gen));
    p.ctx.tx_mean = Eigen::VectorXd::NullaryExpr(18, [&] { return g(gen); });
    p.ctx.tx_std = Eigen::VectorXd::NullaryExpr(18, [&] { return 20 * u(gen); });
    p.ctx.phys_scale = 10.0 * u(gen);
    p.weights = {u(gen), u(gen), u(gen), u(gen), u(gen)};
    return p;
}

namespace detail {

inline Eigen::Array<bool, Eigen::Dynamic, 1> relu_pattern(ModelParams const& params,
                                                          Eigen::MatrixXd const& inputs)
{
    auto c = forward(params, inputs);
    Eigen::Index n = c.embed_pre.size() + c.z1.size() + c.z2.size();
    Eigen::Array<bool, Eigen::Dynamic, 1> on(n);
    Eigen::Index k = 0;
    for (auto const* m : {&c.embed_pre, &c.z1, &c.z2})
    {
        for (Eigen::Index i = 0; i < m->size(); ++i)
        {
            on(k++) = m->data()[i] > 0.0;
        }
    }
    return on;
}

}  // namespace detail

/// Every parameter coordinate is probed with step `h`. A coordinate passes
/// when |analytic - numeric| <= rel_tol * max(|analytic|, |numeric|) or the
/// difference is below abs_floor.
inline GradientCheck check_gradients(GradientProblem const& p, double h = 1e-5,
                                     double rel_tol = 1e-4, double abs_floor = 1e-7)
{
    GradientCheck out;
    Eigen::VectorXd grad = Eigen::VectorXd::Zero(p.params.values().size());
    batch_loss(p.params, p.inputs, p.targets, p.ctx, p.weights, &grad);
    auto const base_pattern = detail::relu_pattern(p.params, p.inputs);

    ModelParams probe = p.params;
    for (Eigen::Index i = 0; i < grad.size(); ++i)
    {
        double const v = probe.values()(i);
        probe.values()(i) = v + h;
        double up = batch_loss(probe, p.inputs, p.targets, p.ctx, p.weights).total();
        bool same = (detail::relu_pattern(probe, p.inputs) == base_pattern).all();
        probe.values()(i) = v - h;
        double down = batch_loss(probe, p.inputs, p.targets, p.ctx, p.weights).total();
        same = same && (detail::relu_pattern(probe, p.inputs) == base_pattern).all();
        probe.values()(i) = v;
        if (!same)
        {
            out.kink_free = false;
            continue;
        }
        double numeric = (up - down) / (2 * h);
        double diff = std::abs(grad(i) - numeric);
        double scale = std::max(std::abs(grad(i)), std::abs(numeric));
        ++out.checked;
        out.max_abs_error = std::max(out.max_abs_error, diff);
        if (diff > abs_floor)
        {
            out.max_rel_error = std::max(out.max_rel_error, diff / scale);
            if (diff > rel_tol * scale)
            {
                ++out.failures;
            }
        }
    }
    return out;
}

}  // namespace mcvd::gradcheck

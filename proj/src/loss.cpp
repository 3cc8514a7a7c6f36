#include "mcvd/loss.hpp"

#include <cmath>
#include <stdexcept>

#include <nlohmann/json.hpp>

namespace mcvd {

void LossWeights::validate() const
{
    for (double w : {pos, quat, tx, phys, consist})
    {
        if (!(w >= 0.0) || !std::isfinite(w))
        {
            throw std::invalid_argument("loss weights must be finite and non-negative");
        }
    }
}

void to_json(nlohmann::json& j, LossWeights const& w)
{
    j = nlohmann::json{{"pos", w.pos},   {"quat", w.quat},       {"tx", w.tx},
                       {"phys", w.phys}, {"consist", w.consist}};
}

void from_json(nlohmann::json const& j, LossWeights& w)
{
    w.pos = j.value("pos", w.pos);
    w.quat = j.value("quat", w.quat);
    w.tx = j.value("tx", w.tx);
    w.phys = j.value("phys", w.phys);
    w.consist = j.value("consist", w.consist);
}

LossTerms& LossTerms::operator+=(LossTerms const& o)
{
    pos += o.pos;
    quat += o.quat;
    tx += o.tx;
    phys += o.phys;
    consist += o.consist;
    return *this;
}

LossTerms& LossTerms::operator*=(double s)
{
    pos *= s;
    quat *= s;
    tx *= s;
    phys *= s;
    consist *= s;
    return *this;
}

Eigen::Matrix3d rotation_matrix(Eigen::Vector4d const& q)
{
    double w = q(0), x = q(1), y = q(2), z = q(3);
    Eigen::Matrix3d r;
    r << 1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y),
        2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x),
        2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y);
    return r;
}

namespace {

// dL/dq for L depending on q through rotation_matrix(q); g = dL/dR.
Eigen::Vector4d rotation_pullback(Eigen::Vector4d const& q, Eigen::Matrix3d const& g)
{
    double w = q(0), x = q(1), y = q(2), z = q(3);
    Eigen::Vector4d d;
    d(0) = 2 * (-z * g(0, 1) + y * g(0, 2) + z * g(1, 0) - x * g(1, 2) - y * g(2, 0)
                + x * g(2, 1));
    d(1) = 2 * (y * g(0, 1) + z * g(0, 2) + y * g(1, 0) - 2 * x * g(1, 1) - w * g(1, 2)
                + z * g(2, 0) + w * g(2, 1) - 2 * x * g(2, 2));
    d(2) = 2 * (-2 * y * g(0, 0) + x * g(0, 1) + w * g(0, 2) + x * g(1, 0) + z * g(1, 2)
                - w * g(2, 0) + z * g(2, 1) - 2 * y * g(2, 2));
    d(3) = 2 * (-2 * z * g(0, 0) - w * g(0, 1) + x * g(0, 2) + w * g(1, 0) - 2 * z * g(1, 1)
                + y * g(1, 2) + x * g(2, 0) + y * g(2, 1));
    return d;
}

}  // namespace

LossNorm default_norm(TargetBatch const& targets)
{
    auto n = targets.distance_prior.size();
    auto with_prior = (!targets.distance_prior.array().isNaN()).count();
    return {static_cast<double>(n), static_cast<double>(with_prior)};
}

LossTerms output_loss(Eigen::MatrixXd const& out, TargetBatch const& t, LossContext const& ctx,
                      LossWeights const& wts, Eigen::MatrixXd* d_out,
                      std::optional<LossNorm> norm)
{
    Eigen::Index const batch = out.cols();
    if (batch == 0)
    {
        throw std::invalid_argument("loss of an empty batch");
    }
    LossNorm const n = norm.value_or(default_norm(t));
    double const inv_b = 1.0 / n.rows;
    // No prior anywhere: the physics term contributes zero.
    double const inv_prior = n.prior_rows > 0 ? 1.0 / n.prior_rows : 0.0;

    if (d_out)
    {
        d_out->setZero(out.rows(), batch);
    }
    LossTerms terms;
    for (Eigen::Index b = 0; b < batch; ++b)
    {
        Eigen::Vector3d pos = out.col(b).segment<3>(output_slot::kPosition);
        Eigen::Vector4d raw = out.col(b).segment<4>(output_slot::kQuat);
        Eigen::VectorXd tx = out.col(b).segment(output_slot::kTx, 18);

        double raw_norm = raw.norm();
        bool degenerate = !(raw_norm >= 1e-8);
        Eigen::Vector4d q_hat = normalize_quaternion(raw);

        Eigen::Vector3d d_pos = Eigen::Vector3d::Zero();
        Eigen::Vector3d d_pos_phys = Eigen::Vector3d::Zero();
        Eigen::Vector4d d_q = Eigen::Vector4d::Zero();
        Eigen::VectorXd d_tx = Eigen::VectorXd::Zero(18);

        Eigen::Vector3d pos_err = pos - t.position.col(b);
        terms.pos += wts.pos * pos_err.squaredNorm() * inv_b / 3.0;
        d_pos += wts.pos * 2.0 * pos_err * inv_b / 3.0;

        double overlap = q_hat.dot(t.quat.col(b));
        terms.quat += wts.quat * (1.0 - std::abs(overlap)) * inv_b;
        d_q -= wts.quat * (overlap >= 0 ? 1.0 : -1.0) * t.quat.col(b) * inv_b;

        Eigen::VectorXd tx_err = tx - t.tx.col(b);
        terms.tx += wts.tx * tx_err.squaredNorm() * inv_b / 18.0;
        d_tx += wts.tx * 2.0 * tx_err * inv_b / 18.0;

        Eigen::Vector3d pos_phys = pos.cwiseProduct(ctx.pos_std) + ctx.pos_mean;
        double prior = t.distance_prior(b);
        if (!std::isnan(prior) && wts.phys > 0.0)
        {
            double rho = pos_phys.norm();
            double res = (rho - prior) / ctx.phys_scale;
            terms.phys += wts.phys * res * res * inv_prior;
            if (rho > 0.0)
            {
                d_pos_phys += wts.phys * 2.0 * res / ctx.phys_scale * inv_prior * pos_phys / rho;
            }
        }

        if (wts.consist > 0.0)
        {
            Eigen::Matrix3d rot = rotation_matrix(q_hat);
            Eigen::Matrix3d d_rot = Eigen::Matrix3d::Zero();
            for (Eigen::Index k = 0; k < 6; ++k)
            {
                Eigen::Index axis = k / 2;
                double sign = (k % 2 == 0) ? 1.0 : -1.0;
                Eigen::Vector3d tip = pos_phys + sign * ctx.arm * rot.col(axis);
                Eigen::Vector3d tip_std = (tip - ctx.tx_mean.segment<3>(3 * k))
                                              .cwiseQuotient(ctx.tx_std.segment<3>(3 * k));
                Eigen::Vector3d gap = tx.segment<3>(3 * k) - tip_std;
                terms.consist += wts.consist * gap.squaredNorm() * inv_b / 18.0;
                Eigen::Vector3d d_gap = wts.consist * 2.0 * gap * inv_b / 18.0;
                d_tx.segment<3>(3 * k) += d_gap;
                Eigen::Vector3d d_tip = -d_gap.cwiseQuotient(ctx.tx_std.segment<3>(3 * k));
                d_pos_phys += d_tip;
                d_rot.col(axis) += sign * ctx.arm * d_tip;
            }
            d_q += rotation_pullback(q_hat, d_rot);
        }

        if (d_out)
        {
            d_pos += d_pos_phys.cwiseProduct(ctx.pos_std);
            Eigen::Vector4d d_raw = Eigen::Vector4d::Zero();
            if (!degenerate)
            {
                d_raw = (d_q - q_hat * q_hat.dot(d_q)) / raw_norm;
            }
            d_out->col(b).segment<3>(output_slot::kPosition) = d_pos;
            d_out->col(b).segment<4>(output_slot::kQuat) = d_raw;
            d_out->col(b).segment(output_slot::kTx, 18) = d_tx;
        }
    }
    return terms;
}

LossTerms batch_loss(ModelParams const& params, Eigen::MatrixXd const& inputs,
                     TargetBatch const& targets, LossContext const& ctx,
                     LossWeights const& weights, Eigen::VectorXd* grad,
                     std::optional<LossNorm> norm)
{
    auto cache = forward(params, inputs);
    if (!grad)
    {
        return output_loss(cache.out, targets, ctx, weights, nullptr, norm);
    }
    Eigen::MatrixXd d_out;
    auto terms = output_loss(cache.out, targets, ctx, weights, &d_out, norm);
    backward(params, cache, d_out, *grad);
    return terms;
}

}  // namespace mcvd

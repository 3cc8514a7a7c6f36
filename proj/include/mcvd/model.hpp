#pragma once

#include <cstddef>
#include <cstdint>

#include <Eigen/Dense>
#include <nlohmann/json_fwd.hpp>

namespace mcvd {

/// Layer sizes of the attention-pooled regressor.
struct Architecture
{
    int n_tokens = 6;
    int token_dim = 32;
    int embed = 64;
    int attn = 64;
    int hidden1 = 128;
    int hidden2 = 128;
    int outputs = 25;

    [[nodiscard]] std::size_t parameter_count() const;

    friend bool operator==(Architecture const&, Architecture const&) = default;
};

/// Output slots: [0, 3) position, [3, 7) quaternion, [7, 25) transmitters.
namespace output_slot {
inline constexpr Eigen::Index kPosition = 0;
inline constexpr Eigen::Index kQuat = 3;
inline constexpr Eigen::Index kTx = 7;
}  // namespace output_slot

/// Mutable views of every tensor inside a flat parameter (or gradient)
/// vector laid out for `arch`.
struct ParamViews
{
    using Mat = Eigen::Map<Eigen::MatrixXd>;
    using Vec = Eigen::Map<Eigen::VectorXd>;

    Mat embed_w;     ///< embed x token_dim
    Vec embed_b;     ///< embed
    Mat token_bias;  ///< embed x n_tokens, learned per-slot offset
    Mat attn_w;      ///< attn x embed
    Vec query;       ///< attn
    Mat w1;          ///< hidden1 x embed
    Vec b1;
    Mat w2;          ///< hidden2 x hidden1
    Vec b2;
    Mat w3;          ///< outputs x hidden2
    Vec b3;
};

ParamViews make_views(Architecture const& arch, double* data);

class ModelParams
{
  public:
    explicit ModelParams(Architecture const& arch = {});

    /// He-style Gaussian initialization from `seed`; biases start at zero
    /// except the quaternion slots, which start at the identity rotation.
    static ModelParams initialized(Architecture const& arch, std::uint64_t seed);

    [[nodiscard]] Architecture const& arch() const { return arch_; }
    [[nodiscard]] Eigen::VectorXd& values() { return values_; }
    [[nodiscard]] Eigen::VectorXd const& values() const { return values_; }
    [[nodiscard]] ParamViews views() { return make_views(arch_, values_.data()); }
    /// Views into a const model; do not write through them.
    [[nodiscard]] ParamViews views() const
    {
        return make_views(arch_, const_cast<double*>(values_.data()));
    }

    [[nodiscard]] bool all_finite() const { return values_.allFinite(); }

  private:
    Architecture arch_;
    Eigen::VectorXd values_;
};

void to_json(nlohmann::json& j, Architecture const& a);
void from_json(nlohmann::json const& j, Architecture& a);
void to_json(nlohmann::json& j, ModelParams const& p);
ModelParams params_from_json(nlohmann::json const& j);

/// Softmax-weighted pooling of token embeddings (columns of `embeddings`).
struct Pooled
{
    Eigen::VectorXd weights;  ///< softmax(scores)
    Eigen::VectorXd pooled;   ///< embeddings * weights
};
Pooled attention_pool(Eigen::MatrixXd const& embeddings, Eigen::VectorXd const& scores);

/// Activations kept for the backward pass. Columns index samples (or
/// tokens, sample-major, for the per-token tensors).
struct ForwardCache
{
    Eigen::MatrixXd tokens;     ///< token_dim x (B * n_tokens)
    Eigen::MatrixXd embed_pre;  ///< embed x (B * n_tokens)
    Eigen::MatrixXd embed;      ///< relu(embed_pre)
    Eigen::MatrixXd attn_act;   ///< tanh(attn_w * embed)
    Eigen::MatrixXd alpha;      ///< n_tokens x B
    Eigen::MatrixXd pooled;     ///< embed x B
    Eigen::MatrixXd z1, h1, z2, h2;
    Eigen::MatrixXd out;        ///< outputs x B, quaternion slots raw
};

/// Forward pass on standardized inputs, one row of 192 features per sample.
/// Throws NumericError naming the first layer with non-finite activations.
ForwardCache forward(ModelParams const& params, Eigen::MatrixXd const& inputs);

/// Accumulates parameter gradients into `grad` given dLoss/dOut (outputs x B,
/// with respect to the raw output including the unnormalized quaternion).
void backward(ModelParams const& params, ForwardCache const& cache,
              Eigen::MatrixXd const& d_out, Eigen::VectorXd& grad);

/// Unit quaternion from raw slots; identity when the norm is below 1e-8.
Eigen::Vector4d normalize_quaternion(Eigen::Vector4d const& raw);

/// Decoded network outputs for one sample batch.
struct Prediction
{
    Eigen::MatrixXd position;   ///< 3 x B, standardized
    Eigen::MatrixXd quat;       ///< 4 x B, unit norm
    Eigen::MatrixXd tx;         ///< 18 x B, standardized
    Eigen::MatrixXd attention;  ///< n_tokens x B
};

Prediction decode(ForwardCache const& cache);

}  // namespace mcvd

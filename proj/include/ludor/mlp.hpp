#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <string>
#include <vector>

#include "ludor/rng.hpp"

namespace ludor {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

enum class Activation { relu, tanh, identity };

std::string to_string(Activation a);
Activation activation_from_string(const std::string& name);

struct Layer {
    Mat weight;  // [out x in]
    Vec bias;    // [out]
    Activation activation = Activation::identity;
};

/// Dense feed-forward network. Samples are columns. The last layer's
/// activation output is multiplied by `output_scale` (tanh squash scaled to
/// an action bound for actors; 1 otherwise).
struct MlpParams {
    std::vector<Layer> layers;
    double output_scale = 1.0;

    std::size_t in_dim() const;
    std::size_t out_dim() const;
    std::size_t param_count() const;

    /// Per layer: weight in column-major order, then bias.
    Vec flatten() const;
    void assign_flat(const Vec& flat);

    /// Throws ConfigError when layer dimensions do not chain or entries are non-finite.
    void validate() const;

    bool same_shape(const MlpParams& other) const;
};

struct MlpArch {
    std::vector<std::size_t> sizes;  // in, hidden..., out
    Activation hidden = Activation::relu;
    Activation output = Activation::identity;
    double output_scale = 1.0;
};

/// Weights and biases uniform in +-1/sqrt(fan_in).
MlpParams make_mlp(const MlpArch& arch, Rng& rng);
MlpArch arch_of(const MlpParams& params);

struct MlpCache {
    std::vector<Mat> inputs;   // input to each layer
    std::vector<Mat> outputs;  // post-activation output of each layer, before output_scale
    std::size_t param_count = 0;
};

struct ForwardResult {
    Mat output;
    MlpCache cache;
};

struct Gradients {
    Vec params;  // same layout as MlpParams::flatten
    Mat input;   // dL/d(input), same shape as the forward input
};

ForwardResult mlp_forward(const MlpParams& params, const Mat& input);
Vec mlp_forward(const MlpParams& params, const Vec& input, MlpCache* cache);
/// Forward pass without keeping a cache.
Mat mlp_predict(const MlpParams& params, const Mat& input);
Vec mlp_predict(const MlpParams& params, const Vec& input);

/// Backpropagates `output_grad` (dL/d(output), same shape as the forward
/// output) through the network. Batch contributions are summed.
Gradients mlp_backward(const MlpParams& params, const MlpCache& cache, const Mat& output_grad);

/// alpha * student + (1 - alpha) * teacher, coordinate-wise.
MlpParams ema_blend(const MlpParams& student, const MlpParams& teacher, double alpha);
/// In-place form: target <- alpha * target + (1 - alpha) * source.
void ema_blend_into(MlpParams& target, const MlpParams& source, double alpha);

}  // namespace ludor

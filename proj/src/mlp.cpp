#include "ludor/mlp.hpp"

#include <cmath>

#include "ludor/error.hpp"

namespace ludor {

std::string to_string(Activation a) {
    switch (a) {
        case Activation::relu:
            return "relu";
        case Activation::tanh:
            return "tanh";
        case Activation::identity:
            return "identity";
    }
    return "identity";
}

Activation activation_from_string(const std::string& name) {
    if (name == "relu") return Activation::relu;
    if (name == "tanh") return Activation::tanh;
    if (name == "identity") return Activation::identity;
    throw ConfigError("unknown activation '" + name + "'");
}

std::size_t MlpParams::in_dim() const { return layers.empty() ? 0 : static_cast<std::size_t>(layers.front().weight.cols()); }

std::size_t MlpParams::out_dim() const { return layers.empty() ? 0 : static_cast<std::size_t>(layers.back().weight.rows()); }

std::size_t MlpParams::param_count() const {
    std::size_t n = 0;
    for (const auto& l : layers) {
        n += static_cast<std::size_t>(l.weight.size() + l.bias.size());
    }
    return n;
}

Vec MlpParams::flatten() const {
    Vec flat(static_cast<Eigen::Index>(param_count()));
    Eigen::Index off = 0;
    for (const auto& l : layers) {
        flat.segment(off, l.weight.size()) = Eigen::Map<const Vec>(l.weight.data(), l.weight.size());
        off += l.weight.size();
        flat.segment(off, l.bias.size()) = l.bias;
        off += l.bias.size();
    }
    return flat;
}

void MlpParams::assign_flat(const Vec& flat) {
    if (static_cast<std::size_t>(flat.size()) != param_count()) {
        throw ConfigError("flat parameter vector has length " + std::to_string(flat.size()) + ", expected " +
                          std::to_string(param_count()));
    }
    Eigen::Index off = 0;
    for (auto& l : layers) {
        Eigen::Map<Vec>(l.weight.data(), l.weight.size()) = flat.segment(off, l.weight.size());
        off += l.weight.size();
        l.bias = flat.segment(off, l.bias.size());
        off += l.bias.size();
    }
}

void MlpParams::validate() const {
    if (layers.empty()) {
        throw ConfigError("network has no layers");
    }
    for (std::size_t i = 0; i < layers.size(); ++i) {
        const auto& l = layers[i];
        if (l.bias.size() != l.weight.rows()) {
            throw ConfigError("layer " + std::to_string(i) + ": bias length does not match weight rows");
        }
        if (i + 1 < layers.size() && layers[i + 1].weight.cols() != l.weight.rows()) {
            throw ConfigError("layer " + std::to_string(i) + " output does not chain into layer " + std::to_string(i + 1));
        }
        if (!l.weight.allFinite() || !l.bias.allFinite()) {
            throw ConfigError("layer " + std::to_string(i) + " has non-finite entries");
        }
    }
    if (!std::isfinite(output_scale)) {
        throw ConfigError("non-finite output scale");
    }
}

bool MlpParams::same_shape(const MlpParams& other) const {
    if (layers.size() != other.layers.size() || output_scale != other.output_scale) {
        return false;
    }
    for (std::size_t i = 0; i < layers.size(); ++i) {
        const auto& a = layers[i];
        const auto& b = other.layers[i];
        if (a.weight.rows() != b.weight.rows() || a.weight.cols() != b.weight.cols() || a.activation != b.activation) {
            return false;
        }
    }
    return true;
}

MlpParams make_mlp(const MlpArch& arch, Rng& rng) {
    if (arch.sizes.size() < 2) {
        throw ConfigError("architecture needs at least an input and an output size");
    }
    MlpParams p;
    p.output_scale = arch.output_scale;
    for (std::size_t i = 0; i + 1 < arch.sizes.size(); ++i) {
        const auto in = static_cast<Eigen::Index>(arch.sizes[i]);
        const auto out = static_cast<Eigen::Index>(arch.sizes[i + 1]);
        if (in == 0 || out == 0) {
            throw ConfigError("layer sizes must be positive");
        }
        const double bound = 1.0 / std::sqrt(static_cast<double>(in));
        Layer l;
        l.weight.resize(out, in);
        l.bias.resize(out);
        // fixed fill order (column-major, then bias) keeps init reproducible
        for (Eigen::Index c = 0; c < in; ++c) {
            for (Eigen::Index r = 0; r < out; ++r) {
                l.weight(r, c) = rng.uniform(-bound, bound);
            }
        }
        for (Eigen::Index r = 0; r < out; ++r) {
            l.bias(r) = rng.uniform(-bound, bound);
        }
        l.activation = (i + 2 == arch.sizes.size()) ? arch.output : arch.hidden;
        p.layers.push_back(std::move(l));
    }
    return p;
}

MlpArch arch_of(const MlpParams& params) {
    MlpArch a;
    a.output_scale = params.output_scale;
    if (params.layers.empty()) {
        return a;
    }
    a.sizes.push_back(params.in_dim());
    for (const auto& l : params.layers) {
        a.sizes.push_back(static_cast<std::size_t>(l.weight.rows()));
    }
    a.hidden = params.layers.size() > 1 ? params.layers.front().activation : Activation::relu;
    a.output = params.layers.back().activation;
    return a;
}

namespace {

void apply_activation(Mat& z, Activation a) {
    switch (a) {
        case Activation::relu:
            z = z.cwiseMax(0.0);
            break;
        case Activation::tanh:
            z = z.array().tanh().matrix();
            break;
        case Activation::identity:
            break;
    }
}

// Multiplies grad in place by d(activation)/dz, expressed through the post-activation value.
void activation_backward(Mat& grad, const Mat& post, Activation a) {
    switch (a) {
        case Activation::relu:
            grad = (post.array() > 0.0).select(grad, 0.0);
            break;
        case Activation::tanh:
            grad.array() *= (1.0 - post.array().square());
            break;
        case Activation::identity:
            break;
    }
}

void check_input(const MlpParams& params, Eigen::Index rows) {
    if (params.layers.empty()) {
        throw ConfigError("forward pass on an empty network");
    }
    if (static_cast<std::size_t>(rows) != params.in_dim()) {
        throw ConfigError("input has dimension " + std::to_string(rows) + ", network expects " +
                          std::to_string(params.in_dim()));
    }
}

}  // namespace

ForwardResult mlp_forward(const MlpParams& params, const Mat& input) {
    check_input(params, input.rows());
    ForwardResult r;
    r.cache.param_count = params.param_count();
    r.cache.inputs.reserve(params.layers.size());
    r.cache.outputs.reserve(params.layers.size());
    Mat x = input;
    for (const auto& l : params.layers) {
        Mat z = l.weight * x;
        z.colwise() += l.bias;
        apply_activation(z, l.activation);
        r.cache.inputs.push_back(std::move(x));
        x = z;
        r.cache.outputs.push_back(std::move(z));
    }
    r.output = params.output_scale == 1.0 ? x : Mat(params.output_scale * x);
    return r;
}

Vec mlp_forward(const MlpParams& params, const Vec& input, MlpCache* cache) {
    auto r = mlp_forward(params, Mat(input));
    if (cache != nullptr) {
        *cache = std::move(r.cache);
    }
    return r.output.col(0);
}

Mat mlp_predict(const MlpParams& params, const Mat& input) {
    check_input(params, input.rows());
    Mat x = input;
    for (const auto& l : params.layers) {
        Mat z = l.weight * x;
        z.colwise() += l.bias;
        apply_activation(z, l.activation);
        x = std::move(z);
    }
    if (params.output_scale != 1.0) {
        x *= params.output_scale;
    }
    return x;
}

Vec mlp_predict(const MlpParams& params, const Vec& input) { return mlp_predict(params, Mat(input)).col(0); }

Gradients mlp_backward(const MlpParams& params, const MlpCache& cache, const Mat& output_grad) {
    const std::size_t n_layers = params.layers.size();
    if (cache.inputs.size() != n_layers || cache.outputs.size() != n_layers ||
        cache.param_count != params.param_count()) {
        throw InternalError("backward pass with a cache from a different network");
    }
    if (output_grad.rows() != cache.outputs.back().rows() || output_grad.cols() != cache.outputs.back().cols()) {
        throw InternalError("output gradient shape does not match cached forward output");
    }
    for (std::size_t i = 0; i < n_layers; ++i) {
        if (cache.inputs[i].rows() != params.layers[i].weight.cols() ||
            cache.outputs[i].rows() != params.layers[i].weight.rows()) {
            throw InternalError("stale cache: layer " + std::to_string(i) + " shape changed since forward pass");
        }
    }

    Gradients g;
    g.params.resize(static_cast<Eigen::Index>(params.param_count()));
    // offsets of each layer's block in the flat layout
    std::vector<Eigen::Index> offsets(n_layers);
    Eigen::Index off = 0;
    for (std::size_t i = 0; i < n_layers; ++i) {
        offsets[i] = off;
        off += params.layers[i].weight.size() + params.layers[i].bias.size();
    }

    Mat delta = params.output_scale == 1.0 ? output_grad : Mat(params.output_scale * output_grad);
    for (std::size_t k = n_layers; k-- > 0;) {
        const auto& l = params.layers[k];
        activation_backward(delta, cache.outputs[k], l.activation);
        Eigen::Map<Mat> dw(g.params.data() + offsets[k], l.weight.rows(), l.weight.cols());
        dw.noalias() = delta * cache.inputs[k].transpose();
        g.params.segment(offsets[k] + l.weight.size(), l.bias.size()) = delta.rowwise().sum();
        Mat next = l.weight.transpose() * delta;
        delta = std::move(next);
    }
    g.input = std::move(delta);
    return g;
}

MlpParams ema_blend(const MlpParams& student, const MlpParams& teacher, double alpha) {
    MlpParams out = student;
    ema_blend_into(out, teacher, alpha);
    return out;
}

void ema_blend_into(MlpParams& target, const MlpParams& source, double alpha) {
    if (!target.same_shape(source)) {
        throw ConfigError("ema_blend: networks have different shapes");
    }
    if (!(alpha >= 0.0 && alpha <= 1.0)) {
        throw ConfigError("ema_blend: alpha must lie in [0, 1]");
    }
    const double beta = 1.0 - alpha;
    for (std::size_t i = 0; i < target.layers.size(); ++i) {
        auto& t = target.layers[i];
        const auto& s = source.layers[i];
        t.weight = alpha * t.weight + beta * s.weight;
        t.bias = alpha * t.bias + beta * s.bias;
    }
}

}  // namespace ludor

#pragma once

#include "panorad/random.hpp"
#include "panorad/tensor.hpp"

#include <cmath>
#include <string>
#include <vector>

namespace panorad::nn {

template <typename Scalar>
struct NamedParameter {
    std::string name;
    TensorT<Scalar> tensor;
};

template <typename Scalar>
using ParameterList = std::vector<NamedParameter<Scalar>>;

template <typename Scalar>
Eigen::Index parameter_count(const ParameterList<Scalar>& params) {
    Eigen::Index n = 0;
    for (const auto& p : params) {
        n += p.tensor.numel();
    }
    return n;
}

template <typename Scalar>
void zero_grad(const ParameterList<Scalar>& params) {
    for (auto p : params) {
        p.tensor.zero_grad();
    }
}

/// Copies parameter values between models of possibly different scalar
/// types; lists must agree in names and sizes.
template <typename To, typename From>
void copy_parameters(const ParameterList<To>& dst, const ParameterList<From>& src) {
    if (dst.size() != src.size()) {
        throw ShapeError("copy_parameters: parameter count mismatch");
    }
    for (std::size_t i = 0; i < dst.size(); ++i) {
        if (dst[i].name != src[i].name || dst[i].tensor.shape() != src[i].tensor.shape()) {
            throw ShapeError("copy_parameters: mismatch at '" + dst[i].name + "'");
        }
        auto t = dst[i].tensor;
        t.mutable_value() = src[i].tensor.value().template cast<To>();
    }
}

/// Convolution layer with He-style initialisation for leaky-ReLU(0.2).
template <typename Scalar>
struct Conv2d {
    TensorT<Scalar> weight;
    TensorT<Scalar> bias;
    int stride = 1;
    int pad_v = 0;

    Conv2d() = default;

    Conv2d(int in_channels, int out_channels, int kernel, int stride_, CounterRng rng)
        : stride(stride_), pad_v(kernel / 2) {
        const int fan_in = in_channels * kernel * kernel;
        const double std_dev = std::sqrt(2.0 / (1.0 + 0.04) / fan_in);
        typename Node<Scalar>::Array w(Eigen::Index(out_channels) * fan_in);
        for (Eigen::Index i = 0; i < w.size(); ++i) {
            w[i] = static_cast<Scalar>(std_dev * rng.normal());
        }
        weight = TensorT<Scalar>::parameter({out_channels, in_channels, kernel, kernel}, std::move(w));
        bias = TensorT<Scalar>::parameter({out_channels},
                                          Node<Scalar>::Array::Zero(out_channels));
    }

    TensorT<Scalar> operator()(const TensorT<Scalar>& x) const {
        return conv2d(x, weight, bias, stride, pad_v);
    }

    /// Nearest 2x upsampling then this convolution (stride must be 1).
    TensorT<Scalar> up(const TensorT<Scalar>& x) const {
        return upsample_conv(x, weight, bias, pad_v);
    }

    void collect(ParameterList<Scalar>& out, const std::string& prefix) const {
        out.push_back({prefix + ".weight", weight});
        out.push_back({prefix + ".bias", bias});
    }
};

struct AdamConfig {
    double lr = 2e-4;
    double beta1 = 0.5;
    double beta2 = 0.999;
    double eps = 1e-8;
};

template <typename Scalar>
struct AdamMoments {
    typename Node<Scalar>::Array m;
    typename Node<Scalar>::Array v;
    long step = 0;
};

/// One bias-corrected adaptive-moment update of `param` in place.
template <typename Scalar>
void adam_step(typename Node<Scalar>::Array& param, const typename Node<Scalar>::Array& grad,
               AdamMoments<Scalar>& state, const AdamConfig& cfg) {
    if (grad.size() != param.size()) {
        throw ShapeError("adam_step: gradient size " + std::to_string(grad.size()) +
                         " does not match parameter size " + std::to_string(param.size()));
    }
    if (state.m.size() == 0) {
        state.m = Node<Scalar>::Array::Zero(param.size());
        state.v = Node<Scalar>::Array::Zero(param.size());
    } else if (state.m.size() != param.size()) {
        throw ShapeError("adam_step: optimiser state size mismatch");
    }
    ++state.step;
    const auto b1 = static_cast<Scalar>(cfg.beta1);
    const auto b2 = static_cast<Scalar>(cfg.beta2);
    state.m = b1 * state.m + (Scalar(1) - b1) * grad;
    state.v = b2 * state.v + (Scalar(1) - b2) * grad.square();
    const double c1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.step));
    const double c2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.step));
    const auto step = static_cast<Scalar>(cfg.lr / c1);
    const auto root_c2 = static_cast<Scalar>(std::sqrt(c2));
    const auto eps = static_cast<Scalar>(cfg.eps);
    param -= step * state.m / (state.v.sqrt() / root_c2 + eps);
}

/// Adam over a whole parameter list, reading each tensor's gradient.
template <typename Scalar>
class Adam {
public:
    Adam(ParameterList<Scalar> params, AdamConfig cfg)
        : params_(std::move(params)), cfg_(cfg), state_(params_.size()) {}

    void step() {
        for (std::size_t i = 0; i < params_.size(); ++i) {
            auto t = params_[i].tensor;
            adam_step<Scalar>(t.mutable_value(), t.grad(), state_[i], cfg_);
        }
    }

    void zero_grad() { nn::zero_grad(params_); }
    const AdamConfig& config() const { return cfg_; }

private:
    ParameterList<Scalar> params_;
    AdamConfig cfg_;
    std::vector<AdamMoments<Scalar>> state_;
};

}  // namespace panorad::nn

#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include "darec/matrix.hpp"
#include "darec/rng.hpp"

namespace darec::nn {

enum class Activation { Sigmoid, Identity, Relu };

// Numerically stable sigmoid, clamped into the open interval (0,1) so the
// strict-range contract survives saturation in double precision.
inline double sigmoid(double z) {
    double s;
    if (z >= 0.0) {
        s = 1.0 / (1.0 + std::exp(-z));
    } else {
        const double e = std::exp(z);
        s = e / (1.0 + e);
    }
    if (s >= 1.0) s = 1.0 - std::numeric_limits<double>::epsilon() / 2;
    if (s <= 0.0) s = std::numeric_limits<double>::denorm_min();
    return s;
}

inline double activate(Activation a, double z) {
    switch (a) {
        case Activation::Sigmoid: return sigmoid(z);
        case Activation::Identity: return z;
        case Activation::Relu: return z > 0.0 ? z : 0.0;
    }
    throw std::logic_error("activate: unknown activation");
}

// Derivative d(out)/d(pre); `out` is the stored post-activation, `pre` the
// stored pre-activation (needed only for relu).
inline double activation_grad(Activation a, double pre, double out) {
    switch (a) {
        case Activation::Sigmoid: return out * (1.0 - out);
        case Activation::Identity: return 1.0;
        case Activation::Relu: return pre > 0.0 ? 1.0 : 0.0;
    }
    throw std::logic_error("activation_grad: unknown activation");
}

inline const char* activation_name(Activation a) {
    switch (a) {
        case Activation::Sigmoid: return "sigmoid";
        case Activation::Identity: return "identity";
        case Activation::Relu: return "relu";
    }
    return "?";
}

inline Activation activation_from_name(const std::string& s) {
    if (s == "sigmoid") return Activation::Sigmoid;
    if (s == "identity") return Activation::Identity;
    if (s == "relu") return Activation::Relu;
    throw std::invalid_argument("unknown activation: " + s);
}

// A value with a gradient of the same shape.
struct ParamTensor {
    DenseMatrix value;
    DenseMatrix grad;

    ParamTensor() = default;
    explicit ParamTensor(DenseMatrix v)
        : value(std::move(v)), grad(value.rows, value.cols) {}

    void zero_grad() { grad.fill(0.0); }
};

// Entries drawn i.i.d. from normal(0, std^2); std = 0 yields an exact zero
// matrix (used for bias init).
inline DenseMatrix init_normal(std::size_t rows, std::size_t cols, double stddev,
                               std::uint64_t seed) {
    if (stddev < 0.0) throw std::invalid_argument("init_normal: negative stddev");
    DenseMatrix m(rows, cols);
    if (stddev == 0.0) return m;
    auto eng = make_engine(seed);
    std::normal_distribution<double> dist(0.0, stddev);
    for (double& v : m.data) v = dist(eng);
    return m;
}

struct Layer {
    ParamTensor weight;  // out x in
    ParamTensor bias;    // 1 x out
    Activation act = Activation::Sigmoid;

    std::size_t in_size() const { return weight.value.cols; }
    std::size_t out_size() const { return weight.value.rows; }
};

// Plain feed-forward stack of affine + activation layers.
struct MLP {
    std::vector<Layer> layers;

    struct Cache {
        std::vector<Vector> inputs;  // x fed to each layer
        std::vector<Vector> pre;     // z = W x + b
        std::vector<Vector> post;    // a = act(z)
    };

    void add_layer(DenseMatrix w, DenseMatrix b, Activation act) {
        if (b.rows != 1 || b.cols != w.rows)
            throw std::invalid_argument("MLP::add_layer: bias must be 1 x out");
        if (!layers.empty() && layers.back().out_size() != w.cols)
            throw std::invalid_argument(
                "MLP::add_layer: layer input " + std::to_string(w.cols) +
                " does not chain with previous output " +
                std::to_string(layers.back().out_size()));
        Layer l;
        l.weight = ParamTensor(std::move(w));
        l.bias = ParamTensor(std::move(b));
        l.act = act;
        layers.push_back(std::move(l));
    }

    std::size_t input_size() const {
        if (layers.empty()) throw std::logic_error("MLP: empty network");
        return layers.front().in_size();
    }
    std::size_t output_size() const {
        if (layers.empty()) throw std::logic_error("MLP: empty network");
        return layers.back().out_size();
    }

    Vector forward(const Vector& x, Cache* cache = nullptr) const {
        check_length(x, input_size(), "MLP::forward");
        Vector a = x;
        if (cache) {
            cache->inputs.clear();
            cache->pre.clear();
            cache->post.clear();
        }
        for (const Layer& l : layers) {
            Vector z = matvec(l.weight.value, a);
            for (std::size_t i = 0; i < z.size(); ++i) z[i] += l.bias.value(0, i);
            Vector out(z.size());
            for (std::size_t i = 0; i < z.size(); ++i) out[i] = activate(l.act, z[i]);
            if (cache) {
                cache->inputs.push_back(std::move(a));
                cache->pre.push_back(std::move(z));
                cache->post.push_back(out);
            }
            a = std::move(out);
        }
        return a;
    }

    // Accumulates parameter gradients into each ParamTensor.grad and returns
    // the gradient w.r.t. the network input.
    Vector backward(const Cache& cache, Vector d_out) {
        if (cache.inputs.size() != layers.size())
            throw std::invalid_argument("MLP::backward: cache does not match network");
        check_length(d_out, output_size(), "MLP::backward");
        // Fold the last activation, then reuse the shared pre-activation path.
        const std::size_t last = layers.size() - 1;
        for (std::size_t i = 0; i < d_out.size(); ++i)
            d_out[i] *= activation_grad(layers[last].act, cache.pre[last][i],
                                        cache.post[last][i]);
        return backward_from_pre(cache, std::move(d_out));
    }

    // Same as backward(), but the upstream gradient is w.r.t. the final
    // pre-activation (used for fused sigmoid+BCE gradients).
    Vector backward_from_pre(const Cache& cache, Vector d_pre) {
        if (cache.inputs.size() != layers.size())
            throw std::invalid_argument("MLP::backward_from_pre: cache mismatch");
        check_length(d_pre, output_size(), "MLP::backward_from_pre");
        for (std::size_t li = layers.size(); li-- > 0;) {
            Layer& l = layers[li];
            if (li + 1 != layers.size()) {
                // d_pre currently holds d(post) of this layer; fold activation.
                for (std::size_t i = 0; i < d_pre.size(); ++i)
                    d_pre[i] *= activation_grad(l.act, cache.pre[li][i], cache.post[li][i]);
            }
            add_outer(l.weight.grad, d_pre, cache.inputs[li]);
            for (std::size_t i = 0; i < d_pre.size(); ++i) l.bias.grad(0, i) += d_pre[i];
            d_pre = matvec_transposed(l.weight.value, d_pre);
        }
        return d_pre;
    }

    std::vector<ParamTensor*> parameters() {
        std::vector<ParamTensor*> ps;
        ps.reserve(layers.size() * 2);
        for (Layer& l : layers) {
            ps.push_back(&l.weight);
            ps.push_back(&l.bias);
        }
        return ps;
    }

    void zero_grads() {
        for (Layer& l : layers) {
            l.weight.zero_grad();
            l.bias.zero_grad();
        }
    }

    double squared_param_norm() const {
        double s = 0.0;
        for (const Layer& l : layers)
            s += squared_norm(l.weight.value) + squared_norm(l.bias.value);
        return s;
    }

    // grad += 2 * lambda * value, the gradient of lambda * ||theta||^2.
    void add_regularizer_gradient(double lambda) {
        if (lambda == 0.0) return;
        for (Layer& l : layers) {
            for (std::size_t i = 0; i < l.weight.value.size(); ++i)
                l.weight.grad.data[i] += 2.0 * lambda * l.weight.value.data[i];
            for (std::size_t i = 0; i < l.bias.value.size(); ++i)
                l.bias.grad.data[i] += 2.0 * lambda * l.bias.value.data[i];
        }
    }
};

// Weights ~ normal(0, std^2), biases zero. Widths chain through `dims`.
inline MLP make_mlp(const std::vector<std::size_t>& dims,
                    const std::vector<Activation>& acts, double init_std,
                    std::uint64_t seed) {
    if (dims.size() < 2) throw std::invalid_argument("make_mlp: need at least one layer");
    if (acts.size() != dims.size() - 1)
        throw std::invalid_argument("make_mlp: one activation per layer required");
    MLP net;
    for (std::size_t li = 0; li + 1 < dims.size(); ++li) {
        DenseMatrix w = init_normal(dims[li + 1], dims[li], init_std,
                                    splitmix64(seed + li));
        DenseMatrix b(1, dims[li + 1]);
        net.add_layer(std::move(w), std::move(b), acts[li]);
    }
    return net;
}

struct AdamState {
    double lr = 0.001;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    long t = 0;
    std::vector<DenseMatrix> m;
    std::vector<DenseMatrix> v;

    AdamState() = default;
    explicit AdamState(const std::vector<ParamTensor*>& params, double lr_ = 0.001,
                       double b1 = 0.9, double b2 = 0.999, double eps_ = 1e-8)
        : lr(lr_), beta1(b1), beta2(b2), eps(eps_) {
        for (const ParamTensor* p : params) {
            m.emplace_back(p->value.rows, p->value.cols);
            v.emplace_back(p->value.rows, p->value.cols);
        }
    }
};

// Standard Adam with bias correction. Gradients are left intact; the caller
// zeroes them at the start of the next batch.
inline void adam_step(const std::vector<ParamTensor*>& params, AdamState& st) {
    if (params.size() != st.m.size())
        throw std::invalid_argument("adam_step: state does not match parameter set");
    st.t += 1;
    const double bc1 = 1.0 - std::pow(st.beta1, static_cast<double>(st.t));
    const double bc2 = 1.0 - std::pow(st.beta2, static_cast<double>(st.t));
    for (std::size_t pi = 0; pi < params.size(); ++pi) {
        ParamTensor& p = *params[pi];
        if (!p.value.same_shape(st.m[pi]))
            throw std::invalid_argument("adam_step: shape mismatch");
        for (std::size_t i = 0; i < p.value.size(); ++i) {
            const double g = p.grad.data[i];
            double& mi = st.m[pi].data[i];
            double& vi = st.v[pi].data[i];
            mi = st.beta1 * mi + (1.0 - st.beta1) * g;
            vi = st.beta2 * vi + (1.0 - st.beta2) * g * g;
            const double mhat = mi / bc1;
            const double vhat = vi / bc2;
            p.value.data[i] -= st.lr * mhat / (std::sqrt(vhat) + st.eps);
        }
    }
}

// Central-difference check of the analytic gradients already stored in
// `params`. `loss` re-evaluates the scalar with the current parameter values.
// Returns max over coordinates of |analytic - numeric| / max(|a|, |n|, 1e-8).
inline double grad_check(const std::function<double()>& loss,
                         const std::vector<ParamTensor*>& params, double h) {
    if (h <= 0.0) throw std::invalid_argument("grad_check: h must be positive");
    double max_err = 0.0;
    for (ParamTensor* p : params) {
        for (std::size_t i = 0; i < p->value.size(); ++i) {
            const double saved = p->value.data[i];
            p->value.data[i] = saved + h;
            const double up = loss();
            p->value.data[i] = saved - h;
            const double down = loss();
            p->value.data[i] = saved;
            if (!std::isfinite(up) || !std::isfinite(down))
                throw std::runtime_error("grad_check: non-finite loss");
            const double numeric = (up - down) / (2.0 * h);
            const double analytic = p->grad.data[i];
            const double denom =
                std::max({std::abs(analytic), std::abs(numeric), 1e-8});
            max_err = std::max(max_err, std::abs(analytic - numeric) / denom);
        }
    }
    return max_err;
}

}  // namespace darec::nn

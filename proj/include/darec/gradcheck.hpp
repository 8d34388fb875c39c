#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "darec/autorec.hpp"
#include "darec/darec.hpp"
#include "darec/nn.hpp"
#include "darec/ratings.hpp"

namespace darec::check {

// Finite-difference and reference-oracle verification of every loss gradient
// the trainers use. All instances are small random networks; `corruption`,
// when nonzero, is added to one analytic gradient as a negative control.

struct RandomInstance {
    std::size_t input_dim;
    std::size_t k;
    std::vector<data::MaskedVector> batch;
};

inline data::MaskedVector random_masked_vector(std::size_t dim, std::mt19937_64& eng) {
    std::uniform_real_distribution<double> rating(1.0, 5.0);
    std::bernoulli_distribution observed(0.5);
    data::MaskedVector mv;
    mv.values.assign(dim, 0.0);
    mv.mask.assign(dim, 0);
    bool any = false;
    for (std::size_t i = 0; i < dim; ++i) {
        if (observed(eng)) {
            mv.values[i] = rating(eng);
            mv.mask[i] = 1;
            any = true;
        }
    }
    if (!any) {
        mv.values[0] = rating(eng);
        mv.mask[0] = 1;
    }
    return mv;
}

// Eq.-2-style loss: masked reconstruction + alpha regularizer.
inline double gradcheck_autorec(std::uint64_t seed, double h = 1e-5,
                                double corruption = 0.0) {
    auto eng = nn::make_engine(nn::splitmix64(seed ^ 0xA0));
    std::uniform_int_distribution<std::size_t> dim_dist(4, 20), k_dist(2, 16),
        batch_dist(1, 4);
    const std::size_t dim = dim_dist(eng);
    const std::size_t k = k_dist(eng);
    const double alpha = 0.05;
    AutoRecParams p = make_autorec(dim, k, nn::splitmix64(seed ^ 0xA1), 0.3);
    std::vector<data::MaskedVector> batch;
    const std::size_t batch_size = batch_dist(eng);
    for (std::size_t i = 0; i < batch_size; ++i) batch.push_back(random_masked_vector(dim, eng));

    p.net.zero_grads();
    autorec_loss_and_grad(p, batch, alpha);
    auto params = p.net.parameters();
    if (corruption != 0.0) params.front()->grad.data[0] += corruption;
    return nn::grad_check([&] { return autorec_loss(p, batch, alpha); }, params, h);
}

namespace detail {

inline Sample random_sample(std::size_t k, std::size_t dim, Domain domain,
                            std::mt19937_64& eng) {
    Sample s;
    s.domain = domain;
    std::uniform_real_distribution<double> emb(-1.0, 1.0);
    s.embedding.resize(k);
    for (double& v : s.embedding) v = emb(eng);
    s.raw = random_masked_vector(dim, eng);
    return s;
}

struct DARecInstance {
    DARecParams params;
    std::vector<Sample> batch;
    LossWeights weights;
};

inline DARecInstance random_darec_instance(Variant variant, std::uint64_t seed) {
    auto eng = nn::make_engine(nn::splitmix64(seed ^ 0xD0));
    std::uniform_int_distribution<std::size_t> k_dist(2, 16), dim_dist(3, 20), w_dist(3, 12);
    const std::size_t k = k_dist(eng);
    const std::size_t out_src = dim_dist(eng);
    const std::size_t out_tgt = dim_dist(eng);
    DARecInstance inst;
    inst.weights = {0.7, 0.9, 0.02};
    inst.params = make_darec(k, w_dist(eng), out_src, out_tgt, variant, inst.weights.mu,
                             nn::splitmix64(seed ^ 0xD1), 0.3);
    inst.batch.push_back(random_sample(k, out_src, Domain::Source, eng));
    inst.batch.push_back(random_sample(k, out_tgt, Domain::Target, eng));
    inst.batch.push_back(random_sample(k, out_src, Domain::Source, eng));
    return inst;
}

// Batch loss with a sign knob on the classifier term: +mu, -mu or +1 weight.
enum class ClsTerm { PlusMu, MinusMu, PlusOne };

inline double darec_batch_scalar(const DARecInstance& inst, ClsTerm term) {
    double total = 0.0;
    for (const Sample& s : inst.batch) {
        const DARecOutputs out = darec_forward(inst.params, s);
        const double w_pred = s.domain == Domain::Source ? 1.0 : inst.weights.beta;
        total += w_pred * predictor_term(out, s);
        const double b = bce(out.c_hat, s.label());
        switch (term) {
            case ClsTerm::PlusMu: total += inst.weights.mu * b; break;
            case ClsTerm::MinusMu: total -= inst.weights.mu * b; break;
            case ClsTerm::PlusOne: total += b; break;
        }
    }
    return total + inst.weights.lambda * inst.params.squared_param_norm();
}

inline void accumulate_batch_grads(DARecInstance& inst, Variant variant) {
    inst.params.zero_grads();
    for (const Sample& s : inst.batch)
        darec_sample_backward(inst.params, s, inst.weights, variant);
    inst.params.add_regularizer_gradient(inst.weights.lambda);
}

}  // namespace detail

struct DARecGradErrors {
    double predictor_and_classifier = 0.0;  // heads + classifier blocks
    double extractor = 0.0;

    double max() const { return std::max(predictor_and_classifier, extractor); }
};

// U-DARec gradients against the two player objectives realized by the GRL:
// heads and classifier descend  pred + BCE + lambda R,
// the extractor descends        pred - mu BCE + lambda R.
inline DARecGradErrors gradcheck_udarec(std::uint64_t seed, double h = 1e-5,
                                        double corruption = 0.0) {
    auto inst = detail::random_darec_instance(Variant::U, seed);
    detail::accumulate_batch_grads(inst, Variant::U);
    if (corruption != 0.0)
        inst.params.extractor.layers[0].weight.grad.data[0] += corruption;

    std::vector<nn::ParamTensor*> descent_block;
    for (nn::MLP* net : {&inst.params.head_source, &inst.params.head_target,
                         &inst.params.classifier})
        for (nn::ParamTensor* p : net->parameters()) descent_block.push_back(p);
    DARecGradErrors errs;
    errs.predictor_and_classifier = nn::grad_check(
        [&] { return detail::darec_batch_scalar(inst, detail::ClsTerm::PlusOne); },
        descent_block, h);
    errs.extractor = nn::grad_check(
        [&] { return detail::darec_batch_scalar(inst, detail::ClsTerm::MinusMu); },
        inst.params.extractor.parameters(), h);
    return errs;
}

// I-DARec: one jointly minimized scalar, pred + mu BCE + lambda R.
inline double gradcheck_idarec(std::uint64_t seed, double h = 1e-5, double corruption = 0.0) {
    auto inst = detail::random_darec_instance(Variant::I, seed);
    detail::accumulate_batch_grads(inst, Variant::I);
    if (corruption != 0.0)
        inst.params.classifier.layers[0].weight.grad.data[0] += corruption;
    return nn::grad_check(
        [&] { return detail::darec_batch_scalar(inst, detail::ClsTerm::PlusMu); },
        inst.params.parameters(), h);
}

// GRL-free two-pass adversarial reference: the classifier must receive the
// plain BCE gradient, the extractor -mu times the classifier-path gradient,
// with predictor and regularizer contributions unchanged. Returns the max
// absolute difference from the GRL implementation.
inline double grl_oracle_max_abs_diff(std::uint64_t seed, double mu,
                                      double corruption = 0.0) {
    auto inst = detail::random_darec_instance(Variant::U, seed);
    inst.weights.mu = mu;

    detail::accumulate_batch_grads(inst, Variant::U);
    std::vector<nn::DenseMatrix> impl_grads;
    for (nn::ParamTensor* p : inst.params.parameters()) impl_grads.push_back(p->grad);
    if (corruption != 0.0) impl_grads[0].data[0] += corruption;

    // Pass 1: classifier BCE alone, no reversal anywhere.
    DARecParams& P = inst.params;
    P.zero_grads();
    for (const Sample& s : inst.batch) {
        DARecCache cache;
        const DARecOutputs out = darec_forward(P, s, &cache);
        nn::Vector d_cls_in = P.classifier.backward_from_pre(
            cache.classifier, nn::Vector{out.c_hat - s.label()});
        P.extractor.backward(cache.extractor, std::move(d_cls_in));
    }
    std::vector<nn::DenseMatrix> bce_grads;
    for (nn::ParamTensor* p : P.parameters()) bce_grads.push_back(p->grad);

    // Pass 2: predictor term alone.
    P.zero_grads();
    for (const Sample& s : inst.batch) {
        DARecCache cache;
        const DARecOutputs out = darec_forward(P, s, &cache);
        const double w_pred = s.domain == Domain::Source ? 1.0 : inst.weights.beta;
        const nn::Vector& own_y = s.domain == Domain::Source ? out.y_source : out.y_target;
        nn::MLP& own_head = s.domain == Domain::Source ? P.head_source : P.head_target;
        const nn::MLP::Cache& own_cache =
            s.domain == Domain::Source ? cache.head_source : cache.head_target;
        nn::Vector d_head(own_y.size(), 0.0);
        for (std::size_t j = 0; j < own_y.size(); ++j)
            if (s.raw.mask[j]) d_head[j] = 2.0 * w_pred * (own_y[j] - s.raw.values[j]);
        nn::Vector d_feat = own_head.backward(own_cache, std::move(d_head));
        P.extractor.backward(cache.extractor, std::move(d_feat));
    }
    std::vector<nn::DenseMatrix> pred_grads;
    for (nn::ParamTensor* p : P.parameters()) pred_grads.push_back(p->grad);

    // Assemble the reference, block by block.
    const auto params = P.parameters();
    const std::size_t n_extractor = P.extractor.parameters().size();
    const std::size_t n_heads = P.head_source.parameters().size() +
                                P.head_target.parameters().size();
    double max_diff = 0.0;
    for (std::size_t pi = 0; pi < params.size(); ++pi) {
        const bool in_extractor = pi < n_extractor;
        const bool in_classifier = pi >= n_extractor + n_heads;
        for (std::size_t i = 0; i < impl_grads[pi].size(); ++i) {
            double ref = pred_grads[pi].data[i] +
                         2.0 * inst.weights.lambda * params[pi]->value.data[i];
            if (in_extractor)
                ref += -mu * bce_grads[pi].data[i];
            else if (in_classifier)
                ref += bce_grads[pi].data[i];
            max_diff = std::max(max_diff, std::abs(impl_grads[pi].data[i] - ref));
        }
    }
    return max_diff;
}

}  // namespace darec::check

#pragma once

#include <cmath>
#include <cstdint>
#include <numeric>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "darec/autorec.hpp"
#include "darec/checkpoint.hpp"
#include "darec/kv.hpp"
#include "darec/nn.hpp"
#include "darec/ratings.hpp"

namespace darec {

enum class Variant { U, I };

inline const char* variant_name(Variant v) { return v == Variant::U ? "U" : "I"; }

inline Variant variant_from_name(const std::string& s) {
    if (s == "U" || s == "u") return Variant::U;
    if (s == "I" || s == "i") return Variant::I;
    throw std::invalid_argument("unknown variant: " + s + " (expected U or I)");
}

// --- gradient reversal layer -------------------------------------------------
// Forward: identity. Backward: upstream gradient times -mu, elementwise.

inline nn::Vector grl_forward(nn::Vector x) { return x; }

inline nn::Vector grl_backward(nn::Vector upstream, double mu) {
    if (mu < 0.0) throw std::invalid_argument("grl_backward: mu must be >= 0");
    for (double& g : upstream) g = -mu * g;
    return upstream;
}

// -----------------------------------------------------------------------------

struct LossWeights {
    double beta = 1.0;    // target-domain predictor weight
    double mu = 1.0;      // classifier weight / GRL coefficient
    double lambda = 0.0;  // regularizer strength

    void validate() const {
        if (beta < 0.0 || mu < 0.0 || lambda < 0.0)
            throw std::invalid_argument("LossWeights: beta, mu, lambda must be >= 0");
    }
};

// One training/prediction sample: an entity's frozen embedding, its raw
// (masked) rating vector in its own domain, and the domain label.
struct Sample {
    nn::Vector embedding;
    data::MaskedVector raw;
    Domain domain = Domain::Source;
    std::uint32_t entity = 0;

    double label() const { return domain == Domain::Source ? 0.0 : 1.0; }
};

struct DARecParams {
    nn::MLP extractor;    // Theta_f: embedding -> features
    nn::MLP head_source;  // Theta_r, source branch: features -> source ratings
    nn::MLP head_target;  // Theta_r, target branch
    nn::MLP classifier;   // Theta_c: features -> domain probability
    double mu = 1.0;      // GRL coefficient recorded with the model
    Variant variant = Variant::U;

    std::size_t embedding_dim() const { return extractor.input_size(); }
    std::size_t feature_dim() const { return extractor.output_size(); }

    std::vector<nn::ParamTensor*> parameters() {
        std::vector<nn::ParamTensor*> ps;
        for (nn::MLP* net : {&extractor, &head_source, &head_target, &classifier})
            for (nn::ParamTensor* p : net->parameters()) ps.push_back(p);
        return ps;
    }

    void zero_grads() {
        extractor.zero_grads();
        head_source.zero_grads();
        head_target.zero_grads();
        classifier.zero_grads();
    }

    double squared_param_norm() const {
        return extractor.squared_param_norm() + head_source.squared_param_norm() +
               head_target.squared_param_norm() + classifier.squared_param_norm();
    }

    void add_regularizer_gradient(double lambda) {
        extractor.add_regularizer_gradient(lambda);
        head_source.add_regularizer_gradient(lambda);
        head_target.add_regularizer_gradient(lambda);
        classifier.add_regularizer_gradient(lambda);
    }
};

// Head widths follow a pyramid: geometric interpolation from the feature
// width down (or up) to the output dimension over three layers.
inline std::vector<std::size_t> pyramid_widths(std::size_t from, std::size_t to,
                                               std::size_t layers) {
    std::vector<std::size_t> dims;
    dims.push_back(from);
    for (std::size_t i = 1; i < layers; ++i) {
        const double t = static_cast<double>(i) / static_cast<double>(layers);
        const double w = std::exp(std::log(static_cast<double>(from)) * (1.0 - t) +
                                  std::log(static_cast<double>(to)) * t);
        dims.push_back(std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(w))));
    }
    dims.push_back(to);
    return dims;
}

inline DARecParams make_darec(std::size_t embedding_dim, std::size_t extractor_width,
                              std::size_t out_source, std::size_t out_target, Variant variant,
                              double mu, std::uint64_t seed, double init_std = 0.01) {
    if (embedding_dim < 1 || extractor_width < 1 || out_source < 1 || out_target < 1)
        throw std::invalid_argument("make_darec: dimensions must be positive");
    DARecParams p;
    p.variant = variant;
    p.mu = mu;
    p.extractor = nn::make_mlp({embedding_dim, extractor_width}, {nn::Activation::Sigmoid},
                               init_std, nn::splitmix64(seed ^ 0x01));
    const auto src_dims = pyramid_widths(extractor_width, out_source, 3);
    const auto tgt_dims = pyramid_widths(extractor_width, out_target, 3);
    const std::vector<nn::Activation> head_acts = {
        nn::Activation::Sigmoid, nn::Activation::Sigmoid, nn::Activation::Identity};
    p.head_source = nn::make_mlp(src_dims, head_acts, init_std, nn::splitmix64(seed ^ 0x02));
    p.head_target = nn::make_mlp(tgt_dims, head_acts, init_std, nn::splitmix64(seed ^ 0x03));
    p.classifier = nn::make_mlp({extractor_width, std::max<std::size_t>(1, extractor_width / 2), 1},
                                {nn::Activation::Sigmoid, nn::Activation::Sigmoid}, init_std,
                                nn::splitmix64(seed ^ 0x04));
    return p;
}

struct DARecOutputs {
    nn::Vector y_source;
    nn::Vector y_target;
    double c_hat = 0.5;
};

struct DARecCache {
    nn::MLP::Cache extractor;
    nn::MLP::Cache head_source;
    nn::MLP::Cache head_target;
    nn::MLP::Cache classifier;
    nn::Vector features;
};

// features = extractor(embedding); both heads are evaluated; the classifier
// sees grl(features) for U-DARec (identity on the forward pass either way).
inline DARecOutputs darec_forward(const DARecParams& p, const Sample& s,
                                  DARecCache* cache = nullptr) {
    nn::Vector features = p.extractor.forward(s.embedding, cache ? &cache->extractor : nullptr);
    DARecOutputs out;
    out.y_source = p.head_source.forward(features, cache ? &cache->head_source : nullptr);
    out.y_target = p.head_target.forward(features, cache ? &cache->head_target : nullptr);
    const nn::Vector cls_in = grl_forward(features);
    const nn::Vector c = p.classifier.forward(cls_in, cache ? &cache->classifier : nullptr);
    out.c_hat = c.at(0);
    if (cache) cache->features = std::move(features);
    return out;
}

inline constexpr double kProbClamp = 1e-12;

// Binary cross-entropy with the probability clamped into
// [kProbClamp, 1 - kProbClamp] to avoid log singularities.
inline double bce(double p_hat, double label) {
    const double p = std::min(std::max(p_hat, kProbClamp), 1.0 - kProbClamp);
    return -(label * std::log(p) + (1.0 - label) * std::log(1.0 - p));
}

// Masked squared error of the head matching the sample's domain.
inline double predictor_term(const DARecOutputs& out, const Sample& s) {
    const nn::Vector& y = s.domain == Domain::Source ? out.y_source : out.y_target;
    nn::check_length(y, s.raw.values.size(), "predictor_term");
    double se = 0.0;
    for (std::size_t j = 0; j < y.size(); ++j) {
        if (!s.raw.mask[j]) continue;
        const double r = y[j] - s.raw.values[j];
        se += r * r;
    }
    return se;
}

// Scalar loss: own-domain masked squared error (weight 1 for source, beta for
// target) + mu * BCE + lambda * ||params||^2. For U-DARec the same scalar is
// reported, while the adversarial sign is realized in the backward pass via
// the GRL (see darec_sample_backward).
inline double darec_loss(const DARecParams& p, const DARecOutputs& out, const Sample& s,
                         const LossWeights& w) {
    w.validate();
    const double pred_weight = s.domain == Domain::Source ? 1.0 : w.beta;
    return pred_weight * predictor_term(out, s) + w.mu * bce(out.c_hat, s.label()) +
           w.lambda * p.squared_param_norm();
}

// Per-sample backward pass; accumulates gradients and returns the sample's
// data + classifier loss contribution (regularizer handled per batch).
//
// U-DARec: the classifier descends its plain BCE; the extractor receives the
// classifier-path gradient flipped and scaled by -mu (GRL).
// I-DARec: the whole mu-weighted BCE is jointly minimized, no reversal.
inline double darec_sample_backward(DARecParams& p, const Sample& s, const LossWeights& w,
                                    Variant variant) {
    w.validate();
    DARecCache cache;
    const DARecOutputs out = darec_forward(p, s, &cache);

    const double pred_weight = s.domain == Domain::Source ? 1.0 : w.beta;
    nn::MLP& own_head = s.domain == Domain::Source ? p.head_source : p.head_target;
    const nn::MLP::Cache& own_cache =
        s.domain == Domain::Source ? cache.head_source : cache.head_target;
    const nn::Vector& own_y = s.domain == Domain::Source ? out.y_source : out.y_target;

    double data_loss = 0.0;
    nn::Vector d_head(own_y.size(), 0.0);
    for (std::size_t j = 0; j < own_y.size(); ++j) {
        if (!s.raw.mask[j]) continue;
        const double r = own_y[j] - s.raw.values[j];
        data_loss += r * r;
        d_head[j] = 2.0 * pred_weight * r;
    }
    nn::Vector d_features = own_head.backward(own_cache, std::move(d_head));

    // Classifier path. d BCE / d logit = c_hat - label for a sigmoid output.
    const double label = s.label();
    const double d_logit = out.c_hat - label;
    if (variant == Variant::U) {
        nn::Vector d_cls_in =
            p.classifier.backward_from_pre(cache.classifier, nn::Vector{d_logit});
        nn::Vector reversed = grl_backward(std::move(d_cls_in), w.mu);
        for (std::size_t i = 0; i < d_features.size(); ++i) d_features[i] += reversed[i];
    } else {
        nn::Vector d_cls_in =
            p.classifier.backward_from_pre(cache.classifier, nn::Vector{w.mu * d_logit});
        for (std::size_t i = 0; i < d_features.size(); ++i) d_features[i] += d_cls_in[i];
    }
    p.extractor.backward(cache.extractor, std::move(d_features));
    return pred_weight * data_loss + w.mu * bce(out.c_hat, label);
}

// --- interleaving ------------------------------------------------------------

struct StreamItem {
    Domain domain;
    std::uint32_t index;
};

// Alternating S,T,S,T,... over independently shuffled lists. When one list
// runs out it wraps around through a reshuffle until the longer list is
// consumed, so the longer list's multiset is preserved exactly and shorter
// items appear floor(ratio) or ceil(ratio) times.
inline std::vector<StreamItem> interleave_stream(std::size_t n_src, std::size_t n_tgt,
                                                 std::uint64_t seed) {
    if (n_src == 0 || n_tgt == 0)
        throw std::invalid_argument("interleave_stream: both lists must be nonempty");
    struct Cycler {
        std::vector<std::uint32_t> order;
        std::size_t pos = 0;
        std::uint64_t seed;
        std::uint64_t round = 0;

        Cycler(std::size_t n, std::uint64_t s) : order(n), seed(s) {
            std::iota(order.begin(), order.end(), 0);
            reshuffle();
        }
        void reshuffle() {
            auto eng = nn::make_engine(nn::splitmix64(seed + round++));
            std::shuffle(order.begin(), order.end(), eng);
            pos = 0;
        }
        std::uint32_t next() {
            if (pos == order.size()) reshuffle();
            return order[pos++];
        }
    };
    Cycler src(n_src, nn::splitmix64(seed ^ 0x5351ULL));
    Cycler tgt(n_tgt, nn::splitmix64(seed ^ 0x5447ULL));
    const std::size_t rounds = std::max(n_src, n_tgt);
    std::vector<StreamItem> stream;
    stream.reserve(rounds * 2);
    for (std::size_t k = 0; k < rounds; ++k) {
        stream.push_back({Domain::Source, src.next()});
        stream.push_back({Domain::Target, tgt.next()});
    }
    return stream;
}

inline std::vector<Sample> interleave(std::span<const Sample> src, std::span<const Sample> tgt,
                                      std::uint64_t seed) {
    auto stream = interleave_stream(src.size(), tgt.size(), seed);
    std::vector<Sample> out;
    out.reserve(stream.size());
    for (const auto& it : stream)
        out.push_back(it.domain == Domain::Source ? src[it.index] : tgt[it.index]);
    return out;
}

// --- training ----------------------------------------------------------------

struct DARecTrainOptions {
    std::size_t extractor_width = 64;
    LossWeights weights;
    double lr = 0.001;
    std::size_t batch = 32;
    std::size_t epochs = 200;
    double init_std = 0.01;
    std::uint64_t seed = 1;
};

struct DARecTrainResult {
    DARecParams params;
    std::vector<Sample> source_samples;  // the frozen training samples
    std::vector<Sample> target_samples;
    std::vector<double> epoch_losses;
    std::size_t epochs_run = 0;
};

// Builds one sample per entity with a nonempty training mask.
inline std::vector<Sample> build_samples(const EmbeddingSet& emb, const data::RatingMatrix& m,
                                         Orientation orientation, Domain domain) {
    data::RatingMatrix transposed_storage;
    if (orientation == Orientation::Item) transposed_storage = m.transposed();
    const data::RatingMatrix& mat = orientation == Orientation::User ? m : transposed_storage;
    if (emb.count() != mat.n_users)
        throw std::invalid_argument("build_samples: embedding count does not match entity count");
    std::vector<Sample> out;
    out.reserve(mat.n_users);
    for (std::uint32_t e = 0; e < mat.n_users; ++e) {
        Sample s;
        s.embedding = emb.row(e);
        s.raw = data::user_vector(mat, e);
        s.domain = domain;
        s.entity = e;
        if (s.raw.observed_count() == 0) continue;  // nothing to supervise
        out.push_back(std::move(s));
    }
    if (out.empty()) throw std::runtime_error("build_samples: no entity has observed ratings");
    return out;
}

namespace detail {

inline DARecTrainResult train_darec(const EmbeddingSet& src_emb, const EmbeddingSet& tgt_emb,
                                    const data::AlignedDataset& raw, Variant variant,
                                    Orientation orientation, const DARecTrainOptions& opts) {
    if (src_emb.dim() != tgt_emb.dim())
        throw std::invalid_argument("train_darec: embedding sizes differ across domains");
    if (src_emb.orientation != orientation || tgt_emb.orientation != orientation)
        throw std::invalid_argument(std::string("train_darec: expected ") +
                                    orientation_name(orientation) + "-oriented embeddings");
    opts.weights.validate();
    if (opts.batch < 1) throw std::invalid_argument("train_darec: batch must be >= 1");

    DARecTrainResult result;
    result.source_samples = build_samples(src_emb, raw.source, orientation, Domain::Source);
    result.target_samples = build_samples(tgt_emb, raw.target, orientation, Domain::Target);

    const std::size_t out_src = result.source_samples.front().raw.values.size();
    const std::size_t out_tgt = result.target_samples.front().raw.values.size();
    result.params = make_darec(src_emb.dim(), opts.extractor_width, out_src, out_tgt, variant,
                               opts.weights.mu, nn::derive_seed(opts.seed, nn::SeedStream::Init, 7),
                               opts.init_std);
    DARecParams& p = result.params;
    auto params = p.parameters();
    nn::AdamState adam(params, opts.lr);

    for (std::size_t epoch = 0; epoch < opts.epochs; ++epoch) {
        const auto stream =
            interleave_stream(result.source_samples.size(), result.target_samples.size(),
                              nn::derive_seed(opts.seed, nn::SeedStream::Interleave, epoch));
        double epoch_loss = 0.0;
        for (std::size_t start = 0; start < stream.size(); start += opts.batch) {
            const std::size_t end = std::min(start + opts.batch, stream.size());
            p.zero_grads();
            double batch_loss = 0.0;
            for (std::size_t i = start; i < end; ++i) {
                const Sample& s = stream[i].domain == Domain::Source
                                      ? result.source_samples[stream[i].index]
                                      : result.target_samples[stream[i].index];
                batch_loss += darec_sample_backward(p, s, opts.weights, variant);
            }
            p.add_regularizer_gradient(opts.weights.lambda);
            batch_loss += opts.weights.lambda * p.squared_param_norm();
            if (!std::isfinite(batch_loss))
                throw std::runtime_error("train_darec: loss diverged at epoch " +
                                         std::to_string(epoch));
            epoch_loss += batch_loss;
            nn::adam_step(params, adam);
        }
        result.epoch_losses.push_back(epoch_loss);
        result.epochs_run = epoch + 1;
    }
    return result;
}

}  // namespace detail

// Adversarial variant: single optimizer, GRL produces the min-max dynamics.
inline DARecTrainResult train_udarec(const EmbeddingSet& src_emb, const EmbeddingSet& tgt_emb,
                                     const data::AlignedDataset& raw,
                                     const DARecTrainOptions& opts) {
    if (raw.source.n_users != raw.target.n_users)
        throw std::invalid_argument("train_udarec: domains must share the user set");
    return detail::train_darec(src_emb, tgt_emb, raw, Variant::U, Orientation::User, opts);
}

// Joint-minimization variant over item embeddings; no gradient reversal.
inline DARecTrainResult train_idarec(const EmbeddingSet& src_emb, const EmbeddingSet& tgt_emb,
                                     const data::AlignedDataset& raw,
                                     const DARecTrainOptions& opts) {
    return detail::train_darec(src_emb, tgt_emb, raw, Variant::I, Orientation::Item, opts);
}

// Dense prediction vector from the head selected by `domain`, clipped to the
// rating scale.
inline nn::Vector predict(const DARecParams& p, const Sample& s, Domain domain,
                          const data::RatingScale& scale) {
    const DARecOutputs out = darec_forward(p, s);
    nn::Vector y = domain == Domain::Source ? out.y_source : out.y_target;
    for (double& v : y) v = scale.clip(v);
    return y;
}

// --- persistence ------------------------------------------------------------

namespace detail {

inline void append_net_tensors(const nn::MLP& net, const std::string& prefix,
                               nn::NamedTensors& out) {
    for (std::size_t li = 0; li < net.layers.size(); ++li) {
        out.emplace_back(prefix + "/" + std::to_string(li) + "/W", net.layers[li].weight.value);
        out.emplace_back(prefix + "/" + std::to_string(li) + "/b", net.layers[li].bias.value);
    }
}

inline std::string net_activations(const nn::MLP& net) {
    std::string s;
    for (std::size_t li = 0; li < net.layers.size(); ++li) {
        if (li) s += ",";
        s += nn::activation_name(net.layers[li].act);
    }
    return s;
}

inline nn::MLP load_net(const nn::NamedTensors& tensors, const std::string& prefix,
                        const std::string& activations) {
    std::vector<std::string> acts;
    std::string cur;
    for (char c : activations) {
        if (c == ',') {
            acts.push_back(cur);
            cur.clear();
        } else {
            cur.push_back(c);
        }
    }
    if (!cur.empty()) acts.push_back(cur);
    nn::MLP net;
    for (std::size_t li = 0; li < acts.size(); ++li) {
        const nn::DenseMatrix* w = nullptr;
        const nn::DenseMatrix* b = nullptr;
        for (const auto& [n, t] : tensors) {
            if (n == prefix + "/" + std::to_string(li) + "/W") w = &t;
            if (n == prefix + "/" + std::to_string(li) + "/b") b = &t;
        }
        if (!w || !b)
            throw std::runtime_error("load_darec: missing tensors for " + prefix + " layer " +
                                     std::to_string(li));
        net.add_layer(*w, *b, nn::activation_from_name(acts[li]));
    }
    return net;
}

}  // namespace detail

inline void save_darec(const DARecParams& p, const LossWeights& w, const std::string& path) {
    nn::NamedTensors tensors;
    detail::append_net_tensors(p.extractor, "extractor", tensors);
    detail::append_net_tensors(p.head_source, "head_source", tensors);
    detail::append_net_tensors(p.head_target, "head_target", tensors);
    detail::append_net_tensors(p.classifier, "classifier", tensors);
    nn::write_checkpoint(path, tensors);
    KeyValueFile kv;
    kv.set("format", "darec");
    kv.set("variant", variant_name(p.variant));
    kv.set("k", std::to_string(p.embedding_dim()));
    kv.set("extractor_width", std::to_string(p.feature_dim()));
    kv.set("beta", format_double(w.beta));
    kv.set("mu", format_double(w.mu));
    kv.set("lambda", format_double(w.lambda));
    for (const auto& [name, net] :
         std::initializer_list<std::pair<const char*, const nn::MLP*>>{
             {"extractor", &p.extractor},
             {"head_source", &p.head_source},
             {"head_target", &p.head_target},
             {"classifier", &p.classifier}})
        kv.set(std::string(name) + ".activations", detail::net_activations(*net));
    save_key_values(kv, path + ".manifest");
}

inline std::pair<DARecParams, LossWeights> load_darec(const std::string& path) {
    const auto tensors = nn::read_checkpoint(path);
    const auto kv = load_key_values(path + ".manifest");
    auto get = [&](const char* key) -> const std::string& {
        const std::string* v = kv.find(key);
        if (!v) throw std::runtime_error(std::string("load_darec: manifest missing ") + key);
        return *v;
    };
    DARecParams p;
    p.variant = variant_from_name(get("variant"));
    p.mu = std::stod(get("mu"));
    p.extractor = detail::load_net(tensors, "extractor", get("extractor.activations"));
    p.head_source = detail::load_net(tensors, "head_source", get("head_source.activations"));
    p.head_target = detail::load_net(tensors, "head_target", get("head_target.activations"));
    p.classifier = detail::load_net(tensors, "classifier", get("classifier.activations"));
    LossWeights w;
    w.beta = std::stod(get("beta"));
    w.mu = std::stod(get("mu"));
    w.lambda = std::stod(get("lambda"));
    return {std::move(p), w};
}

}  // namespace darec

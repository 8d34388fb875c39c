#pragma once

#include <cmath>
#include <cstdint>
#include <numeric>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "darec/checkpoint.hpp"
#include "darec/kv.hpp"
#include "darec/nn.hpp"
#include "darec/ratings.hpp"

namespace darec {

enum class Domain : std::uint8_t { Source = 0, Target = 1 };
enum class Orientation { User, Item };

inline const char* domain_name(Domain d) { return d == Domain::Source ? "source" : "target"; }
inline const char* orientation_name(Orientation o) { return o == Orientation::User ? "user" : "item"; }

// Autoencoder over partially observed rating vectors:
//   reconstruction = h(W2 g(W1 y + b1) + b2)
// Layer 0 carries (W1, b1) with activation g, layer 1 carries (W2, b2) with
// activation h.
struct AutoRecParams {
    nn::MLP net;

    std::size_t input_dim() const { return net.input_size(); }
    std::size_t embedding_dim() const { return net.layers.at(0).out_size(); }

    nn::DenseMatrix& W1() { return net.layers.at(0).weight.value; }
    nn::DenseMatrix& b1() { return net.layers.at(0).bias.value; }
    nn::DenseMatrix& W2() { return net.layers.at(1).weight.value; }
    nn::DenseMatrix& b2() { return net.layers.at(1).bias.value; }
    const nn::DenseMatrix& W1() const { return net.layers.at(0).weight.value; }
    const nn::DenseMatrix& b1() const { return net.layers.at(0).bias.value; }
    const nn::DenseMatrix& W2() const { return net.layers.at(1).weight.value; }
    const nn::DenseMatrix& b2() const { return net.layers.at(1).bias.value; }
};

inline AutoRecParams make_autorec(std::size_t input_dim, std::size_t embedding_dim,
                                  std::uint64_t seed, double init_std = 0.01,
                                  nn::Activation hidden = nn::Activation::Sigmoid,
                                  nn::Activation output = nn::Activation::Identity) {
    if (embedding_dim < 1) throw std::invalid_argument("make_autorec: embedding size must be >= 1");
    if (input_dim < 1) throw std::invalid_argument("make_autorec: input dim must be >= 1");
    AutoRecParams p;
    p.net = nn::make_mlp({input_dim, embedding_dim, input_dim}, {hidden, output}, init_std, seed);
    return p;
}

inline nn::Vector reconstruct(const AutoRecParams& p, const nn::Vector& y) {
    return p.net.forward(y);
}

namespace detail {

// Unobserved positions are forced to zero before the vector enters the
// encoder, so values hidden by the mask can never influence the loss.
inline nn::Vector masked_input(const data::MaskedVector& mv) {
    nn::Vector x(mv.values.size());
    for (std::size_t i = 0; i < x.size(); ++i) x[i] = mv.mask[i] ? mv.values[i] : 0.0;
    return x;
}

}  // namespace detail

// Regularized masked square loss:
//   sum_u ||recon(y_u) - y_u||^2 restricted to observed entries
//   + alpha * (||W1||_F^2 + ||W2||_F^2 + ||b1||^2 + ||b2||^2)
inline double autorec_loss(const AutoRecParams& p, std::span<const data::MaskedVector> batch,
                           double alpha) {
    if (batch.empty()) throw std::invalid_argument("autorec_loss: empty batch");
    if (alpha < 0.0) throw std::invalid_argument("autorec_loss: alpha must be >= 0");
    double loss = 0.0;
    for (const auto& mv : batch) {
        const nn::Vector x = detail::masked_input(mv);
        const nn::Vector recon = p.net.forward(x);
        for (std::size_t j = 0; j < x.size(); ++j) {
            if (!mv.mask[j]) continue;
            const double r = recon[j] - mv.values[j];
            loss += r * r;
        }
    }
    return loss + alpha * p.net.squared_param_norm();
}

// Same loss, accumulating parameter gradients.
inline double autorec_loss_and_grad(AutoRecParams& p, std::span<const data::MaskedVector> batch,
                                    double alpha) {
    if (batch.empty()) throw std::invalid_argument("autorec_loss_and_grad: empty batch");
    double loss = 0.0;
    for (const auto& mv : batch) {
        const nn::Vector x = detail::masked_input(mv);
        nn::MLP::Cache cache;
        const nn::Vector recon = p.net.forward(x, &cache);
        nn::Vector d_out(recon.size(), 0.0);
        for (std::size_t j = 0; j < x.size(); ++j) {
            if (!mv.mask[j]) continue;
            const double r = recon[j] - mv.values[j];
            loss += r * r;
            d_out[j] = 2.0 * r;
        }
        p.net.backward(cache, std::move(d_out));
    }
    p.net.add_regularizer_gradient(alpha);
    return loss + alpha * p.net.squared_param_norm();
}

struct AutoRecTrainOptions {
    std::size_t embedding_dim = 32;  // k
    double alpha = 0.01;
    double lr = 0.001;
    std::size_t batch = 32;
    std::size_t epochs = 200;
    double init_std = 0.01;
    std::uint64_t seed = 1;
    bool early_stop = false;
    std::size_t patience = 20;
    nn::Activation hidden = nn::Activation::Sigmoid;
    nn::Activation output = nn::Activation::Identity;
};

struct AutoRecTrainResult {
    AutoRecParams params;
    std::vector<double> epoch_losses;        // summed batch data terms + alpha*R
    std::vector<double> validation_rmse;     // empty unless validation entries given
    std::size_t epochs_run = 0;
};

namespace detail {

inline std::vector<data::MaskedVector> entity_vectors(const data::RatingMatrix& m) {
    std::vector<data::MaskedVector> vs;
    vs.reserve(m.n_users);
    for (std::uint32_t u = 0; u < m.n_users; ++u) vs.push_back(data::user_vector(m, u));
    return vs;
}

inline double autorec_validation_rmse(const AutoRecParams& p,
                                      const std::vector<data::MaskedVector>& inputs,
                                      const std::vector<data::SplitEntry>& val,
                                      const data::RatingScale& scale) {
    if (val.empty()) return 0.0;
    double se = 0.0;
    for (const auto& e : val) {
        const nn::Vector recon = p.net.forward(detail::masked_input(inputs[e.user]));
        const double pred = scale.clip(recon[e.item]);
        const double r = pred - e.rating;
        se += r * r;
    }
    return std::sqrt(se / static_cast<double>(val.size()));
}

}  // namespace detail

// Mini-batch Adam on the regularized masked loss, batches drawn from the
// entity set. For Orientation::Item the matrix is transposed first, so
// entities are items and vectors run over users. `validation` entries, when
// given, are in the same orientation as `m` (user, item ordinals of `m`).
inline AutoRecTrainResult train_autorec(const data::RatingMatrix& m, Orientation orientation,
                                        const AutoRecTrainOptions& opts,
                                        const std::vector<data::SplitEntry>* validation = nullptr) {
    data::RatingMatrix transposed_storage;
    if (orientation == Orientation::Item) transposed_storage = m.transposed();
    const data::RatingMatrix& mat = orientation == Orientation::User ? m : transposed_storage;

    if (mat.n_users == 0 || mat.n_items == 0)
        throw std::invalid_argument("train_autorec: empty matrix");
    if (opts.batch < 1) throw std::invalid_argument("train_autorec: batch must be >= 1");

    std::vector<data::SplitEntry> val_entries;
    if (validation) {
        val_entries = *validation;
        if (orientation == Orientation::Item)
            for (auto& e : val_entries) std::swap(e.user, e.item);
    }

    AutoRecTrainResult result;
    result.params = make_autorec(mat.n_items, opts.embedding_dim,
                                 nn::derive_seed(opts.seed, nn::SeedStream::Init),
                                 opts.init_std, opts.hidden, opts.output);
    AutoRecParams& p = result.params;
    const auto inputs = detail::entity_vectors(mat);

    auto params = p.net.parameters();
    nn::AdamState adam(params, opts.lr);

    AutoRecParams best = p;
    double best_val = std::numeric_limits<double>::infinity();
    std::size_t since_best = 0;

    std::vector<std::uint32_t> order(mat.n_users);
    std::iota(order.begin(), order.end(), 0);

    for (std::size_t epoch = 0; epoch < opts.epochs; ++epoch) {
        auto eng = nn::make_engine(nn::derive_seed(opts.seed, nn::SeedStream::Shuffle, epoch));
        std::shuffle(order.begin(), order.end(), eng);
        double epoch_data_loss = 0.0;
        for (std::size_t start = 0; start < order.size(); start += opts.batch) {
            const std::size_t end = std::min(start + opts.batch, order.size());
            std::vector<data::MaskedVector> batch;
            batch.reserve(end - start);
            for (std::size_t i = start; i < end; ++i) batch.push_back(inputs[order[i]]);
            p.net.zero_grads();
            const double batch_loss = autorec_loss_and_grad(p, batch, opts.alpha);
            if (!std::isfinite(batch_loss))
                throw std::runtime_error("train_autorec: loss diverged at epoch " +
                                         std::to_string(epoch));
            epoch_data_loss += batch_loss - opts.alpha * p.net.squared_param_norm();
            nn::adam_step(params, adam);
        }
        result.epoch_losses.push_back(epoch_data_loss + opts.alpha * p.net.squared_param_norm());
        result.epochs_run = epoch + 1;
        if (!val_entries.empty()) {
            const double vr = detail::autorec_validation_rmse(p, inputs, val_entries, mat.scale);
            result.validation_rmse.push_back(vr);
            if (opts.early_stop) {
                if (vr < best_val - 1e-12) {
                    best_val = vr;
                    best = p;
                    since_best = 0;
                } else if (++since_best >= opts.patience) {
                    p = best;
                    break;
                }
            }
        }
    }
    return result;
}

// One embedding row per entity: g(W1 y_e + b1) with the trained, now frozen
// encoder parameters.
struct EmbeddingSet {
    nn::DenseMatrix vectors;  // n_entities x k
    Domain domain = Domain::Source;
    Orientation orientation = Orientation::User;

    std::size_t count() const { return vectors.rows; }
    std::size_t dim() const { return vectors.cols; }

    nn::Vector row(std::size_t e) const {
        nn::Vector v(vectors.cols);
        for (std::size_t j = 0; j < vectors.cols; ++j) v[j] = vectors(e, j);
        return v;
    }
};

inline EmbeddingSet extract_embeddings(const AutoRecParams& p, const data::RatingMatrix& m,
                                       Orientation orientation, Domain domain) {
    data::RatingMatrix transposed_storage;
    if (orientation == Orientation::Item) transposed_storage = m.transposed();
    const data::RatingMatrix& mat = orientation == Orientation::User ? m : transposed_storage;
    if (p.input_dim() != mat.n_items)
        throw std::invalid_argument("extract_embeddings: matrix does not match encoder input");
    EmbeddingSet es;
    es.domain = domain;
    es.orientation = orientation;
    es.vectors = nn::DenseMatrix(mat.n_users, p.embedding_dim());
    const nn::Layer& enc = p.net.layers.at(0);
    for (std::uint32_t e = 0; e < mat.n_users; ++e) {
        const nn::Vector x = detail::masked_input(data::user_vector(mat, e));
        nn::Vector z = nn::matvec(enc.weight.value, x);
        for (std::size_t j = 0; j < z.size(); ++j)
            es.vectors(e, j) = nn::activate(enc.act, z[j] + enc.bias.value(0, j));
    }
    return es;
}

// --- persistence ------------------------------------------------------------

inline void save_autorec(const AutoRecParams& p, const std::string& path) {
    nn::write_checkpoint(path, {{"W1", p.W1()}, {"b1", p.b1()}, {"W2", p.W2()}, {"b2", p.b2()}});
    KeyValueFile kv;
    kv.set("format", "autorec");
    kv.set("hidden_activation", nn::activation_name(p.net.layers.at(0).act));
    kv.set("output_activation", nn::activation_name(p.net.layers.at(1).act));
    save_key_values(kv, path + ".manifest");
}

inline AutoRecParams load_autorec(const std::string& path) {
    const auto tensors = nn::read_checkpoint(path);
    auto get = [&](const std::string& name) -> const nn::DenseMatrix& {
        for (const auto& [n, t] : tensors)
            if (n == name) return t;
        throw std::runtime_error("load_autorec: missing tensor " + name + " in " + path);
    };
    const auto kv = load_key_values(path + ".manifest");
    auto act = [&](const char* key, nn::Activation fallback) {
        const std::string* v = kv.find(key);
        return v ? nn::activation_from_name(*v) : fallback;
    };
    AutoRecParams p;
    p.net.add_layer(get("W1"), get("b1"), act("hidden_activation", nn::Activation::Sigmoid));
    p.net.add_layer(get("W2"), get("b2"), act("output_activation", nn::Activation::Identity));
    return p;
}

inline void save_embeddings(const EmbeddingSet& es, const std::vector<std::string>& entity_ids,
                            const std::string& path) {
    nn::write_checkpoint(path, {{std::string("embeddings/") + domain_name(es.domain), es.vectors}});
    std::ofstream os(path + ".ids", std::ios::trunc);
    if (!os) throw std::runtime_error("save_embeddings: cannot open " + path + ".ids");
    for (std::size_t i = 0; i < entity_ids.size(); ++i) os << i << " " << entity_ids[i] << "\n";
}

}  // namespace darec

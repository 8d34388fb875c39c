#pragma once

#include <chrono>
#include <cmath>
#include <cstdint>
#include <optional>
#include <ostream>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <unordered_set>
#include <utility>
#include <vector>

#include "darec/autorec.hpp"
#include "darec/darec.hpp"
#include "darec/kv.hpp"
#include "darec/ratings.hpp"

namespace darec {

// --- metrics -----------------------------------------------------------------

inline double rmse(std::span<const std::pair<double, double>> pairs) {
    if (pairs.empty()) throw std::invalid_argument("rmse: empty pair list");
    double se = 0.0;
    for (const auto& [pred, truth] : pairs) {
        const double r = pred - truth;
        se += r * r;
    }
    return std::sqrt(se / static_cast<double>(pairs.size()));
}

// Fraction of samples whose thresholded classifier output matches the domain
// label; c_hat of exactly 0.5 counts as source (ties round down).
inline double classifier_accuracy(const DARecParams& p, std::span<const Sample> samples) {
    if (samples.empty()) throw std::invalid_argument("classifier_accuracy: empty sample list");
    std::size_t correct = 0;
    for (const Sample& s : samples) {
        const DARecOutputs out = darec_forward(p, s);
        const double predicted = out.c_hat > 0.5 ? 1.0 : 0.0;
        if (predicted == s.label()) ++correct;
    }
    return static_cast<double>(correct) / static_cast<double>(samples.size());
}

// --- synthetic correlated-domain data ----------------------------------------

struct SynthConfig {
    std::size_t n_users = 300;
    std::size_t n_items_src = 150;
    std::size_t n_items_tgt = 150;
    std::size_t rank = 4;
    double rho = 0.9;           // cross-domain user-preference correlation
    double density_src = 0.25;  // observation probability per (user, item)
    double density_tgt = 0.02;
    double noise = 0.3;
    std::uint64_t seed = 1;

    void validate() const {
        if (n_users == 0 || n_items_src == 0 || n_items_tgt == 0 || rank == 0)
            throw std::invalid_argument("SynthConfig: counts must be positive");
        if (rho < 0.0 || rho > 1.0)
            throw std::invalid_argument("SynthConfig: rho must be in [0,1]");
        if (density_src <= 0.0 || density_src > 1.0 || density_tgt <= 0.0 || density_tgt > 1.0)
            throw std::invalid_argument("SynthConfig: densities must be in (0,1]");
        if (noise < 0.0) throw std::invalid_argument("SynthConfig: noise must be >= 0");
    }
};

struct SynthLatents {
    nn::DenseMatrix users_source;  // n_users x rank
    nn::DenseMatrix users_target;  // rho-correlated with users_source
    nn::DenseMatrix items_source;  // n_items_src x rank
    nn::DenseMatrix items_target;
};

inline SynthLatents synth_latents(const SynthConfig& cfg) {
    cfg.validate();
    const std::uint64_t root = nn::derive_seed(cfg.seed, nn::SeedStream::Synth);
    SynthLatents l;
    l.users_source = nn::init_normal(cfg.n_users, cfg.rank, 1.0, nn::splitmix64(root + 1));
    l.items_source = nn::init_normal(cfg.n_items_src, cfg.rank, 1.0, nn::splitmix64(root + 2));
    l.items_target = nn::init_normal(cfg.n_items_tgt, cfg.rank, 1.0, nn::splitmix64(root + 3));
    const nn::DenseMatrix fresh =
        nn::init_normal(cfg.n_users, cfg.rank, 1.0, nn::splitmix64(root + 4));
    l.users_target = l.users_source;
    const double mix = std::sqrt(1.0 - cfg.rho * cfg.rho);
    for (std::size_t i = 0; i < l.users_target.size(); ++i)
        l.users_target.data[i] = cfg.rho * l.users_source.data[i] + mix * fresh.data[i];
    return l;
}

inline double round_to_half(double v) { return std::round(v * 2.0) / 2.0; }

struct SynthDiagnostics {
    std::size_t resampled_users_src = 0;  // users that needed a forced rating
    std::size_t resampled_users_tgt = 0;
};

// Ratings follow clip(round_to_half(3 + u.v / sqrt(rank) + noise), scale);
// target-domain user factors are rho-correlated with the source factors.
// Every user is guaranteed at least one observed rating per domain.
inline data::AlignedDataset synth_generate(const SynthConfig& cfg,
                                           SynthDiagnostics* diag = nullptr) {
    cfg.validate();
    const SynthLatents lat = synth_latents(cfg);
    const std::uint64_t root = nn::derive_seed(cfg.seed, nn::SeedStream::Synth);
    const data::RatingScale scale;
    const double inv_sqrt_rank = 1.0 / std::sqrt(static_cast<double>(cfg.rank));

    auto make_domain = [&](const nn::DenseMatrix& users, const nn::DenseMatrix& items,
                           double density, const char* item_prefix, std::uint64_t domain_seed,
                           std::size_t* resampled) {
        data::RatingMatrix m;
        m.scale = scale;
        m.n_users = cfg.n_users;
        m.n_items = items.rows;
        m.rows.resize(m.n_users);
        for (std::uint32_t u = 0; u < m.n_users; ++u) {
            char buf[32];
            std::snprintf(buf, sizeof buf, "u%04u", u);
            m.user_ids.emplace_back(buf);
            m.user_ordinals.emplace(buf, u);
        }
        for (std::uint32_t i = 0; i < m.n_items; ++i) {
            char buf[32];
            std::snprintf(buf, sizeof buf, "%s%04u", item_prefix, i);
            m.item_ids.emplace_back(buf);
            m.item_ordinals.emplace(buf, i);
        }
        auto eng = nn::make_engine(domain_seed);
        std::uniform_real_distribution<double> unif(0.0, 1.0);
        std::normal_distribution<double> gauss(0.0, 1.0);
        auto rating_for = [&](std::uint32_t u, std::uint32_t i, double eps) {
            double v = 0.0;
            for (std::size_t k = 0; k < cfg.rank; ++k) v += users(u, k) * items(i, k);
            return scale.clip(round_to_half(3.0 + v * inv_sqrt_rank + eps));
        };
        for (std::uint32_t u = 0; u < m.n_users; ++u) {
            for (std::uint32_t i = 0; i < m.n_items; ++i) {
                const bool observed = unif(eng) < density;
                const double eps = cfg.noise > 0.0 ? cfg.noise * gauss(eng) : 0.0;
                if (observed) m.rows[u].emplace_back(i, rating_for(u, i, eps));
            }
            if (m.rows[u].empty()) {
                // Density left this user empty; force one rating so every
                // user participates. Reported through SynthDiagnostics.
                std::uniform_int_distribution<std::uint32_t> pick(0, static_cast<std::uint32_t>(m.n_items - 1));
                const std::uint32_t i = pick(eng);
                const double eps = cfg.noise > 0.0 ? cfg.noise * gauss(eng) : 0.0;
                m.rows[u].emplace_back(i, rating_for(u, i, eps));
                if (resampled) ++*resampled;
            }
        }
        return m;
    };

    SynthDiagnostics local;
    data::AlignedDataset ds;
    ds.source = make_domain(lat.users_source, lat.items_source, cfg.density_src, "s",
                            nn::splitmix64(root + 10), &local.resampled_users_src);
    ds.target = make_domain(lat.users_target, lat.items_target, cfg.density_tgt, "t",
                            nn::splitmix64(root + 11), &local.resampled_users_tgt);
    if (diag) *diag = local;
    return ds;
}

// --- experiment configuration --------------------------------------------------

enum class PredictFrom { Own, Cross };

struct TrainConfig {
    Variant variant = Variant::U;
    Orientation orientation = Orientation::User;
    std::size_t k = 32;                // embedding size
    double alpha = 0.01;               // AutoRec regularizer
    double beta = 1.0;                 // target predictor weight
    double mu = 1.0;                   // classifier weight / GRL coefficient
    double lambda = 1e-4;              // DARec regularizer
    std::size_t extractor_width = 64;  // feature width of Theta_f
    double lr = 0.001;                 // DARec learning rate
    std::size_t batch = 32;
    std::size_t epochs = 150;  // DARec epochs
    double autorec_lr = 0.003;
    std::size_t autorec_batch = 32;
    std::size_t autorec_epochs = 300;
    double train_frac = 0.9;
    double val_frac = 0.1;  // fraction of the training set held out as validation
    std::uint64_t seed = 1;
    // U-DARec can predict a domain's ratings from the other domain's sample
    // of the same user (the domain-confused feature space makes the richer
    // embedding usable). Item entities exist in one domain only, so I-DARec
    // always predicts from the own-domain sample.
    PredictFrom predict_from = PredictFrom::Cross;
    bool early_stop = false;
    bool shared_autorec = false;  // one encoder over both domains (dims must match)

    void validate() const {
        if (k < 1) throw std::invalid_argument("config: k must be >= 1");
        if (alpha < 0 || beta < 0 || mu < 0 || lambda < 0)
            throw std::invalid_argument("config: alpha, beta, mu, lambda must be >= 0");
        if (extractor_width < 1) throw std::invalid_argument("config: extractor_width must be >= 1");
        if (lr <= 0 || autorec_lr <= 0) throw std::invalid_argument("config: learning rates must be > 0");
        if (batch < 1 || autorec_batch < 1) throw std::invalid_argument("config: batch must be >= 1");
        if (!(train_frac > 0 && train_frac < 1))
            throw std::invalid_argument("config: train_frac must be in (0,1)");
        if (!(val_frac >= 0 && val_frac < 1))
            throw std::invalid_argument("config: val_frac must be in [0,1)");
        const Orientation expected =
            variant == Variant::U ? Orientation::User : Orientation::Item;
        if (orientation != expected)
            throw std::invalid_argument(std::string("config: variant ") + variant_name(variant) +
                                        " requires orientation " + orientation_name(expected));
        if (variant == Variant::I && predict_from == PredictFrom::Cross)
            throw std::invalid_argument(
                "config: predict_from=cross is undefined for I-DARec (items are domain-exclusive)");
    }

    LossWeights weights() const { return {beta, mu, lambda}; }
};

struct Report {
    TrainConfig config;
    double rmse_target = 0.0;
    double rmse_source = 0.0;
    double baseline_rmse_target = 0.0;  // stage-1 AutoRec alone, target domain
    double baseline_rmse_source = 0.0;
    double classifier_accuracy = 0.0;
    std::size_t test_users = 0;  // M: distinct users in the target test set
    std::size_t test_items = 0;  // N: distinct items in the target test set
    std::vector<double> autorec_source_loss;
    std::vector<double> autorec_target_loss;
    std::vector<double> darec_loss_curve;
    std::size_t epochs_run = 0;
    double wall_seconds = 0.0;
};

// --- evaluation helpers --------------------------------------------------------

namespace detail {

inline std::uint64_t entry_key(std::uint32_t u, std::uint32_t i) {
    return (static_cast<std::uint64_t>(u) << 32) | i;
}

// Test entries must be disjoint from everything the model saw.
inline void assert_test_disjoint(const data::DomainSplit& s, const char* domain) {
    std::unordered_set<std::uint64_t> seen;
    seen.reserve(s.train.size() + s.validation.size());
    for (const auto& e : s.train) seen.insert(entry_key(e.user, e.item));
    for (const auto& e : s.validation) seen.insert(entry_key(e.user, e.item));
    for (const auto& e : s.test)
        if (seen.contains(entry_key(e.user, e.item)))
            throw std::logic_error(std::string("evaluation watchdog: test entry overlaps "
                                               "train/validation in ") +
                                   domain + " domain");
}

// Full per-entity sample list for prediction (empty masks allowed here).
inline std::vector<Sample> prediction_samples(const EmbeddingSet& emb,
                                              const data::RatingMatrix& train_matrix,
                                              Orientation orientation, Domain domain) {
    data::RatingMatrix transposed_storage;
    if (orientation == Orientation::Item) transposed_storage = train_matrix.transposed();
    const data::RatingMatrix& mat =
        orientation == Orientation::User ? train_matrix : transposed_storage;
    std::vector<Sample> out;
    out.reserve(mat.n_users);
    for (std::uint32_t e = 0; e < mat.n_users; ++e) {
        Sample s;
        s.embedding = emb.row(e);
        s.raw = data::user_vector(mat, e);
        s.domain = domain;
        s.entity = e;
        out.push_back(std::move(s));
    }
    return out;
}

// RMSE of the DARec head `eval_domain` over that domain's test entries.
// `input_samples` are indexed by entity ordinal in the evaluated orientation.
inline double darec_test_rmse(const DARecParams& p, const std::vector<Sample>& input_samples,
                              const std::vector<data::SplitEntry>& test, Orientation orientation,
                              Domain eval_domain, const data::RatingScale& scale) {
    if (test.empty()) throw std::runtime_error("darec_test_rmse: empty test set");
    std::vector<std::optional<nn::Vector>> cache(input_samples.size());
    std::vector<std::pair<double, double>> pairs;
    pairs.reserve(test.size());
    for (const auto& e : test) {
        const std::uint32_t entity = orientation == Orientation::User ? e.user : e.item;
        const std::uint32_t pos = orientation == Orientation::User ? e.item : e.user;
        if (entity >= input_samples.size())
            throw std::out_of_range("darec_test_rmse: entity out of range");
        if (!cache[entity]) cache[entity] = predict(p, input_samples[entity], eval_domain, scale);
        pairs.emplace_back((*cache[entity])[pos], e.rating);
    }
    return rmse(pairs);
}

// RMSE of a plain AutoRec reconstruction over test entries.
inline double autorec_test_rmse(const AutoRecParams& p, const data::RatingMatrix& train_matrix,
                                const std::vector<data::SplitEntry>& test, Orientation orientation,
                                const data::RatingScale& scale) {
    if (test.empty()) throw std::runtime_error("autorec_test_rmse: empty test set");
    data::RatingMatrix transposed_storage;
    if (orientation == Orientation::Item) transposed_storage = train_matrix.transposed();
    const data::RatingMatrix& mat =
        orientation == Orientation::User ? train_matrix : transposed_storage;
    std::vector<std::optional<nn::Vector>> cache(mat.n_users);
    std::vector<std::pair<double, double>> pairs;
    pairs.reserve(test.size());
    for (const auto& e : test) {
        const std::uint32_t entity = orientation == Orientation::User ? e.user : e.item;
        const std::uint32_t pos = orientation == Orientation::User ? e.item : e.user;
        if (!cache[entity])
            cache[entity] = reconstruct(p, masked_input(data::user_vector(mat, entity)));
        pairs.emplace_back(scale.clip((*cache[entity])[pos]), e.rating);
    }
    return rmse(pairs);
}

}  // namespace detail

// --- the full pipeline ---------------------------------------------------------

struct ExperimentArtifacts {
    AutoRecParams autorec_source;
    AutoRecParams autorec_target;
    DARecParams darec;
    EmbeddingSet emb_source;
    EmbeddingSet emb_target;
    data::Split split;
};

inline Report run_experiment(const TrainConfig& cfg, const data::AlignedDataset& ds,
                             ExperimentArtifacts* artifacts = nullptr) {
    cfg.validate();
    const auto t0 = std::chrono::steady_clock::now();

    Report rep;
    rep.config = cfg;

    data::Split sp = data::split(ds, cfg.train_frac, cfg.val_frac, cfg.seed);
    detail::assert_test_disjoint(sp.source, "source");
    detail::assert_test_disjoint(sp.target, "target");

    const data::RatingMatrix train_src = data::matrix_from_entries(ds.source, sp.source.train);
    const data::RatingMatrix train_tgt = data::matrix_from_entries(ds.target, sp.target.train);

    AutoRecTrainOptions aro;
    aro.embedding_dim = cfg.k;
    aro.alpha = cfg.alpha;
    aro.lr = cfg.autorec_lr;
    aro.batch = cfg.autorec_batch;
    aro.epochs = cfg.autorec_epochs;
    aro.early_stop = cfg.early_stop;

    AutoRecParams ar_src, ar_tgt;
    if (cfg.shared_autorec) {
        const std::size_t dim_src =
            cfg.orientation == Orientation::User ? train_src.n_items : train_src.n_users;
        const std::size_t dim_tgt =
            cfg.orientation == Orientation::User ? train_tgt.n_items : train_tgt.n_users;
        if (dim_src != dim_tgt)
            throw std::invalid_argument(
                "config: shared_autorec requires equal input dimensions across domains");
        // Pool both domains' entity vectors into one training matrix.
        data::RatingMatrix pooled = cfg.orientation == Orientation::User
                                        ? train_src
                                        : train_src.transposed();
        const data::RatingMatrix other = cfg.orientation == Orientation::User
                                             ? train_tgt
                                             : train_tgt.transposed();
        pooled.rows.insert(pooled.rows.end(), other.rows.begin(), other.rows.end());
        pooled.n_users += other.n_users;
        aro.seed = nn::derive_seed(cfg.seed, nn::SeedStream::Init, 100);
        auto res = train_autorec(pooled, Orientation::User, aro);
        rep.autorec_source_loss = res.epoch_losses;
        rep.autorec_target_loss = res.epoch_losses;
        ar_src = res.params;
        ar_tgt = std::move(res.params);
    } else {
        aro.seed = nn::derive_seed(cfg.seed, nn::SeedStream::Init, 101);
        auto res_src = train_autorec(train_src, cfg.orientation, aro,
                                     cfg.early_stop ? &sp.source.validation : nullptr);
        rep.autorec_source_loss = std::move(res_src.epoch_losses);
        ar_src = std::move(res_src.params);
        aro.seed = nn::derive_seed(cfg.seed, nn::SeedStream::Init, 102);
        auto res_tgt = train_autorec(train_tgt, cfg.orientation, aro,
                                     cfg.early_stop ? &sp.target.validation : nullptr);
        rep.autorec_target_loss = std::move(res_tgt.epoch_losses);
        ar_tgt = std::move(res_tgt.params);
    }

    EmbeddingSet emb_src = extract_embeddings(ar_src, train_src, cfg.orientation, Domain::Source);
    EmbeddingSet emb_tgt = extract_embeddings(ar_tgt, train_tgt, cfg.orientation, Domain::Target);

    data::AlignedDataset train_ds;
    train_ds.source = train_src;
    train_ds.target = train_tgt;

    DARecTrainOptions dro;
    dro.extractor_width = cfg.extractor_width;
    dro.weights = cfg.weights();
    dro.lr = cfg.lr;
    dro.batch = cfg.batch;
    dro.epochs = cfg.epochs;
    dro.seed = nn::derive_seed(cfg.seed, nn::SeedStream::Init, 103);

    DARecTrainResult tr = cfg.variant == Variant::U
                              ? train_udarec(emb_src, emb_tgt, train_ds, dro)
                              : train_idarec(emb_src, emb_tgt, train_ds, dro);
    rep.darec_loss_curve = std::move(tr.epoch_losses);
    rep.epochs_run = tr.epochs_run;

    // Evaluation: inputs are built from training-visible ratings only.
    const auto pred_src = detail::prediction_samples(emb_src, train_src, cfg.orientation,
                                                     Domain::Source);
    const auto pred_tgt = detail::prediction_samples(emb_tgt, train_tgt, cfg.orientation,
                                                     Domain::Target);
    const bool cross = cfg.predict_from == PredictFrom::Cross && cfg.variant == Variant::U;
    const auto& target_inputs = cross ? pred_src : pred_tgt;
    const auto& source_inputs = cross ? pred_tgt : pred_src;

    rep.rmse_target = detail::darec_test_rmse(tr.params, target_inputs, sp.target.test,
                                              cfg.orientation, Domain::Target, ds.target.scale);
    rep.rmse_source = detail::darec_test_rmse(tr.params, source_inputs, sp.source.test,
                                              cfg.orientation, Domain::Source, ds.source.scale);
    rep.baseline_rmse_target = detail::autorec_test_rmse(ar_tgt, train_tgt, sp.target.test,
                                                         cfg.orientation, ds.target.scale);
    rep.baseline_rmse_source = detail::autorec_test_rmse(ar_src, train_src, sp.source.test,
                                                         cfg.orientation, ds.source.scale);

    std::vector<Sample> all_samples = tr.source_samples;
    all_samples.insert(all_samples.end(), tr.target_samples.begin(), tr.target_samples.end());
    rep.classifier_accuracy = classifier_accuracy(tr.params, all_samples);

    std::unordered_set<std::uint32_t> users, items;
    for (const auto& e : sp.target.test) {
        users.insert(e.user);
        items.insert(e.item);
    }
    rep.test_users = users.size();
    rep.test_items = items.size();

    if (artifacts) {
        artifacts->autorec_source = std::move(ar_src);
        artifacts->autorec_target = std::move(ar_tgt);
        artifacts->darec = std::move(tr.params);
        artifacts->emb_source = std::move(emb_src);
        artifacts->emb_target = std::move(emb_tgt);
        artifacts->split = std::move(sp);
    }
    rep.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return rep;
}

// --- sweeps --------------------------------------------------------------------

// One config axis is varied; every other field (including the seed) is taken
// from `base`, so points are fully independent and order-insensitive.
inline void set_axis_value(TrainConfig& cfg, const std::string& axis, double value) {
    auto as_count = [&](const char* what) {
        if (value < 1 || value != std::floor(value))
            throw std::invalid_argument(std::string("sweep: ") + what +
                                        " requires a positive integer value");
        return static_cast<std::size_t>(value);
    };
    if (axis == "k") cfg.k = as_count("k");
    else if (axis == "alpha") cfg.alpha = value;
    else if (axis == "beta") cfg.beta = value;
    else if (axis == "mu") cfg.mu = value;
    else if (axis == "lambda") cfg.lambda = value;
    else if (axis == "extractor_width") cfg.extractor_width = as_count("extractor_width");
    else if (axis == "lr") cfg.lr = value;
    else if (axis == "autorec_lr") cfg.autorec_lr = value;
    else if (axis == "epochs") cfg.epochs = as_count("epochs");
    else if (axis == "autorec_epochs") cfg.autorec_epochs = as_count("autorec_epochs");
    else if (axis == "batch") cfg.batch = as_count("batch");
    else if (axis == "train_frac") cfg.train_frac = value;
    else throw std::invalid_argument("sweep: unknown axis '" + axis + "'");
}

inline std::vector<Report> sweep_axis(const TrainConfig& base, const std::string& axis,
                                      std::span<const double> values,
                                      const data::AlignedDataset& ds) {
    if (values.empty()) throw std::invalid_argument("sweep: no axis values given");
    std::vector<Report> reports;
    reports.reserve(values.size());
    for (double v : values) {
        TrainConfig cfg = base;
        set_axis_value(cfg, axis, v);
        reports.push_back(run_experiment(cfg, ds));
    }
    return reports;
}

// --- report emission -----------------------------------------------------------

inline const char* report_csv_header() {
    return "variant,k,alpha,beta,mu,lambda,seed,rmse_target,rmse_source,"
           "classifier_accuracy,epochs,wall_seconds";
}

inline std::string report_csv_row(const Report& r) {
    std::ostringstream os;
    os << variant_name(r.config.variant) << "," << r.config.k << ","
       << format_double(r.config.alpha) << "," << format_double(r.config.beta) << ","
       << format_double(r.config.mu) << "," << format_double(r.config.lambda) << ","
       << r.config.seed << "," << format_double(r.rmse_target) << ","
       << format_double(r.rmse_source) << "," << format_double(r.classifier_accuracy) << ","
       << r.epochs_run << "," << format_double(r.wall_seconds);
    return os.str();
}

inline void write_report_text(const Report& r, std::ostream& os) {
    os << "experiment report\n";
    os << "  variant              " << variant_name(r.config.variant) << "-DARec\n";
    os << "  orientation          " << orientation_name(r.config.orientation) << "\n";
    os << "  embedding size k     " << r.config.k << "\n";
    os << "  extractor width      " << r.config.extractor_width << "\n";
    os << "  alpha/beta/mu/lambda " << format_double(r.config.alpha) << " / "
       << format_double(r.config.beta) << " / " << format_double(r.config.mu) << " / "
       << format_double(r.config.lambda) << "\n";
    os << "  seed                 " << r.config.seed << "\n";
    os << "  epochs run           " << r.epochs_run << "\n";
    os << "  test users (M)       " << r.test_users << "\n";
    os << "  test items (N)       " << r.test_items << "\n";
    os << "  rmse target          " << format_double(r.rmse_target) << "\n";
    os << "  rmse source          " << format_double(r.rmse_source) << "\n";
    os << "  autorec baseline     " << format_double(r.baseline_rmse_target) << " (target), "
       << format_double(r.baseline_rmse_source) << " (source)\n";
    os << "  classifier accuracy  " << format_double(r.classifier_accuracy) << "\n";
    os << "  wall seconds         " << format_double(r.wall_seconds) << "\n";
}

}  // namespace darec

#pragma once

#include <cstdint>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include "darec/harness.hpp"
#include "darec/kv.hpp"

namespace darec {

// A full experiment description: where the data comes from (an aligned
// dataset file, or the synthetic generator) and how to train.
struct ExperimentSpec {
    std::optional<std::string> data_file;
    SynthConfig synth;
    TrainConfig train;
};

namespace config_detail {

inline const std::set<std::string>& known_keys() {
    static const std::set<std::string> keys = {
        "data.file",
        "synth.users", "synth.source_items", "synth.target_items", "synth.rank",
        "synth.rho", "synth.source_density", "synth.target_density", "synth.noise",
        "train.variant", "train.orientation", "train.k", "train.alpha", "train.beta",
        "train.mu", "train.lambda", "train.extractor_width", "train.lr", "train.batch",
        "train.epochs", "train.autorec_lr", "train.autorec_batch", "train.autorec_epochs",
        "train.train_frac", "train.val_frac", "train.seed", "train.predict_from",
        "train.early_stop", "train.shared_autorec",
    };
    return keys;
}

inline double to_double(const std::string& key, const std::string& v) {
    try {
        std::size_t pos = 0;
        const double d = std::stod(v, &pos);
        if (pos != v.size()) throw std::invalid_argument("");
        return d;
    } catch (const std::exception&) {
        throw std::runtime_error("config: key '" + key + "' needs a number, got '" + v + "'");
    }
}

inline std::size_t to_count(const std::string& key, const std::string& v) {
    try {
        std::size_t pos = 0;
        const long long n = std::stoll(v, &pos);
        if (pos != v.size() || n < 0) throw std::invalid_argument("");
        return static_cast<std::size_t>(n);
    } catch (const std::exception&) {
        throw std::runtime_error("config: key '" + key + "' needs a non-negative integer, got '" +
                                 v + "'");
    }
}

inline std::uint64_t to_seed(const std::string& key, const std::string& v) {
    try {
        std::size_t pos = 0;
        const unsigned long long n = std::stoull(v, &pos);
        if (pos != v.size()) throw std::invalid_argument("");
        return n;
    } catch (const std::exception&) {
        throw std::runtime_error("config: key '" + key + "' needs an integer seed, got '" + v +
                                 "'");
    }
}

inline bool to_bool(const std::string& key, const std::string& v) {
    if (v == "true" || v == "1") return true;
    if (v == "false" || v == "0") return false;
    throw std::runtime_error("config: key '" + key + "' needs true/false, got '" + v + "'");
}

}  // namespace config_detail

// Builds an ExperimentSpec from parsed key=values; rejects unknown keys and
// reports the offending key on every failure. Orientation and predict_from
// default from the variant when not given explicitly.
inline ExperimentSpec experiment_from_key_values(const KeyValueFile& kv) {
    namespace cd = config_detail;
    for (const auto& [k, v] : kv.entries)
        if (!cd::known_keys().contains(k))
            throw std::runtime_error("config: unknown key '" + k + "'");

    ExperimentSpec spec;
    bool orientation_given = false;
    bool predict_from_given = false;
    for (const auto& [k, v] : kv.entries) {
        if (k == "data.file") spec.data_file = v;
        else if (k == "synth.users") spec.synth.n_users = cd::to_count(k, v);
        else if (k == "synth.source_items") spec.synth.n_items_src = cd::to_count(k, v);
        else if (k == "synth.target_items") spec.synth.n_items_tgt = cd::to_count(k, v);
        else if (k == "synth.rank") spec.synth.rank = cd::to_count(k, v);
        else if (k == "synth.rho") spec.synth.rho = cd::to_double(k, v);
        else if (k == "synth.source_density") spec.synth.density_src = cd::to_double(k, v);
        else if (k == "synth.target_density") spec.synth.density_tgt = cd::to_double(k, v);
        else if (k == "synth.noise") spec.synth.noise = cd::to_double(k, v);
        else if (k == "train.variant") spec.train.variant = variant_from_name(v);
        else if (k == "train.orientation") {
            orientation_given = true;
            if (v == "user") spec.train.orientation = Orientation::User;
            else if (v == "item") spec.train.orientation = Orientation::Item;
            else throw std::runtime_error("config: key 'train.orientation' needs user|item");
        } else if (k == "train.k") spec.train.k = cd::to_count(k, v);
        else if (k == "train.alpha") spec.train.alpha = cd::to_double(k, v);
        else if (k == "train.beta") spec.train.beta = cd::to_double(k, v);
        else if (k == "train.mu") spec.train.mu = cd::to_double(k, v);
        else if (k == "train.lambda") spec.train.lambda = cd::to_double(k, v);
        else if (k == "train.extractor_width") spec.train.extractor_width = cd::to_count(k, v);
        else if (k == "train.lr") spec.train.lr = cd::to_double(k, v);
        else if (k == "train.batch") spec.train.batch = cd::to_count(k, v);
        else if (k == "train.epochs") spec.train.epochs = cd::to_count(k, v);
        else if (k == "train.autorec_lr") spec.train.autorec_lr = cd::to_double(k, v);
        else if (k == "train.autorec_batch") spec.train.autorec_batch = cd::to_count(k, v);
        else if (k == "train.autorec_epochs") spec.train.autorec_epochs = cd::to_count(k, v);
        else if (k == "train.train_frac") spec.train.train_frac = cd::to_double(k, v);
        else if (k == "train.val_frac") spec.train.val_frac = cd::to_double(k, v);
        else if (k == "train.seed") spec.train.seed = cd::to_seed(k, v);
        else if (k == "train.predict_from") {
            predict_from_given = true;
            if (v == "own") spec.train.predict_from = PredictFrom::Own;
            else if (v == "cross") spec.train.predict_from = PredictFrom::Cross;
            else throw std::runtime_error("config: key 'train.predict_from' needs own|cross");
        } else if (k == "train.early_stop") spec.train.early_stop = cd::to_bool(k, v);
        else if (k == "train.shared_autorec") spec.train.shared_autorec = cd::to_bool(k, v);
    }
    if (!orientation_given)
        spec.train.orientation =
            spec.train.variant == Variant::U ? Orientation::User : Orientation::Item;
    if (!predict_from_given)
        spec.train.predict_from =
            spec.train.variant == Variant::U ? PredictFrom::Cross : PredictFrom::Own;
    spec.synth.seed = spec.train.seed;
    spec.train.validate();
    spec.synth.validate();
    return spec;
}

// `key=value` strings from the command line; applied after the file.
inline void apply_overrides(KeyValueFile& kv, const std::vector<std::string>& overrides) {
    for (const std::string& ov : overrides) {
        const auto eq = ov.find('=');
        if (eq == std::string::npos || eq == 0)
            throw std::runtime_error("config: --set expects key=value, got '" + ov + "'");
        kv.set(kv_detail::trim(ov.substr(0, eq)), kv_detail::trim(ov.substr(eq + 1)));
    }
}

// The fully resolved configuration, written next to every run's outputs.
inline KeyValueFile resolved_key_values(const ExperimentSpec& spec) {
    KeyValueFile kv;
    if (spec.data_file) kv.set("data.file", *spec.data_file);
    kv.set("synth.users", std::to_string(spec.synth.n_users));
    kv.set("synth.source_items", std::to_string(spec.synth.n_items_src));
    kv.set("synth.target_items", std::to_string(spec.synth.n_items_tgt));
    kv.set("synth.rank", std::to_string(spec.synth.rank));
    kv.set("synth.rho", format_double(spec.synth.rho));
    kv.set("synth.source_density", format_double(spec.synth.density_src));
    kv.set("synth.target_density", format_double(spec.synth.density_tgt));
    kv.set("synth.noise", format_double(spec.synth.noise));
    const TrainConfig& t = spec.train;
    kv.set("train.variant", variant_name(t.variant));
    kv.set("train.orientation", orientation_name(t.orientation));
    kv.set("train.k", std::to_string(t.k));
    kv.set("train.alpha", format_double(t.alpha));
    kv.set("train.beta", format_double(t.beta));
    kv.set("train.mu", format_double(t.mu));
    kv.set("train.lambda", format_double(t.lambda));
    kv.set("train.extractor_width", std::to_string(t.extractor_width));
    kv.set("train.lr", format_double(t.lr));
    kv.set("train.batch", std::to_string(t.batch));
    kv.set("train.epochs", std::to_string(t.epochs));
    kv.set("train.autorec_lr", format_double(t.autorec_lr));
    kv.set("train.autorec_batch", std::to_string(t.autorec_batch));
    kv.set("train.autorec_epochs", std::to_string(t.autorec_epochs));
    kv.set("train.train_frac", format_double(t.train_frac));
    kv.set("train.val_frac", format_double(t.val_frac));
    kv.set("train.seed", std::to_string(t.seed));
    kv.set("train.predict_from", t.predict_from == PredictFrom::Own ? "own" : "cross");
    kv.set("train.early_stop", t.early_stop ? "true" : "false");
    kv.set("train.shared_autorec", t.shared_autorec ? "true" : "false");
    return kv;
}

}  // namespace darec

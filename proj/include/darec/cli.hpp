#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <map>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "darec/config.hpp"
#include "darec/gradcheck.hpp"
#include "darec/harness.hpp"

namespace darec::cli {

inline void print_stats_table(const data::AlignedDataset& ds, std::ostream& os) {
    const auto s = data::stats(ds.source);
    const auto t = data::stats(ds.target);
    auto row = [&](const char* name, const data::Stats& st) {
        char sparsity[16];
        std::snprintf(sparsity, sizeof sparsity, "%.2f%%", st.sparsity * 100.0);
        os << std::left << std::setw(8) << name << std::right << std::setw(8) << st.users
           << std::setw(10) << st.items << std::setw(10) << st.ratings << std::setw(10)
           << sparsity << "\n";
    };
    os << std::left << std::setw(8) << "domain" << std::right << std::setw(8) << "users"
       << std::setw(10) << "items" << std::setw(10) << "ratings" << std::setw(10)
       << "sparsity" << "\n";
    row("source", s);
    row("target", t);
}

// --- ingest -------------------------------------------------------------------

struct IngestArgs {
    std::string source_csv;
    std::string target_csv;
    std::string out_path;
    std::size_t min_ratings = 5;
    bool header = false;
    data::FilterOrder filter_order = data::FilterOrder::AfterIntersection;
    data::RatingScale scale;
};

inline int cmd_ingest(const IngestArgs& args, std::ostream& out, std::ostream& err) {
    try {
        data::IngestOptions opts;
        opts.scale = args.scale;
        opts.skip_header = args.header;
        const auto src = data::ingest_csv(args.source_csv, opts);
        const auto tgt = data::ingest_csv(args.target_csv, opts);
        const auto ds = data::align_domains(src, tgt, args.min_ratings, args.filter_order);
        data::save_aligned_dataset(ds, args.out_path);
        print_stats_table(ds, out);
        return 0;
    } catch (const std::exception& e) {
        err << "ingest: " << e.what() << "\n";
        return 1;
    }
}

// --- stats --------------------------------------------------------------------

inline int cmd_stats(const std::string& dataset_path, std::ostream& out, std::ostream& err) {
    try {
        const auto ds = data::load_aligned_dataset(dataset_path);
        print_stats_table(ds, out);
        return 0;
    } catch (const std::exception& e) {
        err << "stats: " << e.what() << "\n";
        return 1;
    }
}

// --- synth --------------------------------------------------------------------

struct SynthArgs {
    SynthConfig synth;
    std::string out_path;
};

inline int cmd_synth(const SynthArgs& args, std::ostream& out, std::ostream& err) {
    try {
        SynthDiagnostics diag;
        const auto ds = synth_generate(args.synth, &diag);
        data::save_aligned_dataset(ds, args.out_path);
        print_stats_table(ds, out);
        if (diag.resampled_users_src || diag.resampled_users_tgt)
            err << "synth: forced one rating for " << diag.resampled_users_src << " source / "
                << diag.resampled_users_tgt << " target users with empty rows\n";
        return 0;
    } catch (const std::exception& e) {
        err << "synth: " << e.what() << "\n";
        return 1;
    }
}

// --- run ----------------------------------------------------------------------

struct RunArgs {
    std::string config_path;
    std::vector<std::string> overrides;
    std::optional<std::uint64_t> seed;
    std::string out_dir = "darec-out";
    bool save_checkpoints = true;
};

namespace detail {

inline ExperimentSpec load_spec(const RunArgs& args) {
    KeyValueFile kv = load_key_values(args.config_path);
    apply_overrides(kv, args.overrides);
    if (args.seed) kv.set("train.seed", std::to_string(*args.seed));
    return experiment_from_key_values(kv);
}

inline data::AlignedDataset load_or_generate(const ExperimentSpec& spec, std::ostream& err) {
    if (spec.data_file) return data::load_aligned_dataset(*spec.data_file);
    SynthDiagnostics diag;
    auto ds = synth_generate(spec.synth, &diag);
    if (diag.resampled_users_src || diag.resampled_users_tgt)
        err << "synth: forced one rating for " << diag.resampled_users_src << " source / "
            << diag.resampled_users_tgt << " target users with empty rows\n";
    return ds;
}

inline void write_run_outputs(const ExperimentSpec& spec, const Report& rep,
                              const ExperimentArtifacts& artifacts,
                              const data::AlignedDataset& ds, const std::string& out_dir,
                              bool save_checkpoints) {
    namespace fs = std::filesystem;
    fs::create_directories(out_dir);
    const auto path = [&](const char* name) { return (fs::path(out_dir) / name).string(); };

    save_key_values(resolved_key_values(spec), path("config.resolved.cfg"));
    {
        std::ofstream os(path("report.txt"), std::ios::trunc);
        write_report_text(rep, os);
    }
    {
        std::ofstream os(path("report.csv"), std::ios::trunc);
        os << report_csv_header() << "\n" << report_csv_row(rep) << "\n";
    }
    if (!save_checkpoints) return;
    save_autorec(artifacts.autorec_source, path("autorec_source.ckpt"));
    save_autorec(artifacts.autorec_target, path("autorec_target.ckpt"));
    save_darec(artifacts.darec, rep.config.weights(), path("darec.ckpt"));
    const bool user_oriented = rep.config.orientation == Orientation::User;
    save_embeddings(artifacts.emb_source,
                    user_oriented ? ds.source.user_ids : ds.source.item_ids,
                    path("embeddings_source.ckpt"));
    save_embeddings(artifacts.emb_target,
                    user_oriented ? ds.target.user_ids : ds.target.item_ids,
                    path("embeddings_target.ckpt"));
}

}  // namespace detail

inline int cmd_run(const RunArgs& args, std::ostream& out, std::ostream& err) {
    ExperimentSpec spec;
    try {
        spec = detail::load_spec(args);
    } catch (const std::exception& e) {
        err << "run: " << e.what() << "\n";
        return 2;  // configuration problem
    }
    try {
        const auto ds = detail::load_or_generate(spec, err);
        ExperimentArtifacts artifacts;
        const Report rep = run_experiment(spec.train, ds, &artifacts);
        detail::write_run_outputs(spec, rep, artifacts, ds, args.out_dir,
                                  args.save_checkpoints);
        write_report_text(rep, out);
        return 0;
    } catch (const std::exception& e) {
        err << "run: " << e.what() << "\n";
        return 1;
    }
}

// --- sweep --------------------------------------------------------------------

struct SweepArgs {
    std::string config_path;
    std::vector<std::string> overrides;
    std::optional<std::uint64_t> seed;
    std::string out_dir = "darec-out";
    std::string axis = "k";
    std::vector<double> values;
    std::size_t seeds = 5;
};

inline int cmd_sweep(const SweepArgs& args, std::ostream& out, std::ostream& err) {
    ExperimentSpec spec;
    try {
        RunArgs ra;
        ra.config_path = args.config_path;
        ra.overrides = args.overrides;
        ra.seed = args.seed;
        spec = detail::load_spec(ra);
        if (args.values.empty()) throw std::runtime_error("sweep: no axis values given");
        if (args.seeds < 1) throw std::runtime_error("sweep: --seeds must be >= 1");
    } catch (const std::exception& e) {
        err << "sweep: " << e.what() << "\n";
        return 2;
    }
    try {
        namespace fs = std::filesystem;
        fs::create_directories(args.out_dir);
        save_key_values(resolved_key_values(spec),
                        (fs::path(args.out_dir) / "config.resolved.cfg").string());
        std::ofstream csv((fs::path(args.out_dir) / "sweep.csv").string(), std::ios::trunc);
        csv << report_csv_header() << "\n";

        // point -> per-seed target RMSE
        std::map<double, std::vector<double>> by_point;
        for (std::size_t s = 0; s < args.seeds; ++s) {
            ExperimentSpec run_spec = spec;
            run_spec.train.seed = spec.train.seed + s;
            run_spec.synth.seed = run_spec.train.seed;
            const auto ds = detail::load_or_generate(run_spec, err);
            const auto reports = sweep_axis(run_spec.train, args.axis, args.values, ds);
            for (std::size_t i = 0; i < reports.size(); ++i) {
                csv << report_csv_row(reports[i]) << "\n";
                by_point[args.values[i]].push_back(reports[i].rmse_target);
            }
        }
        for (const auto& [value, rmses] : by_point) {
            double mean = 0.0;
            for (double r : rmses) mean += r;
            mean /= static_cast<double>(rmses.size());
            double var = 0.0;
            for (double r : rmses) var += (r - mean) * (r - mean);
            const double stddev =
                rmses.size() > 1 ? std::sqrt(var / static_cast<double>(rmses.size() - 1)) : 0.0;
            out << args.axis << "=" << format_double(value)
                << "  rmse_target mean=" << format_double(mean)
                << " std=" << format_double(stddev) << " (" << rmses.size() << " seeds)\n";
        }
        return 0;
    } catch (const std::exception& e) {
        err << "sweep: " << e.what() << "\n";
        return 1;
    }
}

// --- gradcheck ------------------------------------------------------------------

struct GradcheckArgs {
    std::uint64_t seed = 1;
    std::size_t rounds = 3;
    std::string corrupt;  // test hook: component name whose gradient is damaged
};

inline int cmd_gradcheck(const GradcheckArgs& args, std::ostream& out, std::ostream& err) {
    constexpr double kRelTol = 1e-4;
    constexpr double kOracleTol = 1e-12;
    const double h = 1e-5;
    bool all_ok = true;
    auto report = [&](const std::string& component, double value, double tol) {
        const bool ok = value < tol;
        all_ok = all_ok && ok;
        out << (ok ? "PASS" : "FAIL") << "  " << std::left << std::setw(24) << component
            << " max error " << format_double(value) << "  (tolerance " << format_double(tol)
            << ")\n";
        if (!ok) err << "gradcheck: component '" << component << "' exceeded tolerance\n";
    };
    try {
        auto corruption = [&](const char* name) {
            return args.corrupt == name ? 1.0 : 0.0;
        };
        double autorec_err = 0.0, u_err = 0.0, i_err = 0.0, oracle = 0.0;
        for (std::size_t r = 0; r < args.rounds; ++r) {
            const std::uint64_t s = args.seed + r;
            autorec_err = std::max(autorec_err,
                                   check::gradcheck_autorec(s, h, corruption("autorec_loss")));
            u_err = std::max(
                u_err, check::gradcheck_udarec(s, h, corruption("udarec_loss")).max());
            i_err = std::max(i_err, check::gradcheck_idarec(s, h, corruption("idarec_loss")));
            for (double mu : {0.0, 0.5, 1.0, 10.0})
                oracle = std::max(
                    oracle, check::grl_oracle_max_abs_diff(s, mu, corruption("grl_oracle")));
        }
        report("autorec_loss", autorec_err, kRelTol);
        report("udarec_loss", u_err, kRelTol);
        report("idarec_loss", i_err, kRelTol);
        report("grl_oracle", oracle, kOracleTol);
        return all_ok ? 0 : 1;
    } catch (const std::exception& e) {
        err << "gradcheck: " << e.what() << "\n";
        return 1;
    }
}

}  // namespace darec::cli

// Command-line front end: ingest, stats, synth, run, sweep, gradcheck.

#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "darec/cli.hpp"

namespace {

std::vector<double> parse_value_list(const std::string& csv) {
    std::vector<double> out;
    std::stringstream ss(csv);
    std::string tok;
    while (std::getline(ss, tok, ',')) {
        if (tok.empty()) continue;
        out.push_back(std::stod(tok));
    }
    return out;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"darec - cross-domain rating prediction from rating matrices only"};
    app.require_subcommand(1);

    // ingest
    darec::cli::IngestArgs ingest;
    std::string ingest_order = "after";
    auto* c_ingest = app.add_subcommand(
        "ingest", "Align two rating CSV files over their shared users");
    c_ingest->add_option("--source", ingest.source_csv, "source-domain CSV")->required();
    c_ingest->add_option("--target", ingest.target_csv, "target-domain CSV")->required();
    c_ingest->add_option("--out", ingest.out_path, "aligned dataset output file")->required();
    c_ingest->add_option("--min-ratings", ingest.min_ratings,
                         "keep users with at least this many ratings per domain");
    c_ingest->add_flag("--header", ingest.header, "skip the first CSV line");
    c_ingest->add_option("--filter-order", ingest_order,
                         "apply the min-ratings filter before|after intersecting users")
        ->check(CLI::IsMember({"before", "after"}));
    c_ingest->add_option("--scale-min", ingest.scale.min, "rating scale lower bound");
    c_ingest->add_option("--scale-max", ingest.scale.max, "rating scale upper bound");

    // stats
    std::string stats_path;
    auto* c_stats = app.add_subcommand("stats", "Print dataset statistics");
    c_stats->add_option("--data", stats_path, "aligned dataset file")->required();

    // synth
    darec::cli::SynthArgs synth;
    auto* c_synth = app.add_subcommand("synth", "Generate a synthetic aligned dataset");
    c_synth->add_option("--out", synth.out_path, "output file")->required();
    c_synth->add_option("--users", synth.synth.n_users, "user count");
    c_synth->add_option("--source-items", synth.synth.n_items_src, "source item count");
    c_synth->add_option("--target-items", synth.synth.n_items_tgt, "target item count");
    c_synth->add_option("--rank", synth.synth.rank, "latent rank");
    c_synth->add_option("--rho", synth.synth.rho, "cross-domain correlation in [0,1]");
    c_synth->add_option("--source-density", synth.synth.density_src, "observation density");
    c_synth->add_option("--target-density", synth.synth.density_tgt, "observation density");
    c_synth->add_option("--noise", synth.synth.noise, "rating noise sigma");
    c_synth->add_option("--seed", synth.synth.seed, "generator seed");

    // run
    darec::cli::RunArgs run;
    std::optional<std::uint64_t> run_seed;
    auto* c_run = app.add_subcommand("run", "Run one experiment from a config file");
    c_run->add_option("--config", run.config_path, "config file")->required();
    c_run->add_option("--out", run.out_dir, "output directory");
    c_run->add_option("--seed", run_seed, "override train.seed");
    c_run->add_option("--set", run.overrides, "override a config key, key=value")
        ->take_all();
    c_run->add_flag("!--no-checkpoints", run.save_checkpoints, "skip checkpoint files");

    // sweep
    darec::cli::SweepArgs sweep;
    std::optional<std::uint64_t> sweep_seed;
    std::string sweep_values;
    auto* c_sweep = app.add_subcommand("sweep", "Sweep one config axis over several seeds");
    c_sweep->add_option("--config", sweep.config_path, "config file")->required();
    c_sweep->add_option("--axis", sweep.axis, "config axis to vary (e.g. k)");
    c_sweep->add_option("--values", sweep_values, "comma-separated axis values")->required();
    c_sweep->add_option("--seeds", sweep.seeds, "number of seeds per point");
    c_sweep->add_option("--out", sweep.out_dir, "output directory");
    c_sweep->add_option("--seed", sweep_seed, "base seed (overrides train.seed)");
    c_sweep->add_option("--set", sweep.overrides, "override a config key, key=value")
        ->take_all();

    // gradcheck
    darec::cli::GradcheckArgs gradcheck;
    auto* c_gc = app.add_subcommand("gradcheck", "Verify analytic gradients and GRL wiring");
    c_gc->add_option("--seed", gradcheck.seed, "base seed");
    c_gc->add_option("--rounds", gradcheck.rounds, "random instances per component");
    c_gc->add_option("--corrupt", gradcheck.corrupt,
                     "testing aid: damage one component's analytic gradient");

    CLI11_PARSE(app, argc, argv);

    if (*c_ingest) {
        ingest.filter_order = ingest_order == "after"
                                  ? darec::data::FilterOrder::AfterIntersection
                                  : darec::data::FilterOrder::BeforeIntersection;
        return darec::cli::cmd_ingest(ingest, std::cout, std::cerr);
    }
    if (*c_stats) return darec::cli::cmd_stats(stats_path, std::cout, std::cerr);
    if (*c_synth) return darec::cli::cmd_synth(synth, std::cout, std::cerr);
    if (*c_run) {
        run.seed = run_seed;
        return darec::cli::cmd_run(run, std::cout, std::cerr);
    }
    if (*c_sweep) {
        sweep.seed = sweep_seed;
        try {
            sweep.values = parse_value_list(sweep_values);
        } catch (const std::exception&) {
            std::cerr << "sweep: --values expects comma-separated numbers\n";
            return 2;
        }
        return darec::cli::cmd_sweep(sweep, std::cout, std::cerr);
    }
    if (*c_gc) return darec::cli::cmd_gradcheck(gradcheck, std::cout, std::cerr);
    return 2;
}

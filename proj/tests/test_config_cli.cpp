#include <catch2/catch_amalgamated.hpp>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "darec/cli.hpp"
#include "darec/config.hpp"

using namespace darec;
namespace fs = std::filesystem;

namespace {

std::string write_temp(const char* name, const std::string& body) {
    const std::string path = (fs::temp_directory_path() / name).string();
    std::ofstream os(path, std::ios::trunc);
    os << body;
    return path;
}

std::string slurp(const std::string& path) {
    std::ifstream is(path);
    std::stringstream ss;
    ss << is.rdbuf();
    return ss.str();
}

}  // namespace

TEST_CASE("key=value parser handles sections, comments and overrides") {
    std::istringstream is(
        "# leading comment\n"
        "[train]\n"
        "k = 16   # trailing comment\n"
        "lr = 0.01\n"
        "[synth]\n"
        "users = 10\n");
    const auto kv = parse_key_values(is, "test");
    CHECK(*kv.find("train.k") == "16");
    CHECK(*kv.find("train.lr") == "0.01");
    CHECK(*kv.find("synth.users") == "10");
    CHECK(kv.find("k") == nullptr);
}

TEST_CASE("key=value parser reports malformed lines") {
    std::istringstream is("[train\n");
    CHECK_THROWS_AS(parse_key_values(is, "test"), std::runtime_error);
    std::istringstream is2("justaword\n");
    CHECK_THROWS_AS(parse_key_values(is2, "test"), std::runtime_error);
}

TEST_CASE("experiment config rejects unknown keys by name") {
    KeyValueFile kv;
    kv.set("train.kk", "8");
    try {
        experiment_from_key_values(kv);
        FAIL("expected rejection");
    } catch (const std::runtime_error& e) {
        CHECK(std::string(e.what()).find("train.kk") != std::string::npos);
    }
}

TEST_CASE("experiment config derives orientation and predict_from from the variant") {
    KeyValueFile kv;
    kv.set("train.variant", "I");
    const auto spec = experiment_from_key_values(kv);
    CHECK(spec.train.orientation == Orientation::Item);
    CHECK(spec.train.predict_from == PredictFrom::Own);
    KeyValueFile kv2;
    kv2.set("train.variant", "U");
    const auto spec2 = experiment_from_key_values(kv2);
    CHECK(spec2.train.orientation == Orientation::User);
    CHECK(spec2.train.predict_from == PredictFrom::Cross);
}

TEST_CASE("experiment config rejects a variant/orientation mismatch") {
    KeyValueFile kv;
    kv.set("train.variant", "I");
    kv.set("train.orientation", "user");
    try {
        experiment_from_key_values(kv);
        FAIL("expected rejection");
    } catch (const std::invalid_argument& e) {
        CHECK(std::string(e.what()).find("orientation") != std::string::npos);
    }
}

TEST_CASE("experiment config validates value types naming the key") {
    KeyValueFile kv;
    kv.set("train.k", "eight");
    try {
        experiment_from_key_values(kv);
        FAIL("expected rejection");
    } catch (const std::runtime_error& e) {
        CHECK(std::string(e.what()).find("train.k") != std::string::npos);
    }
}

TEST_CASE("resolved config round-trips") {
    KeyValueFile kv;
    kv.set("train.variant", "I");
    kv.set("train.k", "24");
    kv.set("train.beta", "0.125");
    kv.set("synth.rho", "0.75");
    const auto spec = experiment_from_key_values(kv);
    const auto resolved = resolved_key_values(spec);
    const auto spec2 = experiment_from_key_values(resolved);
    CHECK(spec2.train.k == 24);
    CHECK(spec2.train.beta == 0.125);
    CHECK(spec2.train.variant == Variant::I);
    CHECK(spec2.synth.rho == 0.75);
    CHECK(spec2.train.orientation == Orientation::Item);
}

TEST_CASE("apply_overrides layers --set values over the file") {
    KeyValueFile kv;
    kv.set("train.k", "8");
    apply_overrides(kv, {"train.k=32", "train.mu = 2.5"});
    CHECK(*kv.find("train.k") == "32");
    CHECK(*kv.find("train.mu") == "2.5");
    CHECK_THROWS_AS(apply_overrides(kv, {"no-equals"}), std::runtime_error);
}

TEST_CASE("cmd_ingest aligns two fixtures and prints the stats table") {
    const auto src = write_temp("darec_cli_src.csv",
                                "alice,apple,5\n"
                                "alice,banana,3\n"
                                "bob,apple,4\n"
                                "carol,apple,2\n");
    const auto tgt = write_temp("darec_cli_tgt.csv",
                                "alice,x1,1\n"
                                "bob,x1,5\n"
                                "bob,x2,4\n"
                                "dave,x2,3\n");
    const auto out_path = (fs::temp_directory_path() / "darec_cli_aligned.txt").string();
    cli::IngestArgs args;
    args.source_csv = src;
    args.target_csv = tgt;
    args.out_path = out_path;
    args.min_ratings = 1;
    std::ostringstream out, err;
    REQUIRE(cli::cmd_ingest(args, out, err) == 0);
    // alice and bob survive; 3 source ratings over 2 items, 3 target over 2.
    const std::string golden =
        "domain     users     items   ratings  sparsity\n"
        "source         2         2         3    25.00%\n"
        "target         2         2         3    25.00%\n";
    CHECK(out.str() == golden);

    const std::string bytes1 = slurp(out_path);
    std::ostringstream out2, err2;
    REQUIRE(cli::cmd_ingest(args, out2, err2) == 0);
    CHECK(slurp(out_path) == bytes1);  // rerun is byte-identical

    const auto ds = data::load_aligned_dataset(out_path);
    CHECK(ds.source.user_ids == std::vector<std::string>{"alice", "bob"});

    std::ostringstream sout, serr;
    REQUIRE(cli::cmd_stats(out_path, sout, serr) == 0);
    CHECK(sout.str() == golden);

    fs::remove(src);
    fs::remove(tgt);
    fs::remove(out_path);
}

TEST_CASE("cmd_ingest fails cleanly on disjoint user sets") {
    const auto src = write_temp("darec_cli_src2.csv", "a,i,3\n");
    const auto tgt = write_temp("darec_cli_tgt2.csv", "b,j,4\n");
    cli::IngestArgs args;
    args.source_csv = src;
    args.target_csv = tgt;
    args.out_path = (fs::temp_directory_path() / "darec_cli_aligned2.txt").string();
    args.min_ratings = 1;
    std::ostringstream out, err;
    CHECK(cli::cmd_ingest(args, out, err) == 1);
    CHECK(err.str().find("disjoint") != std::string::npos);
    fs::remove(src);
    fs::remove(tgt);
}

TEST_CASE("cmd_synth writes a loadable dataset") {
    cli::SynthArgs args;
    args.synth.n_users = 20;
    args.synth.n_items_src = 10;
    args.synth.n_items_tgt = 10;
    args.synth.density_src = 0.3;
    args.synth.density_tgt = 0.3;
    args.out_path = (fs::temp_directory_path() / "darec_cli_synth.txt").string();
    std::ostringstream out, err;
    REQUIRE(cli::cmd_synth(args, out, err) == 0);
    const auto ds = data::load_aligned_dataset(args.out_path);
    CHECK(ds.source.n_users == 20);
    fs::remove(args.out_path);
}

TEST_CASE("cmd_run writes reports, checkpoints and the resolved config") {
    const auto cfg = write_temp("darec_cli_run.cfg",
                                "[synth]\n"
                                "users = 30\nsource_items = 15\ntarget_items = 15\n"
                                "source_density = 0.4\ntarget_density = 0.25\n"
                                "[train]\n"
                                "variant = U\nk = 6\nextractor_width = 8\n"
                                "epochs = 8\nautorec_epochs = 15\nseed = 3\n");
    const auto out_dir = (fs::temp_directory_path() / "darec_cli_run_out").string();
    fs::remove_all(out_dir);
    cli::RunArgs args;
    args.config_path = cfg;
    args.out_dir = out_dir;
    std::ostringstream out, err;
    REQUIRE(cli::cmd_run(args, out, err) == 0);
    CHECK(out.str().find("rmse target") != std::string::npos);
    for (const char* name :
         {"report.txt", "report.csv", "config.resolved.cfg", "darec.ckpt",
          "darec.ckpt.manifest", "autorec_source.ckpt", "autorec_target.ckpt",
          "embeddings_source.ckpt", "embeddings_source.ckpt.ids", "embeddings_target.ckpt"})
        CHECK(fs::exists(fs::path(out_dir) / name));
    const std::string csv = slurp((fs::path(out_dir) / "report.csv").string());
    CHECK(csv.find(report_csv_header()) == 0);
    // Resolved config reloads to the same experiment.
    const auto resolved =
        load_key_values((fs::path(out_dir) / "config.resolved.cfg").string());
    const auto spec = experiment_from_key_values(resolved);
    CHECK(spec.train.k == 6);
    CHECK(spec.train.seed == 3);
    fs::remove(cfg);
    fs::remove_all(out_dir);
}

TEST_CASE("cmd_run rejects a bad config with exit code 2") {
    const auto cfg = write_temp("darec_cli_run_bad.cfg",
                                "[train]\nvariant = I\norientation = user\n");
    cli::RunArgs args;
    args.config_path = cfg;
    std::ostringstream out, err;
    CHECK(cli::cmd_run(args, out, err) == 2);
    CHECK(err.str().find("orientation") != std::string::npos);
    fs::remove(cfg);

    cli::RunArgs missing;
    missing.config_path = (fs::temp_directory_path() / "darec_no_such.cfg").string();
    std::ostringstream out2, err2;
    CHECK(cli::cmd_run(missing, out2, err2) == 2);
}

TEST_CASE("cmd_run honors --set overrides and --seed") {
    const auto cfg = write_temp("darec_cli_run_ov.cfg",
                                "[synth]\nusers = 25\nsource_items = 12\ntarget_items = 12\n"
                                "source_density = 0.4\ntarget_density = 0.3\n"
                                "[train]\nvariant = U\nk = 4\nextractor_width = 6\n"
                                "epochs = 5\nautorec_epochs = 10\n");
    const auto out_dir = (fs::temp_directory_path() / "darec_cli_run_ov_out").string();
    fs::remove_all(out_dir);
    cli::RunArgs args;
    args.config_path = cfg;
    args.out_dir = out_dir;
    args.overrides = {"train.k=5"};
    args.seed = 99;
    std::ostringstream out, err;
    REQUIRE(cli::cmd_run(args, out, err) == 0);
    const auto resolved =
        load_key_values((fs::path(out_dir) / "config.resolved.cfg").string());
    CHECK(*resolved.find("train.k") == "5");
    CHECK(*resolved.find("train.seed") == "99");
    fs::remove(cfg);
    fs::remove_all(out_dir);
}

TEST_CASE("cmd_gradcheck passes by default and fails under the corruption hook") {
    std::ostringstream out, err;
    cli::GradcheckArgs args;
    args.rounds = 1;
    REQUIRE(cli::cmd_gradcheck(args, out, err) == 0);
    CHECK(out.str().find("PASS  autorec_loss") != std::string::npos);
    CHECK(out.str().find("FAIL") == std::string::npos);

    cli::GradcheckArgs bad;
    bad.rounds = 1;
    bad.corrupt = "idarec_loss";
    std::ostringstream out2, err2;
    CHECK(cli::cmd_gradcheck(bad, out2, err2) == 1);
    CHECK(out2.str().find("FAIL  idarec_loss") != std::string::npos);
    CHECK(err2.str().find("idarec_loss") != std::string::npos);
}

TEST_CASE("cmd_gradcheck is reproducible per seed") {
    cli::GradcheckArgs args;
    args.rounds = 1;
    std::ostringstream a, b, err;
    cli::cmd_gradcheck(args, a, err);
    cli::cmd_gradcheck(args, b, err);
    CHECK(a.str() == b.str());
}

TEST_CASE("cmd_sweep emits one csv row per point per seed") {
    const auto cfg = write_temp("darec_cli_sweep.cfg",
                                "[synth]\nusers = 25\nsource_items = 12\ntarget_items = 12\n"
                                "source_density = 0.4\ntarget_density = 0.3\n"
                                "[train]\nvariant = U\nk = 4\nextractor_width = 6\n"
                                "epochs = 5\nautorec_epochs = 10\n");
    const auto out_dir = (fs::temp_directory_path() / "darec_cli_sweep_out").string();
    fs::remove_all(out_dir);
    cli::SweepArgs args;
    args.config_path = cfg;
    args.out_dir = out_dir;
    args.axis = "k";
    args.values = {4.0, 6.0};
    args.seeds = 2;
    std::ostringstream out, err;
    REQUIRE(cli::cmd_sweep(args, out, err) == 0);
    const std::string csv = slurp((fs::path(out_dir) / "sweep.csv").string());
    std::size_t rows = 0;
    for (char c : csv)
        if (c == '\n') ++rows;
    CHECK(rows == 5);  // header + 2 points x 2 seeds
    CHECK(out.str().find("k=4") != std::string::npos);
    CHECK(out.str().find("k=6") != std::string::npos);
    CHECK(out.str().find("mean=") != std::string::npos);
    fs::remove(cfg);
    fs::remove_all(out_dir);
}

#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <random>

#include "darec/harness.hpp"

using namespace darec;

TEST_CASE("rmse basics") {
    std::vector<std::pair<double, double>> same = {{2.0, 2.0}, {4.5, 4.5}};
    CHECK(rmse(same) == 0.0);
    std::vector<std::pair<double, double>> pairs = {{1.0, 2.0}, {3.0, 5.0}};
    CHECK_THAT(rmse(pairs), Catch::Matchers::WithinAbs(std::sqrt(2.5), 1e-15));
    CHECK_THROWS_AS(rmse(std::vector<std::pair<double, double>>{}), std::invalid_argument);
}

TEST_CASE("rmse is permutation invariant") {
    std::mt19937_64 eng(3);
    std::uniform_real_distribution<double> unif(1.0, 5.0);
    std::vector<std::pair<double, double>> pairs;
    for (int i = 0; i < 50; ++i) pairs.emplace_back(unif(eng), unif(eng));
    const double before = rmse(pairs);
    std::shuffle(pairs.begin(), pairs.end(), eng);
    CHECK_THAT(rmse(pairs), Catch::Matchers::WithinAbs(before, 1e-12));
}

namespace {

std::vector<Sample> fixed_samples(std::size_t n_src, std::size_t n_tgt, std::size_t k) {
    std::vector<Sample> out;
    std::mt19937_64 eng(11);
    std::uniform_real_distribution<double> unif(-1.0, 1.0);
    for (std::size_t i = 0; i < n_src + n_tgt; ++i) {
        Sample s;
        s.domain = i < n_src ? Domain::Source : Domain::Target;
        s.embedding.resize(k);
        for (double& v : s.embedding) v = unif(eng);
        s.raw.values.assign(3, 0.0);
        s.raw.mask.assign(3, 1);
        out.push_back(std::move(s));
    }
    return out;
}

}  // namespace

TEST_CASE("classifier_accuracy on a 0.5-everywhere classifier is the source fraction") {
    const auto p = make_darec(4, 5, 3, 3, Variant::U, 1.0, 1, 0.0);  // zero net: c_hat = 0.5
    const auto samples = fixed_samples(3, 1, 4);
    CHECK(classifier_accuracy(p, samples) == 0.75);
}

TEST_CASE("label-flipped samples mirror the accuracy") {
    const auto p = make_darec(4, 5, 3, 3, Variant::U, 1.0, 2, 0.4);
    auto samples = fixed_samples(4, 6, 4);
    const double acc = classifier_accuracy(p, samples);
    for (auto& s : samples)
        s.domain = s.domain == Domain::Source ? Domain::Target : Domain::Source;
    CHECK(classifier_accuracy(p, samples) == 1.0 - acc);
}

TEST_CASE("synth latents: rho = 1 shares the user factors, rho = 0 does not") {
    SynthConfig cfg;
    cfg.n_users = 20;
    cfg.n_items_src = 10;
    cfg.n_items_tgt = 10;
    cfg.rho = 1.0;
    cfg.noise = 0.0;
    const auto l1 = synth_latents(cfg);
    CHECK(l1.users_target.data == l1.users_source.data);
    cfg.rho = 0.0;
    const auto l0 = synth_latents(cfg);
    CHECK(l0.users_target.data != l0.users_source.data);
}

TEST_CASE("synth ratings live on the half-point grid inside the scale") {
    SynthConfig cfg;
    cfg.n_users = 30;
    cfg.n_items_src = 20;
    cfg.n_items_tgt = 15;
    cfg.density_src = 0.5;
    cfg.density_tgt = 0.5;
    const auto ds = synth_generate(cfg);
    for (const auto* m : {&ds.source, &ds.target})
        for (const auto& row : m->rows)
            for (const auto& [i, r] : row) {
                CHECK(r >= 1.0);
                CHECK(r <= 5.0);
                CHECK(r * 2.0 == std::round(r * 2.0));
            }
}

TEST_CASE("synth observed count matches the density expectation") {
    SynthConfig cfg;
    cfg.n_users = 200;
    cfg.n_items_src = 100;
    cfg.n_items_tgt = 100;
    cfg.density_src = 0.05;
    cfg.density_tgt = 0.05;
    const auto ds = synth_generate(cfg);
    // 20000 Bernoulli(0.05) trials: expectation 1000, 5 sigma ~ 154, plus a
    // little inflation from the one-rating-per-user guarantee.
    CHECK(ds.source.observed_count() > 800);
    CHECK(ds.source.observed_count() < 1250);
}

TEST_CASE("synth guarantees every user at least one rating per domain") {
    SynthConfig cfg;
    cfg.n_users = 50;
    cfg.n_items_src = 20;
    cfg.n_items_tgt = 20;
    cfg.density_src = 0.001;
    cfg.density_tgt = 0.001;
    SynthDiagnostics diag;
    const auto ds = synth_generate(cfg, &diag);
    for (const auto& row : ds.source.rows) CHECK(!row.empty());
    for (const auto& row : ds.target.rows) CHECK(!row.empty());
    CHECK(diag.resampled_users_src > 0);
}

TEST_CASE("synth is deterministic per seed") {
    SynthConfig cfg;
    cfg.n_users = 25;
    cfg.n_items_src = 12;
    cfg.n_items_tgt = 14;
    cfg.seed = 77;
    const auto a = synth_generate(cfg);
    const auto b = synth_generate(cfg);
    CHECK(a.source.rows == b.source.rows);
    CHECK(a.target.rows == b.target.rows);
    cfg.seed = 78;
    const auto c = synth_generate(cfg);
    CHECK(a.source.rows != c.source.rows);
}

TEST_CASE("synth validates its configuration") {
    SynthConfig cfg;
    cfg.rho = 1.5;
    CHECK_THROWS_AS(synth_generate(cfg), std::invalid_argument);
    cfg.rho = 0.5;
    cfg.density_tgt = 0.0;
    CHECK_THROWS_AS(synth_generate(cfg), std::invalid_argument);
}

TEST_CASE("the evaluation watchdog rejects leaking splits") {
    data::DomainSplit s;
    s.train = {{0, 1, 3.0}, {1, 2, 4.0}};
    s.test = {{0, 1, 3.0}};
    CHECK_THROWS_AS(detail::assert_test_disjoint(s, "source"), std::logic_error);
    s.test = {{2, 2, 4.0}};
    CHECK_NOTHROW(detail::assert_test_disjoint(s, "source"));
}

TEST_CASE("config validation catches the documented mistakes") {
    TrainConfig cfg;
    cfg.variant = Variant::I;
    cfg.orientation = Orientation::User;
    CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
    cfg.orientation = Orientation::Item;
    cfg.predict_from = PredictFrom::Cross;
    CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
    cfg.predict_from = PredictFrom::Own;
    CHECK_NOTHROW(cfg.validate());
    cfg.train_frac = 1.0;
    CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
}

namespace {

SynthConfig small_synth(std::uint64_t seed) {
    SynthConfig s;
    s.n_users = 40;
    s.n_items_src = 25;
    s.n_items_tgt = 25;
    s.rank = 3;
    s.rho = 0.9;
    s.density_src = 0.4;
    s.density_tgt = 0.2;
    s.noise = 0.2;
    s.seed = seed;
    return s;
}

TrainConfig small_config(Variant v, std::uint64_t seed) {
    TrainConfig cfg;
    cfg.variant = v;
    cfg.orientation = v == Variant::U ? Orientation::User : Orientation::Item;
    cfg.predict_from = v == Variant::U ? PredictFrom::Cross : PredictFrom::Own;
    cfg.k = 8;
    cfg.extractor_width = 12;
    cfg.epochs = 20;
    cfg.autorec_epochs = 40;
    cfg.seed = seed;
    return cfg;
}

}  // namespace

TEST_CASE("run_experiment produces a coherent report") {
    const auto ds = synth_generate(small_synth(5));
    for (Variant v : {Variant::U, Variant::I}) {
        const auto rep = run_experiment(small_config(v, 5), ds);
        CHECK(rep.rmse_target > 0.0);
        CHECK(rep.rmse_source > 0.0);
        CHECK(rep.baseline_rmse_target > 0.0);
        CHECK(rep.classifier_accuracy >= 0.0);
        CHECK(rep.classifier_accuracy <= 1.0);
        CHECK(rep.test_users > 0);
        CHECK(rep.test_users <= ds.target.n_users);
        CHECK(rep.test_items <= ds.target.n_items);
        CHECK(rep.darec_loss_curve.size() == rep.epochs_run);
        CHECK(rep.epochs_run == 20);
        CHECK(rep.wall_seconds > 0.0);
    }
}

TEST_CASE("run_experiment is deterministic apart from wall time") {
    const auto ds = synth_generate(small_synth(6));
    const auto a = run_experiment(small_config(Variant::U, 6), ds);
    const auto b = run_experiment(small_config(Variant::U, 6), ds);
    CHECK(a.rmse_target == b.rmse_target);
    CHECK(a.rmse_source == b.rmse_source);
    CHECK(a.baseline_rmse_target == b.baseline_rmse_target);
    CHECK(a.classifier_accuracy == b.classifier_accuracy);
    CHECK(a.darec_loss_curve == b.darec_loss_curve);
}

TEST_CASE("run_experiment with shared_autorec pools item vectors") {
    const auto ds = synth_generate(small_synth(9));
    auto cfg = small_config(Variant::I, 9);
    cfg.shared_autorec = true;  // item orientation: both encoders see user-dim inputs
    const auto rep = run_experiment(cfg, ds);
    CHECK(rep.rmse_target > 0.0);
    // User orientation over unequal item counts cannot share an encoder.
    auto bad = small_config(Variant::U, 9);
    bad.shared_autorec = true;
    SynthConfig uneven = small_synth(9);
    uneven.n_items_tgt = 20;
    const auto ds2 = synth_generate(uneven);
    CHECK_THROWS_AS(run_experiment(bad, ds2), std::invalid_argument);
}

TEST_CASE("sweep points are independent of execution order") {
    const auto ds = synth_generate(small_synth(7));
    const auto base = small_config(Variant::U, 7);
    const std::vector<double> values = {4.0, 8.0};
    const auto fwd = sweep_axis(base, "k", values, ds);
    const std::vector<double> rev = {8.0, 4.0};
    const auto bwd = sweep_axis(base, "k", rev, ds);
    REQUIRE(fwd.size() == 2);
    CHECK(fwd[0].rmse_target == bwd[1].rmse_target);
    CHECK(fwd[1].rmse_target == bwd[0].rmse_target);
    CHECK(fwd[0].config.k == 4);
    CHECK(bwd[0].config.k == 8);
}

TEST_CASE("set_axis_value rejects unknown axes and bad counts") {
    TrainConfig cfg;
    CHECK_THROWS_AS(set_axis_value(cfg, "nope", 1.0), std::invalid_argument);
    CHECK_THROWS_AS(set_axis_value(cfg, "k", 2.5), std::invalid_argument);
    set_axis_value(cfg, "mu", 3.5);
    CHECK(cfg.mu == 3.5);
}

TEST_CASE("csv report row follows the documented column order") {
    CHECK(std::string(report_csv_header()) ==
          "variant,k,alpha,beta,mu,lambda,seed,rmse_target,rmse_source,"
          "classifier_accuracy,epochs,wall_seconds");
    Report r;
    r.config = small_config(Variant::I, 3);
    r.config.alpha = 0.5;
    r.rmse_target = 1.25;
    r.rmse_source = 2.5;
    r.classifier_accuracy = 0.75;
    r.epochs_run = 20;
    r.wall_seconds = 1.5;
    const std::string row = report_csv_row(r);
    CHECK(row == "I,8,0.5,1,1,0.0001,3,1.25,2.5,0.75,20,1.5");
}

TEST_CASE("a U-DARec run with mu=0, beta=1 stays in the baseline's range") {
    // With no adversarial term the adaptation network is just an extra
    // predictor over the same embeddings: no systematic transfer advantage.
    const auto ds = synth_generate(small_synth(8));
    auto cfg = small_config(Variant::U, 8);
    cfg.mu = 0.0;
    cfg.beta = 1.0;
    cfg.predict_from = PredictFrom::Own;
    cfg.epochs = 40;
    cfg.autorec_epochs = 80;
    const auto rep = run_experiment(cfg, ds);
    CHECK(rep.rmse_target < 1.5 * rep.baseline_rmse_target);
    CHECK(rep.rmse_target > 0.5 * rep.baseline_rmse_target);
}

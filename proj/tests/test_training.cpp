#include <doctest.h>

#include <cmath>
#include <random>

#include "swarmlfa/errors.hpp"
#include "swarmlfa/synthetic.hpp"
#include "swarmlfa/training.hpp"

using namespace swarmlfa;

namespace {

FactorModel scalar_model(double p, double q) {
    FactorModel m(1, 1, 1);
    m.p(0)[0] = p;
    m.q(0)[0] = q;
    return m;
}

HdiMatrix dense_fixture(unsigned seed) {
    std::mt19937_64 gen(seed);
    std::uniform_real_distribution<double> r(1.0, 5.0);
    std::vector<RatingEntry> es;
    for (Index u = 0; u < 5; ++u) {
        for (Index i = 0; i < 5; ++i) es.push_back({u, i, r(gen)});
    }
    return HdiMatrix(5, 5, std::move(es));
}

DataSplit train_only(HdiMatrix m) {
    DataSplit s;
    s.train = std::move(m);
    return s;
}

}  // namespace

TEST_SUITE("training") {

TEST_CASE("one sgd step from pre-update values") {
    FactorModel m = scalar_model(1.0, 2.0);
    const HdiMatrix train(1, 1, {{0, 0, 3.0}});
    sgd_epoch(m, train, {.eta = 0.1, .lambda = 0.1}, 1);
    CHECK(m.p(0)[0] == doctest::Approx(1.19).epsilon(1e-12));
    CHECK(m.q(0)[0] == doctest::Approx(2.08).epsilon(1e-12));
    CHECK(m.b(0) == doctest::Approx(0.1).epsilon(1e-12));
    CHECK(m.c(0) == doctest::Approx(0.1).epsilon(1e-12));
}

TEST_CASE("zero learning rate is the identity") {
    FactorModel m = init_model(5, 5, 3, 9);
    const FactorModel before = m;
    sgd_epoch(m, dense_fixture(1), {.eta = 0.0, .lambda = 0.1}, 4);
    CHECK(m == before);
}

TEST_CASE("training loss decreases monotonically for a small step") {
    const HdiMatrix train = dense_fixture(2);
    FactorModel m = init_model(5, 5, 2, 3);
    const SgdConfig c{.eta = 0.01, .lambda = 0.0};
    double prev = loss(m, train.entries(), 0.0);
    std::size_t increases = 0;
    for (std::size_t epoch = 1; epoch <= 200; ++epoch) {
        sgd_epoch(m, train, c, epoch);
        const double now = loss(m, train.entries(), 0.0);
        if (now > prev) ++increases;
        prev = now;
    }
    CHECK(increases == 0);
}

TEST_CASE("sgd divergence names the parameter and entry") {
    FactorModel m = init_model(5, 5, 2, 3);
    std::string message;
    try {
        for (std::size_t epoch = 1; epoch <= 50; ++epoch) sgd_epoch(m, dense_fixture(3), {.eta = 1e6, .lambda = 0}, epoch);
    } catch (const DivergenceError& e) {
        message = e.what();
    }
    REQUIRE_FALSE(message.empty());
    CHECK(message.find("entry") != std::string::npos);
    CHECK(message.find("non-finite") != std::string::npos);
}

TEST_CASE("sgd config validation") {
    CHECK_THROWS_AS(SgdConfig{.eta = 0.0}.validate(), ConfigError);
    CHECK_THROWS_AS(SgdConfig{.lambda = -1}.validate(), ConfigError);
    CHECK_THROWS_AS(SgdConfig{.max_epochs = 0}.validate(), ConfigError);
    CHECK_THROWS_AS(SgdConfig{.convergence_tol = 0}.validate(), ConfigError);
    FactorModel m(1, 1, 1);
    CHECK_THROWS_AS(sgd_epoch(m, HdiMatrix(1, 1, {}), {}, 1), InputError);
}

TEST_CASE("adam first step has magnitude alpha") {
    FactorModel m = scalar_model(1.0, 2.0);
    AdamState state(m);
    const AdamConfig c{.alpha = 0.01, .lambda = 0.1};
    const HdiMatrix train(1, 1, {{0, 0, 3.0}});
    adam_epoch(m, state, train, c, 1);
    CHECK(m.p(0)[0] - 1.0 == doctest::Approx(0.01).epsilon(1e-5));
    CHECK(m.q(0)[0] - 2.0 == doctest::Approx(0.01).epsilon(1e-5));
    CHECK(m.b(0) == doctest::Approx(0.01).epsilon(1e-5));
    CHECK(m.c(0) == doctest::Approx(0.01).epsilon(1e-5));
}

TEST_CASE("adam leaves parameters alone under zero gradient") {
    FactorModel m = scalar_model(1.0, 2.0);
    AdamState state(m);
    const HdiMatrix exact(1, 1, {{0, 0, 2.0}});
    const FactorModel before = m;
    for (std::size_t e = 1; e <= 5; ++e) adam_epoch(m, state, exact, {.lambda = 0.0}, e);
    CHECK(m == before);
}

TEST_CASE("adam reaches sgd's training loss on the dense fixture") {
    const HdiMatrix train = dense_fixture(4);
    constexpr double lambda = 0.03;
    constexpr std::size_t epochs = 200;
    FactorModel sgd = init_model(5, 5, 2, 7);
    for (std::size_t e = 1; e <= epochs; ++e) sgd_epoch(sgd, train, {.eta = 0.01, .lambda = lambda}, e);
    const double sgd_loss = loss(sgd, train.entries(), lambda);

    double best = std::numeric_limits<double>::infinity();
    for (double alpha : {0.001, 0.003, 0.01, 0.03, 0.1}) {
        FactorModel m = init_model(5, 5, 2, 7);
        AdamState state(m);
        for (std::size_t e = 1; e <= epochs; ++e) adam_epoch(m, state, train, {.alpha = alpha, .lambda = lambda}, e);
        const double l = loss(m, train.entries(), lambda);
        if (std::abs(l - sgd_loss) < std::abs(best - sgd_loss)) best = l;
    }
    MESSAGE("sgd loss " << sgd_loss << ", closest adam loss " << best);
    CHECK(std::abs(best - sgd_loss) <= 0.1 * sgd_loss);
}

TEST_CASE("adam config validation") {
    CHECK_THROWS_AS(AdamConfig{.alpha = 0}.validate(), ConfigError);
    CHECK_THROWS_AS(AdamConfig{.beta1 = 1.0}.validate(), ConfigError);
    CHECK_THROWS_AS(AdamConfig{.beta2 = -0.1}.validate(), ConfigError);
    CHECK_THROWS_AS(AdamConfig{.epsilon = 0}.validate(), ConfigError);
}

TEST_CASE("pretraining fits noiseless low-rank data") {
    SynthSpec spec{.users = 60, .items = 80, .rank = 3, .density = 0.5, .noise = 0.0, .seed = 5};
    const HdiMatrix m = generate_synthetic(spec);
    const DataSplit s = split(m, {0.8, 0.1, 0.1}, 5);
    const TrainResult r = pretrain(init_model(60, 80, 3, 5), s, {.eta = 0.02, .lambda = 0.0, .max_epochs = 2000,
                                                                 .convergence_tol = 1e-7},
                                   5);
    const double train_rmse = rmse(r.model, s.train);
    MESSAGE("train rmse " << train_rmse << " after " << r.report.history.size() << " epochs");
    CHECK(train_rmse < 0.05);
}

TEST_CASE("pretraining respects the epoch budget") {
    const DataSplit s = split(dense_fixture(5), {0.8, 0.2, 0.0}, 1);
    const TrainResult r = pretrain(init_model(5, 5, 2, 1), s, {.max_epochs = 1}, 1);
    CHECK(r.report.history.size() == 1);
    CHECK(r.best_epoch == 1);
    CHECK_FALSE(r.report.converged_at.has_value());
}

TEST_CASE("pretraining stops at the first small adjacent difference") {
    const HdiMatrix m = generate_synthetic({.users = 40, .items = 50, .density = 0.3, .seed = 3});
    const DataSplit s = split(m, {0.7, 0.1, 0.2}, 3);
    const TrainResult r = pretrain(init_model(40, 50, 4, 3), s, {.eta = 0.01, .lambda = 0.03}, 3);
    const auto& h = r.report.history;
    REQUIRE(r.report.converged_at.has_value());
    const std::size_t n = *r.report.converged_at;
    REQUIRE(n + 1 == h.size());
    CHECK(std::abs(h[n].rmse - h[n - 1].rmse) < 1e-4);
    for (std::size_t k = 1; k < n; ++k) CHECK(std::abs(h[k].rmse - h[k - 1].rmse) >= 1e-4);
    double best = h[0].rmse;
    std::size_t best_epoch = 1;
    for (const MetricPoint& p : h) {
        if (p.rmse < best) {
            best = p.rmse;
            best_epoch = p.epoch_or_round;
        }
    }
    CHECK(r.best_epoch == best_epoch);
    CHECK(rmse(r.model, s.validation) == best);
    CHECK(r.report.test_rmse == rmse(r.model, s.test));
}

TEST_CASE("pretraining is deterministic") {
    const HdiMatrix m = generate_synthetic({.users = 30, .items = 30, .density = 0.3, .seed = 8});
    const DataSplit s = split(m, {0.7, 0.1, 0.2}, 8);
    const TrainResult a = pretrain(init_model(30, 30, 3, 8), s, {}, 8);
    const TrainResult b = pretrain(init_model(30, 30, 3, 8), s, {}, 8);
    CHECK(a.model == b.model);
    REQUIRE(a.report.history.size() == b.report.history.size());
    for (std::size_t k = 0; k < a.report.history.size(); ++k) CHECK(a.report.history[k].rmse == b.report.history[k].rmse);
}

TEST_CASE("train loop without validation monitors the training set") {
    const DataSplit s = train_only(dense_fixture(6));
    const TrainResult r =
        train_loop(init_model(5, 5, 2, 2), s, [&](FactorModel& m, std::size_t n) { sgd_epoch(m, s.train, {}, n); },
                   {.max_epochs = 3, .keep_best = false}, "sgd");
    CHECK(r.report.history.size() == 3);
    CHECK(r.report.history.back().rmse == rmse(r.model, s.train));
}

}

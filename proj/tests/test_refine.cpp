#include <doctest.h>

#include <cmath>
#include <sstream>

#include "swarmlfa/errors.hpp"
#include "swarmlfa/refine.hpp"
#include "swarmlfa/synthetic.hpp"
#include "swarmlfa/training.hpp"

using namespace swarmlfa;

namespace {

struct Fixture {
    DataSplit split;
    FactorModel pretrained;
};

Fixture small_fixture(std::uint64_t seed, std::size_t users = 20, std::size_t items = 30) {
    const HdiMatrix m = generate_synthetic({.users = users, .items = items, .rank = 3, .density = 0.3, .seed = seed});
    Fixture fx;
    fx.split = split(m, {0.7, 0.1, 0.2}, seed);
    fx.pretrained = pretrain(init_model(users, items, 3, seed), fx.split, {}, seed).model;
    return fx;
}

RefineConfig quick_config(std::uint64_t seed) {
    RefineConfig c;
    c.seed = seed;
    c.N = 20;
    c.schedule.G = 20;
    c.stall_iterations = 3;
    return c;
}

}  // namespace

TEST_SUITE("refine") {

TEST_CASE("config defaults and validation") {
    RefineConfig c;
    CHECK(c.K == 5);
    CHECK(c.M == 1);
    CHECK(c.beta_min == -c.beta_max);
    CHECK_NOTHROW(c.validate());
    c.K = 3;
    CHECK_THROWS_AS(c.validate(), ConfigError);
    c.update_rule = UpdateRule::Standard;
    CHECK_NOTHROW(c.validate());
    RefineConfig n;
    n.N = 0;
    CHECK_THROWS_AS(n.validate(), ConfigError);
    n = RefineConfig{};
    n.N = 60;
    CHECK_THROWS_AS(n.validate(), ConfigError);
    n = RefineConfig{};
    n.beta_max = 0;
    CHECK_THROWS_AS(n.validate(), ConfigError);
    n = RefineConfig{};
    n.lambda = -1;
    CHECK_THROWS_AS(n.validate(), ConfigError);
}

TEST_CASE("config key=value round-trip") {
    RefineConfig c;
    c.K = 9;
    c.N = 30;
    c.schedule.G = 40;
    c.gamma3 = 0.125;
    c.lambda = 0.1 + 1e-17;
    c.fitness_kind = FitnessKind::Mae;
    c.update_rule = UpdateRule::Standard;
    c.gamma2_rule = Gamma2Rule::AsPrinted;
    c.stall_iterations = 4;
    std::stringstream s;
    write_refine_config(s, c);
    const RefineConfig back = read_refine_config(s);
    CHECK(back.K == 9);
    CHECK(back.N == 30);
    CHECK(back.schedule.G == 40);
    CHECK(back.gamma3 == c.gamma3);
    CHECK(back.lambda == c.lambda);
    CHECK(back.fitness_kind == FitnessKind::Mae);
    CHECK(back.update_rule == UpdateRule::Standard);
    CHECK(back.gamma2_rule == Gamma2Rule::AsPrinted);
    CHECK(back.stall_iterations == 4);
    CHECK(s.str().find("K=9\n") != std::string::npos);
    CHECK(s.str().find("schedule.omega_max=") != std::string::npos);
}

TEST_CASE("config parsing rules") {
    CHECK_THROWS_AS(RefineConfig::from_kv(KeyValues::parse("bogus=1")), ConfigError);
    CHECK_THROWS_AS(RefineConfig::from_kv(KeyValues::parse("fitness_kind=median")), ConfigError);
    const RefineConfig b = RefineConfig::from_kv(KeyValues::parse("beta_max=0.25"));
    CHECK(b.beta_min == -0.25);
    const RefineConfig n = RefineConfig::from_kv(KeyValues::parse("N=20"));
    CHECK(n.schedule.G == 20);
    const RefineConfig h = RefineConfig::from_kv(KeyValues::parse("update_rule=hpl"));
    CHECK(h.update_rule == UpdateRule::Standard);
}

TEST_CASE("empty slice returns the input") {
    const FactorModel m = init_model(3, 3, 2, 1);
    const HdiMatrix train(3, 3, {{0, 0, 1.0}});
    const FitnessContext ctx = FitnessContext::for_row(m, train, 2);
    SwarmRng rng(1);
    const SubVector in = row_subvector(m, 2);
    const SubVectorOutcome out = refine_subvector(in, ctx, RefineConfig{}, rng);
    CHECK(out.best == in);
    CHECK(out.iterations == 0);
}

TEST_CASE("an optimal start cannot be improved") {
    for (std::uint64_t seed = 1; seed <= 10; ++seed) {
        FactorModel m(1, 1, 1);
        m.q(0)[0] = 1.5;
        m.c(0) = 0.25;
        const double lambda = 0.1, r = 3.0;
        const double t = r - m.c(0);
        const double denom = 1.5 * 1.5 + 1.0 + lambda;
        m.p(0)[0] = 1.5 * t / denom;
        m.b(0) = t / denom;
        const HdiMatrix train(1, 1, {{0, 0, r}});
        const FitnessContext ctx = FitnessContext::for_row(m, train, 0);
        RefineConfig c;
        c.lambda = lambda;
        c.seed = seed;
        SwarmRng rng = SwarmRng::for_swarm(seed, SubVectorKind::Row, 0, 1);
        const SubVectorOutcome out = refine_subvector(row_subvector(m, 0), ctx, c, rng);
        CHECK(out.final_fitness <= out.initial_fitness);
        CHECK(out.final_fitness >= out.initial_fitness - 1e-12 * out.initial_fitness);
    }
}

TEST_CASE("swarm output never loses to its input") {
    const Fixture fx = small_fixture(4);
    for (Index u = 0; u < fx.pretrained.user_count(); ++u) {
        const FitnessContext ctx = FitnessContext::for_row(fx.pretrained, fx.split.train, u);
        for (UpdateRule rule : {UpdateRule::NeighborCooperative, UpdateRule::Standard}) {
            RefineConfig c = quick_config(u);
            c.update_rule = rule;
            SwarmRng rng = SwarmRng::for_swarm(7, SubVectorKind::Row, u, 1);
            const SubVector in = row_subvector(fx.pretrained, u);
            const SubVectorOutcome out = refine_subvector(in, ctx, c, rng);
            CHECK(out.final_fitness <= out.initial_fitness);
            CHECK(fitness(out.best.values, ctx, c.lambda, c.fitness_kind) == out.final_fitness);
            for (std::size_t n = 1; n < out.history.size(); ++n) CHECK(out.history[n] <= out.history[n - 1]);
        }
    }
}

TEST_CASE("stepping keeps every velocity clamped and bests consistent") {
    const Fixture fx = small_fixture(5);
    const FitnessContext ctx = FitnessContext::for_row(fx.pretrained, fx.split.train, 3);
    RefineConfig c = quick_config(5);
    c.beta_max = 0.3;
    c.beta_min = -0.3;
    SwarmRng rng(99);
    Swarm s = init_swarm(row_subvector(fx.pretrained, 3), ctx, c, rng);
    CHECK(s.particles[0].position == row_subvector(fx.pretrained, 3).values);
    for (double v : s.particles[0].velocity) CHECK(v == 0.0);
    for (std::size_t n = 1; n <= c.N; ++n) {
        std::vector<std::vector<double>> before;
        for (const Particle& p : s.particles) before.push_back(p.position);
        step_swarm(s, n, ctx, c, rng);
        for (std::size_t k = 0; k < s.particles.size(); ++k) {
            const Particle& p = s.particles[k];
            for (std::size_t d = 0; d < p.velocity.size(); ++d) {
                CHECK(std::abs(p.velocity[d]) <= std::max(0.3 * std::abs(before[k][d]), c.epsilon_floor));
            }
            CHECK(p.best_fitness == fitness(p.best_position, ctx, c.lambda, c.fitness_kind));
            CHECK(p.best_fitness <= p.fitness);
        }
        CHECK(s.iteration == n);
    }
}

TEST_CASE("divergence is reported") {
    FactorModel m(1, 1, 1);
    m.q(0)[0] = 1e200;
    m.p(0)[0] = 1e200;
    const HdiMatrix train(1, 1, {{0, 0, 1.0}});
    const FitnessContext ctx = FitnessContext::for_row(m, train, 0);
    SwarmRng rng(1);
    CHECK_THROWS_AS(refine_subvector(row_subvector(m, 0), ctx, RefineConfig{}, rng), DivergenceError);
}

TEST_CASE("zero rounds leave the model unchanged") {
    const Fixture fx = small_fixture(6);
    RefineConfig c = quick_config(6);
    c.M = 0;
    const RefineResult r = refine_model(fx.pretrained, fx.split, c);
    CHECK(r.model == fx.pretrained);
    CHECK(r.report.history.size() == 1);
    CHECK(r.swarms_refined == 0);
}

TEST_CASE("refine_model records per-round metrics") {
    const Fixture fx = small_fixture(7);
    RefineConfig c = quick_config(7);
    c.M = 2;
    const RefineResult r = refine_model(fx.pretrained, fx.split, c, {.record_traces = true});
    REQUIRE(r.report.history.size() == 3);
    CHECK(r.report.history[0].rmse == rmse(fx.pretrained, fx.split.validation));
    CHECK(r.report.history[2].rmse == rmse(r.model, fx.split.validation));
    CHECK(r.report.test_rmse == rmse(r.model, fx.split.test));
    CHECK(r.swarms_refined + r.swarms_skipped == 2 * (20 + 30));
    CHECK(r.traces.size() == r.swarms_refined);
    CHECK(r.mean_iterations() > 0.0);
    for (const SwarmTrace& t : r.traces) {
        for (std::size_t n = 1; n < t.history.size(); ++n) CHECK(t.history[n] <= t.history[n - 1]);
    }
    std::ostringstream csv;
    write_traces_csv(csv, r.traces);
    CHECK(csv.str().rfind("round,kind,index,iteration,global_best_fitness\n", 0) == 0);
}

TEST_CASE("unobserved rows and columns are skipped") {
    const HdiMatrix train(4, 4, {{0, 0, 1.0}, {1, 1, 2.0}, {0, 1, 3.0}, {1, 0, 4.0}});
    DataSplit s;
    s.train = train;
    const FactorModel m = init_model(4, 4, 2, 1);
    const RefineResult r = refine_model(m, s, quick_config(1));
    CHECK(r.swarms_refined == 4);
    CHECK(r.swarms_skipped == 4);
    for (Index u : {2u, 3u}) CHECK(row_subvector(r.model, u) == row_subvector(m, u));
    for (Index i : {2u, 3u}) CHECK(column_subvector(r.model, i) == column_subvector(m, i));
}

TEST_CASE("deterministic and independent of the worker count") {
    const Fixture fx = small_fixture(8);
    const RefineConfig c = quick_config(8);
    const RefineResult a = refine_model(fx.pretrained, fx.split, c, {.threads = 1});
    const RefineResult b = refine_model(fx.pretrained, fx.split, c, {.threads = 1});
    const RefineResult t = refine_model(fx.pretrained, fx.split, c, {.threads = 3});
    const RefineResult z = refine_model(fx.pretrained, fx.split, c, {.threads = 0});
    CHECK(a.model == b.model);
    CHECK(a.model == t.model);
    CHECK(a.model == z.model);
    RefineConfig other = c;
    other.seed = 9;
    CHECK_FALSE(refine_model(fx.pretrained, fx.split, other).model == a.model);
}

TEST_CASE("zero neighbor coefficient reproduces the standard engine") {
    const Fixture fx = small_fixture(9);
    RefineConfig dn = quick_config(9);
    dn.gamma3 = 0.0;
    dn.schedule = dn.schedule.midpoint_constant();
    RefineConfig std_rule = dn;
    std_rule.update_rule = UpdateRule::Standard;
    const RefineResult a = refine_model(fx.pretrained, fx.split, dn);
    const RefineResult b = refine_model(fx.pretrained, fx.split, std_rule);
    CHECK(a.model == b.model);
    CHECK(a.total_iterations == b.total_iterations);
}

TEST_CASE("enum names") {
    CHECK(to_string(FitnessKind::Rmse) == "rmse");
    CHECK(to_string(FitnessKind::Mae) == "mae");
    CHECK(to_string(UpdateRule::NeighborCooperative) == "neighbor");
    CHECK(to_string(Gamma2Rule::AsPrinted) == "as_printed");
}

}

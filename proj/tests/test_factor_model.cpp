#include <doctest.h>

#include <cmath>
#include <random>
#include <sstream>

#include "swarmlfa/errors.hpp"
#include "swarmlfa/factor_model.hpp"

using namespace swarmlfa;

namespace {

FactorModel scalar_model(double p, double q, double b, double c) {
    FactorModel m(1, 1, 1);
    m.p(0)[0] = p;
    m.q(0)[0] = q;
    m.b(0) = b;
    m.c(0) = c;
    return m;
}

FactorModel random_model(std::size_t users, std::size_t items, std::size_t f, unsigned seed) {
    std::mt19937_64 gen(seed);
    std::normal_distribution<double> n01;
    FactorModel m(users, items, f);
    for (double& x : m.P()) x = n01(gen);
    for (double& x : m.Q()) x = n01(gen);
    for (double& x : m.user_bias()) x = n01(gen);
    for (double& x : m.item_bias()) x = n01(gen);
    return m;
}

/// The single-entry term of the objective, written out independently.
double entry_term(const FactorModel& m, const RatingEntry& e, double lambda) {
    double dot = 0.0, pp = 0.0, qq = 0.0;
    for (std::size_t k = 0; k < m.dim(); ++k) {
        dot += m.p(e.user)[k] * m.q(e.item)[k];
        pp += m.p(e.user)[k] * m.p(e.user)[k];
        qq += m.q(e.item)[k] * m.q(e.item)[k];
    }
    const double res = e.rating - dot - m.b(e.user) - m.c(e.item);
    return 0.5 * res * res + 0.5 * lambda * (pp + qq + m.b(e.user) * m.b(e.user) + m.c(e.item) * m.c(e.item));
}

}  // namespace

TEST_SUITE("factor_model") {

TEST_CASE("init_model shape and range") {
    const FactorModel m = init_model(3, 4, 2, 1, 0.1);
    CHECK(m.user_count() == 3);
    CHECK(m.item_count() == 4);
    CHECK(m.dim() == 2);
    CHECK(m.P().size() == 6);
    CHECK(m.Q().size() == 8);
    for (double x : m.P()) CHECK((x > 0.0 && x <= 0.1));
    for (double x : m.Q()) CHECK((x > 0.0 && x <= 0.1));
    for (double x : m.user_bias()) CHECK(x == 0.0);
    for (double x : m.item_bias()) CHECK(x == 0.0);
    CHECK(init_model(3, 4, 2, 1, 0.1) == m);
    CHECK_FALSE(init_model(3, 4, 2, 2, 0.1) == m);
}

TEST_CASE("init_model sample mean") {
    const FactorModel m = init_model(1000000, 1, 1, 17, 0.1);
    double sum = 0.0;
    for (double x : m.P()) sum += x;
    CHECK(std::abs(sum / 1e6 - 0.05) < 0.001);
}

TEST_CASE("init_model rejects bad arguments") {
    CHECK_THROWS_AS(init_model(3, 4, 0, 1), ConfigError);
    CHECK_THROWS_AS(init_model(0, 4, 2, 1), ConfigError);
    CHECK_THROWS_AS(init_model(3, 0, 2, 1), ConfigError);
    CHECK_THROWS_AS(init_model(3, 4, 2, 1, 0.0), ConfigError);
}

TEST_CASE("predict examples") {
    FactorModel m(1, 1, 2);
    m.p(0)[0] = 1;
    m.q(0)[0] = 2;
    m.q(0)[1] = 5;
    CHECK(predict(m, 0, 0) == 2.0);
    CHECK(predict(scalar_model(1, 2, 0.5, -0.5), 0, 0) == 2.0);
    CHECK_THROWS_AS(predict(m, 1, 0), ConfigError);
    CHECK_THROWS_AS(predict(m, 0, 1), ConfigError);
}

TEST_CASE("predict matches a naive loop") {
    const FactorModel m = random_model(4, 5, 8, 3);
    for (Index u = 0; u < 4; ++u) {
        for (Index i = 0; i < 5; ++i) {
            double acc = m.b(u) + m.c(i);
            for (std::size_t k = 0; k < 8; ++k) acc += m.P()[u * 8 + k] * m.Q()[i * 8 + k];
            CHECK(std::abs(predict(m, u, i) - acc) < 1e-12);
        }
    }
}

TEST_CASE("predict is linear in p_u") {
    FactorModel m = random_model(2, 2, 6, 8);
    const double dot = predict(m, 1, 0) - m.b(1) - m.c(0);
    for (double& x : m.p(1)) x *= 3.0;
    const double scaled = predict(m, 1, 0) - m.b(1) - m.c(0);
    CHECK(scaled == doctest::Approx(3.0 * dot).epsilon(1e-12));
}

TEST_CASE("loss examples") {
    const FactorModel m = scalar_model(1, 2, 0, 0);
    const std::vector<RatingEntry> e{{0, 0, 3.0}};
    CHECK(loss(m, e, 0.0) == doctest::Approx(0.5));
    CHECK(loss(m, e, 0.1) == doctest::Approx(0.75));
    const std::vector<RatingEntry> exact{{0, 0, 2.0}};
    CHECK(loss(m, exact, 0.0) == 0.0);
    CHECK_THROWS_AS(loss(m, std::vector<RatingEntry>{}, 0.1), InputError);
}

TEST_CASE("loss sums the regularizer per entry") {
    FactorModel m(1, 2, 1);
    m.p(0)[0] = 1;
    const std::vector<RatingEntry> es{{0, 0, 0.0}, {0, 1, 0.0}};
    CHECK(loss(m, es, 1.0) == doctest::Approx(1.0));
}

TEST_CASE("loss is non-negative and zero only at an exact unregularized fit") {
    for (unsigned seed = 0; seed < 50; ++seed) {
        const FactorModel m = random_model(3, 3, 2, seed);
        std::vector<RatingEntry> es;
        for (Index u = 0; u < 3; ++u) es.push_back({u, (u + seed) % 3, predict(m, u, (u + seed) % 3)});
        CHECK(loss(m, es, 0.0) < 1e-20);
        CHECK(loss(m, es, 0.1) > 0.0);
        es[0].rating += 1.0;
        CHECK(loss(m, es, 0.0) > 0.0);
    }
    FactorModel zero(2, 2, 2);
    CHECK(loss(zero, std::vector<RatingEntry>{{0, 0, 0.0}}, 5.0) == 0.0);
}

TEST_CASE("entry_gradient hand example") {
    const EntryGradient g = entry_gradient(scalar_model(1, 2, 0, 0), {0, 0, 3.0}, 0.0);
    CHECK(g.g_p == std::vector<double>{-2.0});
    CHECK(g.g_q == std::vector<double>{-1.0});
    CHECK(g.g_b == -1.0);
    CHECK(g.g_c == -1.0);
    const EntryGradient z = entry_gradient(scalar_model(1, 2, 0, 0), {0, 0, 2.0}, 0.0);
    CHECK(z.g_p == std::vector<double>{0.0});
    CHECK(z.g_q == std::vector<double>{0.0});
    CHECK(z.g_b == 0.0);
    CHECK(z.g_c == 0.0);
}

TEST_CASE("entry_gradient matches central differences") {
    std::mt19937_64 gen(5);
    std::uniform_real_distribution<double> lam(0.0, 0.5);
    for (int t = 0; t < 100; ++t) {
        const std::size_t f = std::array<std::size_t, 3>{1, 5, 20}[t % 3];
        FactorModel m = random_model(3, 4, f, 100 + t);
        const RatingEntry e{static_cast<Index>(t % 3), static_cast<Index>(t % 4), 3.0 + (t % 5)};
        const double lambda = lam(gen);
        const EntryGradient g = entry_gradient(m, e, lambda);
        const auto fd = [&](double& theta) {
            const double h = 1e-6 * std::max(1.0, std::abs(theta));
            const double saved = theta;
            theta = saved + h;
            const double up = entry_term(m, e, lambda);
            theta = saved - h;
            const double down = entry_term(m, e, lambda);
            theta = saved;
            return (up - down) / (2 * h);
        };
        const auto close = [](double a, double b) { return std::abs(a - b) <= 1e-6 * std::max(1.0, std::abs(b)); };
        for (std::size_t k = 0; k < f; ++k) {
            CHECK(close(g.g_p[k], fd(m.p(e.user)[k])));
            CHECK(close(g.g_q[k], fd(m.q(e.item)[k])));
        }
        CHECK(close(g.g_b, fd(m.b(e.user))));
        CHECK(close(g.g_c, fd(m.c(e.item))));
    }
}

TEST_CASE("snapshot round-trips exactly") {
    const FactorModel m = random_model(7, 5, 3, 11);
    std::stringstream s;
    save_model(s, m);
    CHECK(s.str().rfind("swarmlfa-model 1 7 5 3\n", 0) == 0);
    const FactorModel back = load_model(s);
    CHECK(back == m);
}

TEST_CASE("snapshot errors") {
    std::istringstream junk("hello");
    CHECK_THROWS_AS(load_model(junk), InputError);
    std::stringstream s;
    save_model(s, random_model(2, 2, 2, 1));
    std::string text = s.str();
    std::istringstream cut(text.substr(0, text.size() / 2));
    CHECK_THROWS_AS(load_model(cut), InputError);
    std::istringstream bad("swarmlfa-model 1 1 1 1\n0.5\nx\n0\n0\n");
    CHECK_THROWS_AS(load_model(bad), InputError);
}

TEST_CASE("compatibility check") {
    const FactorModel m(3, 3, 2);
    CHECK_NOTHROW(m.check_compatible(HdiMatrix(3, 3, {{2, 2, 1.0}})));
    CHECK_THROWS_AS(m.check_compatible(HdiMatrix(4, 3, {{3, 2, 1.0}})), ConfigError);
    CHECK(m.all_finite());
}

}

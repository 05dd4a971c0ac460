#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <vector>

#include "sgmil/errors.hpp"
#include "sgmil/pooling.hpp"

using namespace sgmil;
using namespace sgmil::pooling;

namespace {

constexpr PoolKind kAllKinds[] = {PoolKind::max, PoolKind::mean, PoolKind::lse, PoolKind::noisy_or, PoolKind::softmax};

std::vector<double> random_probs(std::mt19937_64& rng, std::size_t n) {
    std::uniform_real_distribution<double> u(0, 1);
    std::vector<double> p(n);
    for (auto& v : p) v = u(rng);
    return p;
}

double pool_of(PoolKind kind, const std::vector<double>& p) { return pool(PoolingSpec{kind}, p); }

}  // namespace

TEST_SUITE("pooling") {

TEST_CASE("hand-evaluated pools") {
    CHECK(pool_of(PoolKind::max, {0.1, 0.9, 0.3}) == 0.9);
    CHECK(pool_of(PoolKind::softmax, {0.0, 1.0}) == doctest::Approx(std::exp(1.0) / (1.0 + std::exp(1.0))).epsilon(1e-14));
    CHECK(pool_of(PoolKind::noisy_or, {0.5, 0.5}) == doctest::Approx(0.75).epsilon(1e-14));
    CHECK(pool_of(PoolKind::mean, {0.2, 0.4}) == doctest::Approx(0.3));
    for (double c : {0.0, 0.13, 0.5, 0.99, 1.0})
        CHECK(pool_of(PoolKind::lse, std::vector<double>(6, c)) == doctest::Approx(c).epsilon(1e-14));
}

TEST_CASE("pool gradients: mean is linear and max routes to the first maximum") {
    std::vector<double> g(4);
    pool_backward(PoolingSpec{PoolKind::mean}, std::vector<double>{0.1, 0.2, 0.3, 0.4}, 2.0, g);
    for (double v : g) CHECK(v == doctest::Approx(0.5));

    std::vector<double> g2(2);
    pool_backward(PoolingSpec{PoolKind::max}, std::vector<double>{0.2, 0.8}, 3.0, g2);
    CHECK(g2 == std::vector<double>{0.0, 3.0});

    std::vector<double> g3(3);
    pool_backward(PoolingSpec{PoolKind::max}, std::vector<double>{0.7, 0.2, 0.7}, 1.0, g3);
    CHECK(g3 == std::vector<double>{1.0, 0.0, 0.0});
}

TEST_CASE("softmax pool gradient matches central differences") {
    std::mt19937_64 rng(4);
    for (int trial = 0; trial < 50; ++trial) {
        auto p = random_probs(rng, 5);
        std::vector<double> g(5);
        pool_backward(PoolingSpec{PoolKind::softmax}, p, 1.0, g);
        for (std::size_t j = 0; j < 5; ++j) {
            auto up = p, down = p;
            up[j] += 1e-5;
            down[j] -= 1e-5;
            const double numeric = (pool_of(PoolKind::softmax, up) - pool_of(PoolKind::softmax, down)) / 2e-5;
            CHECK(std::abs(numeric - g[j]) / std::max(1.0, std::abs(g[j])) < 1e-4);
        }
    }
}

TEST_CASE("order property over 10000 random bags") {
    std::mt19937_64 rng(2024);
    std::uniform_int_distribution<std::size_t> size(2, 100);
    std::size_t violations = 0;
    for (int trial = 0; trial < 10000; ++trial) {
        const auto p = random_probs(rng, size(rng));
        const double mean = pool_of(PoolKind::mean, p), soft = pool_of(PoolKind::softmax, p);
        const double mx = pool_of(PoolKind::max, p), lse = pool_of(PoolKind::lse, p);
        if (!(mean <= soft && soft <= mx && mean <= lse)) ++violations;
        for (auto kind : kAllKinds) {
            const double v = pool_of(kind, p);
            if (!(v >= 0.0 && v <= 1.0)) ++violations;
        }
    }
    CHECK(violations == 0);
}

TEST_CASE("permutation invariance and constant bags") {
    std::mt19937_64 rng(3);
    for (int trial = 0; trial < 200; ++trial) {
        auto p = random_probs(rng, 2 + trial % 30);
        for (auto kind : kAllKinds) {
            const double before = pool_of(kind, p);
            auto q = p;
            std::shuffle(q.begin(), q.end(), rng);
            CHECK(pool_of(kind, q) == doctest::Approx(before).epsilon(1e-12));
        }
        const double c = p[0];
        const std::vector<double> constant(p.size(), c);
        for (auto kind : {PoolKind::max, PoolKind::mean, PoolKind::lse, PoolKind::softmax})
            CHECK(pool_of(kind, constant) == doctest::Approx(c).epsilon(1e-12));
        CHECK(pool_of(PoolKind::noisy_or, constant) ==
              doctest::Approx(1.0 - std::pow(1.0 - c, static_cast<double>(p.size()))).epsilon(1e-10));
    }
}

TEST_CASE("raising one instance never lowers the pooled value") {
    std::mt19937_64 rng(17);
    std::uniform_real_distribution<double> u(0, 1);
    for (int trial = 0; trial < 2000; ++trial) {
        auto p = random_probs(rng, 2 + trial % 20);
        const std::size_t j = rng() % p.size();
        auto q = p;
        q[j] = p[j] + (1.0 - p[j]) * u(rng);
        for (auto kind : kAllKinds) CHECK(pool_of(kind, q) >= pool_of(kind, p) - 1e-15);
    }
}

TEST_CASE("noisy-or clamped log form equals the direct product away from saturation") {
    std::mt19937_64 rng(99);
    std::uniform_real_distribution<double> u(0, 0.95);
    for (int trial = 0; trial < 1000; ++trial) {
        std::vector<double> p(1 + trial % 40);
        for (auto& v : p) v = u(rng);
        const double direct =
            1.0 - std::accumulate(p.begin(), p.end(), 1.0, [](double acc, double v) { return acc * (1.0 - v); });
        CHECK(std::abs(pool_of(PoolKind::noisy_or, p) - direct) < 1e-10);
    }
    CHECK(pool_of(PoolKind::noisy_or, {0.2, 1.0, 0.4}) == 1.0);
}

TEST_CASE("invalid input") {
    CHECK_THROWS_AS(pool_of(PoolKind::max, {}), UsageError);
    CHECK_THROWS_AS(pool_of(PoolKind::mean, {0.2, std::nan("")}), DataError);
    CHECK_THROWS_AS(pool_of(PoolKind::mean, {0.2, 1.5}), DataError);
    CHECK_THROWS_AS(parse_pool_kind("median"), ConfigError);
    CHECK(parse_pool_kind("noisy_or") == PoolKind::noisy_or);
}

}

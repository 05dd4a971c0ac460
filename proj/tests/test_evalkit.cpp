#include <doctest.h>

#include <cmath>
#include <functional>
#include <map>
#include <random>
#include <vector>

#include "sgmil/errors.hpp"
#include "sgmil/evalkit.hpp"

using namespace sgmil;
using namespace sgmil::evalkit;

namespace {

double pairwise_auc(const std::vector<double>& s, const std::vector<std::uint8_t>& y) {
    double wins = 0, pairs = 0;
    for (std::size_t i = 0; i < s.size(); ++i)
        for (std::size_t j = 0; j < s.size(); ++j) {
            if (!(y[i] == 1 && y[j] == 0)) continue;
            pairs += 1;
            wins += s[i] > s[j] ? 1.0 : (s[i] == s[j] ? 0.5 : 0.0);
        }
    return wins / pairs;
}

// Depth-first flood fill with 8-neighbourhood, used as the labelling oracle.
Grid<int> flood_fill(const BinaryMask& m) {
    Grid<int> out(m.height, m.width, 0);
    int next = 0;
    for (std::size_t y = 0; y < m.height; ++y)
        for (std::size_t x = 0; x < m.width; ++x) {
            if (!m.at(y, x) || out.at(y, x)) continue;
            ++next;
            std::vector<std::pair<long, long>> stack{{static_cast<long>(y), static_cast<long>(x)}};
            out.at(y, x) = next;
            while (!stack.empty()) {
                const auto [cy, cx] = stack.back();
                stack.pop_back();
                for (long dy = -1; dy <= 1; ++dy)
                    for (long dx = -1; dx <= 1; ++dx) {
                        const long ny = cy + dy, nx = cx + dx;
                        if (ny < 0 || nx < 0 || ny >= static_cast<long>(m.height) || nx >= static_cast<long>(m.width))
                            continue;
                        const auto uy = static_cast<std::size_t>(ny), ux = static_cast<std::size_t>(nx);
                        if (m.at(uy, ux) && !out.at(uy, ux)) {
                            out.at(uy, ux) = next;
                            stack.push_back({ny, nx});
                        }
                    }
            }
        }
    return out;
}

BinaryMask random_mask(std::mt19937_64& rng, std::size_t h, std::size_t w, double density) {
    std::bernoulli_distribution on(density);
    BinaryMask m(h, w, 0);
    for (auto& v : m.data) v = on(rng);
    return m;
}

}  // namespace

TEST_SUITE("evalkit") {

TEST_CASE("auc examples") {
    CHECK(auc(std::vector<double>{0.8, 0.35, 0.4, 0.1}, std::vector<std::uint8_t>{1, 1, 0, 0}) == doctest::Approx(0.75));
    CHECK(auc(std::vector<double>{0.9, 0.8, 0.2}, std::vector<std::uint8_t>{1, 1, 0}) == 1.0);
    CHECK(auc(std::vector<double>(6, 0.3), std::vector<std::uint8_t>{1, 0, 1, 0, 0, 1}) == 0.5);
    CHECK_THROWS_AS(auc(std::vector<double>{0.1, 0.2}, std::vector<std::uint8_t>{1, 1}), UndefinedMetric);
}

TEST_CASE("rank-based auc equals the pairwise oracle, ties included") {
    std::mt19937_64 rng(1);
    for (int trial = 0; trial < 1000; ++trial) {
        const std::size_t n = 2 + rng() % 60;
        const int levels = trial % 2 ? 5 : 1'000'000;  // coarse levels force ties
        std::vector<double> s(n);
        std::vector<std::uint8_t> y(n);
        for (std::size_t i = 0; i < n; ++i) {
            s[i] = static_cast<double>(rng() % levels) / levels;
            y[i] = static_cast<std::uint8_t>(rng() & 1);
        }
        y[0] = 1;
        y[1] = 0;
        const double fast = auc(s, y);
        CHECK(std::abs(fast - pairwise_auc(s, y)) <= 1e-12);

        std::vector<double> t(n);
        for (std::size_t i = 0; i < n; ++i) t[i] = std::exp(3.0 * s[i]) - 7.0;
        CHECK(std::abs(auc(t, y) - fast) <= 1e-12);
    }
}

TEST_CASE("instance iou") {
    const std::vector<std::uint8_t> gt{0, 0, 1, 1, 1};
    CHECK(instance_iou(std::vector<double>{0, 0.9, 0.9, 0.9, 0}, gt, 0.5) == doctest::Approx(0.5));
    CHECK(instance_iou(std::vector<double>{0, 0, 0.9, 0.9, 0.9}, gt, 0.5) == 1.0);
    CHECK(instance_iou(std::vector<double>{0.9, 0.9, 0, 0, 0}, gt, 0.5) == 0.0);
    // The threshold is strict.
    CHECK(instance_iou(std::vector<double>{0, 0, 0.5, 0.5, 0.5}, gt, 0.5) == 0.0);
}

TEST_CASE("box iou") {
    CHECK(box_iou({0, 0, 2, 2}, {1, 1, 3, 3}) == doctest::Approx(1.0 / 7.0));
    CHECK(box_iou({2, 3, 5, 7}, {2, 3, 5, 7}) == 1.0);
    CHECK(box_iou({0, 0, 1, 1}, {4, 4, 5, 5}) == 0.0);
}

TEST_CASE("iou symmetry and range on random input") {
    std::mt19937_64 rng(8);
    std::uniform_int_distribution<int> coord(0, 12);
    for (int trial = 0; trial < 2000; ++trial) {
        int a0 = coord(rng), a1 = coord(rng), b0 = coord(rng), b1 = coord(rng);
        BoxRect a{std::min(a0, a1), std::min(b0, b1), std::max(a0, a1) + 1, std::max(b0, b1) + 1};
        BoxRect b{coord(rng), coord(rng), 0, 0};
        b.x1 = b.x0 + 1 + coord(rng) / 3;
        b.y1 = b.y0 + 1 + coord(rng) / 3;
        const double ab = box_iou(a, b);
        CHECK(ab == box_iou(b, a));
        CHECK(ab >= 0.0);
        CHECK(ab <= 1.0);
        if (ab == 1.0) CHECK(a == b);

        std::vector<double> p(10);
        std::vector<std::uint8_t> t(10), tp(10);
        for (std::size_t i = 0; i < 10; ++i) {
            p[i] = (rng() & 1) ? 0.9 : 0.1;
            t[i] = rng() & 1;
            tp[i] = p[i] > 0.5;
        }
        std::vector<double> tt(t.begin(), t.end());
        const double x = instance_iou(p, t, 0.5);
        CHECK(x == instance_iou(tt, tp, 0.5));
        if (x == 1.0) CHECK(t == tp);
    }
}

TEST_CASE("connected components") {
    BinaryMask diag(3, 3, 0);
    diag.at(0, 0) = diag.at(1, 1) = 1;
    CHECK(connected_components(diag).count == 1);

    BinaryMask split(3, 3, 0);
    split.at(0, 1) = split.at(2, 1) = 1;
    CHECK(connected_components(split).count == 2);
}

TEST_CASE("components equal the flood-fill oracle on 200 random 16x16 masks") {
    std::mt19937_64 rng(16);
    for (int trial = 0; trial < 200; ++trial) {
        const auto m = random_mask(rng, 16, 16, 0.2 + 0.4 * (trial % 3) / 2.0);
        const auto comps = connected_components(m);
        const auto oracle = flood_fill(m);
        // Same partition and, because both scan row-major, the same numbering.
        CHECK(comps.labels.data == oracle.data);
        int max_label = 0;
        for (int v : oracle.data) max_label = std::max(max_label, v);
        CHECK(comps.count == max_label);
    }
}

TEST_CASE("opening never adds pixels") {
    std::mt19937_64 rng(2);
    for (int trial = 0; trial < 300; ++trial) {
        const auto m = random_mask(rng, 12, 9, 0.6);
        const auto opened = open_cross(m);
        for (std::size_t i = 0; i < m.data.size(); ++i) CHECK(opened.data[i] <= m.data[i]);
    }
}

TEST_CASE("box extraction hand traces") {
    LocalizationConfig cfg;
    cfg.upsample = 2;
    cfg.morphology = false;
    const ProbabilityMap two(2, 2, std::vector<double>{0.9, 0.1, 0.1, 0.1});
    const auto box = extract_box(two, cfg);
    REQUIRE(box.has_value());
    CHECK(*box == BoxRect{0, 0, 2, 2});

    CHECK_FALSE(extract_box(ProbabilityMap(4, 4, 0.3), cfg).has_value());

    // Two blobs; the maximum lives in the smaller one.
    ProbabilityMap map(8, 8, 0.0);
    for (std::size_t y = 4; y < 8; ++y)
        for (std::size_t x = 3; x < 8; ++x) map.at(y, x) = 0.7;
    map.at(0, 0) = 0.95;
    map.at(0, 1) = 0.8;
    map.at(1, 0) = 0.8;
    cfg.upsample = 1;
    const auto small = extract_box(map, cfg);
    REQUIRE(small.has_value());
    CHECK(*small == BoxRect{0, 0, 2, 2});
}

TEST_CASE("a single cell maps to its exact pixel block") {
    for (std::size_t f : {1u, 2u, 8u})
        for (std::size_t r = 0; r < 4; ++r)
            for (std::size_t c = 0; c < 4; ++c) {
                ProbabilityMap map(4, 4, 0.0);
                map.at(r, c) = 0.9;
                LocalizationConfig cfg;
                cfg.upsample = f;
                const auto box = extract_box(map, cfg);
                REQUIRE(box.has_value());
                const int fi = static_cast<int>(f);
                CHECK(*box == BoxRect{static_cast<int>(c) * fi, static_cast<int>(r) * fi, static_cast<int>(c + 1) * fi,
                                      static_cast<int>(r + 1) * fi});
            }
}

TEST_CASE("hit rule") {
    LocalizationConfig cfg;
    cfg.t_iou = 0.3;
    const BoxRect truth{0, 0, 10, 10};
    CHECK(is_hit({0.9, BoxRect{0, 0, 10, 4}, truth}, cfg));
    CHECK_FALSE(is_hit({0.4, truth, truth}, cfg));
    CHECK_FALSE(is_hit({0.9, std::nullopt, truth}, cfg));
    const std::vector<LocalizationCase> cases{{0.9, truth, truth}, {0.2, truth, truth}};
    CHECK(localization_accuracy(cases, cfg) == 0.5);
}

}

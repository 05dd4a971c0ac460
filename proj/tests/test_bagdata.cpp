#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <random>

#include "sgmil/bagdata/bags.hpp"
#include "sgmil/bagdata/readers.hpp"
#include "sgmil/errors.hpp"

using namespace sgmil;
using namespace sgmil::bagdata;

namespace {

std::vector<std::uint8_t> be32(std::uint32_t v) {
    return {static_cast<std::uint8_t>(v >> 24), static_cast<std::uint8_t>(v >> 16), static_cast<std::uint8_t>(v >> 8),
            static_cast<std::uint8_t>(v)};
}

std::vector<std::uint8_t> idx_bytes(std::uint32_t magic, std::vector<std::uint32_t> dims, std::vector<std::uint8_t> payload) {
    std::vector<std::uint8_t> out = be32(magic);
    for (auto d : dims) {
        const auto b = be32(d);
        out.insert(out.end(), b.begin(), b.end());
    }
    out.insert(out.end(), payload.begin(), payload.end());
    return out;
}

// Small in-memory corpus: 60 images of 4x4 pixels, every sixth one is a nine.
Corpus toy_corpus() {
    LabeledImages images;
    images.height = images.width = 4;
    for (int k = 0; k < 60; ++k) {
        images.labels.push_back(k % 6 == 0 ? 9 : k % 9);
        for (int i = 0; i < 16; ++i) images.pixels.push_back(static_cast<std::uint8_t>((k * 16 + i) % 256));
    }
    Corpus c;
    c.kind = CorpusKind::mnist;
    c.train = images;
    c.test = images;
    return c;
}

void check_mil_consistency(const std::vector<Bag>& bags) {
    for (const auto& bag : bags)
        for (std::size_t c = 0; c < bag.classes(); ++c) {
            std::uint8_t any = 0;
            for (std::size_t j = 0; j < bag.size(); ++j) any = std::max(any, bag.instance_label(j, c));
            CHECK(bag.labels[c] == any);
        }
}

bool same_bags(const std::vector<Bag>& a, const std::vector<Bag>& b) {
    if (a.size() != b.size()) return false;
    for (std::size_t i = 0; i < a.size(); ++i) {
        if (a[i].labels != b[i].labels || a[i].size() != b[i].size() || a[i].seed != b[i].seed) return false;
        for (std::size_t j = 0; j < a[i].size(); ++j)
            if (!(a[i].instances[j].pixels == b[i].instances[j].pixels) ||
                a[i].instances[j].labels != b[i].instances[j].labels)
                return false;
    }
    return true;
}

}  // namespace

TEST_SUITE("bagdata") {

TEST_CASE("IDX fixtures") {
    const auto images = parse_idx(idx_bytes(kIdxImagesMagic, {1, 2, 2}, {0, 128, 255, 0}));
    const auto t = images.to_tensor();
    CHECK(t.shape() == diffnet::Shape{1, 2, 2});
    CHECK(t[0] == 0.0);
    CHECK(t[1] == doctest::Approx(128.0 / 255.0));
    CHECK(t[2] == 1.0);
    CHECK(t[3] == 0.0);

    const auto labels = parse_idx(idx_bytes(kIdxLabelsMagic, {1}, {7}));
    CHECK(labels.bytes == std::vector<std::uint8_t>{7});
    CHECK_FALSE(labels.is_images());

    CHECK_THROWS_AS(parse_idx(idx_bytes(0x00000802, {1}, {7})), FormatError);
    CHECK_THROWS_AS(parse_idx(idx_bytes(kIdxImagesMagic, {1, 2, 2}, {0, 1, 2})), FormatError);
}

TEST_CASE("IDX and CIFAR readers round-trip their input bytes") {
    const auto bytes = idx_bytes(kIdxImagesMagic, {2, 3, 2}, {1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11, 12});
    CHECK(encode_idx(parse_idx(bytes)) == bytes);

    std::vector<std::uint8_t> cifar(2 * kCifarRecordBytes);
    std::mt19937_64 rng(3);
    for (auto& b : cifar) b = static_cast<std::uint8_t>(rng());
    cifar[0] = 4;
    cifar[kCifarRecordBytes] = 8;
    CHECK(encode_cifar10(parse_cifar10(cifar)) == cifar);
}

TEST_CASE("CIFAR fixtures") {
    std::vector<std::uint8_t> one(kCifarRecordBytes, 0);
    one[0] = 5;
    one[1] = 255;
    const auto batch = parse_cifar10(one);
    REQUIRE(batch.size() == 1);
    CHECK(batch.labels[0] == 5);
    const auto img = batch.image(0);
    CHECK(img.shape() == diffnet::Shape{3, 32, 32});
    CHECK(img[0] == 1.0);

    CHECK(parse_cifar10(std::vector<std::uint8_t>{}).size() == 0);
    try {
        parse_cifar10(std::vector<std::uint8_t>(3072, 0));
        FAIL("expected FormatError");
    } catch (const FormatError& e) {
        CHECK(e.offset() <= 3072);
    }
}

TEST_CASE("fixed-k recipe plants exactly k positives") {
    BagRecipe r;
    r.mean_bag_size = 10;
    r.mode = PositiveMode::fixed;
    r.positives_per_bag = 1;
    r.bag_count = 4;
    r.seed = 123;
    r.image_side = 4;
    const auto bags = sample_bags(r, toy_corpus());
    REQUIRE(bags.size() == 4);
    std::size_t positive_bags = 0;
    for (const auto& bag : bags) {
        std::size_t nines = 0;
        for (const auto& inst : bag.instances) nines += inst.source_class == 9;
        if (bag.labels[0]) {
            ++positive_bags;
            CHECK(nines == 1);
        } else {
            CHECK(nines == 0);
        }
    }
    CHECK(positive_bags == 2);
    check_mil_consistency(bags);
}

TEST_CASE("sampling is deterministic, MIL-consistent and split-aware") {
    BagRecipe r;
    r.mean_bag_size = 12;
    r.bag_count = 30;
    r.seed = 9;
    r.image_side = 6;
    const Corpus corpus = toy_corpus();
    const auto a = sample_bags(r, corpus);
    const auto b = sample_bags(r, corpus);
    CHECK(same_bags(a, b));
    check_mil_consistency(a);
    for (const auto& bag : a) {
        CHECK(bag.size() >= 2);
        CHECK(bag.instances[0].pixels.shape() == diffnet::Shape{1, 6, 6});
    }
    r.split = SplitKind::test;
    CHECK_FALSE(same_bags(a, sample_bags(r, corpus)));
    r.seed = 10;
    r.split = SplitKind::train;
    CHECK_FALSE(same_bags(a, sample_bags(r, corpus)));
}

TEST_CASE("nearest-neighbour resize maps 28 to 32 pixels") {
    std::vector<std::uint8_t> img(28 * 28);
    for (std::size_t i = 0; i < img.size(); ++i) img[i] = static_cast<std::uint8_t>(i % 251);
    const auto t = resize_nearest(img.data(), 1, 28, 28, 32);
    CHECK(t.shape() == diffnet::Shape{1, 32, 32});
    CHECK(t[0] == img[0] / 255.0);
    CHECK(t[32 * 32 - 1] == img[28 * 28 - 1] / 255.0);
}

TEST_CASE("natural MNIST bags follow the corpus distribution" * doctest::timeout(120)) {
    const Corpus corpus = load_mnist(SGMIL_TEST_MNIST_DIR);
    const auto& train = corpus.split(SplitKind::train);
    double q = 0;
    for (int label : train.labels) q += label == 9;
    q /= static_cast<double>(train.size());

    BagRecipe r;
    r.mean_bag_size = 50;
    r.balanced = false;
    r.bag_count = 1000;
    r.seed = 4;
    r.image_side = 28;
    const auto bags = sample_bags(r, corpus);
    double mean_size = 0, positive = 0;
    for (const auto& bag : bags) {
        mean_size += static_cast<double>(bag.size());
        positive += bag.labels[0];
    }
    mean_size /= 1000.0;
    positive /= 1000.0;
    CHECK(std::abs(mean_size - 50.0) <= 2.5);
    CHECK(std::abs(positive - (1.0 - std::pow(1.0 - q, 50.0))) <= 0.05);
    check_mil_consistency(bags);
}

TEST_CASE("balanced natural bags alternate positive and negative") {
    BagRecipe r;
    r.mean_bag_size = 8;
    r.bag_count = 20;
    r.seed = 77;
    r.image_side = 4;
    const auto bags = sample_bags(r, toy_corpus());
    for (std::size_t b = 0; b < bags.size(); ++b) CHECK(bags[b].labels[0] == (b % 2 == 0 ? 1 : 0));
}

TEST_CASE("synthetic grid samples") {
    const auto data = make_grid_dataset(200, 8, 8, 1, 5);
    const auto again = make_grid_dataset(200, 8, 8, 1, 5);
    std::size_t positives = 0;
    for (std::size_t s = 0; s < data.size(); ++s) {
        const auto& g = data[s];
        CHECK(g.bag.size() == 64);
        CHECK(g.bag.instances[0].pixels == again[s].bag.instances[0].pixels);
        std::size_t cells = 0;
        for (auto v : g.truth[0]) cells += v;
        if (g.bag.labels[0] == 0) {
            CHECK(cells == 0);
            CHECK_FALSE(g.boxes[0].has_value());
            continue;
        }
        ++positives;
        REQUIRE(g.boxes[0].has_value());
        const BoxRect box = *g.boxes[0];
        CHECK(static_cast<long long>(cells) == box.area());
        for (int y = 0; y < 8; ++y)
            for (int x = 0; x < 8; ++x) {
                const bool inside = x >= box.x0 && x < box.x1 && y >= box.y0 && y < box.y1;
                CHECK(g.truth[0][static_cast<std::size_t>(y * 8 + x)] == (inside ? 1 : 0));
            }
        for (const auto& inst : g.bag.instances)
            for (double v : inst.pixels.values()) {
                CHECK(v >= 0.0);
                CHECK(v <= 1.0);
            }
    }
    CHECK(positives > 60);
    CHECK(positives < 140);
}

TEST_CASE("bag caches round-trip") {
    BagRecipe r;
    r.bag_count = 6;
    r.seed = 2;
    r.image_side = 5;
    const auto bags = sample_bags(r, toy_corpus());
    const auto path = std::filesystem::temp_directory_path() / "sgmil_bags_test.bin";
    save_bags(path, bags);
    CHECK(same_bags(bags, load_bags(path)));
    std::filesystem::remove(path);

    const auto grid = make_grid_dataset(3, 4, 4, 2, 1);
    std::vector<Bag> grid_bags;
    for (const auto& g : grid) grid_bags.push_back(g.bag);
    save_bags(path, grid_bags);
    const auto loaded = load_bags(path);
    CHECK(same_bags(grid_bags, loaded));
    CHECK(loaded[0].grid_h == 4);
    std::filesystem::remove(path);
}

TEST_CASE("invalid recipes and missing corpora") {
    BagRecipe r;
    r.mean_bag_size = 0;
    CHECK_THROWS_AS(r.validate(), ConfigError);
    CHECK_THROWS_AS(load_mnist("/nonexistent/mnist"), IoError);
    Corpus only_train = toy_corpus();
    only_train.test.reset();
    CHECK_THROWS_AS(only_train.split(SplitKind::test), UsageError);
    Bag bad;
    bad.labels = {0};
    Instance inst;
    inst.labels = {1};
    bad.instances.push_back(inst);
    CHECK_THROWS_AS(bad.validate(), DataError);
}

}

#include "sgmil/bagdata/bags.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>

#include "sgmil/bagdata/readers.hpp"
#include "sgmil/diffnet/backbone.hpp"
#include "sgmil/diffnet/checkpoint.hpp"
#include "sgmil/errors.hpp"

namespace sgmil::bagdata {

std::string_view to_string(CorpusKind kind) {
    switch (kind) {
        case CorpusKind::mnist: return "mnist";
        case CorpusKind::cifar10: return "cifar10";
        case CorpusKind::synthetic_grid: return "synthetic_grid";
    }
    return "?";
}

std::string_view to_string(PositiveMode mode) { return mode == PositiveMode::natural ? "natural" : "fixed"; }
std::string_view to_string(SplitKind split) { return split == SplitKind::train ? "train" : "test"; }

CorpusKind parse_corpus_kind(std::string_view name) {
    for (CorpusKind k : {CorpusKind::mnist, CorpusKind::cifar10, CorpusKind::synthetic_grid})
        if (to_string(k) == name) return k;
    throw ConfigError("unknown corpus '" + std::string(name) + "'");
}

PositiveMode parse_positive_mode(std::string_view name) {
    if (name == "natural") return PositiveMode::natural;
    if (name == "fixed") return PositiveMode::fixed;
    throw ConfigError("unknown positive-count mode '" + std::string(name) + "'");
}

const LabeledImages& Corpus::split(SplitKind which) const {
    const auto& s = which == SplitKind::train ? train : test;
    if (!s) throw UsageError(std::string(to_string(kind)) + " corpus lacks the " + std::string(to_string(which)) + " split");
    return *s;
}

namespace {

std::optional<LabeledImages> load_mnist_split(const std::filesystem::path& dir, const std::string& prefix) {
    const auto images_path = dir / (prefix + "-images-idx3-ubyte");
    const auto labels_path = dir / (prefix + "-labels-idx1-ubyte");
    if (!std::filesystem::exists(images_path) || !std::filesystem::exists(labels_path)) return std::nullopt;
    IdxFile images = read_idx(images_path);
    IdxFile labels = read_idx(labels_path);
    if (!images.is_images() || labels.is_images())
        throw FormatError("MNIST files in '" + dir.string() + "' have swapped magics", 0);
    if (images.dims[0] != labels.dims[0]) throw FormatError("MNIST image/label counts differ", 4);
    LabeledImages out;
    out.channels = 1;
    out.height = images.dims[1];
    out.width = images.dims[2];
    out.pixels = std::move(images.bytes);
    out.labels.assign(labels.bytes.begin(), labels.bytes.end());
    return out;
}

}  // namespace

Corpus load_mnist(const std::filesystem::path& dir) {
    Corpus c;
    c.kind = CorpusKind::mnist;
    c.train = load_mnist_split(dir, "train");
    c.test = load_mnist_split(dir, "t10k");
    if (!c.train && !c.test) throw IoError("no MNIST IDX files found in '" + dir.string() + "'");
    return c;
}

Corpus load_cifar10(const std::filesystem::path& dir) {
    auto append = [](std::optional<LabeledImages>& split, const CifarBatch& b) {
        if (!split) split = LabeledImages{3, kCifarSide, kCifarSide, {}, {}};
        split->pixels.insert(split->pixels.end(), b.pixels.begin(), b.pixels.end());
        split->labels.insert(split->labels.end(), b.labels.begin(), b.labels.end());
    };
    Corpus c;
    c.kind = CorpusKind::cifar10;
    for (int k = 1; k <= 5; ++k) {
        const auto p = dir / ("data_batch_" + std::to_string(k) + ".bin");
        if (std::filesystem::exists(p)) append(c.train, read_cifar10(p));
    }
    if (const auto p = dir / "test_batch.bin"; std::filesystem::exists(p)) append(c.test, read_cifar10(p));
    if (!c.train && !c.test) throw IoError("no CIFAR-10 batches found in '" + dir.string() + "'");
    return c;
}

double BagRecipe::effective_std() const {
    if (bag_size_std >= 0.0) return bag_size_std;
    return mean_bag_size == 10.0 ? 2.0 : mean_bag_size / 10.0;
}

void BagRecipe::validate() const {
    if (!(mean_bag_size >= 1.0)) throw ConfigError("mean bag size must be >= 1");
    if (std::isnan(bag_size_std)) throw ConfigError("bag size std is NaN");
    if (mode == PositiveMode::fixed && (positives_per_bag == 0 || static_cast<double>(positives_per_bag) > mean_bag_size))
        throw ConfigError("fixed positives per bag must lie in [1, mean bag size]");
    if (image_side == 0) throw ConfigError("image side must be positive");
}

std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b) {
    // splitmix64 finalizer over a combined state
    std::uint64_t z = a ^ (b + 0x9e3779b97f4a7c15ULL + (a << 6) + (a >> 2));
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

diffnet::Tensor resize_nearest(const std::uint8_t* image, std::size_t channels, std::size_t height,
                               std::size_t width, std::size_t side) {
    diffnet::Tensor t({channels, side, side});
    for (std::size_t ch = 0; ch < channels; ++ch)
        for (std::size_t y = 0; y < side; ++y) {
            const std::size_t sy = y * height / side;
            for (std::size_t x = 0; x < side; ++x) {
                const std::size_t sx = x * width / side;
                t[(ch * side + y) * side + x] = image[(ch * height + sy) * width + sx] / 255.0;
            }
        }
    return t;
}

namespace {

Instance make_instance(const LabeledImages& images, std::size_t index, const BagRecipe& recipe) {
    Instance inst;
    const bool resize = recipe.corpus == CorpusKind::mnist && images.height != recipe.image_side;
    if (resize) {
        inst.pixels = resize_nearest(images.image(index), images.channels, images.height, images.width, recipe.image_side);
    } else {
        inst.pixels = diffnet::Tensor({images.channels, images.height, images.width});
        const std::uint8_t* src = images.image(index);
        for (std::size_t i = 0; i < images.image_bytes(); ++i) inst.pixels[i] = src[i] / 255.0;
    }
    inst.source_class = images.labels[index];
    inst.labels = {static_cast<std::uint8_t>(inst.source_class == recipe.positive_class)};
    return inst;
}

std::size_t draw_bag_size(const BagRecipe& recipe, std::mt19937_64& rng) {
    std::normal_distribution<double> size_dist(recipe.mean_bag_size, recipe.effective_std());
    const double floor_size = recipe.mode == PositiveMode::fixed
                                  ? std::max(2.0, static_cast<double>(recipe.positives_per_bag))
                                  : 2.0;
    return static_cast<std::size_t>(std::max(floor_size, std::round(size_dist(rng))));
}

constexpr std::size_t kMaxRejections = 1'000'000;

}  // namespace

std::vector<Bag> sample_bags(const BagRecipe& recipe, const Corpus& corpus) {
    recipe.validate();
    if (recipe.corpus == CorpusKind::synthetic_grid)
        throw UsageError("synthetic grid bags come from make_grid_dataset");
    if (corpus.kind != recipe.corpus) throw UsageError("recipe corpus does not match the loaded corpus");
    const LabeledImages& images = corpus.split(recipe.split);
    if (images.size() == 0) throw UsageError("corpus split is empty");

    std::vector<std::size_t> positives, negatives;
    for (std::size_t k = 0; k < images.size(); ++k)
        (images.labels[k] == recipe.positive_class ? positives : negatives).push_back(k);
    if (recipe.mode == PositiveMode::fixed && (positives.empty() || negatives.empty()))
        throw UsageError("fixed-k sampling needs both positive and negative images in the split");

    const std::uint64_t split_salt = recipe.split == SplitKind::train ? 0x7472616eULL : 0x74657374ULL;
    std::vector<Bag> bags;
    bags.reserve(recipe.bag_count);
    for (std::size_t b = 0; b < recipe.bag_count; ++b) {
        const std::uint64_t bag_seed = mix_seed(mix_seed(recipe.seed, split_salt), b);
        std::mt19937_64 rng(bag_seed);
        const bool want_positive = b % 2 == 0;
        std::vector<std::size_t> members;

        if (recipe.mode == PositiveMode::fixed) {
            const std::size_t n = draw_bag_size(recipe, rng);
            const std::size_t k = want_positive ? recipe.positives_per_bag : 0;
            std::uniform_int_distribution<std::size_t> pick_pos(0, positives.size() - 1);
            std::uniform_int_distribution<std::size_t> pick_neg(0, negatives.size() - 1);
            for (std::size_t j = 0; j < n; ++j) members.push_back(j < k ? positives[pick_pos(rng)] : negatives[pick_neg(rng)]);
            std::shuffle(members.begin(), members.end(), rng);
        } else {
            std::uniform_int_distribution<std::size_t> pick(0, images.size() - 1);
            for (std::size_t attempt = 0;; ++attempt) {
                if (attempt == kMaxRejections)
                    throw DataError("could not draw a " + std::string(want_positive ? "positive" : "negative") +
                                    " bag by rejection; the recipe is too unbalanced");
                const std::size_t n = draw_bag_size(recipe, rng);
                members.clear();
                bool positive = false;
                for (std::size_t j = 0; j < n; ++j) {
                    members.push_back(pick(rng));
                    positive = positive || images.labels[members.back()] == recipe.positive_class;
                }
                if (!recipe.balanced || positive == want_positive) break;
            }
        }

        Bag bag;
        bag.id = b;
        bag.seed = bag_seed;
        bag.instances.reserve(members.size());
        std::uint8_t label = 0;
        for (std::size_t idx : members) {
            bag.instances.push_back(make_instance(images, idx, recipe));
            label = std::max(label, bag.instances.back().labels[0]);
        }
        bag.labels = {label};
        bag.validate();
        bags.push_back(std::move(bag));
    }
    return bags;
}

std::vector<GridSample> make_grid_dataset(std::size_t count, std::size_t height, std::size_t width,
                                          std::size_t classes, std::uint64_t seed, const GridOptions& options) {
    if (height < 4 || width < 4) throw ConfigError("grid must be at least 4 x 4");
    if (classes == 0 || options.features < classes)
        throw ConfigError("grid needs 1 <= classes <= features");
    std::vector<GridSample> out;
    out.reserve(count);
    const std::size_t cells = height * width;
    for (std::size_t s = 0; s < count; ++s) {
        std::mt19937_64 rng(mix_seed(seed, s));
        GridSample g;
        g.truth.assign(classes, std::vector<std::uint8_t>(cells, 0));
        g.boxes.assign(classes, std::nullopt);
        std::bernoulli_distribution present(options.positive_rate);
        std::uniform_int_distribution<std::size_t> rect_h(1, (height + 1) / 2), rect_w(1, (width + 1) / 2);
        for (std::size_t c = 0; c < classes; ++c) {
            if (!present(rng)) continue;
            const std::size_t h = rect_h(rng), w = rect_w(rng);
            const std::size_t y0 = std::uniform_int_distribution<std::size_t>(0, height - h)(rng);
            const std::size_t x0 = std::uniform_int_distribution<std::size_t>(0, width - w)(rng);
            for (std::size_t y = y0; y < y0 + h; ++y)
                for (std::size_t x = x0; x < x0 + w; ++x) g.truth[c][y * width + x] = 1;
            g.boxes[c] = BoxRect{static_cast<int>(x0), static_cast<int>(y0), static_cast<int>(x0 + w),
                                 static_cast<int>(y0 + h)};
        }

        std::normal_distribution<double> noise(0.0, options.noise_std);
        Bag& bag = g.bag;
        bag.id = s;
        bag.seed = mix_seed(seed, s);
        bag.grid_h = height;
        bag.grid_w = width;
        bag.labels.assign(classes, 0);
        bag.instances.resize(cells);
        for (std::size_t cell = 0; cell < cells; ++cell) {
            Instance& inst = bag.instances[cell];
            inst.pixels = diffnet::Tensor({options.features});
            inst.labels.assign(classes, 0);
            for (std::size_t c = 0; c < classes; ++c) inst.labels[c] = g.truth[c][cell];
            for (std::size_t f = 0; f < options.features; ++f) {
                const bool fg = inst.labels[f % classes] != 0;
                const double mean = fg ? options.foreground_mean : options.background_mean;
                inst.pixels[f] = std::clamp(mean + noise(rng), 0.0, 1.0);
            }
            inst.source_class = -1;
            for (std::size_t c = 0; c < classes; ++c)
                if (inst.labels[c]) {
                    inst.source_class = static_cast<int>(c);
                    bag.labels[c] = 1;
                }
        }
        bag.validate();
        out.push_back(std::move(g));
    }
    return out;
}

void save_bags(const std::filesystem::path& path, const std::vector<Bag>& bags) {
    using diffnet::NamedTensor;
    using diffnet::Tensor;
    std::vector<NamedTensor> records;
    records.reserve(bags.size() * 4);
    for (const Bag& bag : bags) {
        const std::string prefix = "bag" + std::to_string(bag.id) + ".";
        const std::size_t n = bag.size(), c = bag.classes();
        records.push_back({prefix + "meta",
                           Tensor({5}, {static_cast<double>(bag.id), static_cast<double>(bag.seed >> 32),
                                        static_cast<double>(bag.seed & 0xffffffffULL), static_cast<double>(bag.grid_h),
                                        static_cast<double>(bag.grid_w)})});
        records.push_back({prefix + "labels", Tensor({c}, std::vector<double>(bag.labels.begin(), bag.labels.end()))});
        // column 0: source class, columns 1..C: hidden instance labels
        Tensor instances({n, c + 1});
        for (std::size_t j = 0; j < n; ++j) {
            instances[j * (c + 1)] = bag.instances[j].source_class;
            for (std::size_t k = 0; k < c; ++k) instances[j * (c + 1) + 1 + k] = bag.instances[j].labels[k];
        }
        records.push_back({prefix + "instances", std::move(instances)});
        records.push_back({prefix + "pixels", diffnet::stack_instances(bag)});
    }
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
    diffnet::write_container(out, kBagCacheMagic, records);
}

std::vector<Bag> load_bags(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open '" + path.string() + "'");
    const auto records = diffnet::read_container(in, kBagCacheMagic);
    if (records.size() % 4 != 0) throw FormatError("bag cache holds an incomplete bag record", 0);
    std::vector<Bag> bags;
    for (std::size_t r = 0; r < records.size(); r += 4) {
        const auto& meta = records[r].tensor;
        const auto& labels = records[r + 1].tensor;
        const auto& instances = records[r + 2].tensor;
        const auto& pixels = records[r + 3].tensor;
        if (meta.size() != 5 || instances.rank() != 2 || pixels.rank() < 2 || pixels.dim(0) != instances.dim(0) ||
            instances.dim(1) != labels.size() + 1)
            throw FormatError("malformed bag record '" + records[r].name + "'", 0);
        Bag bag;
        bag.id = static_cast<std::uint64_t>(meta[0]);
        bag.seed = (static_cast<std::uint64_t>(meta[1]) << 32) | static_cast<std::uint64_t>(meta[2]);
        bag.grid_h = static_cast<std::size_t>(meta[3]);
        bag.grid_w = static_cast<std::size_t>(meta[4]);
        for (double v : labels.values()) bag.labels.push_back(static_cast<std::uint8_t>(v));
        const std::size_t n = instances.dim(0), c = labels.size();
        diffnet::Shape inst_shape(pixels.shape().begin() + 1, pixels.shape().end());
        const std::size_t per = diffnet::element_count(inst_shape);
        for (std::size_t j = 0; j < n; ++j) {
            Instance inst;
            inst.source_class = static_cast<int>(instances[j * (c + 1)]);
            for (std::size_t k = 0; k < c; ++k)
                inst.labels.push_back(static_cast<std::uint8_t>(instances[j * (c + 1) + 1 + k]));
            inst.pixels = diffnet::Tensor(inst_shape,
                                          std::vector<double>(pixels.data() + j * per, pixels.data() + (j + 1) * per));
            bag.instances.push_back(std::move(inst));
        }
        bag.validate();
        bags.push_back(std::move(bag));
    }
    return bags;
}

}  // namespace sgmil::bagdata

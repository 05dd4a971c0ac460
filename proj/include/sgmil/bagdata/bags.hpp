#pragma once

// Bag generation: MNIST-bags / CIFAR10-bags samplers and the synthetic patch-grid dataset.
// Every bag is a pure function of (recipe, bag index): its generator is seeded with a hash
// of the recipe seed, the split and the index.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "sgmil/types.hpp"

namespace sgmil::bagdata {

enum class CorpusKind { mnist, cifar10, synthetic_grid };
enum class PositiveMode { natural, fixed };
enum class SplitKind { train, test };

std::string_view to_string(CorpusKind kind);
std::string_view to_string(PositiveMode mode);
std::string_view to_string(SplitKind split);
CorpusKind parse_corpus_kind(std::string_view name);
PositiveMode parse_positive_mode(std::string_view name);

/// Labeled u8 images of one split, stored channel-planar.
struct LabeledImages {
    std::size_t channels = 1;
    std::size_t height = 0;
    std::size_t width = 0;
    std::vector<std::uint8_t> pixels;
    std::vector<int> labels;

    std::size_t size() const noexcept { return labels.size(); }
    std::size_t image_bytes() const noexcept { return channels * height * width; }
    const std::uint8_t* image(std::size_t k) const { return pixels.data() + k * image_bytes(); }
};

struct Corpus {
    CorpusKind kind = CorpusKind::mnist;
    std::optional<LabeledImages> train;
    std::optional<LabeledImages> test;

    /// Throws UsageError when the split was not loaded.
    const LabeledImages& split(SplitKind which) const;
};

/// Reads {train,t10k}-{images-idx3,labels-idx1}-ubyte from `dir`. Missing splits stay empty;
/// a directory with neither split raises IoError.
Corpus load_mnist(const std::filesystem::path& dir);
/// Reads data_batch_{1..5}.bin (train) and test_batch.bin (test) from `dir`.
Corpus load_cifar10(const std::filesystem::path& dir);

struct BagRecipe {
    CorpusKind corpus = CorpusKind::mnist;
    int positive_class = 9;
    double mean_bag_size = 10.0;
    double bag_size_std = -1.0;  // < 0: 2 for mean 10, mean / 10 otherwise
    PositiveMode mode = PositiveMode::natural;
    std::size_t positives_per_bag = 1;  // fixed mode only
    bool balanced = true;               // natural mode: alternate positive / negative bags by rejection
    std::size_t bag_count = 0;
    SplitKind split = SplitKind::train;
    std::uint64_t seed = 0;
    std::size_t image_side = 32;  // MNIST digits are resized to this side

    double effective_std() const;
    void validate() const;
};

std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b);

/// Nearest-neighbor resize of one channel-planar u8 image to side x side, scaled to [0, 1].
diffnet::Tensor resize_nearest(const std::uint8_t* image, std::size_t channels, std::size_t height,
                               std::size_t width, std::size_t side);

/// Generates recipe.bag_count bags from the recipe's split. Single-class bags: labels[0]
/// says whether the bag contains recipe.positive_class.
std::vector<Bag> sample_bags(const BagRecipe& recipe, const Corpus& corpus);

struct GridSample {
    Bag bag;                                         // H*W cell instances, row-major
    std::vector<std::vector<std::uint8_t>> truth;    // per class, H*W binary map
    std::vector<std::optional<BoxRect>> boxes;       // per class, in cell units
};

struct GridOptions {
    std::size_t features = 16;
    double background_mean = 0.35;
    double foreground_mean = 0.65;
    double noise_std = 0.2;
    double positive_rate = 0.5;  // per class
};

/// Each class is present with probability options.positive_rate; a present class occupies one
/// axis-aligned rectangle of side lengths uniform in [1, ceil(H/2)] x [1, ceil(W/2)].
std::vector<GridSample> make_grid_dataset(std::size_t count, std::size_t height, std::size_t width,
                                          std::size_t classes, std::uint64_t seed,
                                          const GridOptions& options = {});

/// Dataset cache in the tensor container format with the "BAGS" magic.
inline constexpr std::string_view kBagCacheMagic = "BAGS";
void save_bags(const std::filesystem::path& path, const std::vector<Bag>& bags);
std::vector<Bag> load_bags(const std::filesystem::path& path);

}  // namespace sgmil::bagdata

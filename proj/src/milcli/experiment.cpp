#include "sgmil/milcli/experiment.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>
#include <random>

#include "sgmil/diffnet/backbone.hpp"
#include "sgmil/diffnet/graph.hpp"
#include "sgmil/diffnet/ops.hpp"
#include "sgmil/diffnet/optim.hpp"
#include "sgmil/errors.hpp"
#include "sgmil/evalkit.hpp"
#include "sgmil/pooling.hpp"
#include "sgmil/sgloss.hpp"

namespace sgmil::milcli {

namespace {

constexpr std::uint64_t kDataSalt = 0x64617461;  // "data"
constexpr std::uint64_t kInitSalt = 0x696e6974;  // "init"
constexpr std::uint64_t kOrderSalt = 0x6f726472; // "ordr"

std::string format_metric(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.4f", v);
    return buf;
}

diffnet::Shape instance_shape(const std::vector<Bag>& bags) {
    for (const auto& bag : bags)
        if (!bag.instances.empty()) return bag.instances.front().pixels.shape();
    throw DataError("dataset contains no instances");
}

}  // namespace

const bagdata::Corpus& CorpusCache::get(const ExperimentConfig& cfg) {
    const std::string key = std::string(to_string(cfg.recipe.corpus)) + "|" + cfg.data_dir;
    if (!corpus_ || key != key_) {
        corpus_ = std::make_unique<bagdata::Corpus>(cfg.recipe.corpus == bagdata::CorpusKind::cifar10
                                                        ? bagdata::load_cifar10(cfg.data_dir)
                                                        : bagdata::load_mnist(cfg.data_dir));
        key_ = key;
    }
    return *corpus_;
}

RunData build_run_data(const ExperimentConfig& cfg, std::uint64_t seed, CorpusCache& cache) {
    RunData data;
    const std::uint64_t data_seed = bagdata::mix_seed(seed, kDataSalt);
    if (cfg.recipe.corpus == bagdata::CorpusKind::synthetic_grid) {
        bagdata::GridOptions opts;
        opts.features = cfg.grid_features;
        for (auto& s : bagdata::make_grid_dataset(cfg.train_bags, cfg.grid_height, cfg.grid_width, cfg.classes,
                                                  bagdata::mix_seed(data_seed, 1), opts))
            data.train.push_back(std::move(s.bag));
        data.grid_test = bagdata::make_grid_dataset(cfg.test_bags, cfg.grid_height, cfg.grid_width, cfg.classes,
                                                    bagdata::mix_seed(data_seed, 2), opts);
        for (const auto& s : data.grid_test) data.test.push_back(s.bag);
        return data;
    }
    const auto& corpus = cache.get(cfg);
    bagdata::BagRecipe recipe = cfg.recipe;
    recipe.seed = data_seed;
    recipe.split = bagdata::SplitKind::train;
    recipe.bag_count = cfg.train_bags;
    data.train = bagdata::sample_bags(recipe, corpus);
    recipe.split = bagdata::SplitKind::test;
    recipe.bag_count = cfg.test_bags;
    data.test = bagdata::sample_bags(recipe, corpus);
    return data;
}

RunRecord run_single(const ExperimentConfig& cfg, std::uint64_t seed, CorpusCache& cache, const LogFn& log) {
    cfg.validate();
    const auto started = std::chrono::steady_clock::now();
    RunRecord record;
    record.config_hash = config_hash(cfg);
    record.seed = seed;

    const RunData data = build_run_data(cfg, seed, cache);
    const std::size_t classes = data.train.front().classes();
    diffnet::Backbone net =
        diffnet::make_backbone(cfg.backbone, instance_shape(data.train), classes, bagdata::mix_seed(seed, kInitSalt));
    diffnet::OptimizerState opt(cfg.optimizer);

    std::vector<std::size_t> order(data.train.size());
    std::iota(order.begin(), order.end(), std::size_t{0});

    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        std::mt19937_64 rng(bagdata::mix_seed(bagdata::mix_seed(seed, kOrderSalt), epoch));
        std::shuffle(order.begin(), order.end(), rng);
        double total = 0.0;
        for (std::size_t idx : order) {
            const Bag& bag = data.train[idx];
            const diffnet::DiffValue out = diffnet::forward_bag(net, bag);
            const auto& v = out.value().values();
            const PredictionSet preds(bag.size(), classes, std::vector<double>(v.begin(), v.end()));
            const sgloss::Labels labels = bag.labels;
            const auto loss = sgloss::evaluate(cfg.loss, std::span(&preds, 1), std::span(&labels, 1), cfg.pooling, cfg.sgl);
            if (!std::isfinite(loss.value))
                throw NumericError("non-finite training loss in epoch " + std::to_string(epoch + 1) + " (bag " +
                                   std::to_string(bag.id) + ")");
            diffnet::Tensor grad(out.shape());
            std::copy(loss.grad.front().begin(), loss.grad.front().end(), grad.data());
            diffnet::backward(diffnet::attach_loss(out, loss.value, std::move(grad)));
            diffnet::optimizer_step(opt, net.parameters());
            net.zero_grad();
            total += loss.value;
        }
        record.epoch_loss.push_back(total / static_cast<double>(data.train.size()));
        if (log)
            log("seed " + std::to_string(seed) + " epoch " + std::to_string(epoch + 1) + "/" +
                std::to_string(cfg.epochs) + " loss " + format_metric(record.epoch_loss.back()));
    }

    // Evaluation: bag AUC over every (bag, class) pair and instance IoU over positive pairs.
    std::vector<double> scores;
    std::vector<std::uint8_t> truth;
    double iou_sum = 0.0;
    std::size_t iou_count = 0;
    std::vector<evalkit::LocalizationCase> cases;
    for (std::size_t b = 0; b < data.test.size(); ++b) {
        const Bag& bag = data.test[b];
        const PredictionSet preds = diffnet::predict(net, bag);
        for (std::size_t c = 0; c < classes; ++c) {
            const auto column = preds.column(c);
            const double score = pooling::pool(cfg.pooling, column);
            scores.push_back(score);
            truth.push_back(bag.labels[c]);
            if (bag.labels[c] == 0) continue;
            iou_sum += evalkit::instance_iou(column, bag.instance_labels(c), cfg.localization.t_p);
            ++iou_count;
            if (!data.grid_test.empty()) {
                const auto& sample = data.grid_test[b];
                const std::size_t f = cfg.localization.upsample;
                const BoxRect cell = *sample.boxes[c];
                evalkit::ProbabilityMap map(bag.grid_h, bag.grid_w, column);
                cases.push_back({score, evalkit::extract_box(map, cfg.localization),
                                 BoxRect{static_cast<int>(cell.x0 * f), static_cast<int>(cell.y0 * f),
                                         static_cast<int>(cell.x1 * f), static_cast<int>(cell.y1 * f)}});
            }
        }
    }
    record.test_auc = evalkit::auc(scores, truth);
    record.test_iou = iou_count ? iou_sum / static_cast<double>(iou_count) : std::numeric_limits<double>::quiet_NaN();
    if (!cases.empty()) record.localization_accuracy = evalkit::localization_accuracy(cases, cfg.localization);
    record.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    if (log)
        log("seed " + std::to_string(seed) + " test_auc " + format_metric(record.test_auc) + " test_iou " +
            format_metric(record.test_iou));
    return record;
}

ResultTable run_experiment(const ExperimentConfig& cfg, const LogFn& log) {
    ResultTable table;
    CorpusCache cache;
    for (std::uint64_t seed : cfg.seeds) table.runs.push_back(run_single(cfg, seed, cache, log));
    table.aggregates = aggregate(table.runs);
    return table;
}

ResultTable run_sweep(const ExperimentConfig& base, const std::string& axis, const std::vector<std::string>& values,
                      const LogFn& log) {
    if (values.empty()) throw UsageError("sweep needs at least one value");
    ResultTable table;
    table.axis = axis;
    CorpusCache cache;
    for (const auto& value : values) {
        ExperimentConfig cfg = base;
        set_field(cfg, axis, value);
        cfg.validate();
        if (log) log(axis + " = " + value);
        for (std::uint64_t seed : cfg.seeds) {
            RunRecord r = run_single(cfg, seed, cache, log);
            r.axis_value = value;
            table.runs.push_back(std::move(r));
        }
    }
    table.aggregates = aggregate(table.runs);
    return table;
}

std::vector<AggregateRow> aggregate(const std::vector<RunRecord>& runs) {
    std::vector<AggregateRow> rows;
    for (const auto& r : runs) {
        if (std::none_of(rows.begin(), rows.end(), [&](const AggregateRow& a) { return a.axis_value == r.axis_value; }))
            rows.push_back({r.axis_value});
    }
    for (auto& row : rows) {
        std::vector<double> aucs, ious;
        for (const auto& r : runs) {
            if (r.axis_value != row.axis_value) continue;
            aucs.push_back(r.test_auc);
            ious.push_back(r.test_iou);
        }
        const auto stats = [](const std::vector<double>& v, double& mean, double& lo, double& hi) {
            mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
            lo = *std::min_element(v.begin(), v.end());
            hi = *std::max_element(v.begin(), v.end());
        };
        stats(aucs, row.mean_auc, row.min_auc, row.max_auc);
        stats(ious, row.mean_iou, row.min_iou, row.max_iou);
    }
    return rows;
}

}  // namespace sgmil::milcli

#include "sgmil/milcli/gradsuite.hpp"

#include <algorithm>
#include <functional>
#include <random>

#include "sgmil/diffnet/gradcheck.hpp"
#include "sgmil/diffnet/ops.hpp"
#include "sgmil/pooling.hpp"
#include "sgmil/sgloss.hpp"

namespace sgmil::milcli {

namespace {

using diffnet::DiffValue;
using diffnet::Shape;
using diffnet::Tensor;
using Rng = std::mt19937_64;

Tensor random_tensor(Rng& rng, Shape shape, double lo, double hi) {
    std::uniform_real_distribution<double> u(lo, hi);
    Tensor t(std::move(shape));
    for (double& v : t.values()) v = u(rng);
    return t;
}

// Values kept at least `gap` away from `kink` so a central difference never straddles it.
Tensor away_from(Rng& rng, Shape shape, double kink, double gap, double spread) {
    Tensor t = random_tensor(rng, std::move(shape), gap, spread);
    std::bernoulli_distribution sign(0.5);
    for (double& v : t.values()) v = sign(rng) ? kink + v : kink - v;
    return t;
}

// Projects a layer output onto fixed random weights so every output coordinate matters.
DiffValue project(const DiffValue& y, const Tensor& weights) {
    return diffnet::sum(diffnet::mul(y, DiffValue::leaf(weights)));
}

std::size_t pick(Rng& rng, std::size_t lo, std::size_t hi) {
    return std::uniform_int_distribution<std::size_t>(lo, hi)(rng);
}

// Checks f with respect to each argument in turn, holding the others at their sampled values.
double check_all(const std::vector<Tensor>& args, const std::function<DiffValue(const std::vector<DiffValue>&)>& f,
                 double eps) {
    double worst = 0.0;
    for (std::size_t k = 0; k < args.size(); ++k) {
        const auto g = [&](const DiffValue& x) {
            std::vector<DiffValue> in;
            for (std::size_t i = 0; i < args.size(); ++i) in.push_back(i == k ? x : DiffValue::leaf(args[i]));
            return f(in);
        };
        worst = std::max(worst, diffnet::gradient_check(g, args[k], eps));
    }
    return worst;
}

std::vector<PredictionSet> to_prediction_sets(const Tensor& flat, const std::vector<std::size_t>& sizes,
                                              std::size_t classes) {
    std::vector<PredictionSet> out;
    std::size_t offset = 0;
    for (std::size_t n : sizes) {
        const double* begin = flat.data() + offset;
        out.emplace_back(n, classes, std::vector<double>(begin, begin + n * classes));
        offset += n * classes;
    }
    return out;
}

DiffValue loss_node(const DiffValue& x, const sgloss::LossResult& r) {
    Tensor grad(x.shape());
    std::size_t k = 0;
    for (const auto& bag : r.grad)
        for (double g : bag) grad[k++] = g;
    return diffnet::attach_loss(x, r.value, std::move(grad));
}

}  // namespace

std::vector<GradSuiteEntry> run_gradient_suite(const GradSuiteOptions& options) {
    Rng rng(options.seed);
    const double eps = options.eps;
    std::vector<GradSuiteEntry> out;

    const auto run = [&](const std::string& name, const std::function<double()>& trial) {
        GradSuiteEntry e{name, options.trials, 0.0};
        for (std::size_t t = 0; t < options.trials; ++t) e.max_relative_error = std::max(e.max_relative_error, trial());
        out.push_back(e);
    };

    run("layer/dense", [&] {
        const std::size_t n = pick(rng, 1, 4), in = pick(rng, 1, 6), units = pick(rng, 1, 5);
        const Tensor proj = random_tensor(rng, {n, units}, -1, 1);
        return check_all({random_tensor(rng, {n, in}, -1, 1), random_tensor(rng, {units, in}, -1, 1),
                          random_tensor(rng, {units}, -1, 1)},
                         [&](const std::vector<DiffValue>& a) { return project(diffnet::dense(a[0], a[1], a[2]), proj); },
                         eps);
    });
    run("layer/conv2d", [&] {
        const std::size_t n = pick(rng, 1, 2), cin = pick(rng, 1, 3), cout = pick(rng, 1, 3), k = pick(rng, 1, 3);
        const std::size_t h = k + pick(rng, 0, 3), w = k + pick(rng, 0, 3), stride = pick(rng, 1, 2);
        const std::size_t oh = (h - k) / stride + 1, ow = (w - k) / stride + 1;
        const Tensor proj = random_tensor(rng, {n, cout, oh, ow}, -1, 1);
        return check_all({random_tensor(rng, {n, cin, h, w}, -1, 1), random_tensor(rng, {cout, cin, k, k}, -1, 1),
                          random_tensor(rng, {cout}, -1, 1)},
                         [&](const std::vector<DiffValue>& a) {
                             return project(diffnet::conv2d(a[0], a[1], a[2], stride), proj);
                         },
                         eps);
    });
    run("layer/maxpool2d", [&] {
        const std::size_t n = pick(rng, 1, 2), c = pick(rng, 1, 2), win = pick(rng, 1, 3), stride = pick(rng, 1, 3);
        const std::size_t h = win + pick(rng, 0, 4), w = win + pick(rng, 0, 4);
        const std::size_t oh = (h - win) / stride + 1, ow = (w - win) / stride + 1;
        const Tensor proj = random_tensor(rng, {n, c, oh, ow}, -1, 1);
        // A random permutation of well-separated levels keeps every window maximum unique.
        Tensor x({n, c, h, w});
        std::vector<double> levels(x.size());
        for (std::size_t i = 0; i < levels.size(); ++i) levels[i] = 0.01 * static_cast<double>(i);
        std::shuffle(levels.begin(), levels.end(), rng);
        std::copy(levels.begin(), levels.end(), x.data());
        return check_all({x}, [&](const std::vector<DiffValue>& a) {
            return project(diffnet::maxpool2d(a[0], win, stride), proj);
        }, eps);
    });
    run("layer/relu", [&] {
        const Shape s{pick(rng, 1, 3), pick(rng, 1, 6)};
        const Tensor proj = random_tensor(rng, s, -1, 1);
        return check_all({away_from(rng, s, 0.0, 1e-3, 2.0)},
                         [&](const std::vector<DiffValue>& a) { return project(diffnet::relu(a[0]), proj); }, eps);
    });
    run("layer/sigmoid", [&] {
        const Shape s{pick(rng, 1, 3), pick(rng, 1, 6)};
        const Tensor proj = random_tensor(rng, s, -1, 1);
        return check_all({random_tensor(rng, s, -6, 6)},
                         [&](const std::vector<DiffValue>& a) { return project(diffnet::sigmoid(a[0]), proj); }, eps);
    });
    run("layer/flatten", [&] {
        const std::size_t n = pick(rng, 1, 3), c = pick(rng, 1, 3), h = pick(rng, 1, 3);
        const Tensor proj = random_tensor(rng, {n, c * h}, -1, 1);
        return check_all({random_tensor(rng, {n, c, h}, -1, 1)},
                         [&](const std::vector<DiffValue>& a) { return project(diffnet::flatten(a[0]), proj); }, eps);
    });
    run("layer/elementwise", [&] {
        const Shape s{pick(rng, 1, 4), pick(rng, 1, 4)};
        const double factor = std::uniform_real_distribution<double>(-2, 2)(rng);
        return check_all({random_tensor(rng, s, -1, 1), random_tensor(rng, s, -1, 1)},
                         [&](const std::vector<DiffValue>& a) {
                             return diffnet::sum(diffnet::scale(diffnet::mul(diffnet::add(a[0], a[1]), a[0]), factor));
                         },
                         eps);
    });

    for (auto kind : {pooling::PoolKind::max, pooling::PoolKind::mean, pooling::PoolKind::lse,
                      pooling::PoolKind::noisy_or, pooling::PoolKind::softmax}) {
        const pooling::PoolingSpec spec{kind};
        run("pool/" + std::string(to_string(kind)), [&] {
            const std::size_t n = pick(rng, 1, 12);
            Tensor p = random_tensor(rng, {n}, 0.02, 0.98);
            if (kind == pooling::PoolKind::max) {
                // Distinct values so the maximum is stable under the probe step.
                std::vector<double> levels(n);
                for (std::size_t i = 0; i < n; ++i) levels[i] = 0.02 + 0.9 * static_cast<double>(i) / static_cast<double>(n);
                std::shuffle(levels.begin(), levels.end(), rng);
                std::copy(levels.begin(), levels.end(), p.data());
            }
            return diffnet::gradient_check(
                [&](const DiffValue& x) {
                    Tensor g(x.shape());
                    pooling::pool_backward(spec, x.value().values(), 1.0, g.values());
                    return diffnet::attach_loss(x, pooling::pool(spec, x.value().values()), std::move(g));
                },
                p, eps);
        });
    }

    const auto loss_trial = [&](sgloss::LossKind kind) {
        const std::size_t bags = pick(rng, 1, 3), classes = pick(rng, 1, 2);
        std::vector<std::size_t> sizes;
        std::vector<sgloss::Labels> labels;
        std::size_t total = 0;
        for (std::size_t b = 0; b < bags; ++b) {
            sizes.push_back(pick(rng, 2, 8));
            total += sizes.back() * classes;
            sgloss::Labels y(classes);
            for (auto& v : y) v = static_cast<std::uint8_t>(pick(rng, 0, 1));
            labels.push_back(y);
        }
        pooling::PoolingSpec pool{static_cast<pooling::PoolKind>(pick(rng, 0, 4))};
        sgloss::SGLConfig cfg;
        cfg.lambda = std::uniform_real_distribution<double>(0.1, 2.0)(rng);
        cfg.mu = std::uniform_real_distribution<double>(0.0, 0.1)(rng);
        // Away from 0.5 so BIL pseudo-labels do not flip under the probe; distinct values keep
        // max / min / argmax stable.
        Tensor p({total});
        std::vector<double> levels(total);
        for (std::size_t i = 0; i < total; ++i) levels[i] = 0.03 + 0.94 * static_cast<double>(i) / static_cast<double>(total);
        std::shuffle(levels.begin(), levels.end(), rng);
        for (std::size_t i = 0; i < total; ++i) {
            double v = levels[i];
            if (std::abs(v - 0.5) < 0.01) v += 0.02;
            p[i] = v;
        }
        // The masks are built once at the sampled point and held fixed: stop-gradient semantics.
        std::vector<sgloss::TargetMask> masks;
        for (std::size_t b = 0; const auto& ps : to_prediction_sets(p, sizes, classes))
            masks.push_back(sgloss::build_masks(ps, labels[b++], cfg));
        return diffnet::gradient_check(
            [&](const DiffValue& x) {
                const auto preds = to_prediction_sets(x.value(), sizes, classes);
                switch (kind) {
                    case sgloss::LossKind::sgl:
                        return loss_node(x, sgloss::sgl_total_with_masks(preds, labels, pool, cfg, masks));
                    case sgloss::LossKind::bil:
                        return loss_node(x, sgloss::bil_loss(preds, labels, pool));
                    case sgloss::LossKind::mmm:
                        return loss_node(x, sgloss::mmm_loss(preds, labels));
                    case sgloss::LossKind::bag_only:
                        break;
                }
                return loss_node(x, sgloss::pooled_bag_loss(preds, labels, pool));
            },
            p, eps);
    };
    for (auto kind : {sgloss::LossKind::sgl, sgloss::LossKind::bag_only, sgloss::LossKind::bil, sgloss::LossKind::mmm})
        run("loss/" + std::string(to_string(kind)), [&] { return loss_trial(kind); });

    return out;
}

}  // namespace sgmil::milcli

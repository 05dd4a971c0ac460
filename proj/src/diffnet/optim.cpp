#include "sgmil/diffnet/optim.hpp"

#include <cmath>

#include "sgmil/errors.hpp"

namespace sgmil::diffnet {

void OptimizerConfig::validate() const {
    if (!(lr > 0.0) || !(weight_decay >= 0.0) || !(eps > 0.0))
        throw ConfigError("optimizer needs lr > 0, weight_decay >= 0, eps > 0");
    if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0))
        throw ConfigError("Adam betas must lie in [0, 1)");
}

void optimizer_step(OptimizerState& state, std::span<Parameter> params) {
    for (const Parameter& p : params)
        if (!p.value.grad().all_finite()) throw NumericError("non-finite gradient in parameter '" + p.name + "'");

    const OptimizerConfig& cfg = state.config;
    if (cfg.kind == OptimizerKind::adam && state.first_moment.size() != params.size()) {
        if (state.step != 0) throw UsageError("optimizer state does not match the parameter list");
        for (const Parameter& p : params) {
            state.first_moment.emplace_back(p.value.shape());
            state.second_moment.emplace_back(p.value.shape());
        }
    }
    ++state.step;

    const double t = static_cast<double>(state.step);
    const double bias1 = 1.0 - std::pow(cfg.beta1, t);
    const double bias2 = 1.0 - std::pow(cfg.beta2, t);
    for (std::size_t k = 0; k < params.size(); ++k) {
        Tensor& theta = params[k].value.value();
        const Tensor& grad = params[k].value.grad();
        if (cfg.kind == OptimizerKind::sgd) {
            for (std::size_t i = 0; i < theta.size(); ++i)
                theta[i] -= cfg.lr * (grad[i] + cfg.weight_decay * theta[i]);
            continue;
        }
        Tensor& m = state.first_moment[k];
        Tensor& v = state.second_moment[k];
        if (m.shape() != theta.shape()) throw UsageError("moment shape mismatch for '" + params[k].name + "'");
        for (std::size_t i = 0; i < theta.size(); ++i) {
            const double g = grad[i] + cfg.weight_decay * theta[i];
            m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * g;
            v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * g * g;
            const double m_hat = m[i] / bias1;
            const double v_hat = v[i] / bias2;
            theta[i] -= cfg.lr * m_hat / (std::sqrt(v_hat) + cfg.eps);
        }
    }
}

}  // namespace sgmil::diffnet

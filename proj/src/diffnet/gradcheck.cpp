#include "sgmil/diffnet/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "sgmil/errors.hpp"

namespace sgmil::diffnet {

namespace {

double evaluate(const ScalarFunction& f, const Tensor& x, std::size_t coord) {
    const double v = f(DiffValue::leaf(x)).item();
    if (!std::isfinite(v))
        throw NumericError("gradient check: non-finite function value when probing coordinate " +
                           std::to_string(coord));
    return v;
}

}  // namespace

GradCheckReport gradient_check_report(const ScalarFunction& f, const Tensor& point, double eps) {
    if (!(eps > 0.0)) throw UsageError("gradient check needs eps > 0");
    DiffValue x = DiffValue::leaf(point, "x");
    DiffValue y = f(x);
    if (!std::isfinite(y.item())) throw NumericError("gradient check: non-finite value at the base point");
    backward(y);
    const Tensor analytic = x.grad();

    GradCheckReport report;
    Tensor probe = point;
    for (std::size_t i = 0; i < point.size(); ++i) {
        probe[i] = point[i] + eps;
        const double up = evaluate(f, probe, i);
        probe[i] = point[i] - eps;
        const double down = evaluate(f, probe, i);
        probe[i] = point[i];
        const double numeric = (up - down) / (2.0 * eps);
        if (!std::isfinite(analytic[i]))
            throw NumericError("gradient check: non-finite analytic gradient at coordinate " + std::to_string(i));
        const double err = std::abs(analytic[i] - numeric) / std::max(1.0, std::abs(analytic[i]));
        if (err > report.max_relative_error) {
            report.max_relative_error = err;
            report.worst_index = i;
        }
    }
    return report;
}

double gradient_check(const ScalarFunction& f, const Tensor& point, double eps) {
    return gradient_check_report(f, point, eps).max_relative_error;
}

}  // namespace sgmil::diffnet

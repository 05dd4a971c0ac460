#pragma once

#include <cstddef>
#include <functional>

#include "sgmil/diffnet/graph.hpp"

namespace sgmil::diffnet {

using ScalarFunction = std::function<DiffValue(const DiffValue&)>;

struct GradCheckReport {
    double max_relative_error = 0.0;
    std::size_t worst_index = 0;
};

/// Compares the reverse-mode gradient of `f` at `point` with central differences of step
/// `eps`. Per coordinate: |analytic - numeric| / max(1, |analytic|); the maximum is returned.
/// Throws UsageError for eps <= 0 and NumericError (naming the coordinate) when f is not
/// finite at a probe point.
GradCheckReport gradient_check_report(const ScalarFunction& f, const Tensor& point, double eps);

double gradient_check(const ScalarFunction& f, const Tensor& point, double eps);

}  // namespace sgmil::diffnet

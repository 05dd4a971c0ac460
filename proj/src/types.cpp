#include "sgmil/types.hpp"

#include <algorithm>
#include <string>

#include "sgmil/errors.hpp"

namespace sgmil {

std::vector<std::uint8_t> Bag::instance_labels(std::size_t c) const {
    std::vector<std::uint8_t> out(instances.size());
    for (std::size_t j = 0; j < instances.size(); ++j) out[j] = instances[j].labels.at(c);
    return out;
}

void Bag::validate() const {
    if (instances.empty()) throw DataError("bag " + std::to_string(id) + " has no instances");
    for (std::size_t c = 0; c < labels.size(); ++c) {
        if (labels[c] > 1) throw DataError("bag label outside {0,1}");
        std::uint8_t any = 0;
        for (const Instance& inst : instances) {
            if (inst.labels.size() != labels.size())
                throw DataError("instance label count differs from bag class count");
            any = std::max(any, inst.labels[c]);
        }
        if (any != labels[c])
            throw DataError("bag " + std::to_string(id) + " violates the MIL assumption for class " +
                            std::to_string(c));
    }
    if (grid_h * grid_w != 0 && grid_h * grid_w != instances.size())
        throw DataError("grid layout does not match the instance count");
}

PredictionSet::PredictionSet(std::size_t n, std::size_t c, std::vector<double> values)
    : instances(n), classes(c), p(std::move(values)) {
    if (p.empty()) p.assign(n * c, 0.0);
    if (p.size() != n * c) throw UsageError("prediction set size mismatch");
}

std::vector<double> PredictionSet::column(std::size_t c) const {
    std::vector<double> out(instances);
    for (std::size_t j = 0; j < instances; ++j) out[j] = at(j, c);
    return out;
}

void PredictionSet::set_column(std::size_t c, std::span<const double> values) {
    if (values.size() != instances) throw UsageError("column length mismatch");
    for (std::size_t j = 0; j < instances; ++j) at(j, c) = values[j];
}

}  // namespace sgmil

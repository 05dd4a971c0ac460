#pragma once

// Tensor container file:
//   magic     4 ASCII bytes ("MILF" for parameters, "BAGS" for dataset caches)
//   version   u32
//   records until end of file, each:
//     name_len u32, name bytes, rank u32, extents u64 x rank, values f64 x prod(extents)
// All integers and floats are little-endian.

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "sgmil/diffnet/backbone.hpp"

namespace sgmil::diffnet {

inline constexpr std::uint32_t kContainerVersion = 1;
inline constexpr std::string_view kCheckpointMagic = "MILF";

struct NamedTensor {
    std::string name;
    Tensor tensor;
};

void write_container(std::ostream& out, std::string_view magic, std::span<const NamedTensor> records);
/// Throws FormatError (with byte offset) on a wrong magic, unknown version or truncation.
std::vector<NamedTensor> read_container(std::istream& in, std::string_view magic);

void save_checkpoint(const std::filesystem::path& path, std::span<const Parameter> params);
/// Loads values into existing parameters, matching by name and shape.
void load_checkpoint(const std::filesystem::path& path, std::span<Parameter> params);

}  // namespace sgmil::diffnet

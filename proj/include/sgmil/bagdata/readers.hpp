#pragma once

// Readers and writers for the MNIST IDX and CIFAR-10 binary corpora.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "sgmil/diffnet/tensor.hpp"

namespace sgmil::bagdata {

inline constexpr std::uint32_t kIdxImagesMagic = 0x00000803;
inline constexpr std::uint32_t kIdxLabelsMagic = 0x00000801;
inline constexpr std::size_t kCifarSide = 32;
inline constexpr std::size_t kCifarRecordBytes = 1 + 3 * kCifarSide * kCifarSide;

/// Raw IDX payload: u8 values with big-endian u32 extents ([n, rows, cols] or [n]).
struct IdxFile {
    std::uint32_t magic = kIdxImagesMagic;
    std::vector<std::size_t> dims;
    std::vector<std::uint8_t> bytes;

    bool is_images() const noexcept { return magic == kIdxImagesMagic; }
    /// Values as reals: images scaled by 1/255, labels unscaled.
    diffnet::Tensor to_tensor() const;
};

/// Throws FormatError (with offset) on an unknown magic or a truncated payload.
IdxFile parse_idx(std::span<const std::uint8_t> data);
IdxFile read_idx(const std::filesystem::path& path);
std::vector<std::uint8_t> encode_idx(const IdxFile& file);
void write_idx(const std::filesystem::path& path, const IdxFile& file);

/// CIFAR-10 binary batch: each record is a label byte followed by three 32x32 planes.
struct CifarBatch {
    std::vector<std::uint8_t> labels;
    std::vector<std::uint8_t> pixels;  // records x 3072, channel-planar

    std::size_t size() const noexcept { return labels.size(); }
    /// Image k as a [3, 32, 32] tensor scaled by 1/255.
    diffnet::Tensor image(std::size_t k) const;
};

/// Throws FormatError when the length is not a multiple of 3073.
CifarBatch parse_cifar10(std::span<const std::uint8_t> data);
CifarBatch read_cifar10(const std::filesystem::path& path);
std::vector<std::uint8_t> encode_cifar10(const CifarBatch& batch);

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path);

}  // namespace sgmil::bagdata

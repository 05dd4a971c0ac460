#include "sgmil/bagdata/readers.hpp"

#include <fstream>
#include <iterator>

#include "sgmil/errors.hpp"

namespace sgmil::bagdata {

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open '" + path.string() + "'");
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

namespace {

std::uint32_t be32(std::span<const std::uint8_t> d, std::size_t at) {
    return (std::uint32_t{d[at]} << 24) | (std::uint32_t{d[at + 1]} << 16) | (std::uint32_t{d[at + 2]} << 8) |
           std::uint32_t{d[at + 3]};
}

void put_be32(std::vector<std::uint8_t>& out, std::uint32_t v) {
    for (int shift = 24; shift >= 0; shift -= 8) out.push_back(static_cast<std::uint8_t>(v >> shift));
}

void write_bytes(const std::filesystem::path& path, const std::vector<std::uint8_t>& bytes) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw IoError("failed writing '" + path.string() + "'");
}

}  // namespace

diffnet::Tensor IdxFile::to_tensor() const {
    diffnet::Tensor t(diffnet::Shape(dims.begin(), dims.end()));
    const double scale = is_images() ? 1.0 / 255.0 : 1.0;
    for (std::size_t i = 0; i < bytes.size(); ++i) t[i] = bytes[i] * scale;
    return t;
}

IdxFile parse_idx(std::span<const std::uint8_t> data) {
    if (data.size() < 4) throw FormatError("IDX file too short for a magic number", data.size());
    IdxFile f;
    f.magic = be32(data, 0);
    std::size_t rank;
    if (f.magic == kIdxImagesMagic) rank = 3;
    else if (f.magic == kIdxLabelsMagic) rank = 1;
    else throw FormatError("unsupported IDX magic " + std::to_string(f.magic), 0);

    std::size_t offset = 4;
    std::size_t count = 1;
    for (std::size_t r = 0; r < rank; ++r) {
        if (data.size() < offset + 4) throw FormatError("IDX header truncated", data.size());
        f.dims.push_back(be32(data, offset));
        count *= f.dims.back();
        offset += 4;
    }
    if (data.size() - offset < count)
        throw FormatError("IDX payload truncated: expected " + std::to_string(count) + " bytes", data.size());
    if (data.size() - offset > count) throw FormatError("trailing bytes after IDX payload", offset + count);
    f.bytes.assign(data.begin() + static_cast<std::ptrdiff_t>(offset), data.end());
    return f;
}

IdxFile read_idx(const std::filesystem::path& path) { return parse_idx(read_file_bytes(path)); }

std::vector<std::uint8_t> encode_idx(const IdxFile& file) {
    std::vector<std::uint8_t> out;
    out.reserve(4 + 4 * file.dims.size() + file.bytes.size());
    put_be32(out, file.magic);
    for (std::size_t d : file.dims) put_be32(out, static_cast<std::uint32_t>(d));
    out.insert(out.end(), file.bytes.begin(), file.bytes.end());
    return out;
}

void write_idx(const std::filesystem::path& path, const IdxFile& file) { write_bytes(path, encode_idx(file)); }

diffnet::Tensor CifarBatch::image(std::size_t k) const {
    constexpr std::size_t plane = kCifarRecordBytes - 1;
    diffnet::Tensor t({3, kCifarSide, kCifarSide});
    const std::uint8_t* src = pixels.data() + k * plane;
    for (std::size_t i = 0; i < plane; ++i) t[i] = src[i] / 255.0;
    return t;
}

CifarBatch parse_cifar10(std::span<const std::uint8_t> data) {
    if (data.size() % kCifarRecordBytes != 0)
        throw FormatError("CIFAR-10 length " + std::to_string(data.size()) + " is not a multiple of 3073",
                          data.size() - data.size() % kCifarRecordBytes);
    CifarBatch b;
    const std::size_t n = data.size() / kCifarRecordBytes;
    b.labels.reserve(n);
    b.pixels.reserve(n * (kCifarRecordBytes - 1));
    for (std::size_t k = 0; k < n; ++k) {
        const auto rec = data.subspan(k * kCifarRecordBytes, kCifarRecordBytes);
        if (rec[0] > 9) throw FormatError("CIFAR-10 label out of range", k * kCifarRecordBytes);
        b.labels.push_back(rec[0]);
        b.pixels.insert(b.pixels.end(), rec.begin() + 1, rec.end());
    }
    return b;
}

CifarBatch read_cifar10(const std::filesystem::path& path) { return parse_cifar10(read_file_bytes(path)); }

std::vector<std::uint8_t> encode_cifar10(const CifarBatch& batch) {
    constexpr std::size_t plane = kCifarRecordBytes - 1;
    std::vector<std::uint8_t> out;
    out.reserve(batch.size() * kCifarRecordBytes);
    for (std::size_t k = 0; k < batch.size(); ++k) {
        out.push_back(batch.labels[k]);
        out.insert(out.end(), batch.pixels.begin() + static_cast<std::ptrdiff_t>(k * plane),
                   batch.pixels.begin() + static_cast<std::ptrdiff_t>((k + 1) * plane));
    }
    return out;
}

}  // namespace sgmil::bagdata

#include "sgmil/diffnet/checkpoint.hpp"

#include <algorithm>
#include <bit>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>

#include "sgmil/errors.hpp"

namespace sgmil::diffnet {

namespace {

template <typename T>
void put_le(std::ostream& out, T value) {
    unsigned char bytes[sizeof(T)];
    std::memcpy(bytes, &value, sizeof(T));
    if constexpr (std::endian::native == std::endian::big) std::reverse(bytes, bytes + sizeof(T));
    out.write(reinterpret_cast<const char*>(bytes), sizeof(T));
}

class Reader {
public:
    explicit Reader(std::istream& in) : in_(in) {}

    template <typename T>
    T get(const char* what) {
        unsigned char bytes[sizeof(T)];
        read(bytes, sizeof(T), what);
        if constexpr (std::endian::native == std::endian::big) std::reverse(bytes, bytes + sizeof(T));
        T value;
        std::memcpy(&value, bytes, sizeof(T));
        return value;
    }

    void read(void* dst, std::size_t n, const char* what) {
        in_.read(static_cast<char*>(dst), static_cast<std::streamsize>(n));
        if (static_cast<std::size_t>(in_.gcount()) != n)
            throw FormatError(std::string("truncated container while reading ") + what, offset_ + in_.gcount());
        offset_ += n;
    }

    bool at_end() { return in_.peek() == std::char_traits<char>::eof(); }
    std::size_t offset() const { return offset_; }

private:
    std::istream& in_;
    std::size_t offset_ = 0;
};

}  // namespace

void write_container(std::ostream& out, std::string_view magic, std::span<const NamedTensor> records) {
    if (magic.size() != 4) throw UsageError("container magic must be 4 bytes");
    out.write(magic.data(), 4);
    put_le<std::uint32_t>(out, kContainerVersion);
    for (const NamedTensor& r : records) {
        put_le<std::uint32_t>(out, static_cast<std::uint32_t>(r.name.size()));
        out.write(r.name.data(), static_cast<std::streamsize>(r.name.size()));
        put_le<std::uint32_t>(out, static_cast<std::uint32_t>(r.tensor.rank()));
        for (std::size_t d : r.tensor.shape()) put_le<std::uint64_t>(out, d);
        for (double v : r.tensor.values()) put_le<double>(out, v);
    }
    if (!out) throw IoError("failed writing tensor container");
}

std::vector<NamedTensor> read_container(std::istream& in, std::string_view magic) {
    Reader r(in);
    char got[4];
    r.read(got, 4, "magic");
    if (std::string_view(got, 4) != magic)
        throw FormatError("bad container magic, expected '" + std::string(magic) + "'", 0);
    const auto version = r.get<std::uint32_t>("version");
    if (version != kContainerVersion)
        throw FormatError("unsupported container version " + std::to_string(version), 4);

    std::vector<NamedTensor> records;
    while (!r.at_end()) {
        NamedTensor rec;
        const auto name_len = r.get<std::uint32_t>("name length");
        rec.name.resize(name_len);
        r.read(rec.name.data(), name_len, "name");
        const auto rank = r.get<std::uint32_t>("rank");
        if (rank > 16) throw FormatError("implausible tensor rank " + std::to_string(rank), r.offset() - 4);
        Shape shape(rank);
        for (auto& d : shape) d = static_cast<std::size_t>(r.get<std::uint64_t>("extent"));
        std::vector<double> values(element_count(shape));
        for (double& v : values) v = r.get<double>("values");
        rec.tensor = Tensor(std::move(shape), std::move(values));
        records.push_back(std::move(rec));
    }
    return records;
}

void save_checkpoint(const std::filesystem::path& path, std::span<const Parameter> params) {
    std::vector<NamedTensor> records;
    records.reserve(params.size());
    for (const Parameter& p : params) records.push_back({p.name, p.value.value()});
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
    write_container(out, kCheckpointMagic, records);
}

void load_checkpoint(const std::filesystem::path& path, std::span<Parameter> params) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open '" + path.string() + "'");
    const auto records = read_container(in, kCheckpointMagic);
    for (Parameter& p : params) {
        auto it = std::find_if(records.begin(), records.end(), [&](const NamedTensor& r) { return r.name == p.name; });
        if (it == records.end()) throw FormatError("checkpoint lacks parameter '" + p.name + "'", 0);
        if (it->tensor.shape() != p.value.shape())
            throw FormatError("checkpoint shape mismatch for '" + p.name + "'", 0);
        p.value.value() = it->tensor;
    }
}

}  // namespace sgmil::diffnet

#include "flg/binio.hpp"

#include <fstream>
#include <iterator>

namespace flg {

std::uint64_t fnv1a(const std::uint8_t* data, std::size_t n) {
    std::uint64_t h = 1469598103934665603ull;
    for (std::size_t i = 0; i < n; ++i) {
        h ^= data[i];
        h *= 1099511628211ull;
    }
    return h;
}

void BinaryWriter::save_with_checksum(const std::filesystem::path& path) {
    const std::uint64_t sum = fnv1a(buf_.data(), buf_.size());
    u64(sum);
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot open " + path.string() + " for writing");
    out.write(reinterpret_cast<const char*>(buf_.data()), static_cast<std::streamsize>(buf_.size()));
    buf_.resize(buf_.size() - 8);
    if (!out) throw Error("write failed for " + path.string());
}

BinaryReader BinaryReader::open_checked(const std::filesystem::path& path, const char magic[4]) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open " + path.string());
    std::vector<std::uint8_t> data((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    if (data.size() < 4 || std::memcmp(data.data(), magic, 4) != 0)
        throw FormatError(path.string() + ": bad magic, expected " + std::string(magic, 4));
    if (data.size() < 12) throw CorruptionError(path.string() + ": truncated");
    const std::size_t body = data.size() - 8;
    std::uint64_t stored = 0;
    for (int i = 0; i < 8; ++i) stored |= static_cast<std::uint64_t>(data[body + i]) << (8 * i);
    if (fnv1a(data.data(), body) != stored)
        throw CorruptionError(path.string() + ": checksum mismatch (truncated or damaged)");
    data.resize(body);
    BinaryReader r(std::move(data));
    r.pos_ = 4;
    return r;
}

}  // namespace flg

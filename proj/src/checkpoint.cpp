#include "segtrack/core/checkpoint.hpp"

#include <cstring>
#include <fstream>
#include <stdexcept>

namespace segtrack {

namespace {

void write_u32(std::ostream& os, uint32_t v) {
    unsigned char b[4] = {static_cast<unsigned char>(v & 0xff),
                          static_cast<unsigned char>((v >> 8) & 0xff),
                          static_cast<unsigned char>((v >> 16) & 0xff),
                          static_cast<unsigned char>((v >> 24) & 0xff)};
    os.write(reinterpret_cast<const char*>(b), 4);
}

uint32_t read_u32(std::istream& is) {
    unsigned char b[4];
    is.read(reinterpret_cast<char*>(b), 4);
    if (!is) throw std::runtime_error("checkpoint: truncated file");
    return static_cast<uint32_t>(b[0]) | (static_cast<uint32_t>(b[1]) << 8) |
           (static_cast<uint32_t>(b[2]) << 16) | (static_cast<uint32_t>(b[3]) << 24);
}

}  // namespace

void write_checkpoint(const std::string& path, const std::vector<CheckpointEntry>& entries) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("checkpoint: cannot open for writing: " + path);
    os.write(kCheckpointMagic, sizeof(kCheckpointMagic));
    write_u32(os, kCheckpointVersion);
    write_u32(os, static_cast<uint32_t>(entries.size()));
    for (const auto& e : entries) {
        write_u32(os, static_cast<uint32_t>(e.name.size()));
        os.write(e.name.data(), static_cast<std::streamsize>(e.name.size()));
        write_u32(os, static_cast<uint32_t>(e.shape.size()));
        size_t n = 1;
        for (int d : e.shape) {
            write_u32(os, static_cast<uint32_t>(d));
            n *= static_cast<size_t>(d);
        }
        if (n != e.data.size()) throw std::runtime_error("checkpoint: entry size mismatch");
        static_assert(sizeof(float) == 4);
        // floats are written in the host's IEEE-754 layout (little endian on
        // every supported platform)
        os.write(reinterpret_cast<const char*>(e.data.data()),
                 static_cast<std::streamsize>(n * 4));
    }
    if (!os) throw std::runtime_error("checkpoint: write failed: " + path);
}

std::vector<CheckpointEntry> read_checkpoint(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("checkpoint: cannot open: " + path);
    char magic[8];
    is.read(magic, 8);
    if (!is || std::memcmp(magic, kCheckpointMagic, 8) != 0)
        throw std::runtime_error("checkpoint: bad magic in " + path);
    const uint32_t version = read_u32(is);
    if (version != kCheckpointVersion)
        throw std::runtime_error("checkpoint: unsupported version " + std::to_string(version));
    const uint32_t count = read_u32(is);
    std::vector<CheckpointEntry> entries;
    entries.reserve(count);
    for (uint32_t i = 0; i < count; ++i) {
        CheckpointEntry e;
        const uint32_t name_len = read_u32(is);
        e.name.resize(name_len);
        is.read(e.name.data(), name_len);
        const uint32_t ndims = read_u32(is);
        size_t n = 1;
        for (uint32_t d = 0; d < ndims; ++d) {
            e.shape.push_back(static_cast<int>(read_u32(is)));
            n *= static_cast<size_t>(e.shape.back());
        }
        e.data.resize(n);
        is.read(reinterpret_cast<char*>(e.data.data()), static_cast<std::streamsize>(n * 4));
        if (!is) throw std::runtime_error("checkpoint: truncated file: " + path);
        entries.push_back(std::move(e));
    }
    return entries;
}

}  // namespace segtrack

#include "mg/checkpoint.hpp"

#include <cstring>
#include <fstream>
#include <vector>

namespace mg {

namespace {

constexpr char kMagic[4] = {'M', 'G', 'C', 'K'};

void write_u32(std::ostream& os, std::uint32_t v) {
    unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                          static_cast<unsigned char>(v >> 16),
                          static_cast<unsigned char>(v >> 24)};
    os.write(reinterpret_cast<const char*>(b), 4);
}

void write_u64(std::ostream& os, std::uint64_t v) {
    write_u32(os, static_cast<std::uint32_t>(v));
    write_u32(os, static_cast<std::uint32_t>(v >> 32));
}

std::uint32_t read_u32(std::istream& is) {
    unsigned char b[4];
    is.read(reinterpret_cast<char*>(b), 4);
    if (!is) throw IoError("checkpoint: truncated header");
    return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
           (static_cast<std::uint32_t>(b[2]) << 16) |
           (static_cast<std::uint32_t>(b[3]) << 24);
}

std::uint64_t read_u64(std::istream& is) {
    const std::uint64_t lo = read_u32(is);
    const std::uint64_t hi = read_u32(is);
    return lo | (hi << 32);
}

}  // namespace

void save_model(const InpaintModel& model, const std::string& path) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw IoError("save_model: cannot open '" + path + "'");
    os.write(kMagic, 4);
    write_u32(os, kCheckpointVersion);
    write_u32(os, model.trained ? 1u : 0u);
    write_u32(os, static_cast<std::uint32_t>(model.width_mult));
    write_u32(os, static_cast<std::uint32_t>(model.params.size()));
    std::uint64_t offset = 0;
    for (const auto& [name, p] : model.params) {
        write_u32(os, static_cast<std::uint32_t>(name.size()));
        os.write(name.data(), static_cast<std::streamsize>(name.size()));
        write_u32(os, static_cast<std::uint32_t>(p->shape.size()));
        for (int d : p->shape) write_u32(os, static_cast<std::uint32_t>(d));
        write_u64(os, offset);
        offset += static_cast<std::uint64_t>(p->numel());
    }
    static_assert(sizeof(float) == 4);
    for (const auto& [name, p] : model.params)
        os.write(reinterpret_cast<const char*>(p->value.data()),
                 static_cast<std::streamsize>(p->numel() * sizeof(float)));
    if (!os) throw IoError("save_model: write failed for '" + path + "'");
}

InpaintModel load_model(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw IoError("load_model: cannot open '" + path + "'");
    char magic[4];
    is.read(magic, 4);
    if (!is || std::memcmp(magic, kMagic, 4) != 0)
        throw IoError("load_model: bad magic in '" + path + "'");
    const std::uint32_t version = read_u32(is);
    if (version != kCheckpointVersion)
        throw IoError("load_model: unsupported version " + std::to_string(version));
    const std::uint32_t flags = read_u32(is);
    const std::uint32_t width_mult = read_u32(is);
    const std::uint32_t count = read_u32(is);

    struct Entry {
        std::string name;
        std::vector<int> shape;
        std::uint64_t offset;
    };
    std::vector<Entry> entries(count);
    std::uint64_t total = 0;
    for (auto& e : entries) {
        const std::uint32_t len = read_u32(is);
        e.name.resize(len);
        is.read(e.name.data(), len);
        const std::uint32_t ndims = read_u32(is);
        e.shape.resize(ndims);
        for (auto& d : e.shape) d = static_cast<int>(read_u32(is));
        e.offset = read_u64(is);
        total += static_cast<std::uint64_t>(mg::ad::shape_numel<float>(e.shape));
        if (!is) throw IoError("load_model: truncated layer table");
    }
    std::vector<float> payload(total);
    is.read(reinterpret_cast<char*>(payload.data()),
            static_cast<std::streamsize>(total * sizeof(float)));
    if (static_cast<std::uint64_t>(is.gcount()) != total * sizeof(float))
        throw IoError("load_model: truncated payload");

    InpaintModel model = init_model<float>(0, static_cast<int>(width_mult));
    model.trained = (flags & 1u) != 0;
    if (entries.size() != model.params.size())
        throw IoError("load_model: layer table does not match topology");
    for (std::size_t i = 0; i < entries.size(); ++i) {
        auto p = model.param(entries[i].name);
        if (p->shape != entries[i].shape)
            throw IoError("load_model: shape mismatch for '" + entries[i].name + "'");
        for (Eigen::Index k = 0; k < p->numel(); ++k)
            p->value[k] = payload[entries[i].offset + static_cast<std::uint64_t>(k)];
    }
    return model;
}

}  // namespace mg

#include "vet/nn/checkpoint.hpp"

#include <cstring>

#include "vet/common.hpp"

namespace vet::nn {

void save_checkpoint(const std::string& path, const std::vector<const Parameter<float>*>& params) {
    std::string out;
    out += "VETW";
    le::put_u16(out, 1);
    le::put_u32(out, static_cast<std::uint32_t>(params.size()));
    for (const Parameter<float>* p : params) {
        if (p->name.size() > 0xffff) throw ArgumentError("save_checkpoint: parameter name too long");
        le::put_u16(out, static_cast<std::uint16_t>(p->name.size()));
        out += p->name;
        const auto& shape = p->value.shape();
        if (shape.size() > 0xff) throw ArgumentError("save_checkpoint: rank too large");
        out.push_back(static_cast<char>(shape.size()));
        for (std::size_t e : shape) le::put_u32(out, static_cast<std::uint32_t>(e));
        for (float f : p->value.data()) le::put_f32(out, f);
    }
    write_file(path, out);
}

std::map<std::string, CheckpointEntry> load_checkpoint(const std::string& path) {
    const std::string bytes = read_file(path);
    le::Reader r(reinterpret_cast<const unsigned char*>(bytes.data()), bytes.size());

    char magic[4];
    r.bytes(magic, 4, "magic");
    if (std::memcmp(magic, "VETW", 4) != 0) throw BadMagicError("not a checkpoint file: " + path);
    const std::uint16_t version = r.u16("version");
    if (version != 1)
        throw VersionError("unsupported checkpoint version " + std::to_string(version) + ": " + path);

    const std::uint32_t count = r.u32("count");
    std::map<std::string, CheckpointEntry> entries;
    for (std::uint32_t i = 0; i < count; ++i) {
        const std::uint16_t name_len = r.u16("name length");
        std::string name(name_len, '\0');
        r.bytes(name.data(), name_len, "name");
        CheckpointEntry e;
        const std::uint8_t rank = r.u8("rank");
        std::size_t n = 1;
        for (std::uint8_t d = 0; d < rank; ++d) {
            const std::uint32_t ext = r.u32("extent");
            e.shape.push_back(ext);
            n *= ext;
        }
        e.data.resize(n);
        for (std::size_t j = 0; j < n; ++j) e.data[j] = r.f32("payload");
        if (entries.count(name)) throw FormatError("duplicate parameter in checkpoint: " + name);
        entries.emplace(std::move(name), std::move(e));
    }
    if (r.remaining() != 0) throw FormatError("trailing bytes after checkpoint payload: " + path);
    return entries;
}

void apply_checkpoint(const std::map<std::string, CheckpointEntry>& entries,
                      std::vector<Parameter<float>*>& params) {
    if (entries.size() != params.size())
        throw ConfigError("checkpoint parameter count does not match model");
    for (Parameter<float>* p : params) {
        auto it = entries.find(p->name);
        if (it == entries.end()) throw ConfigError("checkpoint is missing parameter: " + p->name);
        if (it->second.shape != p->value.shape())
            throw ConfigError("checkpoint shape mismatch for parameter: " + p->name);
        p->value.data() = it->second.data;
    }
}

}  // namespace vet::nn

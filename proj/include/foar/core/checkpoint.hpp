#pragma once

#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include "foar/core/nn.hpp"

namespace foar::core {

struct CheckpointError : std::runtime_error {
    explicit CheckpointError(const std::string& msg) : std::runtime_error(msg) {}
};

namespace detail {

inline void write_bytes(std::ostream& os, const void* p, std::size_t n) {
    os.write(static_cast<const char*>(p), static_cast<std::streamsize>(n));
}

template <class T>
void write_le(std::ostream& os, T v) {
    // Little-endian on-disk layout; host is little-endian here.
    write_bytes(os, &v, sizeof(T));
}

template <class T>
bool read_le(std::istream& is, T& v) {
    is.read(reinterpret_cast<char*>(&v), sizeof(T));
    return static_cast<std::size_t>(is.gcount()) == sizeof(T);
}

}  // namespace detail

inline constexpr char kCheckpointMagic[4] = {'F', 'O', 'A', 'R'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

/// Parameter checkpoint: magic "FOAR", version u32, then per-parameter
/// records (name length u16, UTF-8 name, rank u8, dims u32 LE, elements f32 LE).
template <class S>
void save_checkpoint(const ParamStore<S>& params, const std::string& path) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw CheckpointError("cannot open checkpoint for writing: " + path);
    detail::write_bytes(os, kCheckpointMagic, 4);
    detail::write_le<std::uint32_t>(os, kCheckpointVersion);
    for (const auto& [name, t] : params) {
        if (name.size() > 0xffff) throw CheckpointError("parameter name too long: " + name);
        detail::write_le<std::uint16_t>(os, static_cast<std::uint16_t>(name.size()));
        detail::write_bytes(os, name.data(), name.size());
        detail::write_le<std::uint8_t>(os, static_cast<std::uint8_t>(t.rank()));
        for (std::size_t d : t.shape())
            detail::write_le<std::uint32_t>(os, static_cast<std::uint32_t>(d));
        for (S v : t.value()) detail::write_le<float>(os, static_cast<float>(v));
    }
    if (!os) throw CheckpointError("write failed: " + path);
}

template <class S>
std::map<std::string, Tensor<S>> load_checkpoint_raw(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw CheckpointError("cannot open checkpoint: " + path);
    char magic[4];
    is.read(magic, 4);
    if (is.gcount() != 4 || std::memcmp(magic, kCheckpointMagic, 4) != 0)
        throw CheckpointError("bad checkpoint magic: " + path);
    std::uint32_t version = 0;
    if (!detail::read_le(is, version) || version != kCheckpointVersion)
        throw CheckpointError("unsupported checkpoint version in " + path);
    std::map<std::string, Tensor<S>> out;
    while (true) {
        std::uint16_t name_len = 0;
        if (!detail::read_le(is, name_len)) break;  // clean EOF
        std::string name(name_len, '\0');
        is.read(name.data(), name_len);
        if (static_cast<std::size_t>(is.gcount()) != name_len)
            throw CheckpointError("truncated checkpoint: " + path);
        std::uint8_t rank = 0;
        if (!detail::read_le(is, rank)) throw CheckpointError("truncated checkpoint: " + path);
        Shape shape(rank);
        for (auto& d : shape) {
            std::uint32_t v = 0;
            if (!detail::read_le(is, v)) throw CheckpointError("truncated checkpoint: " + path);
            d = v;
        }
        std::vector<S> vals(shape_numel(shape));
        for (auto& v : vals) {
            float f = 0;
            if (!detail::read_le(is, f)) throw CheckpointError("truncated checkpoint: " + path);
            v = static_cast<S>(f);
        }
        out.emplace(name, Tensor<S>::from_vector(shape, std::move(vals)));
    }
    return out;
}

/// Loads values into an existing store; every store parameter must be present
/// with a matching shape.
template <class S>
void load_checkpoint(ParamStore<S>& params, const std::string& path) {
    auto loaded = load_checkpoint_raw<S>(path);
    for (auto& [name, t] : params) {
        auto it = loaded.find(name);
        if (it == loaded.end())
            throw CheckpointError("checkpoint missing parameter " + name + ": " + path);
        if (it->second.shape() != t.shape())
            throw CheckpointError("checkpoint shape mismatch for " + name + ": " + path);
        t.value_mut() = it->second.value();
    }
}

}  // namespace foar::core

// SPDX-License-Identifier: Apache-2.0
#include "tubesal/checkpoint.hpp"

#include <cstring>
#include <fstream>

namespace tubesal::ckpt {

namespace {

constexpr char kMagic[4] = {'T', 'S', 'A', 'L'};

template <typename V>
void put(std::ostream& out, V v) {
    static_assert(std::is_trivially_copyable_v<V>);
    out.write(reinterpret_cast<const char*>(&v), sizeof(V));
}

void put_floats(std::ostream& out, std::span<const float> vals) {
    out.write(reinterpret_cast<const char*>(vals.data()),
              std::streamsize(vals.size() * sizeof(float)));
}

struct Reader {
    std::ifstream in;
    std::size_t pos = 0;

    explicit Reader(const std::filesystem::path& path) : in(path, std::ios::binary) {
        if (!in) throw IoError("checkpoint: cannot open " + path.string());
    }

    void read_raw(void* dst, std::size_t n, const char* what) {
        in.read(reinterpret_cast<char*>(dst), std::streamsize(n));
        if (std::size_t(in.gcount()) != n)
            throw ParseError(std::string("checkpoint: truncated while reading ") + what, pos);
        pos += n;
    }

    template <typename V>
    V get(const char* what) {
        V v;
        read_raw(&v, sizeof(V), what);
        return v;
    }
};

}  // namespace

void save_checkpoint(const std::filesystem::path& path,
                     const std::vector<NamedParam<float>>& params,
                     const AdamState<float>& state) {
    if (state.m.size() != params.size() || state.v.size() != params.size())
        throw DimensionError("checkpoint: optimizer state covers " +
                             std::to_string(state.m.size()) + " parameters, model has " +
                             std::to_string(params.size()));
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("checkpoint: cannot open " + path.string() + " for writing");

    out.write(kMagic, 4);
    put<std::uint32_t>(out, kCheckpointVersion);
    put<std::uint32_t>(out, std::uint32_t(params.size()));
    for (const auto& p : params) {
        put<std::uint32_t>(out, std::uint32_t(p.name.size()));
        out.write(p.name.data(), std::streamsize(p.name.size()));
        put<std::uint32_t>(out, std::uint32_t(p.tensor.ndim()));
        for (auto e : p.tensor.shape()) put<std::uint64_t>(out, std::uint64_t(e));
        put_floats(out, p.tensor.values());
    }
    put<std::uint64_t>(out, std::uint64_t(state.step));
    for (std::size_t i = 0; i < params.size(); ++i) {
        put_floats(out, state.m[i].values());
        put_floats(out, state.v[i].values());
    }
    if (!out) throw IoError("checkpoint: short write to " + path.string());
}

void load_checkpoint(const std::filesystem::path& path, std::vector<NamedParam<float>>& params,
                     AdamState<float>* state) {
    Reader r(path);
    char magic[4];
    r.read_raw(magic, 4, "magic");
    if (std::memcmp(magic, kMagic, 4) != 0)
        throw ParseError("checkpoint: bad magic (not a TSAL file)", 0);
    const auto version = r.get<std::uint32_t>("version");
    if (version != kCheckpointVersion)
        throw ParseError("checkpoint: unsupported version " + std::to_string(version), 4);
    const auto count = r.get<std::uint32_t>("parameter count");
    if (count != params.size())
        throw DimensionError("checkpoint: holds " + std::to_string(count) +
                             " parameters, model expects " + std::to_string(params.size()));

    for (auto& p : params) {
        const auto name_len = r.get<std::uint32_t>("name length");
        std::string name(name_len, '\0');
        r.read_raw(name.data(), name_len, "name");
        if (name != p.name)
            throw DimensionError("checkpoint: parameter \"" + name + "\" where \"" + p.name +
                                 "\" was expected");
        const auto rank = r.get<std::uint32_t>("rank");
        Shape shape(rank);
        for (auto& e : shape) e = std::size_t(r.get<std::uint64_t>("extent"));
        if (shape != p.tensor.shape())
            throw DimensionError("checkpoint: \"" + name + "\" has shape " + shape_str(shape) +
                                 ", model expects " + shape_str(p.tensor.shape()));
        r.read_raw(p.tensor.values().data(), p.tensor.numel() * sizeof(float), name.c_str());
    }
    const auto step = r.get<std::uint64_t>("optimizer step");
    if (state) {
        if (state->m.size() != params.size())
            throw DimensionError("checkpoint: optimizer state size mismatch");
        state->step = std::size_t(step);
        for (std::size_t i = 0; i < params.size(); ++i) {
            r.read_raw(state->m[i].values().data(), state->m[i].numel() * sizeof(float), "m");
            r.read_raw(state->v[i].values().data(), state->v[i].numel() * sizeof(float), "v");
        }
    }
}

}  // namespace tubesal::ckpt

#include "bpl/checkpoint.hpp"

#include <cstdio>
#include <cstring>
#include <fstream>
#include <stdexcept>

namespace bpl {

namespace {

constexpr char kMagic[8] = {'B', 'P', 'L', 'C', 'K', 'P', 'T', '\0'};
constexpr std::uint8_t kVersion = 1;

template <typename T>
void write_raw(std::ofstream& out, const T& v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T read_raw(std::ifstream& in) {
    T v{};
    in.read(reinterpret_cast<char*>(&v), sizeof(T));
    if (!in) throw std::runtime_error("truncated checkpoint");
    return v;
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path,
                     const std::vector<const ParameterBlock*>& blocks) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write checkpoint: " + path.string());
    out.write(kMagic, sizeof(kMagic));
    write_raw(out, kVersion);
    write_raw(out, static_cast<std::uint32_t>(blocks.size()));
    for (const ParameterBlock* b : blocks) {
        write_raw(out, static_cast<std::uint32_t>(b->name.size()));
        out.write(b->name.data(), static_cast<std::streamsize>(b->name.size()));
        write_raw(out, static_cast<std::uint32_t>(b->shape.size()));
        for (std::size_t d : b->shape) write_raw(out, static_cast<std::uint64_t>(d));
        out.write(reinterpret_cast<const char*>(b->values.data()),
                  static_cast<std::streamsize>(b->values.size() * sizeof(double)));
    }
    if (!out) throw std::runtime_error("failed writing checkpoint: " + path.string());
}

std::vector<ParameterBlock> load_checkpoint(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open checkpoint: " + path.string());
    char magic[8];
    in.read(magic, sizeof(magic));
    if (!in || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) {
        throw std::runtime_error("not a checkpoint file: " + path.string());
    }
    const auto version = read_raw<std::uint8_t>(in);
    if (version != kVersion) {
        throw std::runtime_error("unsupported checkpoint version " + std::to_string(version));
    }
    const auto count = read_raw<std::uint32_t>(in);
    std::vector<ParameterBlock> blocks;
    blocks.reserve(count);
    for (std::uint32_t k = 0; k < count; ++k) {
        const auto name_len = read_raw<std::uint32_t>(in);
        std::string name(name_len, '\0');
        in.read(name.data(), name_len);
        const auto ndims = read_raw<std::uint32_t>(in);
        std::vector<std::size_t> shape(ndims);
        for (auto& d : shape) d = static_cast<std::size_t>(read_raw<std::uint64_t>(in));
        ParameterBlock block(std::move(name), std::move(shape));
        in.read(reinterpret_cast<char*>(block.values.data()),
                static_cast<std::streamsize>(block.values.size() * sizeof(double)));
        if (!in) throw std::runtime_error("truncated checkpoint");
        blocks.push_back(std::move(block));
    }
    return blocks;
}

void export_checkpoint_tsv(const std::filesystem::path& path,
                           const std::vector<const ParameterBlock*>& blocks) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write checkpoint TSV: " + path.string());
    char buf[40];
    for (const ParameterBlock* b : blocks) {
        out << "#block=" << b->name << " shape=";
        for (std::size_t d = 0; d < b->shape.size(); ++d) {
            out << b->shape[d] << (d + 1 < b->shape.size() ? "x" : "");
        }
        out << "\n";
        const std::size_t cols = b->shape.empty() ? 1 : b->shape.back();
        for (std::size_t i = 0; i < b->size(); ++i) {
            std::snprintf(buf, sizeof(buf), "%.17g", b->values[i]);
            out << buf << ((i + 1) % cols == 0 ? '\n' : '\t');
        }
    }
}

}  // namespace bpl

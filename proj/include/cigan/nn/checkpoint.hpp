#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include "cigan/core/errors.hpp"
#include "cigan/nn/params.hpp"

namespace cigan {

// Versioned binary checkpoint container:
//   magic "CIGN" | u32 version | 32-byte config fingerprint | u64 iteration |
//   u32 tensor count | per tensor { u32 name_len, name, u8 dtype, u8 rank,
//   u32 dims[rank] } | u64 payload byte count | raw little-endian payloads.

namespace detail {

static_assert(std::endian::native == std::endian::little,
              "checkpoint format assumes a little-endian host");

constexpr char kCheckpointMagic[4] = {'C', 'I', 'G', 'N'};
constexpr std::uint32_t kCheckpointVersion = 1;
constexpr std::uint8_t kDtypeF32 = 0;

template <typename U>
void write_pod(std::ofstream& out, const U& v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof(U));
}

template <typename U>
U read_pod(std::ifstream& in, const std::string& path) {
    U v{};
    in.read(reinterpret_cast<char*>(&v), sizeof(U));
    if (!in) throw DataError("corrupt checkpoint (truncated): " + path);
    return v;
}

} // namespace detail

inline void save_checkpoint(const std::string& path, const NetworkParams& params) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot open checkpoint for writing: " + path);
    out.write(detail::kCheckpointMagic, 4);
    detail::write_pod(out, detail::kCheckpointVersion);
    out.write(reinterpret_cast<const char*>(params.fingerprint.data()), 32);
    detail::write_pod(out, params.iteration);
    detail::write_pod(out, static_cast<std::uint32_t>(params.tensors.size()));
    std::uint64_t payload_bytes = 0;
    for (const auto& [name, t] : params.tensors) {
        detail::write_pod(out, static_cast<std::uint32_t>(name.size()));
        out.write(name.data(), static_cast<std::streamsize>(name.size()));
        detail::write_pod(out, detail::kDtypeF32);
        detail::write_pod(out, static_cast<std::uint8_t>(t.rank()));
        for (int d = 0; d < t.rank(); ++d)
            detail::write_pod(out, static_cast<std::uint32_t>(t.dim(d)));
        payload_bytes += t.size() * sizeof(float);
    }
    detail::write_pod(out, payload_bytes);
    for (const auto& [name, t] : params.tensors) {
        (void)name;
        out.write(reinterpret_cast<const char*>(t.data()),
                  static_cast<std::streamsize>(t.size() * sizeof(float)));
    }
    if (!out) throw DataError("checkpoint write failed: " + path);
}

inline NetworkParams load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open checkpoint: " + path);
    char magic[4];
    in.read(magic, 4);
    if (!in || std::memcmp(magic, detail::kCheckpointMagic, 4) != 0)
        throw DataError("corrupt checkpoint (bad magic): " + path);
    const auto version = detail::read_pod<std::uint32_t>(in, path);
    if (version != detail::kCheckpointVersion)
        throw DataError("checkpoint incompatible: format version " + std::to_string(version) +
                        " (expected " + std::to_string(detail::kCheckpointVersion) + "): " + path);
    NetworkParams params;
    in.read(reinterpret_cast<char*>(params.fingerprint.data()), 32);
    if (!in) throw DataError("corrupt checkpoint (truncated): " + path);
    params.iteration = detail::read_pod<std::uint64_t>(in, path);
    const auto n_tensors = detail::read_pod<std::uint32_t>(in, path);
    std::uint64_t expected_payload = 0;
    for (std::uint32_t i = 0; i < n_tensors; ++i) {
        const auto name_len = detail::read_pod<std::uint32_t>(in, path);
        if (name_len > 4096) throw DataError("corrupt checkpoint (name length): " + path);
        std::string name(name_len, '\0');
        in.read(name.data(), name_len);
        if (!in) throw DataError("corrupt checkpoint (truncated): " + path);
        const auto dtype = detail::read_pod<std::uint8_t>(in, path);
        if (dtype != detail::kDtypeF32)
            throw DataError("checkpoint incompatible: unknown dtype: " + path);
        const auto rank = detail::read_pod<std::uint8_t>(in, path);
        if (rank == 0 || rank > 4) throw DataError("corrupt checkpoint (tensor rank): " + path);
        std::vector<int> shape(rank);
        for (auto& d : shape) {
            const auto dim = detail::read_pod<std::uint32_t>(in, path);
            if (dim == 0 || dim > (1u << 28)) throw DataError("corrupt checkpoint (dims): " + path);
            d = static_cast<int>(dim);
        }
        Tensor<float> t(shape);
        expected_payload += t.size() * sizeof(float);
        params.add(std::move(name), std::move(t));
    }
    const auto payload_bytes = detail::read_pod<std::uint64_t>(in, path);
    if (payload_bytes != expected_payload)
        throw DataError("corrupt checkpoint (payload size mismatch): " + path);
    for (auto& [name, t] : params.tensors) {
        (void)name;
        in.read(reinterpret_cast<char*>(t.data()),
                static_cast<std::streamsize>(t.size() * sizeof(float)));
        if (!in) throw DataError("corrupt checkpoint (truncated payload): " + path);
    }
    return params;
}

inline NetworkParams load_checkpoint(const std::string& path, const Fingerprint& expected) {
    NetworkParams params = load_checkpoint(path);
    if (params.fingerprint != expected)
        throw DataError("checkpoint incompatible: config fingerprint mismatch for " + path);
    return params;
}

} // namespace cigan

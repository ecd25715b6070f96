#include "checkpoint/safetensors.hpp"

#include <bit>
#include <cstring>
#include <fstream>

#include <json.hpp>

#include "util/errors.hpp"

namespace cotaudit {

namespace {

using nlohmann::json;

float f16_to_f32(std::uint16_t h) {
    const std::uint32_t sign = (h & 0x8000u) << 16;
    const std::uint32_t exp = (h >> 10) & 0x1Fu;
    const std::uint32_t mant = h & 0x3FFu;
    std::uint32_t bits;
    if (exp == 0) {
        if (mant == 0) {
            bits = sign;
        } else {
            // subnormal: normalize
            int e = -1;
            std::uint32_t m = mant;
            do {
                ++e;
                m <<= 1;
            } while ((m & 0x400u) == 0);
            bits = sign | ((127 - 15 - e) << 23) | ((m & 0x3FFu) << 13);
        }
    } else if (exp == 31) {
        bits = sign | 0x7F800000u | (mant << 13);
    } else {
        bits = sign | ((exp - 15 + 127) << 23) | (mant << 13);
    }
    return std::bit_cast<float>(bits);
}

float bf16_to_f32(std::uint16_t h) {
    return std::bit_cast<float>(static_cast<std::uint32_t>(h) << 16);
}

std::int64_t element_count(const std::vector<std::int64_t>& shape) {
    std::int64_t n = 1;
    for (auto d : shape) {
        if (d < 0) throw_io("safetensors: negative dimension in shape");
        n *= d;
    }
    return n;
}

}  // namespace

TensorMap read_safetensors(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw_io("cannot open tensor archive: " + path);

    f.seekg(0, std::ios::end);
    const std::int64_t file_size = f.tellg();
    f.seekg(0);

    if (file_size < 8) throw_io("tensor archive truncated (no header length): " + path);
    std::uint64_t header_len = 0;
    f.read(reinterpret_cast<char*>(&header_len), 8);
    if (!f || header_len == 0 ||
        static_cast<std::int64_t>(header_len) > file_size - 8) {
        throw_io("tensor archive truncated or corrupt header length: " + path);
    }

    std::string header_text(header_len, '\0');
    f.read(header_text.data(), static_cast<std::streamsize>(header_len));
    if (!f) throw_io("tensor archive truncated while reading header: " + path);

    json header;
    try {
        header = json::parse(header_text);
    } catch (const json::exception& e) {
        throw_io("tensor archive header is not valid JSON: " + std::string(e.what()));
    }
    if (!header.is_object()) throw_io("tensor archive header must be a JSON object");

    const std::int64_t data_size = file_size - 8 - static_cast<std::int64_t>(header_len);
    const std::int64_t data_base = 8 + static_cast<std::int64_t>(header_len);

    TensorMap out;
    for (auto it = header.begin(); it != header.end(); ++it) {
        const std::string& name = it.key();
        if (name == "__metadata__") continue;
        const json& entry = it.value();
        const std::string dtype = entry.at("dtype").get<std::string>();
        std::vector<std::int64_t> shape = entry.at("shape").get<std::vector<std::int64_t>>();
        const auto offsets = entry.at("data_offsets").get<std::vector<std::int64_t>>();
        if (offsets.size() != 2 || offsets[0] < 0 || offsets[1] < offsets[0] ||
            offsets[1] > data_size) {
            throw_io("tensor '" + name + "': data offsets out of bounds");
        }

        int elem_size;
        if (dtype == "F32") elem_size = 4;
        else if (dtype == "F16" || dtype == "BF16") elem_size = 2;
        else throw_io("tensor '" + name + "': unsupported dtype " + dtype);

        const std::int64_t n_elems = element_count(shape);
        const std::int64_t byte_len = offsets[1] - offsets[0];
        if (byte_len != n_elems * elem_size) {
            throw_io("tensor '" + name + "': byte length does not match shape");
        }

        std::vector<char> raw(static_cast<size_t>(byte_len));
        f.seekg(data_base + offsets[0]);
        f.read(raw.data(), byte_len);
        if (!f) throw_io("tensor archive truncated while reading '" + name + "'");

        TensorEntry t;
        t.shape = std::move(shape);
        t.data.resize(static_cast<size_t>(n_elems));
        if (dtype == "F32") {
            std::memcpy(t.data.data(), raw.data(), static_cast<size_t>(byte_len));
        } else {
            const auto* src = reinterpret_cast<const std::uint16_t*>(raw.data());
            for (std::int64_t i = 0; i < n_elems; ++i) {
                t.data[static_cast<size_t>(i)] =
                    dtype == "F16" ? f16_to_f32(src[i]) : bf16_to_f32(src[i]);
            }
        }
        out.emplace(name, std::move(t));
    }
    return out;
}

void write_safetensors(const std::string& path, const TensorMap& tensors) {
    json header = json::object();
    std::int64_t offset = 0;
    for (const auto& [name, t] : tensors) {
        const std::int64_t bytes = element_count(t.shape) * 4;
        header[name] = {{"dtype", "F32"},
                        {"shape", t.shape},
                        {"data_offsets", {offset, offset + bytes}}};
        offset += bytes;
    }
    std::string header_text = header.dump();
    // pad to 8-byte alignment, as the de-facto format does
    while (header_text.size() % 8 != 0) header_text.push_back(' ');

    std::ofstream f(path, std::ios::binary);
    if (!f) throw_io("cannot write tensor archive: " + path);
    const std::uint64_t header_len = header_text.size();
    f.write(reinterpret_cast<const char*>(&header_len), 8);
    f.write(header_text.data(), static_cast<std::streamsize>(header_text.size()));
    for (const auto& [name, t] : tensors) {
        f.write(reinterpret_cast<const char*>(t.data.data()),
                static_cast<std::streamsize>(t.data.size() * 4));
    }
    if (!f) throw_io("short write while writing tensor archive: " + path);
}

}  // namespace cotaudit

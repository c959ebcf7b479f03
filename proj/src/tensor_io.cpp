#include "eegrag/tensor_io.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <stdexcept>

namespace eegrag {

namespace {

void put_u32_le(std::string& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put_u64_le(std::string& out, std::uint64_t v) {
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

std::uint64_t get_u64_le(const unsigned char* p) {
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(p[i]) << (8 * i);
    return v;
}

std::string encode_f32_le(const std::vector<float>& values) {
    std::string bytes;
    bytes.reserve(values.size() * 4);
    for (float f : values) put_u32_le(bytes, std::bit_cast<std::uint32_t>(f));
    return bytes;
}

std::vector<float> decode_f32_le(const unsigned char* p, std::size_t n_bytes,
                                 const std::string& path) {
    if (n_bytes % 4 != 0) {
        throw std::runtime_error("tensor payload in '" + path +
                                 "' is not a whole number of float32 values");
    }
    std::vector<float> out(n_bytes / 4);
    for (std::size_t i = 0; i < out.size(); ++i) {
        std::uint32_t v = 0;
        for (int b = 0; b < 4; ++b) v |= static_cast<std::uint32_t>(p[4 * i + b]) << (8 * b);
        out[i] = std::bit_cast<float>(v);
    }
    return out;
}

std::string read_all(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open file '" + path + "'");
    std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    if (in.bad()) throw std::runtime_error("read error on '" + path + "'");
    return bytes;
}

void write_all(const std::string& path, const std::string& bytes) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open file '" + path + "' for writing");
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw std::runtime_error("write error on '" + path + "'");
}

} // namespace

std::vector<float> doubles_to_floats(const std::vector<double>& v) {
    std::vector<float> out(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) out[i] = static_cast<float>(v[i]);
    return out;
}

std::vector<double> floats_to_doubles(const std::vector<float>& v) {
    std::vector<double> out(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) out[i] = static_cast<double>(v[i]);
    return out;
}

void write_f32_le(const std::string& path, const std::vector<float>& values) {
    write_all(path, encode_f32_le(values));
}

std::vector<float> read_f32_le(const std::string& path) {
    const std::string bytes = read_all(path);
    return decode_f32_le(reinterpret_cast<const unsigned char*>(bytes.data()), bytes.size(), path);
}

std::vector<float> read_f32_le(const std::string& path, std::size_t expected_count) {
    std::vector<float> v = read_f32_le(path);
    if (v.size() != expected_count) {
        throw std::runtime_error("shape mismatch in '" + path + "': expected " +
                                 std::to_string(expected_count) + " float32 values, found " +
                                 std::to_string(v.size()));
    }
    return v;
}

void write_blob(const std::string& path, const nlohmann::json& header,
                const std::vector<float>& payload) {
    nlohmann::json full = header;
    full["format"] = "eegrag-blob-v1";
    full["payload_count"] = payload.size();
    const std::string header_bytes = full.dump();

    std::string bytes;
    put_u64_le(bytes, header_bytes.size());
    bytes += header_bytes;
    bytes += encode_f32_le(payload);
    write_all(path, bytes);
}

Blob read_blob(const std::string& path) {
    const std::string bytes = read_all(path);
    if (bytes.size() < 8) throw std::runtime_error("blob '" + path + "' is truncated");
    const auto* p = reinterpret_cast<const unsigned char*>(bytes.data());
    const std::uint64_t header_len = get_u64_le(p);
    if (8 + header_len > bytes.size()) {
        throw std::runtime_error("blob '" + path + "' header overruns the file");
    }
    Blob blob;
    blob.header = nlohmann::json::parse(bytes.substr(8, header_len));
    if (blob.header.value("format", "") != "eegrag-blob-v1") {
        throw std::runtime_error("blob '" + path + "' has unknown format tag");
    }
    blob.payload = decode_f32_le(p + 8 + header_len, bytes.size() - 8 - header_len, path);
    const auto expected = blob.header.value("payload_count", std::size_t{0});
    if (blob.payload.size() != expected) {
        throw std::runtime_error("blob '" + path + "' payload count mismatch: header says " +
                                 std::to_string(expected) + ", file holds " +
                                 std::to_string(blob.payload.size()));
    }
    return blob;
}

} // namespace eegrag

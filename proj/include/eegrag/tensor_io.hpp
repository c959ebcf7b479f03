#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

namespace eegrag {

// On-disk numeric convention: little-endian IEEE-754 float32, row-major.
// Raw payload files (corpus trials) are bare float sequences; structured
// artifacts (vector store, model checkpoint, embedding cache) are "blobs":
// a u64 little-endian header length, a JSON header, then the packed floats.

std::vector<float> doubles_to_floats(const std::vector<double>& v);
std::vector<double> floats_to_doubles(const std::vector<float>& v);

void write_f32_le(const std::string& path, const std::vector<float>& values);
std::vector<float> read_f32_le(const std::string& path);
// Reads and checks the element count against what the caller expects.
std::vector<float> read_f32_le(const std::string& path, std::size_t expected_count);

struct Blob {
    nlohmann::json header;
    std::vector<float> payload;
};

void write_blob(const std::string& path, const nlohmann::json& header,
                const std::vector<float>& payload);
Blob read_blob(const std::string& path);

} // namespace eegrag

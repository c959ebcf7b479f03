#pragma once

#include <cstdint>
#include <string>
#include <string_view>

namespace eegrag {

// FNV-1a, 64-bit. Stable across platforms and process restarts, unlike
// std::hash. Used for content hashes in run manifests, offline-embedder
// token hashing and RNG substream derivation.
constexpr std::uint64_t kFnvOffset = 0xcbf29ce484222325ULL;
constexpr std::uint64_t kFnvPrime = 0x100000001b3ULL;

constexpr std::uint64_t fnv1a64(std::string_view bytes, std::uint64_t h = kFnvOffset) {
    for (unsigned char c : bytes) {
        h ^= static_cast<std::uint64_t>(c);
        h *= kFnvPrime;
    }
    return h;
}

constexpr std::uint64_t fnv1a64(std::uint64_t value, std::uint64_t h = kFnvOffset) {
    for (int i = 0; i < 8; ++i) {
        h ^= (value >> (8 * i)) & 0xffULL;
        h *= kFnvPrime;
    }
    return h;
}

// Finalizer from splitmix64; spreads low-entropy seeds over 64 bits.
constexpr std::uint64_t mix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

std::string hex64(std::uint64_t value);

// Content hash of a whole file; throws on I/O failure.
std::uint64_t hash_file(const std::string& path);

} // namespace eegrag

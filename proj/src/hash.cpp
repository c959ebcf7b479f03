#include "eegrag/hash.hpp"

#include <array>
#include <fstream>
#include <stdexcept>

namespace eegrag {

std::string hex64(std::uint64_t value) {
    static const char* digits = "0123456789abcdef";
    std::string out(16, '0');
    for (int i = 15; i >= 0; --i) {
        out[static_cast<std::size_t>(i)] = digits[value & 0xf];
        value >>= 4;
    }
    return out;
}

std::uint64_t hash_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open file '" + path + "' for hashing");
    std::array<char, 1 << 16> buf;
    std::uint64_t h = kFnvOffset;
    while (in) {
        in.read(buf.data(), buf.size());
        const std::streamsize got = in.gcount();
        h = fnv1a64(std::string_view(buf.data(), static_cast<std::size_t>(got)), h);
    }
    if (in.bad()) throw std::runtime_error("read error while hashing '" + path + "'");
    return h;
}

} // namespace eegrag

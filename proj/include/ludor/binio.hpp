#pragma once

#include <bit>
#include <cstdint>
#include <string>

namespace ludor::binio {

inline void put_f64(std::string& out, double x) {
    auto bits = std::bit_cast<std::uint64_t>(x);
    for (int i = 0; i < 8; ++i) {
        out.push_back(static_cast<char>(bits & 0xFFu));
        bits >>= 8;
    }
}

inline double get_f64(const char* p) {
    std::uint64_t bits = 0;
    for (int i = 7; i >= 0; --i) {
        bits = (bits << 8) | static_cast<unsigned char>(p[i]);
    }
    return std::bit_cast<double>(bits);
}

}  // namespace ludor::binio

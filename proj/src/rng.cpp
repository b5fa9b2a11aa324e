#include "ludor/rng.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

#include "ludor/error.hpp"

namespace ludor {

std::uint64_t mix64(std::uint64_t x) {
    // splitmix64 finalizer
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

std::uint64_t Rng::next_u64() {
    const std::uint64_t key = mix64(seed_ ^ 0xD1B54A32D192ED03ULL);
    return mix64(key + mix64(counter_++));
}

double Rng::uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

std::uint64_t Rng::below(std::uint64_t n) {
    if (n == 0) {
        throw InternalError("Rng::below called with n = 0");
    }
    // rejection sampling keeps the draw unbiased
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
    std::uint64_t x = next_u64();
    while (x >= limit) {
        x = next_u64();
    }
    return x % n;
}

double Rng::normal() {
    // Box-Muller, one value per pair of uniforms so the counter advances by 2
    double u1 = uniform();
    const double u2 = uniform();
    if (u1 <= 0.0) {
        u1 = 0x1.0p-53;
    }
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

Rng Rng::fork(std::uint64_t tag) const { return Rng(mix64(seed_ ^ mix64(tag + 0x632BE59BD9B4E019ULL)), 0); }

std::vector<std::size_t> Rng::sample_without_replacement(std::size_t n, std::size_t k) {
    if (k > n) {
        throw InternalError("sample_without_replacement: k > n");
    }
    // Floyd's algorithm; output sorted
    std::vector<char> chosen(n, 0);
    for (std::size_t j = n - k; j < n; ++j) {
        const auto t = static_cast<std::size_t>(below(j + 1));
        if (chosen[t]) {
            chosen[j] = 1;
        } else {
            chosen[t] = 1;
        }
    }
    std::vector<std::size_t> out;
    out.reserve(k);
    for (std::size_t i = 0; i < n; ++i) {
        if (chosen[i]) {
            out.push_back(i);
        }
    }
    return out;
}

}  // namespace ludor

#include "kcluster/rng.hpp"

#include <cmath>

#include "kcluster/errors.hpp"

namespace kcluster {

namespace {

std::uint64_t splitmix64_next(std::uint64_t& state) {
    std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

std::uint64_t fnv1a(std::string_view s) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

}  // namespace

std::uint64_t RngStream::mix(std::uint64_t base, std::string_view tag, std::uint64_t trial) {
    std::uint64_t state = base;
    std::uint64_t a = splitmix64_next(state);
    state ^= fnv1a(tag);
    std::uint64_t b = splitmix64_next(state);
    state ^= trial;
    std::uint64_t c = splitmix64_next(state);
    return a ^ (b + 0x9e3779b97f4a7c15ULL) ^ (c << 1);
}

std::size_t RngStream::next_index(std::size_t n) {
    if (n == 0) throw InputError("next_index: n must be positive");
    std::uint64_t bound = static_cast<std::uint64_t>(n);
    std::uint64_t threshold = (~bound + 1) % bound;  // 2^64 mod n
    for (;;) {
        std::uint64_t x = engine_();
        if (x >= threshold) return static_cast<std::size_t>(x % bound);
    }
}

std::size_t RngStream::pick_weighted(const std::vector<double>& weights) {
    double total = 0.0;
    for (double w : weights) {
        if (w < 0) throw InputError("pick_weighted: negative weight");
        total += w;
    }
    if (total <= 0) throw InputError("pick_weighted: all weights zero");
    double target = next_double() * total;
    double acc = 0.0;
    std::size_t last_positive = weights.size();
    for (std::size_t i = 0; i < weights.size(); ++i) {
        if (weights[i] <= 0) continue;
        acc += weights[i];
        last_positive = i;
        if (target < acc) return i;
    }
    return last_positive;  // float round-off at the top end
}

double RngStream::normal() {
    double u1 = next_double();
    double u2 = next_double();
    while (u1 <= 0) u1 = next_double();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925286766559 * u2);
}

}  // namespace kcluster

#pragma once

#include <cstdint>
#include <random>
#include <string_view>
#include <vector>

namespace kcluster {

// All randomness flows through RngStream: a std::mt19937_64 (whose raw output
// sequence is fixed by the standard) seeded from (base seed, module tag,
// trial index) via splitmix64, plus hand-rolled distributions so results are
// bit-identical across compilers.  Adding a module never perturbs another
// module's stream because each derives from its own tag.
class RngStream {
  public:
    explicit RngStream(std::uint64_t seed) : engine_(seed) {}

    static std::uint64_t mix(std::uint64_t base, std::string_view tag, std::uint64_t trial);

    static RngStream derive(std::uint64_t base_seed, std::string_view module_tag, std::uint64_t trial) {
        return RngStream(mix(base_seed, module_tag, trial));
    }

    std::uint64_t next_u64() { return engine_(); }

    // Uniform in [0, 1) with 53 bits of precision.
    double next_double() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

    bool bernoulli(double p) { return next_double() < p; }

    // Uniform integer in [0, n); unbiased via rejection.
    std::size_t next_index(std::size_t n);

    // Index drawn proportionally to the nonnegative weights (zero weights never chosen).
    std::size_t pick_weighted(const std::vector<double>& weights);

    double uniform(double lo, double hi) { return lo + (hi - lo) * next_double(); }

    // Standard normal via Box-Muller on our own uniforms.
    double normal();

    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (std::size_t i = v.size(); i > 1; --i) {
            std::size_t j = next_index(i);
            std::swap(v[i - 1], v[j]);
        }
    }

  private:
    std::mt19937_64 engine_;
};

}  // namespace kcluster

#pragma once

#include <cstdint>
#include <string_view>
#include <vector>

namespace corrfabr::core {

// Deterministic PRNG: xoshiro256** seeded through splitmix64. The raw u64
// stream is bit-identical for a given seed on every platform; derived doubles
// use only IEEE arithmetic on that stream. All stochastic operations in this
// library take a SeededRng explicitly.
class SeededRng {
public:
    explicit SeededRng(std::uint64_t seed);

    std::uint64_t seed() const { return seed_; }
    std::uint64_t next_u64();

    // Uniform double in [0, 1), 53-bit resolution.
    double uniform();
    double uniform(double lo, double hi);

    // Unbiased draw from [0, bound). bound must be nonzero.
    std::uint64_t uniform_int(std::uint64_t bound);

    // Standard normal via Box-Muller; the paired value is cached.
    double normal();

    // Derived generator for an independent stream (per-patient seeds are
    // seed ^ fnv1a(patient_id)).
    SeededRng fork(std::uint64_t stream) const { return SeededRng(seed_ ^ stream); }

    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (std::size_t i = v.size(); i > 1; --i) {
            std::size_t j = static_cast<std::size_t>(uniform_int(i));
            std::swap(v[i - 1], v[j]);
        }
    }

private:
    std::uint64_t seed_ = 0;
    std::uint64_t state_[4] = {0, 0, 0, 0};
    bool has_spare_normal_ = false;
    double spare_normal_ = 0.0;
};

std::uint64_t fnv1a_hash(std::string_view text);

}  // namespace corrfabr::core

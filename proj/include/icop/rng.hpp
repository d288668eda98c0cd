#pragma once

#include <cstdint>
#include <random>

namespace icop {

// Seeded random stream. Distinct (seed, stream) pairs give independent
// generators, so parallel chains or threads can each own one.
class Rng {
public:
    explicit Rng(std::uint64_t seed, std::uint64_t stream = 0)
        : engine_(mix(seed, stream)) {}

    double uniform() {
        // (0,1) open on both ends; quantile transforms need strict interior
        std::uniform_real_distribution<double> d(0.0, 1.0);
        double u;
        do {
            u = d(engine_);
        } while (u <= 0.0 || u >= 1.0);
        return u;
    }

    double normal() {
        std::normal_distribution<double> d(0.0, 1.0);
        return d(engine_);
    }

    double gamma(double shape, double rate) {
        std::gamma_distribution<double> d(shape, 1.0 / rate);
        return d(engine_);
    }

    std::uint64_t next_u64() { return engine_(); }

    std::mt19937_64& engine() { return engine_; }

private:
    static std::uint64_t mix(std::uint64_t seed, std::uint64_t stream) {
        // splitmix64 finalizer on the pair
        std::uint64_t x = seed + 0x9E3779B97F4A7C15ULL * (stream + 1);
        x ^= x >> 30; x *= 0xBF58476D1CE4E5B9ULL;
        x ^= x >> 27; x *= 0x94D049BB133111EBULL;
        x ^= x >> 31;
        return x;
    }

    std::mt19937_64 engine_;
};

} // namespace icop

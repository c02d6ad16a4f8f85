#pragma once

#include <cstdint>
#include <random>

namespace dnpvi {

/// Seeded generator with a portable uniform mapping, so sampled checks and
/// randomized probes reproduce bit-for-bit across standard libraries.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    /// Uniform in [0, 1).
    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    /// Independent stream derived from this seed and a stream index.
    [[nodiscard]] static Rng split(std::uint64_t seed, std::uint64_t stream) {
        std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                          static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32)};
        std::mt19937_64 engine(seq);
        return Rng(engine());
    }

private:
    std::mt19937_64 engine_;
};

}  // namespace dnpvi

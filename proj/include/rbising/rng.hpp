#ifndef RBISING_RNG_HPP
#define RBISING_RNG_HPP

#include <array>
#include <cstdint>

namespace rbising {

// Philox4x32-10 (Salmon et al., SC'11).  Stateless: the output is a pure
// function of (key, counter), so any draw can be recomputed independently
// of thread scheduling.
struct Philox4x32 {
    using ctr_type = std::array<uint32_t, 4>;
    using key_type = std::array<uint32_t, 2>;

    static ctr_type round(ctr_type c, key_type k) {
        constexpr uint64_t M0 = 0xD2511F53u, M1 = 0xCD9E8D57u;
        uint64_t p0 = M0 * c[0], p1 = M1 * c[2];
        return {static_cast<uint32_t>(p1 >> 32) ^ c[1] ^ k[0], static_cast<uint32_t>(p1),
                static_cast<uint32_t>(p0 >> 32) ^ c[3] ^ k[1], static_cast<uint32_t>(p0)};
    }

    static ctr_type apply(ctr_type c, key_type k) {
        constexpr uint32_t W0 = 0x9E3779B9u, W1 = 0xBB67AE85u;
        for (int r = 0; r < 10; ++r) {
            c = round(c, k);
            k[0] += W0;
            k[1] += W1;
        }
        return c;
    }
};

// Stream keyed by (master seed, replica); draws are indexed by a 64-bit step.
class CounterRng {
public:
    CounterRng(uint64_t seed, uint64_t replica) : seed_(seed), replica_(replica) {}

    std::array<uint32_t, 4> block(uint64_t step) const {
        Philox4x32::key_type k{static_cast<uint32_t>(seed_), static_cast<uint32_t>(seed_ >> 32)};
        Philox4x32::ctr_type c{static_cast<uint32_t>(step), static_cast<uint32_t>(step >> 32),
                               static_cast<uint32_t>(replica_), static_cast<uint32_t>(replica_ >> 32)};
        return Philox4x32::apply(c, k);
    }

    uint64_t bits64(uint64_t step) const {
        auto b = block(step);
        return (static_cast<uint64_t>(b[0]) << 32) | b[1];
    }

    // Uniform in [0,1) with 53 random bits.
    double uniform(uint64_t step) const { return static_cast<double>(bits64(step) >> 11) * 0x1.0p-53; }

    int pm1(uint64_t step) const { return (bits64(step) >> 63) ? 1 : -1; }

    uint64_t seed() const { return seed_; }
    uint64_t replica() const { return replica_; }

private:
    uint64_t seed_, replica_;
};

// Sequential cursor over a CounterRng stream.
class RngCursor {
public:
    RngCursor(uint64_t seed, uint64_t replica, uint64_t start = 0) : rng_(seed, replica), step_(start) {}
    double uniform() { return rng_.uniform(step_++); }
    int pm1() { return rng_.pm1(step_++); }
    uint64_t bits64() { return rng_.bits64(step_++); }
    uint64_t position() const { return step_; }

private:
    CounterRng rng_;
    uint64_t step_;
};

}  // namespace rbising

#endif

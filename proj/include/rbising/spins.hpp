#ifndef RBISING_SPINS_HPP
#define RBISING_SPINS_HPP

#include <cstdint>
#include <stdexcept>
#include <vector>

#include "lattice.hpp"

namespace rbising {

// Spins on Λ, row-major with y = -N first.
struct SpinConfig {
    std::vector<int8_t> s;

    SpinConfig() = default;
    SpinConfig(const Volume& v, int value) : s(v.num_sites(), static_cast<int8_t>(value)) {}
    explicit SpinConfig(std::vector<int8_t> values) : s(std::move(values)) {}

    int operator[](int i) const { return s[i]; }
    int8_t& operator[](int i) { return s[i]; }
    int size() const { return static_cast<int>(s.size()); }
    SpinConfig flipped() const {
        SpinConfig r = *this;
        for (auto& x : r.s) x = static_cast<int8_t>(-x);
        return r;
    }
    friend bool operator==(const SpinConfig&, const SpinConfig&) = default;

    // Bit i set means spin i is -1.
    static SpinConfig from_bits(const Volume& v, uint64_t bits) {
        SpinConfig c(v, 1);
        for (int i = 0; i < v.num_sites(); ++i)
            if ((bits >> i) & 1u) c.s[i] = -1;
        return c;
    }
};

// Exterior spins, one per boundary bond in the counterclockwise order of Volume.
struct BoundaryCondition {
    std::vector<int8_t> eta;

    BoundaryCondition() = default;
    BoundaryCondition(const Volume& v, int value) : eta(v.num_boundary(), static_cast<int8_t>(value)) {}
    explicit BoundaryCondition(std::vector<int8_t> values) : eta(std::move(values)) {}

    int operator[](int b) const { return eta[b]; }
    int8_t& operator[](int b) { return eta[b]; }
    int size() const { return static_cast<int>(eta.size()); }
    BoundaryCondition flipped() const {
        BoundaryCondition r = *this;
        for (auto& x : r.eta) x = static_cast<int8_t>(-x);
        return r;
    }
    friend bool operator==(const BoundaryCondition&, const BoundaryCondition&) = default;
};

inline void check_domain(const SpinConfig& s, const Volume& v) {
    if (s.size() != v.num_sites()) throw std::invalid_argument("spin configuration does not match the volume");
    for (auto x : s.s)
        if (x != 1 && x != -1) throw std::invalid_argument("spins must be +1 or -1");
}

inline void check_domain(const BoundaryCondition& e, const Volume& v) {
    if (e.size() != v.num_boundary()) throw std::invalid_argument("boundary condition does not cover the collar");
    for (auto x : e.eta)
        if (x != 1 && x != -1) throw std::invalid_argument("boundary spins must be +1 or -1");
}

struct CouplingParams {
    double beta = 1.0;
    double lambda = 1.0;

    void validate() const {
        // beta = 0 is accepted as the uniform-measure limit.
        if (!(beta >= 0.0)) throw std::invalid_argument("beta must be nonnegative");
        if (!(lambda >= -1.0 && lambda <= 1.0)) throw std::invalid_argument("lambda must lie in [-1,1]");
    }
};

}  // namespace rbising

#endif

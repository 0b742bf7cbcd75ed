#ifndef RBISING_VALIDATORS_HPP
#define RBISING_VALIDATORS_HPP

// Numeric checks of the geometric and analytic bounds behind the expansion.
// Every check returns a signed margin (rhs - lhs for an inequality lhs <= rhs);
// constants are inputs, never assumed.

#include <cmath>
#include <functional>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "fixtures.hpp"
#include "multiscale.hpp"
#include "rng.hpp"

namespace rbising {

struct Margin {
    Margin() = default;
    explicit Margin(std::string n) : name(std::move(n)) {}

    std::string name;
    double lhs = 0, rhs = 0;
    int cases = 0;  // instances examined
    std::string worst;
    double margin() const { return rhs - lhs; }
    bool ok() const { return cases == 0 || margin() >= 0; }
};

namespace detail {
// Largest Σ_{∂Γ^-} η below -(1 - 1/l0)|Γ|, or false if no η makes Γ unbalanced.
inline bool worst_unbalanced_minus_sum(int minus, int length, int l0, int& out) {
    for (int j = minus; j >= 0; --j) {
        int s = -minus + 2 * j;
        if (static_cast<long>(l0) * s < -static_cast<long>(l0 - 1) * length) {
            out = s;
            return true;
        }
    }
    return false;
}

inline void keep_worst(Margin& m, double lhs, double rhs, const std::string& what) {
    if (m.cases == 0 || rhs - lhs < m.margin()) {
        m.lhs = lhs;
        m.rhs = rhs;
        m.worst = what;
    }
    ++m.cases;
}

inline bool is_small(uint8_t cls) {
    return cls == static_cast<uint8_t>(ContourClass::SimpleSmall) || cls == static_cast<uint8_t>(ContourClass::CornerSmall);
}
}  // namespace detail

// Σ_{∂Γ} η <= -(1 - 2/l0)|∂Γ| for unbalanced small boundary contours.  For each
// contour the left side is maximized over all η making it unbalanced.
inline Margin check_geom_balanced_sum(const VolumeCatalog& cat, int l0) {
    Margin m{"geom_balanced_i"};
    const auto& tab = cat.contours();
    for (uint32_t i = 0; i < tab.size(); ++i) {
        const auto& c = tab[i];
        if (!detail::is_small(c.cls)) continue;
        int mn = std::popcount(c.minus), bd = std::popcount(c.boundary), s = 0;
        if (!detail::worst_unbalanced_minus_sum(mn, c.length(), l0, s)) continue;
        detail::keep_worst(m, s + (bd - mn), -(1.0 - 2.0 / l0) * bd, "contour " + std::to_string(i));
    }
    return m;
}

// Same inequality by brute force over the 2^k patterns on one wall (others +1),
// for the small contours whose boundary lies inside that wall.
inline Margin check_geom_balanced_wall(const VolumeCatalog& cat, int l0, int wall = 0) {
    const Volume& v = cat.volume();
    Margin m{"geom_balanced_i_wall"};
    std::vector<int> bonds;
    for (int b = 0; b < v.num_boundary(); ++b)
        if (b / v.side() == wall) bonds.push_back(b);
    uint32_t wall_mask = 0;
    for (int b : bonds) wall_mask |= 1u << b;
    const auto& tab = cat.contours();
    for (uint32_t pat = 0; pat < (1u << bonds.size()); ++pat) {
        uint32_t em = 0;
        for (size_t j = 0; j < bonds.size(); ++j)
            if ((pat >> j) & 1u) em |= 1u << bonds[j];
        for (uint32_t i = 0; i < tab.size(); ++i) {
            const auto& c = tab[i];
            if (!detail::is_small(c.cls) || !c.boundary || (static_cast<uint32_t>(c.boundary) & ~wall_mask)) continue;
            if (is_balanced(c, em, l0)) continue;
            int bd = std::popcount(c.boundary);
            detail::keep_worst(m, VolumeCatalog::field_sum(static_cast<uint32_t>(c.boundary), em),
                               -(1.0 - 2.0 / l0) * bd, "contour " + std::to_string(i) + " pattern " + std::to_string(pat));
        }
    }
    return m;
}

// |∂Γ| >= l0 h(Γ) for small boundary contours that are unbalanced for some η.
inline Margin check_geom_balanced_height(const VolumeCatalog& cat, int l0) {
    Margin m{"geom_balanced_ii"};
    const auto& tab = cat.contours();
    for (uint32_t i = 0; i < tab.size(); ++i) {
        const auto& c = tab[i];
        int s = 0;
        if (!detail::is_small(c.cls) || !detail::worst_unbalanced_minus_sum(std::popcount(c.minus), c.length(), l0, s))
            continue;
        Contour full = cat.contour(i);
        detail::keep_worst(m, static_cast<double>(l0) * height(full, cat.volume()), std::popcount(c.boundary),
                           "contour " + std::to_string(i));
    }
    return m;
}

inline Margin check_geom_balanced_height(const Contour& c, const Volume& v, int l0) {
    Margin m{"geom_balanced_ii"};
    detail::keep_worst(m, static_cast<double>(l0) * height(c, v), static_cast<double>(c.boundary.size()), "fixture");
    return m;
}

// Σ_{∂Γ} η <= -2N(1 - 3/l0) for unbalanced large boundary contours.
inline Margin check_geom_large(const VolumeCatalog& cat, int l0) {
    Margin m{"geom_large"};
    const auto& tab = cat.contours();
    const int N = cat.volume().N();
    for (uint32_t i = 0; i < tab.size(); ++i) {
        const auto& c = tab[i];
        if (c.cls != static_cast<uint8_t>(ContourClass::LargeBoundary)) continue;
        int mn = std::popcount(c.minus), bd = std::popcount(c.boundary), s = 0;
        if (!detail::worst_unbalanced_minus_sum(mn, c.length(), l0, s)) continue;
        detail::keep_worst(m, s + (bd - mn), -2.0 * N * (1.0 - 3.0 / l0), "contour " + std::to_string(i));
    }
    return m;
}

// #{Γ' ≁ Γ : |Γ'| = n} <= |Γ| e^{c1 n}.  The count of all contours of length n
// bounds the left side for every Γ, and the shortest contour gives the smallest
// right side; the margin is taken in log scale.
inline Margin check_entropy(const VolumeCatalog& cat, double c1 = 6.0 * std::log(4.0)) {
    Margin m{"entropy"};
    std::map<int, double> count;
    int shortest = std::numeric_limits<int>::max();
    for (auto& c : cat.contours()) {
        count[c.length()] += 1;
        shortest = std::min(shortest, c.length());
    }
    for (auto [n, k] : count)
        detail::keep_worst(m, std::log(k), std::log(static_cast<double>(shortest)) + c1 * n, "length " + std::to_string(n));
    return m;
}

// Exact census on an explicit ensemble.
inline Margin check_entropy(const ContourEnsemble& e, double c1 = 6.0 * std::log(4.0)) {
    Margin m{"entropy"};
    for (int i = 0; i < e.size(); ++i) {
        std::map<int, double> count;
        for (int j = 0; j < e.size(); ++j)
            if (i == j || !e.compatible[i][j]) count[e.contours[j].length()] += 1;
        for (auto [n, k] : count)
            detail::keep_worst(m, std::log(k), std::log(static_cast<double>(e.contours[i].length())) + c1 * n,
                               "contour " + std::to_string(i) + " length " + std::to_string(n));
    }
    return m;
}

// Dual sites of Γ ∪ ∂Γ over a set of ensemble contours.
inline std::vector<int> footprint(const ContourEnsemble& e, Subset support) {
    const Volume& v = e.volume;
    std::vector<int> out;
    for (Subset t = support; t; t &= t - 1) {
        const Contour& c = e.contours[std::countr_zero(t)];
        for (int b : c.bonds) {
            auto [p, q] = v.bond_dual(b);
            out.push_back(p);
            out.push_back(q);
        }
        for (int b : c.boundary) {
            auto [p, q] = v.boundary_dual(b);
            out.push_back(p);
            out.push_back(q);
        }
    }
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
}

namespace detail {
template <class Items>
double sup_over_sites(const ContourEnsemble& e, const Items& items, std::string& where) {
    std::map<int, double> acc;
    for (auto& [support, value] : items)
        for (int x : footprint(e, support)) acc[x] += value;
    double best = 0;
    for (auto [x, a] : acc)
        if (a > best) {
            best = a;
            where = "dual site " + std::to_string(x);
        }
    return best;
}
}  // namespace detail

// sup_{x*} Σ_{C ∋ x*} |φ_0(C)| exp[(2β/l0 - c2)|C|] <= 1.
inline Margin check_step_zero(const ContourEnsemble& e, const BoundaryCondition& eta, const CouplingParams& p,
                              const ScaleSchedule& s, double c2) {
    Margin m{"step_zero"};
    StepZero z = step_zero_expansion(e, eta, p, s);
    if (subset_size(z.balanced) > cluster_size_cap) throw CapExceeded("step-zero check needs at most 12 balanced contours");
    std::vector<std::pair<Subset, double>> items;
    for (auto& [c, w] : z.phi0.weights) {
        Subset mem = z.members(c);
        items.emplace_back(mem, std::abs(w) * std::exp((2.0 * p.beta / s.l0 - c2) * e.length(mem)));
    }
    m.lhs = detail::sup_over_sites(e, items, m.worst);
    m.rhs = 1.0;
    m.cases = static_cast<int>(items.size());
    return m;
}

// sup_{x*} Σ_{D ∋ x*} exp(β/l0 |D|) |ψ_n(D)| <= 2^{-n}, one margin per order.
inline std::vector<Margin> check_mayer(const LiteralExpansion& le, const ContourEnsemble& e, const CouplingParams& p,
                                       const ScaleSchedule& s) {
    std::vector<Margin> out;
    for (auto& L : le.levels) {
        if (L.order == 0) continue;
        Margin m{"mayer_order_" + std::to_string(L.order)};
        std::vector<std::pair<Subset, double>> items;
        for (auto& d : L.new_clusters) items.emplace_back(d.support, std::exp(p.beta / s.l0 * d.length) * std::abs(d.weight));
        m.lhs = detail::sup_over_sites(e, items, m.worst);
        m.rhs = std::ldexp(1.0, -L.order);
        m.cases = static_cast<int>(items.size());
        out.push_back(m);
    }
    return out;
}

// |Σ ψ_∞| <= e^{-c6 l_inf}.  Only the total of the corner step is available,
// which bounds Σ|ψ_∞(D)| from below, so the margin is indicative.
inline Margin check_corner_mayer(const ExpansionReport& r, const ScaleSchedule& s, double c6) {
    Margin m{"mayer_corner"};
    m.lhs = std::abs(r.psi_infty);
    m.rhs = std::exp(-c6 * s.l_infty);
    m.cases = 1;
    m.worst = "total";
    return m;
}

// log Ẑ_{n,α} <= c7 |∂K| and log Ẑ_{∞,i} <= c7' l_inf².
inline Margin check_zhat(const ExpansionReport& r, const ScaleSchedule& s, double c7, double c7_corner) {
    Margin m{"zhat"};
    for (size_t a = 0; a < r.aggregates.size(); ++a) {
        auto& t = r.aggregates[a];
        double rhs = t.order == 0 ? c7_corner * s.l_infty * s.l_infty : c7 * t.boundary_size;
        detail::keep_worst(m, t.log_zhat, rhs, "aggregate " + std::to_string(a));
    }
    return m;
}

// Empirical P{an aggregate with cn(∂K) = B} against e^{-c5|B|}, over i.i.d.
// symmetric η.  `decompose` maps η to the aggregate decomposition.
struct FrequencyBound {
    Margin margin;
    int samples = 0;
    std::map<BoundaryBonds, int> hits;
};

inline FrequencyBound check_prob_bound(const Volume& v,
                                       const std::function<AggregateDecomposition(const BoundaryCondition&)>& decompose,
                                       int samples, double c5, uint64_t seed) {
    FrequencyBound fb;
    fb.margin.name = "prob_bound";
    fb.samples = samples;
    for (int r = 0; r < samples; ++r) {
        CounterRng rng(seed, static_cast<uint64_t>(r));
        BoundaryCondition eta(v, 1);
        for (int b = 0; b < v.num_boundary(); ++b) eta[b] = static_cast<int8_t>(rng.pm1(b));
        auto dec = decompose(eta);
        for (auto& g : dec.aggregates)
            if (!g.is_corner()) ++fb.hits[connected_hull(g.boundary, v)];
    }
    for (auto& [B, k] : fb.hits)
        detail::keep_worst(fb.margin, static_cast<double>(k) / samples, std::exp(-c5 * static_cast<double>(B.size())),
                           "hull of " + std::to_string(B.size()) + " bonds");
    return fb;
}

// The shipped fixtures: catalog checks on Λ(2), the strip height instance,
// step zero on the balanced fixture and the literal expansion of the strip
// fixture.
inline std::vector<Margin> validation_suite(const CouplingParams& p) {
    std::vector<Margin> out;
    Volume v2(2);
    const auto& cat = catalog_for(v2);
    out.push_back(check_geom_balanced_sum(cat, 5));
    out.push_back(check_geom_balanced_wall(cat, 2));
    out.push_back(check_geom_balanced_height(cat, 5));
    Volume v6(6);
    Margin strip = check_geom_balanced_height(bottom_strip(v6, -4, 9), v6, 5);
    strip.name += "_strip";
    out.push_back(strip);
    out.push_back(check_geom_large(cat, 5));
    out.push_back(check_entropy(cat));
    auto bf = balanced_fixture();
    ContourEnsemble be(bf.volume, bf.contours);
    out.push_back(check_step_zero(be, bf.eta, p, bf.schedule, 0.0));
    auto sf = strip_fixture();
    ContourEnsemble se(sf.volume, sf.contours);
    auto le = literal_sequential_expansion(se, sf.eta, p, sf.schedule);
    Margin ex{"literal_exactness"};
    ex.lhs = std::abs(le.report.total() - le.exact_logZ);
    ex.rhs = 1e-8;
    ex.cases = 1;
    ex.worst = "strip fixture";
    out.push_back(ex);
    for (auto& m : check_mayer(le, se, p, sf.schedule)) out.push_back(m);
    out.push_back(check_zhat(le.report, sf.schedule, 1.0, 1.0));
    out.push_back(check_corner_mayer(le.report, sf.schedule, 1.0));
    return out;
}

}  // namespace rbising

#endif

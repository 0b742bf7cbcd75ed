#ifndef RBISING_MULTISCALE_HPP
#define RBISING_MULTISCALE_HPP

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

#include "catalog.hpp"
#include "clusterexp.hpp"
#include "contour.hpp"
#include "model.hpp"

namespace rbising {

// ---------------------------------------------------------------------------
// Scales: L_n = l_{n-1} / 5^n, l_n = exp(L_n / 2^n), l_inf = (log N)^{1+ε}.

struct ScaleSchedule {
    int l0 = 5;
    double epsilon = 0.1;
    double volume_N = 1;
    std::vector<double> l;  // l[0] = l0, l[n] for n >= 1
    std::vector<double> L;  // L[0] unused
    double l_infty = 0;

    // Orders n >= 1 with L_n >= 1.
    int levels() const { return static_cast<int>(L.size()) - 1; }
};

inline ScaleSchedule build_schedule(int l0, double epsilon, double N) {
    if (l0 < 2) throw std::invalid_argument("l0 must be at least 2");
    if (!(epsilon > 0)) throw std::invalid_argument("epsilon must be positive");
    if (!(N >= 1)) throw std::invalid_argument("N must be at least 1");
    ScaleSchedule s;
    s.l0 = l0;
    s.epsilon = epsilon;
    s.volume_N = N;
    s.l = {static_cast<double>(l0)};
    s.L = {0.0};
    for (int n = 1; n < 64; ++n) {
        double Ln = s.l[n - 1] / std::pow(5.0, n);
        if (!(Ln >= 1.0) || !std::isfinite(Ln)) break;
        s.L.push_back(Ln);
        s.l.push_back(std::exp(Ln / std::pow(2.0, n)));
        if (!std::isfinite(s.l.back())) break;
    }
    double lg = std::log(N);
    s.l_infty = lg > 0 ? std::pow(lg, 1.0 + epsilon) : 0.0;
    return s;
}

// Σ_{∂Γ^-} η >= -(1 - 1/l0)|Γ|; bulk contours are balanced.
inline bool is_balanced(int length, int minus_field_sum, int l0) {
    return static_cast<long>(l0) * minus_field_sum >= -static_cast<long>(l0 - 1) * length;
}

inline bool is_balanced(const Contour& c, const BoundaryCondition& eta, int l0) {
    int s = 0;
    for (int b : c.boundary_minus) s += eta[b];
    return is_balanced(c.length(), s, l0);
}

inline bool is_balanced(const MaskContour& c, uint32_t eta_minus, int l0) {
    return is_balanced(c.length(), VolumeCatalog::field_sum(static_cast<uint32_t>(c.minus), eta_minus), l0);
}

// ---------------------------------------------------------------------------
// Aggregates.

struct ContourShape {
    BoundaryBonds boundary;       // ∂Γ
    std::vector<DualSite> sites;  // dual sites of Γ
};

inline ContourShape shape_of(const Contour& c, const Volume& v) {
    ContourShape s;
    s.boundary = c.boundary;
    for (int b : c.bonds) {
        auto [p, q] = v.bond_dual(b);
        s.sites.push_back(v.dual_site(p));
        s.sites.push_back(v.dual_site(q));
    }
    std::sort(s.sites.begin(), s.sites.end());
    s.sites.erase(std::unique(s.sites.begin(), s.sites.end()), s.sites.end());
    return s;
}

inline std::vector<DualSite> boundary_dual_sites(const BoundaryBonds& P, const Volume& v) {
    std::vector<DualSite> out;
    for (int b : P) {
        auto [p, q] = v.boundary_dual(b);
        out.push_back(v.dual_site(p));
        out.push_back(v.dual_site(q));
    }
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
}

// max_{y* ∈ ∂} d[y*, x*_{C,i}]
inline int corner_reach(const BoundaryBonds& P, int corner, const Volume& v) {
    int r = 0;
    for (auto& y : boundary_dual_sites(P, v)) r = std::max(r, dual_l1(y, v.corner(corner)));
    return r;
}

// Boundary bonds x* with d[x*, ∂K] <= radius.
inline BoundaryBonds boundary_domain(const BoundaryBonds& P, double radius, const Volume& v) {
    BoundaryBonds out;
    if (P.empty()) return out;
    auto ks = boundary_dual_sites(P, v);
    for (int b = 0; b < v.num_boundary(); ++b) {
        auto [p, q] = v.boundary_dual(b);
        int d = std::min(dual_site_set_distance({v.dual_site(p)}, ks), dual_site_set_distance({v.dual_site(q)}, ks));
        if (d <= radius) out.push_back(b);
    }
    return out;
}

struct Aggregate {
    int order = 0;   // n >= 1, or 0 for a corner aggregate
    int corner = -1;
    std::vector<int> members;  // indices into the decomposed list
    BoundaryBonds boundary;    // ∂K
    int hull_length = 0;
    BoundaryBonds domain;
    bool flagged = false;  // some member lies farther than l_inf from its corner
    bool is_corner() const { return order == 0; }
};

struct AggregateDecomposition {
    std::vector<Aggregate> aggregates;
    std::vector<int> owner;    // aggregate index per input contour
    std::vector<int> flagged;  // inputs binned to a corner beyond l_inf
};

namespace detail {
inline BoundaryBonds union_boundary(const std::vector<ContourShape>& shapes, const std::vector<int>& idx) {
    BoundaryBonds u;
    for (int i : idx) u.insert(u.end(), shapes[i].boundary.begin(), shapes[i].boundary.end());
    std::sort(u.begin(), u.end());
    u.erase(std::unique(u.begin(), u.end()), u.end());
    return u;
}
}  // namespace detail

// Levels n = 1, 2, ...: maximal L_n-connected groups of the not yet assigned
// unbalanced contours become n-aggregates if |∂K|_con <= l_n and ∂K is not
// within l_inf of a single corner.  Connectivity runs through unbalanced
// contours only.  The rest is split by nearest corner.
// dist(i, j) returns d[Γ_i, Γ_j].
template <class Dist>
AggregateDecomposition decompose_aggregates(const std::vector<ContourShape>& shapes, const ScaleSchedule& s,
                                            const Volume& v, Dist&& dist) {
    const int n = static_cast<int>(shapes.size());
    AggregateDecomposition out;
    out.owner.assign(n, -1);
    for (auto& sh : shapes)
        if (sh.boundary.empty()) throw std::invalid_argument("bulk contours are never unbalanced");
    std::vector<int> hull(n);
    for (int i = 0; i < n; ++i) hull[i] = hull_length(shapes[i].boundary, v);
    auto near_corner = [&](const BoundaryBonds& P) {
        for (int c = 0; c < 4; ++c)
            if (corner_reach(P, c, v) <= s.l_infty) return true;
        return false;
    };
    for (int lev = 1; lev <= s.levels(); ++lev) {
        std::vector<int> rem;
        bool any = false;
        for (int i = 0; i < n; ++i)
            if (out.owner[i] < 0) {
                rem.push_back(i);
                any = any || hull[i] <= s.l[lev];
            }
        if (!any) continue;
        const double Lr = s.L[lev];
        std::vector<int> comp(rem.size(), -1);
        int ncomp = 0;
        for (size_t a = 0; a < rem.size(); ++a) {
            if (comp[a] >= 0) continue;
            comp[a] = ncomp;
            std::vector<size_t> stack{a};
            while (!stack.empty()) {
                size_t x = stack.back();
                stack.pop_back();
                for (size_t y = 0; y < rem.size(); ++y)
                    if (comp[y] < 0 && dist(rem[x], rem[y]) <= Lr) {
                        comp[y] = ncomp;
                        stack.push_back(y);
                    }
            }
            ++ncomp;
        }
        for (int c = 0; c < ncomp; ++c) {
            std::vector<int> mem;
            for (size_t a = 0; a < rem.size(); ++a)
                if (comp[a] == c) mem.push_back(rem[a]);
            BoundaryBonds bd = detail::union_boundary(shapes, mem);
            int hl = hull_length(bd, v);
            if (hl > s.l[lev] || near_corner(bd)) continue;
            Aggregate g;
            g.order = lev;
            g.members = mem;
            g.boundary = bd;
            g.hull_length = hl;
            g.domain = boundary_domain(bd, Lr, v);
            for (int i : mem) out.owner[i] = static_cast<int>(out.aggregates.size());
            out.aggregates.push_back(std::move(g));
        }
    }
    std::vector<std::vector<int>> corner_members(4);
    std::vector<char> corner_flag(4, 0);
    for (int i = 0; i < n; ++i) {
        if (out.owner[i] >= 0) continue;
        int best = 0, reach = std::numeric_limits<int>::max();
        for (int c = 0; c < 4; ++c) {
            int r = corner_reach(shapes[i].boundary, c, v);
            if (r < reach) {
                reach = r;
                best = c;
            }
        }
        if (reach > s.l_infty) {
            out.flagged.push_back(i);
            corner_flag[best] = 1;
        }
        corner_members[best].push_back(i);
    }
    for (int c = 0; c < 4; ++c) {
        if (corner_members[c].empty()) continue;
        Aggregate g;
        g.order = 0;
        g.corner = c;
        g.members = corner_members[c];
        g.boundary = detail::union_boundary(shapes, g.members);
        g.hull_length = hull_length(g.boundary, v);
        g.domain = boundary_domain(g.boundary, s.l_infty, v);
        g.flagged = corner_flag[c];
        for (int i : g.members) out.owner[i] = static_cast<int>(out.aggregates.size());
        out.aggregates.push_back(std::move(g));
    }
    return out;
}

inline AggregateDecomposition decompose_aggregates(const std::vector<Contour>& unbalanced, const ScaleSchedule& s,
                                                   const Volume& v) {
    std::vector<ContourShape> shapes;
    for (auto& c : unbalanced) shapes.push_back(shape_of(c, v));
    return decompose_aggregates(shapes, s, v,
                                [&](int i, int j) { return dual_site_set_distance(shapes[i].sites, shapes[j].sites); });
}

inline BoundaryBonds corner_collar(const Volume& v, double radius) {
    BoundaryBonds out;
    for (int b = 0; b < v.num_boundary(); ++b) {
        auto [p, q] = v.boundary_dual(b);
        for (int c = 0; c < 4; ++c)
            if (std::min(dual_l1(v.dual_site(p), v.corner(c)), dual_l1(v.dual_site(q), v.corner(c))) <= radius) {
                out.push_back(b);
                break;
            }
    }
    return out;
}

inline double boundary_field(const BoundaryBonds& P, const BoundaryCondition& eta, const CouplingParams& p) {
    double s = 0;
    for (int b : P) s += eta[b];
    return p.lambda * p.beta * s;
}

// ---------------------------------------------------------------------------
// Expansion report.

struct AggregateTerm {
    int order = 0;  // 0 = corner
    int corner = -1;
    std::vector<uint32_t> contours;
    int boundary_size = 0;
    int hull_length = 0;
    BoundaryBonds domain;
    double log_zhat = 0;
    bool flagged = false;
};

struct ExpansionReport {
    int sign = 1;
    double vacuum = 0;      // -E^{±,η}(∅)
    double phi0_total = 0;  // Σ φ_0 over 0-clusters
    std::vector<double> psi;  // Σ ψ_n, n = 1..levels
    double psi_infty = 0;
    std::vector<AggregateTerm> aggregates;
    int unbalanced = 0;
    int levels = 0;
    std::vector<std::string> flags;
    bool truncated = false;
    double residual_bound = 0;
    // Corner collar ∂Λ_C (boundary bonds within 2 l_inf of a corner) and the
    // parts of the vacuum and of Σφ_0 whose domain lies inside it.
    BoundaryBonds corner_collar;
    double field_corner = 0;
    double phi0_corner = 0;

    double aggregate_sum(bool corner) const {
        double t = 0;
        for (auto& a : aggregates)
            if ((a.order == 0) == corner) t += a.log_zhat;
        return t;
    }
    double total() const {
        double t = vacuum + phi0_total + psi_infty;
        for (double x : psi) t += x;
        for (auto& a : aggregates) t += a.log_zhat;
        return t;
    }
};

// ---------------------------------------------------------------------------
// Exhaustive path on Λ(1), Λ(2).  Restricted partition functions come from
// the catalog: Z(U_n) sums the families whose unbalanced contours all have
// order <= n, Ẑ_{n,α} the families made of contours of K_{n,α} only.  The
// interaction terms are then Σψ_n = log Z(U_n) - log Z(U_{n-1}) - Σ_α log Ẑ_{n,α}.

class CatalogExpansion {
public:
    CatalogExpansion(const VolumeCatalog& cat, const ScaleSchedule& s) : cat_(cat), s_(s) {
        const auto& tab = cat.contours();
        min_len_ = std::numeric_limits<int>::max();
        for (uint32_t i = 0; i < tab.size(); ++i) {
            min_len_ = std::min(min_len_, tab[i].length());
            if (maybe_unbalanced(tab[i])) pu_.push_back(i);
        }
        const Volume& v = cat.volume();
        nd_ = v.num_dual_sites();
        if (nd_ > 64) throw std::invalid_argument("dual lattice too large for masks");
    }

    // Unbalanced contour ids for η.
    std::vector<uint32_t> unbalanced(const BoundaryCondition& eta) const {
        uint32_t em = VolumeCatalog::minus_mask(eta);
        std::vector<uint32_t> u;
        for (uint32_t i : pu_)
            if (!is_balanced(cat_.contours()[i], em, s_.l0)) u.push_back(i);
        return u;
    }

    AggregateDecomposition aggregates(const std::vector<uint32_t>& ids) const {
        const Volume& v = cat_.volume();
        std::vector<ContourShape> shapes;
        std::vector<uint64_t> masks;
        for (uint32_t id : ids) {
            shapes.push_back(shape_of(cat_.contour(id), v));
            uint64_t m = 0;
            for (auto& d : shapes.back().sites) m |= 1ull << v.dual_index(d);
            masks.push_back(m);
        }
        return decompose_aggregates(shapes, s_, v, [&](int i, int j) { return mask_distance(masks[i], masks[j]); });
    }

    ExpansionReport expand(const BoundaryCondition& eta_in, const CouplingParams& p, int sign = 1) const {
        p.validate();
        if (sign != 1 && sign != -1) throw std::invalid_argument("sign must be +1 or -1");
        const Volume& v = cat_.volume();
        check_domain(eta_in, v);
        // Z^{-,η} = Z^{+,-η}
        BoundaryCondition eta = sign > 0 ? eta_in : eta_in.flipped();
        ExpansionReport r;
        r.sign = sign;
        r.levels = s_.levels();
        r.psi.assign(r.levels, 0.0);
        r.vacuum = -vacuum_energy(eta, p, 1);
        auto ids = unbalanced(eta);
        r.unbalanced = static_cast<int>(ids.size());
        auto dec = aggregates(ids);
        const int na = static_cast<int>(dec.aggregates.size());
        // short clusters would enter ρ̂; none exist when the thresholds do not exceed
        // the shortest contour
        bool has_corner = false;
        for (auto& a : dec.aggregates) {
            if (a.is_corner()) has_corner = true;
            else if (s_.L[a.order] > min_len_)
                throw CapExceeded("short-cluster renormalization needs explicit clusters; use the literal path");
        }
        if (has_corner && 2 * s_.l_infty > min_len_)
            throw CapExceeded("short-cluster renormalization needs explicit clusters; use the literal path");
        if (!dec.flagged.empty())
            r.flags.push_back(std::to_string(dec.flagged.size()) + " unbalanced contours binned to a corner beyond l_infty");

        // order code per table id: 0 balanced, n for n-aggregates, levels+1 for corners
        const int corner_code = r.levels + 1;
        std::vector<int16_t> agg_of(cat_.contours().size(), -1);
        std::vector<int> code_of_agg(na);
        for (int a = 0; a < na; ++a) {
            code_of_agg[a] = dec.aggregates[a].is_corner() ? corner_code : dec.aggregates[a].order;
            for (int m : dec.aggregates[a].members) agg_of[ids[m]] = static_cast<int16_t>(a);
        }
        const int kmax = v.num_bonds(), smax = v.num_boundary();
        std::vector<LengthFieldHistogram> by_code(corner_code + 1, LengthFieldHistogram(kmax, smax));
        std::vector<LengthFieldHistogram> by_agg(na, LengthFieldHistogram(kmax, smax));
        LengthFieldHistogram in_collar(kmax, smax), bulk_only(kmax, smax);
        r.corner_collar = corner_collar(v, 2 * s_.l_infty);
        r.field_corner = boundary_field(r.corner_collar, eta, p);
        uint32_t collar_mask = 0;
        for (int b : r.corner_collar) collar_mask |= 1u << b;
        const uint32_t em = VolumeCatalog::minus_mask(eta);
        cat_.for_each([&](uint64_t m, int len, uint32_t minus, int nc, std::span<const uint32_t> pu) {
            int s = VolumeCatalog::field_sum(minus, em);
            int code = 0, u = 0, agg = -1;
            bool single = true;
            for (uint32_t id : pu) {
                int a = agg_of[id];
                if (a < 0) continue;
                ++u;
                code = std::max(code, code_of_agg[a]);
                if (agg < 0) agg = a;
                else if (agg != a) single = false;
            }
            by_code[code].add(len, s);
            if (u > 0 && u == nc && single) by_agg[agg].add(len, s);
            if (code == 0) {
                uint32_t bd = cat_.boundary(m);
                if (!(bd & ~collar_mask)) in_collar.add(len, s);
                if (!bd) bulk_only.add(len, s);
            }
        });
        auto lz = [&](const LengthFieldHistogram& h) { return h.log_sum(p.beta, p.lambda); };
        // the empty family belongs to every Ẑ
        std::vector<double> logZu(corner_code + 1);
        {
            LengthFieldHistogram acc(kmax, smax);
            for (int c = 0; c <= corner_code; ++c) {
                for (int k = 0; k <= kmax; ++k)
                    for (int q = -smax; q <= smax; ++q)
                        if (auto x = by_code[c].count(k, q)) acc.add(k, q, x);
                logZu[c] = lz(acc);
            }
        }
        r.phi0_total = logZu[0];
        // clusters with dom(C) ⊂ A are the clusters of {Γ ∈ K_0 : ∂Γ ⊂ A}
        r.phi0_corner = lz(in_collar) - lz(bulk_only);
        for (int a = 0; a < na; ++a) {
            AggregateTerm t;
            auto& g = dec.aggregates[a];
            t.order = g.order;
            t.domain = g.domain;
            t.corner = g.corner;
            for (int m : g.members) t.contours.push_back(ids[m]);
            t.boundary_size = static_cast<int>(g.boundary.size());
            t.hull_length = g.hull_length;
            t.flagged = g.flagged;
            LengthFieldHistogram h = by_agg[a];
            h.add(0, 0);
            t.log_zhat = lz(h);
            r.aggregates.push_back(std::move(t));
        }
        for (int n = 1; n <= corner_code; ++n) {
            double zhat = 0;
            for (int a = 0; a < na; ++a)
                if (code_of_agg[a] == n) zhat += r.aggregates[a].log_zhat;
            double psi = logZu[n] - logZu[n - 1] - zhat;
            if (n == corner_code) r.psi_infty = psi;
            else r.psi[n - 1] = psi;
        }
        return r;
    }

    const ScaleSchedule& schedule() const { return s_; }

private:
    uint64_t dilate(uint64_t m) const {
        const Volume& v = cat_.volume();
        const int w = v.side() + 1;
        uint64_t all = nd_ == 64 ? ~0ull : ((1ull << nd_) - 1);
        uint64_t left_col = 0, right_col = 0;
        for (int r = 0; r < w; ++r) {
            left_col |= 1ull << (r * w);
            right_col |= 1ull << (r * w + w - 1);
        }
        uint64_t out = m | (m << w) | (m >> w) | ((m & ~right_col) << 1) | ((m & ~left_col) >> 1);
        return out & all;
    }
    int mask_distance(uint64_t a, uint64_t b) const {
        int d = 0;
        while (!(a & b)) {
            a = dilate(a);
            ++d;
            if (d > 4 * nd_) return std::numeric_limits<int>::max();
        }
        return d;
    }

    const VolumeCatalog& cat_;
    ScaleSchedule s_;
    std::vector<uint32_t> pu_;
    int min_len_ = 0;
    int nd_ = 0;
};

inline ExpansionReport sequential_expansion(const VolumeCatalog& cat, const BoundaryCondition& eta,
                                            const CouplingParams& p, const ScaleSchedule& s, int sign = 1) {
    return CatalogExpansion(cat, s).expand(eta, p, sign);
}

// Polymer-side log Z^{+,η}: -E^{+,η}(∅) + log Σ_{∂∈𝒟} Π ρ^η(Γ).
inline double polymer_logZ(const VolumeCatalog& cat, const BoundaryCondition& eta, const CouplingParams& p) {
    check_domain(eta, cat.volume());
    const Volume& v = cat.volume();
    LengthFieldHistogram h(v.num_bonds(), v.num_boundary());
    const uint32_t em = VolumeCatalog::minus_mask(eta);
    cat.for_each([&](uint64_t, int len, uint32_t minus, int, std::span<const uint32_t>) {
        h.add(len, VolumeCatalog::field_sum(minus, em));
    });
    return -vacuum_energy(eta, p, 1) + h.log_sum(p.beta, p.lambda);
}

// ---------------------------------------------------------------------------
// Explicit contour ensembles (fixtures and small hand-built systems).

struct ContourEnsemble {
    Volume volume;
    std::vector<Contour> contours;
    std::vector<std::vector<char>> compatible;

    ContourEnsemble(const Volume& v, std::vector<Contour> cs) : volume(v), contours(std::move(cs)) {
        const int n = size();
        if (n > polymer_model_cap) throw CapExceeded("explicit ensemble larger than 64 contours");
        compatible.assign(n, std::vector<char>(n, 0));
        for (int i = 0; i < n; ++i)
            for (int j = i + 1; j < n; ++j)
                compatible[i][j] = compatible[j][i] = contours_compatible(contours[i], contours[j], v) ? 1 : 0;
    }
    int size() const { return static_cast<int>(contours.size()); }
    Subset all() const { return size() == 64 ? ~0ull : ((1ull << size()) - 1); }

    // Γ_i incompatible with some member of `set` (including equality)
    bool touches(int i, Subset set) const {
        for (Subset t = set; t; t &= t - 1) {
            int j = std::countr_zero(t);
            if (i == j || !compatible[i][j]) return true;
        }
        return false;
    }
    bool touches(Subset a, Subset b) const {
        for (Subset t = a; t; t &= t - 1)
            if (touches(std::countr_zero(t), b)) return true;
        return false;
    }
    Subset incompatible_with(Subset set) const {
        Subset r = 0;
        for (int i = 0; i < size(); ++i)
            if (touches(i, set)) r |= 1ull << i;
        return r;
    }
    bool family(Subset d) const {
        for (Subset t = d; t; t &= t - 1) {
            int i = std::countr_zero(t);
            for (Subset u = t & (t - 1); u; u &= u - 1)
                if (!compatible[i][std::countr_zero(u)]) return false;
        }
        return true;
    }
    int length(Subset d) const {
        int l = 0;
        for (Subset t = d; t; t &= t - 1) l += contours[std::countr_zero(t)].length();
        return l;
    }

    // Polymer model over the members of `within`, activities ρ^η.
    PolymerSystem polymer_system(Subset within, const std::vector<double>& rho, std::vector<int>* index = nullptr) const {
        std::vector<int> idx;
        for (Subset t = within; t; t &= t - 1) idx.push_back(std::countr_zero(t));
        std::vector<std::pair<int, int>> edges;
        std::vector<Complex> z;
        for (size_t a = 0; a < idx.size(); ++a) {
            z.emplace_back(rho[idx[a]]);
            for (size_t b = a + 1; b < idx.size(); ++b)
                if (!compatible[idx[a]][idx[b]]) edges.emplace_back(static_cast<int>(a), static_cast<int>(b));
        }
        if (index) *index = idx;
        return PolymerSystem::polymer_model(static_cast<int>(idx.size()), edges, std::move(z));
    }

    std::vector<double> weights(const BoundaryCondition& eta, const CouplingParams& p) const {
        std::vector<double> r;
        for (auto& c : contours) r.push_back(std::exp(contour_log_weight(c, eta, p)));
        return r;
    }

    // log Σ over compatible families inside `within` of Π ρ.
    double log_partition(Subset within, const std::vector<double>& rho) const {
        PolymerSystem sys = polymer_system(within, rho);
        return std::log(partition_function(sys, sys.all()).real());
    }
};

// φ_0 over the clusters of balanced contours.
struct StepZero {
    Subset balanced = 0, unbalanced = 0;
    std::vector<int> index;  // polymer -> ensemble index
    ClusterWeightTable phi0;  // keyed by polymer subsets
    double phi0_total = 0;

    Subset members(Subset polymers) const {
        Subset m = 0;
        for (Subset t = polymers; t; t &= t - 1) m |= 1ull << index[std::countr_zero(t)];
        return m;
    }
};

inline StepZero step_zero_expansion(const ContourEnsemble& e, const BoundaryCondition& eta, const CouplingParams& p,
                                    const ScaleSchedule& s) {
    StepZero z;
    for (int i = 0; i < e.size(); ++i) {
        if (is_balanced(e.contours[i], eta, s.l0)) z.balanced |= 1ull << i;
        else z.unbalanced |= 1ull << i;
    }
    if (subset_size(z.balanced) > cluster_polymer_cap)
        throw CapExceeded("more than 20 balanced contours in an explicit ensemble");
    auto rho = e.weights(eta, p);
    PolymerSystem sys = e.polymer_system(z.balanced, rho, &z.index);
    if (sys.size() == 0) return z;
    z.phi0 = truncated_weights(sys, std::min(std::max(sys.size(), 1), cluster_size_cap));
    for (auto& [c, w] : z.phi0.weights) z.phi0_total += w.real();
    if (sys.size() > cluster_size_cap) {
        // clusters above the size cap are summed through the exact log Z
        z.phi0_total = std::log(partition_function(sys, sys.all()).real());
    }
    return z;
}

inline double aggregate_logZ(const ContourEnsemble& e, Subset aggregate, const std::vector<double>& rho_hat) {
    if (!aggregate) return 0.0;
    return e.log_partition(aggregate, rho_hat);
}

// ---------------------------------------------------------------------------
// Literal sequential expansion on an explicit ensemble.  Every order builds
// the renormalized weights, the Mayer weights w_n over families of relevant
// clusters, and the polymer model of n-connected families whose cluster
// weights are the ψ_n.

struct LiteralCluster {
    Subset support = 0;  // ensemble contours
    int length = 0;      // |C|
    double weight = 0;   // φ
};

struct LiteralLevel {
    int order = 0;  // 0 = corners
    std::vector<Subset> aggregates;
    std::vector<double> log_zhat;
    std::vector<LiteralCluster> relevant;  // clusters entering w_n
    double psi_total = 0;       // via the cluster expansion of the family model
    double psi_direct = 0;      // log Σ_𝒞 w(𝒞)
    double factorization_residual = 0;
    std::vector<LiteralCluster> new_clusters;  // 𝔇_n
};

struct LiteralExpansion {
    ExpansionReport report;
    std::vector<LiteralLevel> levels;
    double exact_logZ = 0;
    AggregateDecomposition decomposition;
};

inline constexpr int literal_relevant_cap = 10;

inline LiteralExpansion literal_sequential_expansion(const ContourEnsemble& e, const BoundaryCondition& eta,
                                                     const CouplingParams& p, const ScaleSchedule& s) {
    p.validate();
    LiteralExpansion out;
    ExpansionReport& r = out.report;
    r.levels = s.levels();
    r.psi.assign(r.levels, 0.0);
    r.vacuum = -vacuum_energy(eta, p, 1);
    auto rho = e.weights(eta, p);
    StepZero z0 = step_zero_expansion(e, eta, p, s);
    r.phi0_total = z0.phi0_total;
    out.exact_logZ = r.vacuum + e.log_partition(e.all(), rho);
    r.corner_collar = corner_collar(e.volume, 2 * s.l_infty);
    r.field_corner = boundary_field(r.corner_collar, eta, p);
    {
        std::vector<char> in(e.volume.num_boundary(), 0);
        for (int b : r.corner_collar) in[b] = 1;
        for (auto& [c, w] : z0.phi0.weights) {
            bool any = false, inside = true;
            for (Subset t = z0.members(c); t; t &= t - 1)
                for (int b : e.contours[std::countr_zero(t)].boundary) {
                    any = true;
                    inside = inside && in[b];
                }
            if (any && inside) r.phi0_corner += w.real();
        }
    }

    std::vector<int> uidx;
    std::vector<Contour> ucs;
    for (Subset t = z0.unbalanced; t; t &= t - 1) {
        uidx.push_back(std::countr_zero(t));
        ucs.push_back(e.contours[uidx.back()]);
    }
    r.unbalanced = static_cast<int>(uidx.size());
    out.decomposition = decompose_aggregates(ucs, s, e.volume);
    auto& dec = out.decomposition;
    if (!dec.flagged.empty())
        r.flags.push_back(std::to_string(dec.flagged.size()) + " unbalanced contours binned to a corner beyond l_infty");

    // current clusters 𝔈_{n-1}
    std::vector<LiteralCluster> clusters;
    for (auto& [c, w] : z0.phi0.weights) clusters.push_back({z0.members(c), e.length(z0.members(c)), w.real()});

    Subset lower = z0.balanced;  // U_{n-1}
    auto run_level = [&](int order, double threshold, const std::vector<Subset>& aggs,
                         const std::vector<const Aggregate*>& refs, bool last) {
        LiteralLevel L;
        L.order = order;
        L.aggregates = aggs;
        Subset level = 0;
        for (Subset a : aggs) level |= a;
        // ρ̂ with short clusters
        auto rho_hat = [&](Subset fam) {
            double lw = 0;
            for (Subset t = fam; t; t &= t - 1) lw += std::log(rho[std::countr_zero(t)]);
            for (auto& c : clusters)
                if (c.length < threshold && e.touches(c.support, fam)) lw -= c.weight;
            return lw;
        };
        std::vector<Subset> fams;  // compatible families inside the level
        for (Subset d = level;; d = (d - 1) & level) {
            if (e.family(d)) fams.push_back(d);
            if (!d) break;
        }
        std::vector<double> lrh(fams.size());
        for (size_t f = 0; f < fams.size(); ++f) lrh[f] = rho_hat(fams[f]);
        double log_prod = 0;
        for (Subset a : aggs) {
            LogAccumulator acc;
            for (size_t f = 0; f < fams.size(); ++f)
                if (subset_of(fams[f], a)) acc.add(lrh[f]);
            L.log_zhat.push_back(acc.value());
            log_prod += acc.value();
        }
        for (auto& c : clusters) {
            if (c.length < threshold) continue;
            for (Subset a : aggs)
                if (e.touches(c.support, a)) {
                    L.relevant.push_back(c);
                    break;
                }
        }
        const int R = static_cast<int>(L.relevant.size());
        if (R > literal_relevant_cap) throw CapExceeded("too many clusters reach the aggregates");
        // n-incompatibility of relevant clusters: both touch one aggregate
        std::vector<Subset> near(R, 0);
        for (int i = 0; i < R; ++i)
            for (size_t a = 0; a < aggs.size(); ++a)
                if (e.touches(L.relevant[i].support, aggs[a])) near[i] |= 1ull << a;
        auto w = [&](Subset fam_of_clusters) {
            double acc = 0;
            for (size_t f = 0; f < fams.size(); ++f) {
                double prod = std::exp(lrh[f] - log_prod);
                for (Subset t = fam_of_clusters; t; t &= t - 1) {
                    auto& c = L.relevant[std::countr_zero(t)];
                    double ph = e.touches(c.support, fams[f]) ? c.weight : 0.0;
                    prod *= std::expm1(-ph);
                }
                acc += prod;
            }
            return acc;
        };
        // the family sum; w(∅) = Σ ρ̂ / Π Ẑ equals 1 only for mutually compatible aggregates
        double w_empty = w(0);
        if (std::abs(w_empty - 1.0) > 1e-12) r.flags.push_back("aggregates of one order are not mutually compatible");
        double direct = 0;
        for (Subset f = 0; f < (1ull << R); ++f) direct += w(f);
        L.psi_direct = std::log(direct);
        // polymers: nonempty n-connected families of relevant clusters
        std::vector<Subset> polys;
        std::vector<Subset> reach;
        for (Subset f = 1; f < (1ull << R); ++f) {
            // connectivity through shared aggregates
            Subset comp = f & (~f + 1), grown = 0;
            while (comp != grown) {
                grown = comp;
                for (Subset t = grown; t; t &= t - 1) {
                    int i = std::countr_zero(t);
                    for (Subset u = f; u; u &= u - 1) {
                        int j = std::countr_zero(u);
                        if (near[i] & near[j]) comp |= 1ull << j;
                    }
                }
            }
            if (comp != f) continue;
            polys.push_back(f);
            Subset rc = 0;
            for (Subset t = f; t; t &= t - 1) rc |= near[std::countr_zero(t)];
            reach.push_back(rc);
        }
        std::vector<std::pair<int, int>> edges;
        std::vector<Complex> zz;
        for (size_t a = 0; a < polys.size(); ++a) {
            zz.emplace_back(w(polys[a]));
            for (size_t b = a + 1; b < polys.size(); ++b)
                if (reach[a] & reach[b]) edges.emplace_back(static_cast<int>(a), static_cast<int>(b));
        }
        // factorization w(𝒞1 ∪ 𝒞2) = w(𝒞1) w(𝒞2) for n-compatible families
        for (size_t a = 0; a < polys.size(); ++a)
            for (size_t b = a + 1; b < polys.size(); ++b)
                if (!(reach[a] & reach[b]) && !(polys[a] & polys[b]))
                    L.factorization_residual =
                        std::max(L.factorization_residual, std::abs(w(polys[a] | polys[b]) - zz[a].real() * zz[b].real()));
        if (static_cast<int>(polys.size()) <= cluster_size_cap) {
            if (!polys.empty()) {
                PolymerSystem fam_model = PolymerSystem::polymer_model(static_cast<int>(polys.size()), edges, zz);
                auto tab = truncated_weights(fam_model, std::max(fam_model.size(), 1));
                for (auto& [d, g] : tab.weights) {
                    L.psi_total += g.real();
                    LiteralCluster nc;
                    nc.weight = g.real();
                    for (Subset t = d; t; t &= t - 1) {
                        Subset f = polys[std::countr_zero(t)];
                        for (Subset u = f; u; u &= u - 1) {
                            nc.support |= L.relevant[std::countr_zero(u)].support;
                            nc.length += L.relevant[std::countr_zero(u)].length;
                        }
                    }
                    L.new_clusters.push_back(nc);
                }
            }
        } else if (last) {
            // the corner step needs no cluster list afterwards; factorization turns the
            // family sum into the polymer partition function
            L.psi_total = std::log(direct) - std::log(w_empty);
        } else {
            throw CapExceeded("too many cluster families at one order");
        }
        L.psi_total += std::log(w_empty);
        for (size_t a = 0; a < aggs.size(); ++a) {
            AggregateTerm t;
            t.order = order;
            t.corner = refs[a]->corner;
            t.boundary_size = static_cast<int>(refs[a]->boundary.size());
            t.hull_length = refs[a]->hull_length;
            t.domain = refs[a]->domain;
            t.flagged = refs[a]->flagged;
            t.log_zhat = L.log_zhat[a];
            for (Subset u = aggs[a]; u; u &= u - 1) t.contours.push_back(static_cast<uint32_t>(std::countr_zero(u)));
            r.aggregates.push_back(t);
        }
        for (auto& c : L.new_clusters) clusters.push_back(c);
        lower |= level;
        out.levels.push_back(std::move(L));
        return out.levels.back().psi_total;
    };

    for (int n = 1; n <= s.levels(); ++n) {
        std::vector<Subset> aggs;
        std::vector<const Aggregate*> refs;
        for (auto& g : dec.aggregates)
            if (g.order == n) {
                Subset a = 0;
                for (int m : g.members) a |= 1ull << uidx[m];
                aggs.push_back(a);
                refs.push_back(&g);
            }
        if (aggs.empty()) continue;
        r.psi[n - 1] = run_level(n, s.L[n], aggs, refs, false);
    }
    std::vector<Subset> corners;
    std::vector<const Aggregate*> refs;
    for (auto& g : dec.aggregates)
        if (g.is_corner()) {
            Subset a = 0;
            for (int m : g.members) a |= 1ull << uidx[m];
            corners.push_back(a);
            refs.push_back(&g);
        }
    if (!corners.empty()) r.psi_infty = run_level(0, 2 * s.l_infty, corners, refs, true);
    return out;
}

}  // namespace rbising

#endif

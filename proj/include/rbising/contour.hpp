#ifndef RBISING_CONTOUR_HPP
#define RBISING_CONTOUR_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "lattice.hpp"
#include "spins.hpp"

namespace rbising {

enum class PreClass { Bulk, SmallBoundary, Interface };
enum class ContourClass { Bulk, SimpleSmall, CornerSmall, LargeBoundary };

inline const char* to_string(PreClass c) {
    switch (c) {
        case PreClass::Bulk: return "bulk";
        case PreClass::SmallBoundary: return "small_boundary";
        case PreClass::Interface: return "interface";
    }
    return "?";
}

inline const char* to_string(ContourClass c) {
    switch (c) {
        case ContourClass::Bulk: return "bulk";
        case ContourClass::SimpleSmall: return "simple_small";
        case ContourClass::CornerSmall: return "corner_small";
        case ContourClass::LargeBoundary: return "large_boundary";
    }
    return "?";
}

struct ParityError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

struct PreContour {
    std::vector<int> bonds;  // internal bond ids in curve order
    std::vector<int> path;   // dual-site indices, bonds.size() + 1 entries
    bool closed = false;
    PreClass cls = PreClass::Bulk;
    std::vector<uint8_t> interior;  // per site
    BoundaryBonds boundary;         // ∂γ = ∂Int(γ)
    int size() const { return static_cast<int>(bonds.size()); }
};

struct Contour {
    std::vector<PreContour> pre;
    ContourClass cls = ContourClass::Bulk;
    std::vector<int> bonds;           // sorted, the identity of the contour
    std::vector<uint8_t> interior;    // Int(Γ) = Λ \ Ext(Γ)
    BoundaryBonds boundary;           // ∂Γ
    BoundaryBonds boundary_plus;      // ∂Γ^+
    BoundaryBonds boundary_minus;     // ∂Γ^-
    std::vector<int> corners;         // corners i with x*_{C,i} in ∂Γ

    int length() const { return static_cast<int>(bonds.size()); }
    bool is_bulk() const { return cls == ContourClass::Bulk; }
    friend bool operator==(const Contour& a, const Contour& b) { return a.bonds == b.bonds; }
};

// Pairing of strands at a dual vertex where four broken dual bonds meet:
// the strands are {North, East} and {South, West}, so the sites in the NE
// and SW plaquette positions are cut off and NW/SE stay joined.
inline constexpr int rounding_partner(int d) {
    constexpr int p[4] = {North, East, South, West};
    return p[d];
}

// ---------------------------------------------------------------------------

inline std::vector<int> broken_bond_ids(const SpinConfig& sigma, const Volume& v) {
    std::vector<int> out;
    for (int b = 0; b < v.num_bonds(); ++b) {
        auto [s, t] = v.bond_sites(b);
        if (sigma[s] != sigma[t]) out.push_back(b);
    }
    return out;
}

inline std::vector<DualBond> broken_bonds(const SpinConfig& sigma, const Volume& v) {
    check_domain(sigma, v);
    std::vector<DualBond> out;
    for (int b : broken_bond_ids(sigma, v)) out.push_back(v.dual_bond(b));
    std::sort(out.begin(), out.end());
    return out;
}

// Reusable extraction engine; holds scratch buffers so sweeps do not allocate.
class ContourExtractor {
public:
    explicit ContourExtractor(const Volume& v) : v_(v) {
        in_delta_.assign(v.num_bonds(), 0);
        used_.assign(v.num_bonds(), 0);
        mark_.assign(v.num_bonds(), 0);
        color_.assign(v.num_sites(), 0);
        seen_.assign(v.num_sites(), 0);
        queue_.reserve(v.num_sites());
    }

    const Volume& volume() const { return v_; }

    // Rounding-corner split of a realizable broken-bond set.
    std::vector<PreContour> split(const std::vector<int>& delta) {
        for (int b : delta) {
            if (b < 0 || b >= v_.num_bonds()) throw std::out_of_range("bond id out of range");
            in_delta_[b] = 1;
            used_[b] = 0;
        }
        struct Cleanup {
            ContourExtractor* e;
            const std::vector<int>& d;
            ~Cleanup() { for (int b : d) e->in_delta_[b] = 0; }
        } cleanup{this, delta};

        for (int b : delta) {
            auto [p, q] = v_.bond_dual(b);
            for (int i : {p, q})
                if (!v_.dual_on_perimeter(i) && degree(i) % 2 != 0)
                    throw ParityError("broken-bond set is not realizable by any configuration");
        }
        std::vector<PreContour> out;
        // open curves first, started from the perimeter in dual-index order
        std::vector<int> starts;
        for (int b : delta) {
            auto [p, q] = v_.bond_dual(b);
            if (v_.dual_on_perimeter(p)) starts.push_back(p);
            if (v_.dual_on_perimeter(q)) starts.push_back(q);
        }
        std::sort(starts.begin(), starts.end());
        for (int p : starts) {
            int b = -1;
            for (int d = 0; d < 4; ++d) {
                int c = v_.dual_incident(p, d);
                if (c >= 0 && in_delta_[c]) b = c;
            }
            if (b < 0 || used_[b]) continue;
            out.push_back(trace(p, b, false));
        }
        std::vector<int> rest(delta);
        std::sort(rest.begin(), rest.end());
        for (int b : rest) {
            if (used_[b]) continue;
            out.push_back(trace(v_.bond_dual(b).first, b, true));
        }
        for (auto& g : out) classify(g);
        return out;
    }

    // Λ1/Λ2 of a single pre-contour via the parity two-colouring, then the
    // corner-count rule.  Fills cls, interior and boundary.
    void classify(PreContour& g) {
        ++epoch_;
        if (epoch_ == 0) { std::fill(mark_.begin(), mark_.end(), 0); epoch_ = 1; }
        for (int b : g.bonds) mark_[b] = epoch_;
        const int ns = v_.num_sites();
        std::fill(seen_.begin(), seen_.end(), 0);
        queue_.clear();
        queue_.push_back(0);
        seen_[0] = 1;
        color_[0] = 0;
        for (size_t h = 0; h < queue_.size(); ++h) {
            int s = queue_[h];
            for (int d = 0; d < 4; ++d) {
                int t = v_.neighbor(s, d);
                if (t < 0) continue;
                uint8_t c = color_[s] ^ static_cast<uint8_t>(mark_[v_.neighbor_bond(s, d)] == epoch_);
                if (!seen_[t]) {
                    seen_[t] = 1;
                    color_[t] = c;
                    queue_.push_back(t);
                }
            }
        }
        int size[2] = {0, 0}, bnd[2] = {0, 0}, crn[2] = {0, 0};
        for (int s = 0; s < ns; ++s) ++size[color_[s]];
        for (int b = 0; b < v_.num_boundary(); ++b) ++bnd[color_[v_.boundary_inner(b)]];
        for (int i = 0; i < 4; ++i) ++crn[color_[v_.corner_site(i)]];
        int ext;
        if (bnd[1] == 0) { g.cls = PreClass::Bulk; ext = 0; }
        else if (bnd[0] == 0) { g.cls = PreClass::Bulk; ext = 1; }
        else if (crn[0] >= 3) { g.cls = PreClass::SmallBoundary; ext = 0; }
        else if (crn[1] >= 3) { g.cls = PreClass::SmallBoundary; ext = 1; }
        else {
            g.cls = PreClass::Interface;
            if (size[0] != size[1]) ext = size[0] > size[1] ? 0 : 1;
            else ext = color_[v_.corner_site(0)];
        }
        g.interior.assign(ns, 0);
        for (int s = 0; s < ns; ++s) g.interior[s] = color_[s] != ext;
        g.boundary.clear();
        for (int b = 0; b < v_.num_boundary(); ++b)
            if (g.interior[v_.boundary_inner(b)]) g.boundary.push_back(b);
    }

    // Boundary-matching components, assembled into contours.
    std::vector<Contour> glue(std::vector<PreContour> pres) {
        const int m = static_cast<int>(pres.size());
        std::vector<int> parent(m);
        std::iota(parent.begin(), parent.end(), 0);
        auto find = [&](int a) {
            while (parent[a] != a) a = parent[a] = parent[parent[a]];
            return a;
        };
        std::vector<int> owner(v_.num_boundary(), -1);
        for (int i = 0; i < m; ++i)
            for (int b : pres[i].boundary) {
                if (owner[b] < 0) owner[b] = i;
                else parent[find(i)] = find(owner[b]);
            }
        std::vector<int> root_to_idx(m, -1);
        std::vector<Contour> out;
        for (int i = 0; i < m; ++i) {
            int r = find(i);
            if (root_to_idx[r] < 0) {
                root_to_idx[r] = static_cast<int>(out.size());
                out.emplace_back();
            }
            out[root_to_idx[r]].pre.push_back(std::move(pres[i]));
        }
        for (auto& c : out) finish(c);
        std::sort(out.begin(), out.end(), [](const Contour& a, const Contour& b) { return a.bonds < b.bonds; });
        return out;
    }

    void finish(Contour& c) {
        const int ns = v_.num_sites();
        c.bonds.clear();
        c.interior.assign(ns, 0);
        std::vector<uint8_t> parity(ns, 0);
        bool any_interface = false;
        for (auto& g : c.pre) {
            c.bonds.insert(c.bonds.end(), g.bonds.begin(), g.bonds.end());
            for (int s = 0; s < ns; ++s) {
                c.interior[s] |= g.interior[s];
                parity[s] ^= g.interior[s];
            }
            any_interface |= g.cls == PreClass::Interface;
        }
        std::sort(c.bonds.begin(), c.bonds.end());
        std::sort(c.pre.begin(), c.pre.end(),
                  [](const PreContour& a, const PreContour& b) { return a.bonds < b.bonds; });
        c.boundary.clear();
        c.boundary_plus.clear();
        c.boundary_minus.clear();
        for (int b = 0; b < v_.num_boundary(); ++b) {
            int s = v_.boundary_inner(b);
            if (!c.interior[s]) continue;
            c.boundary.push_back(b);
            (parity[s] ? c.boundary_minus : c.boundary_plus).push_back(b);
        }
        c.corners.clear();
        for (int i = 0; i < 4; ++i) {
            auto [b1, b2] = v_.corner_bonds(i);
            if (std::binary_search(c.boundary.begin(), c.boundary.end(), b1) ||
                std::binary_search(c.boundary.begin(), c.boundary.end(), b2))
                c.corners.push_back(i);
        }
        if (c.boundary.empty()) {
            if (c.pre.size() != 1) throw std::logic_error("bulk contour with more than one pre-contour");
            c.cls = ContourClass::Bulk;
        } else if (any_interface) {
            c.cls = ContourClass::LargeBoundary;
        } else if (c.corners.empty()) {
            c.cls = ContourClass::SimpleSmall;
        } else if (c.corners.size() == 1) {
            c.cls = ContourClass::CornerSmall;
        } else {
            throw std::logic_error("small boundary contour touching several corners");
        }
    }

    std::vector<Contour> extract(const SpinConfig& sigma) {
        return glue(split(broken_bond_ids(sigma, v_)));
    }

    // The exterior sign of σ: its value on Ext(D(σ)).
    int exterior_sign(const SpinConfig& sigma, const std::vector<Contour>& family) const {
        const int ns = v_.num_sites();
        for (int s = 0; s < ns; ++s) {
            bool inside = false;
            for (auto& c : family)
                if (c.interior[s]) { inside = true; break; }
            if (!inside) return sigma[s];
        }
        throw std::logic_error("configuration with empty exterior");
    }

private:
    int degree(int i) const {
        int k = 0;
        for (int d = 0; d < 4; ++d) {
            int b = v_.dual_incident(i, d);
            if (b >= 0 && in_delta_[b]) ++k;
        }
        return k;
    }

    PreContour trace(int start, int first, bool closed) {
        PreContour g;
        g.closed = closed;
        g.path.push_back(start);
        int cur = start, b = first;
        while (true) {
            used_[b] = 1;
            g.bonds.push_back(b);
            auto [p, q] = v_.bond_dual(b);
            int nxt = p == cur ? q : p;
            g.path.push_back(nxt);
            if (!closed && v_.dual_on_perimeter(nxt)) break;
            int in_dir = -1;
            for (int d = 0; d < 4; ++d)
                if (v_.dual_incident(nxt, d) == b) in_dir = d;
            int out = -1;
            if (degree(nxt) == 4) {
                out = v_.dual_incident(nxt, rounding_partner(in_dir));
            } else {
                for (int d = 0; d < 4; ++d) {
                    int c = v_.dual_incident(nxt, d);
                    if (d != in_dir && c >= 0 && in_delta_[c]) out = c;
                }
            }
            if (out < 0) throw ParityError("dangling broken bond");
            if (closed && out == first) break;
            if (used_[out]) throw std::logic_error("curve tracing revisited a bond");
            cur = nxt;
            b = out;
        }
        return g;
    }

    const Volume& v_;
    std::vector<uint8_t> in_delta_, used_;
    std::vector<uint32_t> mark_;
    uint32_t epoch_ = 0;
    std::vector<uint8_t> color_, seen_;
    std::vector<int> queue_;
};

// ---------------------------------------------------------------------------
// Free-function API.

inline std::vector<PreContour> split_precontours(const std::vector<DualBond>& delta, const Volume& v) {
    std::vector<int> ids;
    for (auto& d : delta) {
        int found = -1;
        int ia = v.dual_index(d.a), ib = v.dual_index(d.b);
        for (int dir = 0; dir < 4; ++dir) {
            int b = v.dual_incident(ia, dir);
            if (b >= 0) {
                auto [p, q] = v.bond_dual(b);
                if ((p == ia && q == ib) || (p == ib && q == ia)) found = b;
            }
        }
        if (found < 0) throw std::invalid_argument("dual bond is not dual to an internal bond");
        ids.push_back(found);
    }
    ContourExtractor ex(v);
    return ex.split(ids);
}

inline PreContour classify_precontour(PreContour g, const Volume& v) {
    if (g.bonds.empty()) throw std::invalid_argument("empty curve");
    ContourExtractor ex(v);
    ex.classify(g);
    return g;
}

inline std::vector<Contour> glue_contours(std::vector<PreContour> pres, const Volume& v) {
    ContourExtractor ex(v);
    return ex.glue(std::move(pres));
}

inline std::vector<Contour> extract_contours(const SpinConfig& sigma, const Volume& v) {
    check_domain(sigma, v);
    ContourExtractor ex(v);
    return ex.extract(sigma);
}

inline int constrained_split(const SpinConfig& sigma, const Volume& v) {
    check_domain(sigma, v);
    ContourExtractor ex(v);
    auto fam = ex.extract(sigma);
    return ex.exterior_sign(sigma, fam);
}

inline bool detect_interface(const SpinConfig& sigma, const Volume& v) {
    check_domain(sigma, v);
    ContourExtractor ex(v);
    for (auto& g : ex.split(broken_bond_ids(sigma, v)))
        if (g.cls == PreClass::Interface) return true;
    return false;
}

// log ρ^η(Γ) = -2β(|Γ| + λ Σ_{∂Γ^-} η).
inline double contour_log_weight(const Contour& c, const BoundaryCondition& eta, const CouplingParams& p) {
    double s = 0.0;
    for (int b : c.boundary_minus) s += eta[b];
    return -2.0 * p.beta * (c.length() + p.lambda * s);
}

// Boundary energy of the empty family in the ± sector: E^{±,η}(∅).
inline double vacuum_energy(const BoundaryCondition& eta, const CouplingParams& p, int sign = 1) {
    double s = 0.0;
    for (auto e : eta.eta) s += e;
    return -p.lambda * p.beta * sign * s;
}

// The unique σ of the requested sign whose contour family is `family`.
inline SpinConfig config_from_contours(const std::vector<Contour>& family, int sign, const Volume& v) {
    if (sign != 1 && sign != -1) throw std::invalid_argument("sign must be +1 or -1");
    SpinConfig s(v, sign);
    for (auto& c : family)
        for (auto& g : c.pre)
            for (int i = 0; i < v.num_sites(); ++i)
                if (g.interior[i]) s[i] = static_cast<int8_t>(-s[i]);
    ContourExtractor ex(v);
    auto back = ex.extract(s);
    std::vector<std::vector<int>> a, b;
    for (auto& c : family) a.push_back(c.bonds);
    for (auto& c : back) b.push_back(c.bonds);
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    if (a != b || (!back.empty() && ex.exterior_sign(s, back) != sign) || (back.empty() && s[0] != sign))
        throw std::invalid_argument("inconsistent contour family");
    return s;
}

// Single-contour realization in Ω^+.
inline SpinConfig realize_contour(const Contour& c, const Volume& v) {
    SpinConfig s(v, 1);
    for (auto& g : c.pre)
        for (int i = 0; i < v.num_sites(); ++i)
            if (g.interior[i]) s[i] = static_cast<int8_t>(-s[i]);
    return s;
}

// The single contour of the configuration that is minus exactly on `sites`.
inline Contour contour_of_region(const std::vector<Site>& sites, const Volume& v) {
    SpinConfig s(v, 1);
    for (auto x : sites) {
        if (!v.contains(x.x, x.y)) throw std::invalid_argument("site outside the volume");
        s[v.site_index(x.x, x.y)] = -1;
    }
    auto fam = extract_contours(s, v);
    if (fam.size() != 1) throw std::invalid_argument("region does not bound exactly one contour");
    return fam.front();
}

// ---------------------------------------------------------------------------
// Compatibility.  Two pre-contours are compatible when they are
// edge-disjoint and, at every dual vertex they share, each of them follows
// one of the two rounding strands.

inline bool precontours_compatible(const PreContour& a, const PreContour& b, const Volume& v) {
    std::vector<int> ea(a.bonds), eb(b.bonds);
    std::sort(ea.begin(), ea.end());
    std::sort(eb.begin(), eb.end());
    std::vector<int> common;
    std::set_intersection(ea.begin(), ea.end(), eb.begin(), eb.end(), std::back_inserter(common));
    if (!common.empty()) return false;
    std::vector<int> va(a.path), vb(b.path);
    std::sort(va.begin(), va.end());
    va.erase(std::unique(va.begin(), va.end()), va.end());
    std::sort(vb.begin(), vb.end());
    vb.erase(std::unique(vb.begin(), vb.end()), vb.end());
    std::vector<int> shared;
    std::set_intersection(va.begin(), va.end(), vb.begin(), vb.end(), std::back_inserter(shared));
    for (int x : shared) {
        if (v.dual_on_perimeter(x)) return false;
        int mask = 0;
        for (int d = 0; d < 4; ++d) {
            int bd = v.dual_incident(x, d);
            if (bd >= 0 && std::binary_search(ea.begin(), ea.end(), bd)) mask |= 1 << d;
        }
        int ne = (1 << North) | (1 << East), sw = (1 << South) | (1 << West);
        if (mask != ne && mask != sw) return false;
    }
    return true;
}

inline bool boundaries_intersect(const BoundaryBonds& a, const BoundaryBonds& b) {
    size_t i = 0, j = 0;
    while (i < a.size() && j < b.size()) {
        if (a[i] == b[j]) return true;
        if (a[i] < b[j]) ++i; else ++j;
    }
    return false;
}

// Γ1 ~ Γ2: all pre-contour pairs compatible and no boundary matching, so that
// the pair is realized by a configuration with exactly these two contours.
inline bool contours_compatible(const Contour& a, const Contour& b, const Volume& v) {
    if (a.bonds == b.bonds) return false;
    if (boundaries_intersect(a.boundary, b.boundary)) return false;
    for (auto& g : a.pre)
        for (auto& h : b.pre)
            if (!precontours_compatible(g, h, v)) return false;
    return true;
}

// ---------------------------------------------------------------------------
// Height of a small boundary contour.

inline int height(const Contour& c, const Volume& v) {
    if (c.cls != ContourClass::SimpleSmall && c.cls != ContourClass::CornerSmall)
        throw std::invalid_argument("height is defined for small boundary contours only");
    std::vector<DualSite> pts;
    for (int b : c.bonds) {
        auto [p, q] = v.bond_dual(b);
        pts.push_back(v.dual_site(p));
        pts.push_back(v.dual_site(q));
    }
    if (c.cls == ContourClass::SimpleSmall) {
        std::vector<DualSite> bd;
        for (int b : c.boundary) {
            auto [p, q] = v.boundary_dual(b);
            bd.push_back(v.dual_site(p));
            bd.push_back(v.dual_site(q));
        }
        int h = 0;
        for (auto& y : pts) h = std::max(h, dual_site_set_distance({y}, bd));
        return h;
    }
    // corner case: rectangle spanned by the two ends of cn(∂Γ) and the corner
    BoundaryBonds hull = connected_hull(c.boundary, v);
    const int M = v.num_boundary();
    std::vector<char> in(M, 0);
    for (int b : hull) in[b] = 1;
    int first = -1, last = -1;
    for (int b : hull) {
        if (!in[(b - 1 + M) % M]) first = b;
        if (!in[(b + 1) % M]) last = b;
    }
    auto outer_end = [&](int b, int neighbour) {
        auto [p, q] = v.boundary_dual(b);
        auto [r, s] = v.boundary_dual(neighbour);
        return (p == r || p == s) ? q : p;
    };
    DualSite e1 = v.dual_site(outer_end(first, (first + 1) % M));
    DualSite e2 = v.dual_site(outer_end(last, (last - 1 + M) % M));
    DualSite k = v.corner(c.corners.front());
    int xlo = std::min({e1.X, e2.X, k.X}), xhi = std::max({e1.X, e2.X, k.X});
    int ylo = std::min({e1.Y, e2.Y, k.Y}), yhi = std::max({e1.Y, e2.Y, k.Y});
    int h = 0;
    for (auto& y : pts) {
        int dx = y.X < xlo ? xlo - y.X : (y.X > xhi ? y.X - xhi : 0);
        int dy = y.Y < ylo ? ylo - y.Y : (y.Y > yhi ? y.Y - yhi : 0);
        h = std::max(h, (dx + dy) / 2);
    }
    return h;
}

inline std::vector<DualBond> contour_dual_bonds(const Contour& c, const Volume& v) {
    std::vector<DualBond> out;
    for (int b : c.bonds) out.push_back(v.dual_bond(b));
    std::sort(out.begin(), out.end());
    return out;
}

inline std::vector<DualBond> boundary_dual_bonds(const BoundaryBonds& P, const Volume& v) {
    std::vector<DualBond> out;
    for (int b : P) out.push_back(v.boundary_dual_bond(b));
    std::sort(out.begin(), out.end());
    return out;
}

}  // namespace rbising

#endif

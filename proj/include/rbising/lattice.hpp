#ifndef RBISING_LATTICE_HPP
#define RBISING_LATTICE_HPP

#include <algorithm>
#include <array>
#include <cstdint>
#include <cstdlib>
#include <stdexcept>
#include <tuple>
#include <utility>
#include <vector>

namespace rbising {

// Dual sites live at half-integer points; we store (2x+1, 2y+1).
struct DualSite {
    int X = 0;
    int Y = 0;
    friend bool operator==(const DualSite&, const DualSite&) = default;
    friend auto operator<=>(const DualSite&, const DualSite&) = default;
};

inline int dual_l1(DualSite a, DualSite b) { return (std::abs(a.X - b.X) + std::abs(a.Y - b.Y)) / 2; }

struct DualBond {
    DualSite a, b;  // a < b
    DualBond() = default;
    DualBond(DualSite p, DualSite q) : a(std::min(p, q)), b(std::max(p, q)) {
        int dx = std::abs(p.X - q.X), dy = std::abs(p.Y - q.Y);
        if (!((dx == 2 && dy == 0) || (dx == 0 && dy == 2)))
            throw std::invalid_argument("dual bond endpoints must be unit neighbours");
    }
    friend bool operator==(const DualBond&, const DualBond&) = default;
    friend auto operator<=>(const DualBond&, const DualBond&) = default;
};

struct Site {
    int x = 0, y = 0;
    friend bool operator==(const Site&, const Site&) = default;
    friend auto operator<=>(const Site&, const Site&) = default;
};

enum Dir : int { East = 0, North = 1, West = 2, South = 3 };

// The square Λ(N) with its internal bonds, dual lattice and boundary.
//
// Sites are indexed row-major with y = -N first.  Internal bonds: the
// horizontal ones (x,y)-(x+1,y) come first, then the vertical ones.
// Boundary bonds are indexed counterclockwise, starting with the bond whose
// exterior site is (N+1,-N).
class Volume {
public:
    static constexpr int max_half_side = 2000;

    explicit Volume(int N) : N_(N) {
        if (N < 1) throw std::invalid_argument("volume half-side N must be >= 1");
        if (N > max_half_side) throw std::invalid_argument("volume half-side N too large");
        n_ = 2 * N + 1;
        nd_ = n_ + 1;
        build();
    }

    int N() const { return N_; }
    int side() const { return n_; }
    int num_sites() const { return n_ * n_; }
    int num_bonds() const { return 2 * n_ * (n_ - 1); }
    int num_boundary() const { return 4 * n_; }
    int num_dual_sites() const { return nd_ * nd_; }

    bool contains(int x, int y) const { return std::abs(x) <= N_ && std::abs(y) <= N_; }
    int site_index(int x, int y) const { return (y + N_) * n_ + (x + N_); }
    Site site(int s) const { return {s % n_ - N_, s / n_ - N_}; }

    // Neighbour of site s in direction d, or -1 when it leaves Λ.
    int neighbor(int s, int d) const { return nbr_[4 * s + d]; }
    // Internal bond joining s to its neighbour in direction d, or -1.
    int neighbor_bond(int s, int d) const { return nbr_bond_[4 * s + d]; }
    std::pair<int, int> bond_sites(int b) const { return bond_sites_[b]; }
    // Endpoints of the dual bond, as dual-site indices.
    std::pair<int, int> bond_dual(int b) const { return bond_dual_[b]; }
    DualBond dual_bond(int b) const {
        auto [p, q] = bond_dual_[b];
        return DualBond(dual_site(p), dual_site(q));
    }

    int dual_index(DualSite d) const { return ((d.Y + n_) / 2) * nd_ + (d.X + n_) / 2; }
    DualSite dual_site(int i) const { return {2 * (i % nd_) - n_, 2 * (i / nd_) - n_}; }
    bool dual_on_perimeter(int i) const {
        DualSite d = dual_site(i);
        return std::abs(d.X) == n_ || std::abs(d.Y) == n_;
    }
    // Internal bond whose dual leaves dual site i in direction d, or -1.
    int dual_incident(int i, int d) const { return dual_inc_[4 * i + d]; }

    // Boundary bond data.
    int boundary_inner(int b) const { return bnd_inner_[b]; }
    Site boundary_exterior(int b) const { return bnd_ext_[b]; }
    std::pair<int, int> boundary_dual(int b) const { return bnd_dual_[b]; }
    DualBond boundary_dual_bond(int b) const {
        auto [p, q] = bnd_dual_[b];
        return DualBond(dual_site(p), dual_site(q));
    }
    // Boundary bonds attached to site s (0, 1 or 2 of them).
    const std::vector<int>& boundary_bonds_of(int s) const { return site_bnd_[s]; }
    int boundary_index_of_exterior(Site e) const {
        for (int b = 0; b < num_boundary(); ++b)
            if (bnd_ext_[b] == e) return b;
        return -1;
    }

    // Corner i (0..3): dual site x*_{C,i+1}; corner_site is the site of Λ next to it.
    DualSite corner(int i) const { return corners_[i]; }
    int corner_dual(int i) const { return dual_index(corners_[i]); }
    int corner_site(int i) const { return corner_site_[i]; }
    // Boundary bonds touching corner i (two consecutive indices mod 4n).
    std::pair<int, int> corner_bonds(int i) const { return corner_bnd_[i]; }
    bool is_boundary_site(int s) const { return !site_bnd_[s].empty(); }

    int find_bond(int s1, int s2) const {
        for (int d = 0; d < 4; ++d)
            if (nbr_[4 * s1 + d] == s2) return nbr_bond_[4 * s1 + d];
        return -1;
    }
    int find_bond(Site a, Site b) const { return find_bond(site_index(a.x, a.y), site_index(b.x, b.y)); }

private:
    void build() {
        const int ns = n_ * n_;
        nbr_.assign(4 * ns, -1);
        nbr_bond_.assign(4 * ns, -1);
        bond_sites_.resize(num_bonds());
        bond_dual_.resize(num_bonds());
        dual_inc_.assign(4 * nd_ * nd_, -1);
        int b = 0;
        for (int y = -N_; y <= N_; ++y)
            for (int x = -N_; x < N_; ++x, ++b) {
                int s = site_index(x, y), t = site_index(x + 1, y);
                bond_sites_[b] = {s, t};
                nbr_[4 * s + East] = t; nbr_bond_[4 * s + East] = b;
                nbr_[4 * t + West] = s; nbr_bond_[4 * t + West] = b;
                int lo = dual_index({2 * x + 1, 2 * y - 1}), hi = dual_index({2 * x + 1, 2 * y + 1});
                bond_dual_[b] = {lo, hi};
                dual_inc_[4 * lo + North] = b;
                dual_inc_[4 * hi + South] = b;
            }
        for (int y = -N_; y < N_; ++y)
            for (int x = -N_; x <= N_; ++x, ++b) {
                int s = site_index(x, y), t = site_index(x, y + 1);
                bond_sites_[b] = {s, t};
                nbr_[4 * s + North] = t; nbr_bond_[4 * s + North] = b;
                nbr_[4 * t + South] = s; nbr_bond_[4 * t + South] = b;
                int lo = dual_index({2 * x - 1, 2 * y + 1}), hi = dual_index({2 * x + 1, 2 * y + 1});
                bond_dual_[b] = {lo, hi};
                dual_inc_[4 * lo + East] = b;
                dual_inc_[4 * hi + West] = b;
            }

        site_bnd_.assign(ns, {});
        auto add = [&](int ix, int iy, int ex, int ey, DualSite p, DualSite q) {
            int s = site_index(ix, iy);
            int idx = static_cast<int>(bnd_inner_.size());
            bnd_inner_.push_back(s);
            bnd_ext_.push_back({ex, ey});
            bnd_dual_.push_back({dual_index(p), dual_index(q)});
            site_bnd_[s].push_back(idx);
        };
        for (int y = -N_; y <= N_; ++y)
            add(N_, y, N_ + 1, y, {n_, 2 * y - 1}, {n_, 2 * y + 1});
        for (int x = N_; x >= -N_; --x)
            add(x, N_, x, N_ + 1, {2 * x + 1, n_}, {2 * x - 1, n_});
        for (int y = N_; y >= -N_; --y)
            add(-N_, y, -N_ - 1, y, {-n_, 2 * y + 1}, {-n_, 2 * y - 1});
        for (int x = -N_; x <= N_; ++x)
            add(x, -N_, x, -N_ - 1, {2 * x - 1, -n_}, {2 * x + 1, -n_});

        corners_ = {DualSite{-n_, -n_}, DualSite{n_, -n_}, DualSite{n_, n_}, DualSite{-n_, n_}};
        corner_site_ = {site_index(-N_, -N_), site_index(N_, -N_), site_index(N_, N_), site_index(-N_, N_)};
        const int M = num_boundary();
        for (int i = 0; i < 4; ++i) {
            int cd = corner_dual(i);
            std::vector<int> touching;
            for (int k = 0; k < M; ++k)
                if (bnd_dual_[k].first == cd || bnd_dual_[k].second == cd) touching.push_back(k);
            if (touching.size() != 2) throw std::logic_error("corner bond lookup failed");
            int a = touching[0], c = touching[1];
            if ((a + 1) % M != c) std::swap(a, c);
            corner_bnd_[i] = {a, c};
        }
    }

    int N_, n_, nd_;
    std::vector<int> nbr_, nbr_bond_;
    std::vector<std::pair<int, int>> bond_sites_, bond_dual_;
    std::vector<int> dual_inc_;
    std::vector<int> bnd_inner_;
    std::vector<Site> bnd_ext_;
    std::vector<std::pair<int, int>> bnd_dual_;
    std::vector<std::vector<int>> site_bnd_;
    std::array<DualSite, 4> corners_{};
    std::array<int, 4> corner_site_{};
    std::array<std::pair<int, int>, 4> corner_bnd_{};
};

inline Volume build_volume(int N) { return Volume(N); }

// ---------------------------------------------------------------------------
// Boundary sets: subsets of the 4(2N+1) boundary bonds, kept sorted.

using BoundaryBonds = std::vector<int>;

inline void check_boundary(const BoundaryBonds& P, const Volume& v) {
    for (int b : P)
        if (b < 0 || b >= v.num_boundary()) throw std::out_of_range("bond not in the boundary of the volume");
}

inline std::vector<Site> boundary_underline(const BoundaryBonds& P, const Volume& v) {
    check_boundary(P, v);
    std::vector<Site> out;
    out.reserve(P.size());
    for (int b : P) out.push_back(v.boundary_exterior(b));
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
}

// Maximal boundary intervals.  Exterior sites on either side of a corner are
// treated as adjacent, so an interval may wrap around a corner.
inline std::vector<BoundaryBonds> boundary_intervals(BoundaryBonds P, const Volume& v) {
    check_boundary(P, v);
    std::sort(P.begin(), P.end());
    P.erase(std::unique(P.begin(), P.end()), P.end());
    std::vector<BoundaryBonds> out;
    const int M = v.num_boundary();
    if (P.empty()) return out;
    if (static_cast<int>(P.size()) == M) return {P};
    std::vector<char> in(M, 0);
    for (int b : P) in[b] = 1;
    int start = 0;
    while (in[start] || !in[(start + 1) % M]) start = (start + 1) % M;
    // start is a gap bond followed by a member
    for (int k = 1; k <= M; ++k) {
        int b = (start + k) % M;
        if (!in[b]) continue;
        if (!in[(b - 1 + M) % M]) out.emplace_back();
        out.back().push_back(b);
    }
    for (auto& iv : out) std::sort(iv.begin(), iv.end());
    std::sort(out.begin(), out.end());
    return out;
}

inline std::vector<DualBond> boundary_bond_keys(const BoundaryBonds& P, const Volume& v) {
    std::vector<DualBond> keys;
    keys.reserve(P.size());
    for (int b : P) keys.push_back(v.boundary_dual_bond(b));
    std::sort(keys.begin(), keys.end());
    return keys;
}

struct BoundarySet {
    BoundaryBonds bonds;
    std::vector<BoundaryBonds> intervals;
    BoundaryBonds hull;
    int hull_len = 0;
};

// cn(P): the smallest connected superset inside the boundary.  Connected
// subsets of the boundary cycle are arcs, so the candidates are the cycle
// minus one maximal gap; the largest gap wins, ties go to the arc whose
// sorted dual-bond list is lexicographically first.
inline BoundaryBonds connected_hull(BoundaryBonds P, const Volume& v) {
    check_boundary(P, v);
    if (P.empty()) throw std::invalid_argument("connected_hull of an empty set");
    std::sort(P.begin(), P.end());
    P.erase(std::unique(P.begin(), P.end()), P.end());
    const int M = v.num_boundary();
    if (static_cast<int>(P.size()) == M) return P;
    std::vector<char> in(M, 0);
    for (int b : P) in[b] = 1;
    // gaps: (first bond, length)
    std::vector<std::pair<int, int>> gaps;
    for (int b = 0; b < M; ++b) {
        if (in[b] || !in[(b - 1 + M) % M]) continue;
        int len = 0;
        while (!in[(b + len) % M]) ++len;
        gaps.push_back({b, len});
    }
    int best = 0;
    for (auto& g : gaps) best = std::max(best, g.second);
    BoundaryBonds result;
    std::vector<DualBond> result_key;
    for (auto& g : gaps) {
        if (g.second != best) continue;
        BoundaryBonds arc;
        for (int b = 0; b < M; ++b) {
            int off = (b - g.first + M) % M;
            if (off >= g.second) arc.push_back(b);
        }
        auto key = boundary_bond_keys(arc, v);
        if (result.empty() || key < result_key) {
            result = std::move(arc);
            result_key = std::move(key);
        }
    }
    return result;
}

inline BoundarySet make_boundary_set(BoundaryBonds P, const Volume& v) {
    std::sort(P.begin(), P.end());
    P.erase(std::unique(P.begin(), P.end()), P.end());
    BoundarySet s;
    s.intervals = boundary_intervals(P, v);
    if (!P.empty()) s.hull = connected_hull(P, v);
    s.hull_len = static_cast<int>(s.hull.size());
    s.bonds = std::move(P);
    return s;
}

inline int hull_length(const BoundaryBonds& P, const Volume& v) {
    if (P.empty()) return 0;
    return static_cast<int>(connected_hull(P, v).size());
}

// ---------------------------------------------------------------------------
// Distances.  Dual-bond sets are compared through their dual sites; the
// chain length between dual sites on the infinite dual lattice is ℓ1.

inline std::vector<DualSite> dual_sites_of(const std::vector<DualBond>& A) {
    std::vector<DualSite> s;
    s.reserve(2 * A.size());
    for (auto& b : A) { s.push_back(b.a); s.push_back(b.b); }
    std::sort(s.begin(), s.end());
    s.erase(std::unique(s.begin(), s.end()), s.end());
    return s;
}

inline int dual_site_set_distance(const std::vector<DualSite>& A, const std::vector<DualSite>& B) {
    if (A.empty() || B.empty()) throw std::invalid_argument("distance between empty sets");
    int best = 1 << 30;
    for (auto& p : A)
        for (auto& q : B) best = std::min(best, dual_l1(p, q));
    return best;
}

inline int dual_distance(const std::vector<DualBond>& A, const std::vector<DualBond>& B) {
    return dual_site_set_distance(dual_sites_of(A), dual_sites_of(B));
}

inline int site_distance(const std::vector<Site>& A, const std::vector<Site>& B) {
    if (A.empty() || B.empty()) throw std::invalid_argument("distance between empty sets");
    int best = 1 << 30;
    for (auto& p : A)
        for (auto& q : B) best = std::min(best, std::abs(p.x - q.x) + std::abs(p.y - q.y));
    return best;
}

}  // namespace rbising

#endif

#ifndef RBISING_SMALL_VOLUME_HPP
#define RBISING_SMALL_VOLUME_HPP

// Bit-packed contour extraction for volumes with at most 64 internal bonds
// (N <= 2).  Produces the same pre-contours as ContourExtractor, but without
// allocating, so whole configuration spaces can be swept.

#include <array>
#include <bit>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "contour.hpp"

namespace rbising {

struct MaskContour {
    uint64_t bonds = 0;      // internal bonds
    uint64_t interior = 0;   // sites of Int(Γ)
    uint64_t parity = 0;     // sites flipped in the single-contour realization
    uint64_t boundary = 0;   // boundary bonds of ∂Γ
    uint64_t minus = 0;      // ∂Γ^-
    uint8_t cls = 0;         // ContourClass
    uint8_t npre = 0;
    int length() const { return std::popcount(bonds); }
};

class MaskExtractor {
public:
    static constexpr int max_pre = 64;

    explicit MaskExtractor(const Volume& v) : v_(v) {
        if (v.num_bonds() > 64 || v.num_sites() > 64 || v.num_boundary() > 64)
            throw std::invalid_argument("bit-packed extraction needs at most 64 bonds");
        ns_ = v.num_sites();
        nb_ = v.num_bonds();
        nbd_ = v.num_boundary();
        all_sites_ = ns_ == 64 ? ~0ull : ((1ull << ns_) - 1);
        bond_s_.resize(nb_);
        bond_t_.resize(nb_);
        for (int b = 0; b < nb_; ++b) {
            auto [s, t] = v.bond_sites(b);
            bond_s_[b] = s;
            bond_t_[b] = t;
        }
        site_bnd_mask_.assign(ns_, 0);
        for (int b = 0; b < nbd_; ++b) site_bnd_mask_[v.boundary_inner(b)] |= 1ull << b;
        for (int b = 0; b < nbd_; ++b) bnd_site_mask_ |= 1ull << v.boundary_inner(b);
        for (int i = 0; i < 4; ++i) {
            corner_site_[i] = v.corner_site(i);
            auto [b1, b2] = v.corner_bonds(i);
            corner_bnd_[i] = (1ull << b1) | (1ull << b2);
        }
        nbr_.resize(4 * ns_);
        nbr_bond_.resize(4 * ns_);
        for (int s = 0; s < ns_; ++s)
            for (int d = 0; d < 4; ++d) {
                nbr_[4 * s + d] = static_cast<int8_t>(v.neighbor(s, d));
                nbr_bond_[4 * s + d] = static_cast<int8_t>(v.neighbor_bond(s, d));
            }
        const int nd = v.num_dual_sites();
        perim_.assign(nd, 0);
        inc_.assign(4 * nd, -1);
        for (int i = 0; i < nd; ++i) {
            perim_[i] = v.dual_on_perimeter(i);
            for (int d = 0; d < 4; ++d) inc_[4 * i + d] = static_cast<int8_t>(v.dual_incident(i, d));
        }
        bdual_.resize(nb_);
        for (int b = 0; b < nb_; ++b) bdual_[b] = v.bond_dual(b);
        // perimeter dual vertices with an internal bond, in index order
        for (int i = 0; i < nd; ++i)
            if (perim_[i])
                for (int d = 0; d < 4; ++d)
                    if (inc_[4 * i + d] >= 0) perim_start_.push_back({i, inc_[4 * i + d]});
    }

    const Volume& volume() const { return v_; }
    int num_sites() const { return ns_; }

    uint64_t broken(uint64_t minus_bits) const {
        uint64_t m = 0;
        for (int b = 0; b < nb_; ++b)
            if (((minus_bits >> bond_s_[b]) ^ (minus_bits >> bond_t_[b])) & 1u) m |= 1ull << b;
        return m;
    }

    // Splits Δ into pre-contours, classifies them and glues them.  Returns the
    // number of contours written to out.  Throws on parity violations.
    int extract(uint64_t delta, MaskContour* out) {
        int npre = 0;
        uint64_t left = delta;
        for (auto [p, b] : perim_start_) {
            if (!((left >> b) & 1u)) continue;
            pre_bonds_[npre++] = trace(p, b, false, delta, left);
        }
        while (left) {
            int b = std::countr_zero(left);
            pre_bonds_[npre++] = trace(bdual_[b].first, b, true, delta, left);
        }
        for (int i = 0; i < npre; ++i) classify(i);
        // glue by shared boundary bonds
        for (int i = 0; i < npre; ++i) parent_[i] = static_cast<int8_t>(i);
        for (int i = 0; i < npre; ++i)
            for (int j = i + 1; j < npre; ++j)
                if (pre_bnd_[i] & pre_bnd_[j]) unite(i, j);
        int nc = 0;
        for (int i = 0; i < npre; ++i) root_idx_[i] = -1;
        for (int i = 0; i < npre; ++i) {
            int r = find(i);
            if (root_idx_[r] < 0) {
                root_idx_[r] = static_cast<int8_t>(nc);
                out[nc] = MaskContour{};
                ++nc;
            }
            MaskContour& c = out[root_idx_[r]];
            c.bonds |= pre_bonds_[i];
            c.interior |= pre_int_[i];
            c.parity ^= pre_int_[i];
            c.boundary |= pre_bnd_[i];
            c.npre++;
            if (pre_cls_[i] == static_cast<uint8_t>(PreClass::Interface)) c.cls = 255;  // marker
        }
        for (int k = 0; k < nc; ++k) finish(out[k]);
        return nc;
    }

    // Value of σ on the exterior of its family.
    int exterior_sign(uint64_t minus_bits, const MaskContour* fam, int nc) const {
        uint64_t inside = 0;
        for (int k = 0; k < nc; ++k) inside |= fam[k].interior;
        uint64_t ext = all_sites_ & ~inside;
        if (!ext) throw std::logic_error("configuration with empty exterior");
        int s = std::countr_zero(ext);
        return ((minus_bits >> s) & 1u) ? -1 : 1;
    }

private:
    int find(int a) {
        while (parent_[a] != a) a = parent_[a] = parent_[parent_[a]];
        return a;
    }
    void unite(int a, int b) { parent_[find(a)] = static_cast<int8_t>(find(b)); }

    int degree(int i, uint64_t delta) const {
        int k = 0;
        for (int d = 0; d < 4; ++d) {
            int b = inc_[4 * i + d];
            if (b >= 0 && ((delta >> b) & 1u)) ++k;
        }
        return k;
    }

    uint64_t trace(int start, int first, bool closed, uint64_t delta, uint64_t& left) {
        uint64_t mask = 0;
        int cur = start, b = first;
        while (true) {
            mask |= 1ull << b;
            left &= ~(1ull << b);
            int nxt = bdual_[b].first == cur ? bdual_[b].second : bdual_[b].first;
            if (!closed && perim_[nxt]) break;
            int in_dir = 0;
            for (int d = 0; d < 4; ++d)
                if (inc_[4 * nxt + d] == b) in_dir = d;
            int out = -1;
            int deg = degree(nxt, delta);
            if (deg == 4) {
                out = inc_[4 * nxt + rounding_partner(in_dir)];
            } else if (deg == 2) {
                for (int d = 0; d < 4; ++d) {
                    int c = inc_[4 * nxt + d];
                    if (d != in_dir && c >= 0 && ((delta >> c) & 1u)) out = c;
                }
            } else {
                throw ParityError("broken-bond set is not realizable by any configuration");
            }
            if (closed && out == first) break;
            cur = nxt;
            b = out;
        }
        return mask;
    }

    void classify(int i) {
        uint64_t g = pre_bonds_[i];
        // parity colouring from site 0
        uint64_t seen = 1, col = 0;
        int q[64];
        int head = 0, tail = 0;
        q[tail++] = 0;
        while (head < tail) {
            int s = q[head++];
            uint64_t cs = (col >> s) & 1u;
            for (int d = 0; d < 4; ++d) {
                int t = nbr_[4 * s + d];
                if (t < 0 || ((seen >> t) & 1u)) continue;
                seen |= 1ull << t;
                uint64_t c = cs ^ ((g >> nbr_bond_[4 * s + d]) & 1u);
                col |= c << t;
                q[tail++] = t;
            }
        }
        uint64_t c1 = col, c0 = all_sites_ & ~col;
        int size0 = std::popcount(c0), size1 = std::popcount(c1);
        bool bnd0 = c0 & bnd_site_mask_, bnd1 = c1 & bnd_site_mask_;
        int crn1 = 0;
        for (int k = 0; k < 4; ++k) crn1 += (c1 >> corner_site_[k]) & 1u;
        int crn0 = 4 - crn1;
        int ext;
        uint8_t cls;
        if (!bnd1) { cls = 0; ext = 0; }
        else if (!bnd0) { cls = 0; ext = 1; }
        else if (crn0 >= 3) { cls = 1; ext = 0; }
        else if (crn1 >= 3) { cls = 1; ext = 1; }
        else {
            cls = 2;
            if (size0 != size1) ext = size0 > size1 ? 0 : 1;
            else ext = static_cast<int>((c1 >> corner_site_[0]) & 1u);
        }
        uint64_t in = ext == 0 ? c1 : c0;
        pre_cls_[i] = cls;
        pre_int_[i] = in;
        uint64_t bm = 0;
        uint64_t x = in & bnd_site_mask_;
        while (x) {
            int s = std::countr_zero(x);
            x &= x - 1;
            bm |= site_bnd_mask_[s];
        }
        pre_bnd_[i] = bm;
    }

    void finish(MaskContour& c) const {
        bool interface = c.cls == 255;
        uint64_t x = c.parity & bnd_site_mask_;
        uint64_t minus = 0;
        while (x) {
            int s = std::countr_zero(x);
            x &= x - 1;
            minus |= site_bnd_mask_[s];
        }
        c.minus = minus & c.boundary;
        int corners = 0;
        for (int k = 0; k < 4; ++k)
            if (c.boundary & corner_bnd_[k]) ++corners;
        if (!c.boundary) c.cls = static_cast<uint8_t>(ContourClass::Bulk);
        else if (interface) c.cls = static_cast<uint8_t>(ContourClass::LargeBoundary);
        else if (corners == 0) c.cls = static_cast<uint8_t>(ContourClass::SimpleSmall);
        else if (corners == 1) c.cls = static_cast<uint8_t>(ContourClass::CornerSmall);
        else throw std::logic_error("small boundary contour touching several corners");
    }

    const Volume& v_;
    int ns_, nb_, nbd_;
    uint64_t all_sites_ = 0, bnd_site_mask_ = 0;
    std::vector<int8_t> bond_s_, bond_t_;
    std::vector<uint64_t> site_bnd_mask_;
    std::array<int, 4> corner_site_{};
    std::array<uint64_t, 4> corner_bnd_{};
    std::vector<int8_t> nbr_, nbr_bond_;
    std::vector<uint8_t> perim_;
    std::vector<int8_t> inc_;
    std::vector<std::pair<int, int>> bdual_;
    std::vector<std::pair<int, int>> perim_start_;
    std::array<uint64_t, max_pre> pre_bonds_{}, pre_int_{}, pre_bnd_{};
    std::array<uint8_t, max_pre> pre_cls_{};
    std::array<int8_t, max_pre> parent_{}, root_idx_{};
};

}  // namespace rbising

#endif

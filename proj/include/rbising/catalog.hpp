#ifndef RBISING_CATALOG_HPP
#define RBISING_CATALOG_HPP

// Exhaustive contour bookkeeping for Λ(1) and Λ(2).  Every configuration pair
// {σ, -σ} is stored once through its representative (last site plus) together
// with the data its polymer weight depends on: the total contour length, the
// union of the ∂Γ^- sets and the list of contours that can be unbalanced for
// some boundary condition.

#include <bit>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "small_volume.hpp"

namespace rbising {

// Contours with |∂Γ^-| > |Γ|/2 are the only ones that are unbalanced for some
// η and some l0 >= 2.
inline bool maybe_unbalanced(const MaskContour& c) {
    return c.minus != 0 && 2 * std::popcount(c.minus) > c.length();
}

// Integer counts of families by (total length k, boundary sum s), so that the
// polymer sum can be evaluated exactly for any β and λ.
class LengthFieldHistogram {
public:
    LengthFieldHistogram() = default;
    LengthFieldHistogram(int kmax, int smax) : kmax_(kmax), smax_(smax), c_((kmax + 1) * (2 * smax + 1), 0) {}

    void add(int k, int s, uint64_t n = 1) { c_[k * (2 * smax_ + 1) + s + smax_] += n; }
    uint64_t count(int k, int s) const { return c_[k * (2 * smax_ + 1) + s + smax_]; }
    uint64_t total() const {
        uint64_t t = 0;
        for (auto x : c_) t += x;
        return t;
    }
    bool empty() const { return total() == 0; }

    // log Σ count · exp(-2β(k + λ s)); -inf when empty.
    double log_sum(double beta, double lambda) const {
        double mx = -std::numeric_limits<double>::infinity();
        for (int k = 0; k <= kmax_; ++k)
            for (int s = -smax_; s <= smax_; ++s)
                if (count(k, s)) mx = std::max(mx, term(k, s, beta, lambda));
        if (!std::isfinite(mx)) return mx;
        double acc = 0.0;
        for (int k = 0; k <= kmax_; ++k)
            for (int s = -smax_; s <= smax_; ++s)
                if (auto n = count(k, s)) acc += static_cast<double>(n) * std::exp(term(k, s, beta, lambda) - mx);
        return mx + std::log(acc);
    }

    friend bool operator==(const LengthFieldHistogram&, const LengthFieldHistogram&) = default;

private:
    static double term(int k, int s, double beta, double lambda) { return -2.0 * beta * (k + lambda * s); }
    int kmax_ = 0, smax_ = 0;
    std::vector<uint64_t> c_;
};

class VolumeCatalog {
public:
    static constexpr uint32_t format_version = 4;

    explicit VolumeCatalog(const Volume& v) : v_(v) {
        if (v.N() > 2) throw std::invalid_argument("exhaustive catalog needs N <= 2");
        build();
    }

    // Reads the catalog from `dir` if a valid file exists, otherwise builds it
    // and tries to store it there.  An empty dir disables caching.
    static VolumeCatalog load_or_build(const Volume& v, const std::string& dir) {
        if (dir.empty()) return VolumeCatalog(v);
        namespace fs = std::filesystem;
        fs::path f = fs::path(dir) / ("rbising_catalog_N" + std::to_string(v.N()) + ".bin");
        VolumeCatalog c(v, 0);
        if (c.read(f)) return c;
        c.build();
        std::error_code ec;
        fs::create_directories(dir, ec);
        c.write(f);
        return c;
    }

    const Volume& volume() const { return v_; }
    uint64_t num_reps() const { return nrep_; }
    int max_length() const { return v_.num_bonds(); }

    int sign(uint64_t m) const { return ((sign_[m >> 6] >> (m & 63)) & 1u) ? -1 : 1; }
    // Minus-bits of the member of {m, ~m} lying in Ω^+.
    uint64_t plus_member(uint64_t m) const { return sign(m) == 1 ? m : (~m & all_sites()); }
    uint64_t all_sites() const { return v_.num_sites() == 64 ? ~0ull : ((1ull << v_.num_sites()) - 1); }

    int length(uint64_t m) const { return len_[m]; }
    uint32_t minus(uint64_t m) const { return minus_[m]; }
    // Union of the ∂Γ sets of the family.
    uint32_t boundary(uint64_t m) const { return bnd_[m]; }
    int num_contours(uint64_t m) const { return nc_[m]; }

    const std::vector<MaskContour>& contours() const { return table_; }
    // Number of representatives whose family contains contour i.
    const std::vector<uint32_t>& occurrences() const { return occ_; }

    // f(m, length, minus mask, number of contours, ids of maybe-unbalanced contours)
    template <class F>
    void for_each(F&& f) const {
        uint64_t pos = 0;
        for (uint64_t m = 0; m < nrep_; ++m) {
            int k = npu_[m];
            f(m, static_cast<int>(len_[m]), minus_[m], static_cast<int>(nc_[m]),
              std::span<const uint32_t>(pu_.data() + pos, k));
            pos += k;
        }
    }

    // Full contour object for table entry i.
    Contour contour(uint32_t i) const {
        SpinConfig s = SpinConfig::from_bits(v_, table_[i].parity);
        ContourExtractor ex(v_);
        auto fam = ex.extract(s);
        if (fam.size() != 1) throw std::logic_error("catalog entry is not a single contour");
        return fam.front();
    }

    // Σ_{b ∈ mask} η_b.
    static int field_sum(uint32_t mask, uint32_t eta_minus) {
        return std::popcount(mask) - 2 * std::popcount(mask & eta_minus);
    }

    static uint32_t minus_mask(const BoundaryCondition& eta) {
        uint32_t m = 0;
        for (int b = 0; b < eta.size(); ++b)
            if (eta[b] < 0) m |= 1u << b;
        return m;
    }

private:
    VolumeCatalog(const Volume& v, int) : v_(v) {}

    void build() {
        MaskExtractor ex(v_);
        const int ns = v_.num_sites();
        nrep_ = 1ull << (ns - 1);
        len_.assign(nrep_, 0);
        nc_.assign(nrep_, 0);
        npu_.assign(nrep_, 0);
        minus_.assign(nrep_, 0);
        bnd_.assign(nrep_, 0);
        sign_.assign((nrep_ + 63) / 64, 0);
        pu_.clear();
        table_.clear();
        occ_.clear();
        std::unordered_map<uint64_t, uint32_t> ids;
        ids.reserve(1 << 18);
        MaskContour fam[64];
        for (uint64_t m = 0; m < nrep_; ++m) {
            uint64_t delta = ex.broken(m);
            int nc = ex.extract(delta, fam);
            int sg = nc ? ex.exterior_sign(m, fam, nc) : 1;
            if (sg < 0) sign_[m >> 6] |= 1ull << (m & 63);
            len_[m] = static_cast<uint8_t>(std::popcount(delta));
            nc_[m] = static_cast<uint8_t>(nc);
            uint32_t mn = 0, bd = 0;
            int npu = 0;
            for (int i = 0; i < nc; ++i) {
                mn |= static_cast<uint32_t>(fam[i].minus);
                bd |= static_cast<uint32_t>(fam[i].boundary);
                auto [it, fresh] = ids.try_emplace(fam[i].bonds, static_cast<uint32_t>(table_.size()));
                if (fresh) {
                    table_.push_back(fam[i]);
                    occ_.push_back(0);
                }
                ++occ_[it->second];
                if (maybe_unbalanced(fam[i])) {
                    pu_.push_back(it->second);
                    ++npu;
                }
            }
            minus_[m] = mn;
            bnd_[m] = bd;
            npu_[m] = static_cast<uint8_t>(npu);
        }
    }

    template <class T>
    static void put(std::ofstream& o, const std::vector<T>& x) {
        uint64_t n = x.size();
        o.write(reinterpret_cast<const char*>(&n), sizeof n);
        o.write(reinterpret_cast<const char*>(x.data()), static_cast<std::streamsize>(n * sizeof(T)));
    }
    template <class T>
    static bool get(std::ifstream& in, std::vector<T>& x) {
        uint64_t n = 0;
        if (!in.read(reinterpret_cast<char*>(&n), sizeof n)) return false;
        if (n > (1ull << 32)) return false;
        x.resize(n);
        return static_cast<bool>(in.read(reinterpret_cast<char*>(x.data()), static_cast<std::streamsize>(n * sizeof(T))));
    }

    void write(const std::filesystem::path& f) const {
        auto tmp = f;
        tmp += ".tmp";
        {
            std::ofstream o(tmp, std::ios::binary);
            if (!o) return;
            uint32_t hdr[3] = {0x52424354u, format_version, static_cast<uint32_t>(v_.N())};
            o.write(reinterpret_cast<const char*>(hdr), sizeof hdr);
            put(o, len_);
            put(o, nc_);
            put(o, npu_);
            put(o, minus_);
            put(o, bnd_);
            put(o, sign_);
            put(o, pu_);
            put(o, table_);
            put(o, occ_);
            if (!o) return;
        }
        std::error_code ec;
        std::filesystem::rename(tmp, f, ec);
    }

    bool read(const std::filesystem::path& f) {
        std::ifstream in(f, std::ios::binary);
        if (!in) return false;
        uint32_t hdr[3];
        if (!in.read(reinterpret_cast<char*>(hdr), sizeof hdr)) return false;
        if (hdr[0] != 0x52424354u || hdr[1] != format_version || hdr[2] != static_cast<uint32_t>(v_.N())) return false;
        if (!(get(in, len_) && get(in, nc_) && get(in, npu_) && get(in, minus_) && get(in, bnd_) && get(in, sign_) && get(in, pu_) &&
              get(in, table_) && get(in, occ_)))
            return false;
        nrep_ = 1ull << (v_.num_sites() - 1);
        return len_.size() == nrep_ && nc_.size() == nrep_ && npu_.size() == nrep_ && minus_.size() == nrep_ && bnd_.size() == nrep_;
    }

    Volume v_;
    uint64_t nrep_ = 0;
    std::vector<uint8_t> len_, nc_, npu_;
    std::vector<uint32_t> minus_, bnd_;
    std::vector<uint64_t> sign_;
    std::vector<uint32_t> pu_;
    std::vector<MaskContour> table_;
    std::vector<uint32_t> occ_;
};

}  // namespace rbising

#endif

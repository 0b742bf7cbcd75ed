#ifndef RBISING_MODEL_HPP
#define RBISING_MODEL_HPP

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <functional>
#include <limits>
#include <map>
#include <memory>
#include <mutex>
#include <stdexcept>
#include <string>
#include <vector>

#include "catalog.hpp"
#include "contour.hpp"
#include "rng.hpp"
#include "spins.hpp"

namespace rbising {

struct CapExceeded : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// H = -β Σ_{<x,y>⊂Λ}(σxσy - 1) - λβ Σ_{x∈Λ, y∉Λ} σx ηy
inline double hamiltonian(const SpinConfig& sigma, const BoundaryCondition& eta, const Volume& v,
                          const CouplingParams& p) {
    check_domain(sigma, v);
    check_domain(eta, v);
    double bulk = 0.0, bnd = 0.0;
    for (int b = 0; b < v.num_bonds(); ++b) {
        auto [s, t] = v.bond_sites(b);
        bulk += sigma[s] * sigma[t] - 1;
    }
    for (int b = 0; b < v.num_boundary(); ++b) bnd += sigma[v.boundary_inner(b)] * eta[b];
    return -p.beta * bulk - p.lambda * p.beta * bnd;
}

// Ising system on an arbitrary graph: -H = β Σ_bonds (σσ - 1) + Σ_x h_x σ_x.
struct SiteGraph {
    int n = 0;
    std::vector<std::pair<int, int>> bonds;
    std::vector<double> field;
};

inline SiteGraph site_graph(const Volume& v, const BoundaryCondition& eta, const CouplingParams& p) {
    check_domain(eta, v);
    SiteGraph g;
    g.n = v.num_sites();
    for (int b = 0; b < v.num_bonds(); ++b) g.bonds.push_back(v.bond_sites(b));
    g.field.assign(g.n, 0.0);
    for (int b = 0; b < v.num_boundary(); ++b) g.field[v.boundary_inner(b)] += p.lambda * p.beta * eta[b];
    return g;
}

// Running log-sum-exp with compensated summation.
class LogAccumulator {
public:
    void add(double x) {
        if (x == -std::numeric_limits<double>::infinity()) return;
        if (x > mx_) {
            double r = std::exp(mx_ - x);
            acc_ *= r;
            comp_ *= r;
            mx_ = x;
            sum(1.0);
        } else {
            sum(std::exp(x - mx_));
        }
    }
    double value() const {
        double a = acc_ + comp_;
        return a > 0 ? mx_ + std::log(a) : -std::numeric_limits<double>::infinity();
    }

private:
    void sum(double y) {
        double t = acc_ + y;
        comp_ += std::abs(acc_) >= std::abs(y) ? (acc_ - t) + y : (y - t) + acc_;
        acc_ = t;
    }
    double mx_ = -std::numeric_limits<double>::infinity();
    double acc_ = 0.0, comp_ = 0.0;
};

inline constexpr int enumeration_site_cap = 25;

// Gray-code enumeration.  `visit(bits, logw)` receives every configuration
// (bit i set = spin i is -1) with its log-weight.  The bond part is tracked
// as an integer and the field part read from two half tables, so no rounding
// error accumulates along the code.
inline double enumerate_log_partition(const SiteGraph& g, double beta,
                                      const std::function<void(uint64_t, double)>& visit = {}) {
    if (g.n > enumeration_site_cap) throw CapExceeded("volume too large for exact enumeration");
    std::vector<std::vector<int>> nb(g.n);
    for (auto [a, b] : g.bonds) {
        nb[a].push_back(b);
        nb[b].push_back(a);
    }
    const int nlo = g.n / 2, nhi = g.n - nlo;
    auto table = [&](int off, int len) {
        std::vector<double> t(size_t{1} << len);
        for (size_t k = 0; k < t.size(); ++k) {
            double f = 0.0;
            for (int j = 0; j < len; ++j) f += ((k >> j) & 1u) ? -g.field[off + j] : g.field[off + j];
            t[k] = f;
        }
        return t;
    };
    const auto flo = table(0, nlo), fhi = table(nlo, nhi);
    const uint64_t lomask = (1ull << nlo) - 1;
    std::vector<int> s(g.n, 1);
    long bond = 0;  // Σ (σxσy - 1)
    LogAccumulator acc;
    uint64_t bits = 0;
    auto emit = [&] {
        double e = beta * static_cast<double>(bond) + flo[bits & lomask] + fhi[bits >> nlo];
        acc.add(e);
        if (visit) visit(bits, e);
    };
    emit();
    const uint64_t total = 1ull << g.n;
    for (uint64_t i = 1; i < total; ++i) {
        int x = std::countr_zero(i);
        int loc = 0;
        for (int y : nb[x]) loc += s[y];
        bond -= 2L * s[x] * loc;
        s[x] = -s[x];
        bits ^= 1ull << x;
        emit();
    }
    return acc.value();
}

inline double exact_partition(const Volume& v, const BoundaryCondition& eta, const CouplingParams& p,
                              const std::function<void(uint64_t, double)>& visit = {}) {
    p.validate();
    return enumerate_log_partition(site_graph(v, eta, p), p.beta, visit);
}
// ---------------------------------------------------------------------------
// Transfer matrix, one site at a time in row-major order.  The state holds the
// last 2N+1 spins, bit n-1 the newest (1 = minus); values are renormalized
// once per row and the scale is tracked in log.

inline constexpr int transfer_width_cap = 13;

struct TransferOptions {
    int max_width = transfer_width_cap;
    std::vector<int8_t> fixed;  // optional per-site constraint, 0 = free
};

namespace detail {
// Advances `cur` over sites [0, count) of a width-n grid with per-site field.
inline bool grid_sweep(std::vector<double>& cur, std::vector<double>& nxt, double& logscale, int n, double beta,
                       const double* field, const int8_t* fixed, int count) {
    const size_t half = (size_t{1} << n) >> 1, quarter = half >> 1;
    const double ed = std::exp(-2.0 * beta);
    for (int s = 0; s < count; ++s) {
        const bool has_left = s % n != 0, has_down = s >= n;
        const int fix = fixed ? fixed[s] : 0;
        const double hp = fix == -1 ? 0.0 : std::exp(field[s]), hm = fix == 1 ? 0.0 : std::exp(-field[s]);
        const double dd = has_down ? ed : 1.0;  // down spin opposite
        const double* c = cur.data();
        double* np = nxt.data();
        double* nm = nxt.data() + half;
        auto run = [&](size_t lo, size_t hi, double wp, double wm) {
            for (size_t r = lo; r < hi; ++r) {
                const double c0 = c[2 * r], c1 = c[2 * r + 1];
                np[r] = wp * (c0 + c1 * dd);
                nm[r] = wm * (c0 * dd + c1);
            }
        };
        if (has_left) {
            run(0, quarter, hp, hm * ed);
            run(quarter, half, hp * ed, hm);
        } else {
            run(0, half, hp, hm);
        }
        std::swap(cur, nxt);
        if ((s + 1) % n == 0 || s + 1 == count) {
            double mx = *std::max_element(cur.begin(), cur.end());
            if (!(mx > 0)) return false;
            for (auto& x : cur) x /= mx;
            logscale += std::log(mx);
        }
    }
    return true;
}
}  // namespace detail

inline double transfer_matrix_logZ(const Volume& v, const BoundaryCondition& eta, const CouplingParams& p,
                                   const TransferOptions& opt = {}) {
    p.validate();
    const int n = v.side();
    if (n > opt.max_width) throw CapExceeded("transfer matrix width cap exceeded");
    SiteGraph g = site_graph(v, eta, p);
    if (!opt.fixed.empty() && static_cast<int>(opt.fixed.size()) != g.n)
        throw std::invalid_argument("constraint does not match the volume");
    const size_t S = size_t{1} << n;
    std::vector<double> cur(S, 0.0), nxt(S);
    cur[0] = 1.0;  // virtual row below Λ, never coupled
    double logscale = 0.0;
    if (!detail::grid_sweep(cur, nxt, logscale, n, p.beta, g.field.data(),
                            opt.fixed.empty() ? nullptr : opt.fixed.data(), g.n))
        return -std::numeric_limits<double>::infinity();
    double tot = 0.0;
    for (double x : cur) tot += x;
    return logscale + std::log(tot);
}

// Exact single-site marginal μ(σ_s = +1).  The sites below s are swept
// forward, the rest are swept on the 180° rotated grid, and the two states are
// joined through the bonds crossing between the windows.
inline double transfer_matrix_plus_probability(const Volume& v, const BoundaryCondition& eta,
                                               const CouplingParams& p, int site, int max_width) {
    p.validate();
    const int n = v.side();
    if (n > max_width) throw CapExceeded("transfer matrix width cap exceeded");
    if (site < 0 || site >= v.num_sites()) throw std::invalid_argument("site outside the volume");
    SiteGraph g = site_graph(v, eta, p);
    const size_t S = size_t{1} << n;
    std::vector<double> f(S, 0.0), h(S, 0.0), tmp(S);
    f[0] = 1.0;
    h[0] = 1.0;
    double scale = 0.0;
    // f: bit j is site s-n+j
    detail::grid_sweep(f, tmp, scale, n, p.beta, g.field.data(), nullptr, site);
    // h: bit j is site s+n-1-j, so the centre is bit n-1
    std::vector<double> rf(g.field.rbegin(), g.field.rend());
    detail::grid_sweep(h, tmp, scale, n, p.beta, rf.data(), nullptr, g.n - site);
    // reindex so that bit j of h is site s+j, the vertical partner of f's bit j
    for (size_t x = 0; x < S; ++x) {
        size_t y = 0;
        for (int j = 0; j < n; ++j)
            if ((x >> (n - 1 - j)) & 1u) y |= size_t{1} << j;
        tmp[y] = h[x];
    }
    const double ed = std::exp(-2.0 * p.beta);
    const bool has_left = site % n != 0;
    double z[2] = {0.0, 0.0};
    for (int sigma = 0; sigma < 2; ++sigma) {
        for (size_t x = 0; x < S; ++x) h[x] = (x & 1u) == static_cast<size_t>(sigma) ? tmp[x] : 0.0;
        for (int j = 0; j < n; ++j) {
            // without a bond one side is the virtual all-plus row: sum it out
            const double k = site - n + j < 0 || site + j >= g.n ? 1.0 : ed;
            const size_t m = size_t{1} << j;
            for (size_t x = 0; x < S; ++x)
                if (!(x & m)) {
                    const double a = h[x], b = h[x | m];
                    h[x] = a + k * b;
                    h[x | m] = k * a + b;
                }
        }
        const size_t top = size_t{1} << (n - 1);
        for (size_t x = 0; x < S; ++x) {
            double w = has_left && (((x & top) != 0) != (sigma != 0)) ? ed : 1.0;
            z[sigma] += f[x] * h[x] * w;
        }
    }
    return z[0] / (z[0] + z[1]);
}
// ---------------------------------------------------------------------------
// Single-site Metropolis with systematic sweeps.  Draw number
// sweep * |Λ| + site of the (seed, replica) stream decides that update.

struct MetropolisOptions {
    uint64_t seed = 1;
    uint64_t replica = 0;
    long burn_in = 0;
    long sweeps = 1;
    int thin = 1;
    int start = 1;  // +1, -1, or 0 for a random start
};

class MetropolisSampler {
public:
    MetropolisSampler(const Volume& v, const BoundaryCondition& eta, const CouplingParams& p, MetropolisOptions o)
        : v_(v), o_(o), rng_(o.seed, o.replica) {
        p.validate();
        if (o.sweeps < 1 || o.thin < 1 || o.burn_in < 0) throw std::invalid_argument("invalid sampler schedule");
        g_ = site_graph(v, eta, p);
        beta_ = p.beta;
        n_ = g_.n;
        nb_.assign(4 * n_, -1);
        for (int s = 0; s < n_; ++s)
            for (int d = 0; d < 4; ++d) nb_[4 * s + d] = v.neighbor(s, d);
        state_ = SpinConfig(v, o.start == -1 ? -1 : 1);
        if (o.start == 0)
            for (int s = 0; s < n_; ++s) state_[s] = static_cast<int8_t>(rng_.pm1(~static_cast<uint64_t>(s)));
    }

    // Calls f(sample_index, config) for every kept sample; returns the count.
    template <class F>
    long run(F&& f) {
        long kept = 0;
        const long total = o_.burn_in + o_.sweeps;
        for (long sw = 0; sw < total; ++sw) {
            sweep(static_cast<uint64_t>(sw));
            if (sw >= o_.burn_in && (sw - o_.burn_in + 1) % o_.thin == 0) f(kept++, state_);
        }
        return kept;
    }

    const SpinConfig& state() const { return state_; }

private:
    void sweep(uint64_t sw) {
        const uint64_t base = sw * static_cast<uint64_t>(n_);
        for (int s = 0; s < n_; ++s) {
            int loc = 0;
            for (int d = 0; d < 4; ++d) {
                int t = nb_[4 * s + d];
                if (t >= 0) loc += state_[t];
            }
            double de = -2.0 * state_[s] * (beta_ * loc + g_.field[s]);  // change of -H
            // ties are accepted with probability 1/2; always accepting them
            // makes the sweep at β = 0 alternate between σ and -σ
            double acc = de > 0.0 ? 1.0 : (de == 0.0 ? 0.5 : std::exp(de));
            if (acc >= 1.0 || rng_.uniform(base + s) < acc) state_[s] = static_cast<int8_t>(-state_[s]);
        }
    }

    const Volume& v_;
    MetropolisOptions o_;
    CounterRng rng_;
    SiteGraph g_;
    double beta_ = 0;
    int n_ = 0;
    std::vector<int> nb_;
    SpinConfig state_;
};

template <class F>
long metropolis_sampler(const Volume& v, const BoundaryCondition& eta, const CouplingParams& p,
                        const MetropolisOptions& o, F&& f) {
    MetropolisSampler m(v, eta, p, o);
    return m.run(std::forward<F>(f));
}

// ---------------------------------------------------------------------------
// Local observables and the seminorm on a window.

struct LocalObservable {
    std::vector<int> window;     // site indices
    std::vector<double> table;   // indexed by pattern, bit j set = σ(window[j]) = -1

    double operator()(const SpinConfig& s) const { return table[pattern(s)]; }
    uint32_t pattern(const SpinConfig& s) const {
        uint32_t k = 0;
        for (size_t j = 0; j < window.size(); ++j)
            if (s[window[j]] < 0) k |= 1u << j;
        return k;
    }
    uint32_t pattern_bits(uint64_t minus_bits) const {
        uint32_t k = 0;
        for (size_t j = 0; j < window.size(); ++j)
            if ((minus_bits >> window[j]) & 1u) k |= 1u << j;
        return k;
    }
    void validate() const {
        if (window.size() > 8) throw std::invalid_argument("observable window larger than 8 sites");
        if (table.size() != (size_t{1} << window.size())) throw std::invalid_argument("observable table size mismatch");
    }

    static LocalObservable spin(int site) { return {{site}, {1.0, -1.0}}; }
    static LocalObservable constant(double c) { return {{}, {c}}; }
};

inline constexpr int seminorm_window_cap = 8;

using WindowPmf = std::vector<double>;

inline WindowPmf empirical_pmf(const std::vector<SpinConfig>& samples, const std::vector<int>& X) {
    if (static_cast<int>(X.size()) > seminorm_window_cap) throw std::invalid_argument("window too large");
    if (samples.empty()) throw std::invalid_argument("empty sample set");
    LocalObservable f{X, {}};
    WindowPmf pmf(size_t{1} << X.size(), 0.0);
    for (auto& s : samples) pmf[f.pattern(s)] += 1.0;
    for (auto& x : pmf) x /= static_cast<double>(samples.size());
    return pmf;
}

// ‖μ - ν‖_X as the L1 distance of the X-marginals.
inline double seminorm_distance(const WindowPmf& mu, const WindowPmf& nu) {
    if (mu.size() != nu.size()) throw std::invalid_argument("marginals on different windows");
    if (mu.size() > (size_t{1} << seminorm_window_cap)) throw std::invalid_argument("window too large");
    double d = 0.0;
    for (size_t i = 0; i < mu.size(); ++i) d += std::abs(mu[i] - nu[i]);
    return d;
}

inline double seminorm_distance(const std::vector<SpinConfig>& mu, const std::vector<SpinConfig>& nu,
                                const std::vector<int>& X) {
    return seminorm_distance(empirical_pmf(mu, X), empirical_pmf(nu, X));
}

// ---------------------------------------------------------------------------
// Constrained partition functions on Λ(1), Λ(2).

inline std::string default_cache_dir() {
    const char* d = std::getenv("RBISING_CACHE_DIR");
    return d ? std::string(d) : std::string();
}

// Process-wide catalogs, built once per N.
inline const VolumeCatalog& catalog_for(const Volume& v) {
    static std::mutex mu;
    static std::map<int, std::unique_ptr<VolumeCatalog>> cache;
    std::lock_guard<std::mutex> lk(mu);
    auto& slot = cache[v.N()];
    if (!slot) slot = std::make_unique<VolumeCatalog>(VolumeCatalog::load_or_build(v, default_cache_dir()));
    return *slot;
}

// Spin-side bookkeeping over all configurations: histograms of
// (|Δ(σ)|, Σ_{b: σ_in(b) = -1} η_b) per sector and per window pattern.
class SectorHistograms {
public:
    SectorHistograms(const VolumeCatalog& cat, const BoundaryCondition& eta, const LocalObservable& f)
        : v_(cat.volume()) {
        check_domain(eta, v_);
        f.validate();
        const int ns = v_.num_sites(), n = v_.side(), nbd = v_.num_boundary();
        const int kmax = v_.num_bonds(), smax = nbd;
        const size_t np = f.table.size();
        hist_[0].assign(np, LengthFieldHistogram(kmax, smax));
        hist_[1].assign(np, LengthFieldHistogram(kmax, smax));
        eta_sum_ = 0;
        for (auto e : eta.eta) eta_sum_ += e;
        uint64_t hmask = 0, vmask = 0;
        for (int s = 0; s < ns; ++s) {
            if (s % n != n - 1) hmask |= 1ull << s;
            if (s + n < ns) vmask |= 1ull << s;
        }
        // boundary field sum of the minus sites, by byte of the site bits
        const int nbytes = (ns + 7) / 8;
        std::vector<std::array<int, 256>> tab(nbytes);
        for (int by = 0; by < nbytes; ++by)
            for (int x = 0; x < 256; ++x) {
                int acc = 0;
                for (int j = 0; j < 8; ++j) {
                    int s = 8 * by + j;
                    if (s >= ns || !((x >> j) & 1)) continue;
                    for (int b = 0; b < nbd; ++b)
                        if (v_.boundary_inner(b) == s) acc += eta[b];
                }
                tab[by][x] = acc;
            }
        const uint64_t all = cat.all_sites();
        for (uint64_t m = 0; m < cat.num_reps(); ++m) {
            uint64_t P = cat.plus_member(m);
            int k = std::popcount((P ^ (P >> 1)) & hmask) + std::popcount((P ^ (P >> n)) & vmask);
            uint64_t Q = ~P & all;
            int sp = 0, sm = 0;
            for (int by = 0; by < nbytes; ++by) {
                sp += tab[by][(P >> (8 * by)) & 0xff];
                sm += tab[by][(Q >> (8 * by)) & 0xff];
            }
            hist_[0][f.pattern_bits(P)].add(k, sp);
            hist_[1][f.pattern_bits(Q)].add(k, sm);
        }
    }

    // log Σ_{σ ∈ Ω^sign, pattern} exp(-H(σ)) for the given couplings.
    double log_sum(int sign, uint32_t pattern, const CouplingParams& p) const {
        return p.lambda * p.beta * eta_sum_ + hist_[sign > 0 ? 0 : 1][pattern].log_sum(p.beta, p.lambda);
    }
    double log_sum(int sign, const CouplingParams& p) const {
        LogAccumulator a;
        for (size_t q = 0; q < hist_[0].size(); ++q) a.add(log_sum(sign, static_cast<uint32_t>(q), p));
        return a.value();
    }
    // ν^sign(f)
    double expectation(int sign, const LocalObservable& f, const CouplingParams& p) const {
        double lz = log_sum(sign, p), e = 0.0;
        for (size_t q = 0; q < hist_[0].size(); ++q) {
            double l = log_sum(sign, static_cast<uint32_t>(q), p);
            if (std::isfinite(l)) e += f.table[q] * std::exp(l - lz);
        }
        return e;
    }
    const LengthFieldHistogram& histogram(int sign, uint32_t pattern) const { return hist_[sign > 0 ? 0 : 1][pattern]; }

private:
    const Volume& v_;
    int eta_sum_ = 0;
    std::vector<LengthFieldHistogram> hist_[2];
};

struct ConstrainedLogZ {
    double plus = 0.0, minus = 0.0;
};

inline ConstrainedLogZ constrained_logZ(const VolumeCatalog& cat, const BoundaryCondition& eta,
                                        const CouplingParams& p) {
    p.validate();
    SectorHistograms h(cat, eta, LocalObservable::constant(1.0));
    return {h.log_sum(1, p), h.log_sum(-1, p)};
}

inline ConstrainedLogZ constrained_logZ(const Volume& v, const BoundaryCondition& eta, const CouplingParams& p) {
    if (v.num_sites() > enumeration_site_cap) throw CapExceeded("volume too large for exact constrained sums");
    return constrained_logZ(catalog_for(v), eta, p);
}

// |μ(f) - w+ ν+(f) - w- ν-(f)| with μ(f) by plain enumeration and ν± from the
// sector sums.
inline double mixture_decomposition_check(const VolumeCatalog& cat, const BoundaryCondition& eta,
                                          const CouplingParams& p, const LocalObservable& f) {
    p.validate();
    f.validate();
    const Volume& v = cat.volume();
    double lz = exact_partition(v, eta, p);
    double num = 0.0;
    exact_partition(v, eta, p, [&](uint64_t bits, double lw) { num += f.table[f.pattern_bits(bits)] * std::exp(lw - lz); });
    SectorHistograms h(cat, eta, f);
    double lp = h.log_sum(1, p), lm = h.log_sum(-1, p);
    double wp = 1.0 / (1.0 + std::exp(lm - lp)), wm = 1.0 / (1.0 + std::exp(lp - lm));
    return std::abs(num - wp * h.expectation(1, f, p) - wm * h.expectation(-1, f, p));
}

inline double mixture_decomposition_check(const Volume& v, const BoundaryCondition& eta, const CouplingParams& p,
                                          const LocalObservable& f) {
    if (v.num_sites() > enumeration_site_cap) throw CapExceeded("volume too large for exact mixture check");
    return mixture_decomposition_check(catalog_for(v), eta, p, f);
}

}  // namespace rbising

#endif

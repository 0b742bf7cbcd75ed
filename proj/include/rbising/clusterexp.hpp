#ifndef RBISING_CLUSTEREXP_HPP
#define RBISING_CLUSTEREXP_HPP

// Abstract polymer and cluster models over a finite incompatibility graph,
// with subsets encoded as bit masks.

#include <bit>
#include <cmath>
#include <complex>
#include <cstdint>
#include <limits>
#include <map>
#include <stdexcept>
#include <unordered_map>
#include <utility>
#include <vector>

namespace rbising {

using Complex = std::complex<double>;
using Subset = uint64_t;

inline constexpr int cluster_polymer_cap = 20;  // exhaustive subset tables
inline constexpr int cluster_size_cap = 12;
inline constexpr int polymer_model_cap = 64;

inline int subset_size(Subset s) { return std::popcount(s); }
inline bool subset_of(Subset a, Subset b) { return (a & ~b) == 0; }

class PolymerSystem {
public:
    enum class Kind { Polymer, Cluster };

    // Condition iii: g(Δ) = Π z on pairwise compatible Δ, 0 otherwise.
    static PolymerSystem polymer_model(int n, const std::vector<std::pair<int, int>>& edges, std::vector<Complex> z) {
        if (static_cast<int>(z.size()) != n) throw std::invalid_argument("one activity per polymer expected");
        PolymerSystem s(n, edges, Kind::Polymer);
        s.z_ = std::move(z);
        return s;
    }

    // General weight, fixed by its values on clusters; missing clusters weigh 0.
    static PolymerSystem cluster_model(int n, const std::vector<std::pair<int, int>>& edges,
                                       const std::map<Subset, Complex>& cluster_weights) {
        PolymerSystem s(n, edges, Kind::Cluster);
        for (auto& [c, w] : cluster_weights) {
            if (!c || !subset_of(c, s.all())) throw std::invalid_argument("cluster outside the polymer set");
            if (!s.is_cluster(c)) throw std::invalid_argument("weight given on a set that is not a cluster");
            if (w != Complex(0.0)) s.gc_[c] = w;
        }
        return s;
    }

    int size() const { return n_; }
    Kind kind() const { return kind_; }
    Subset all() const { return n_ == 64 ? ~0ull : ((1ull << n_) - 1); }
    bool incompatible(int x, int y) const { return (nb_[x] >> y) & 1u; }
    // Polymers incompatible with x, x included.
    Subset neighbourhood(int x) const { return nb_[x]; }
    Subset neighbourhood(Subset d) const {
        Subset r = 0;
        for (Subset t = d; t; t &= t - 1) r |= nb_[std::countr_zero(t)];
        return r;
    }
    bool incompatible(Subset a, Subset b) const { return (neighbourhood(a) & b) != 0; }

    // Component of `within` containing polymer x.
    Subset component(int x, Subset within) const {
        Subset comp = 1ull << x, frontier = comp;
        while (frontier) {
            int y = std::countr_zero(frontier);
            frontier &= frontier - 1;
            Subset add = nb_[y] & within & ~comp;
            comp |= add;
            frontier |= add;
        }
        return comp;
    }
    std::vector<Subset> components(Subset d) const {
        std::vector<Subset> out;
        while (d) {
            Subset c = component(std::countr_zero(d), d);
            out.push_back(c);
            d &= ~c;
        }
        return out;
    }
    bool is_cluster(Subset d) const { return d && component(std::countr_zero(d), d) == d; }

    Complex activity(int x) const { return kind_ == Kind::Polymer ? z_[x] : cluster_weight(1ull << x); }

    // g on a cluster.
    Complex cluster_weight(Subset c) const {
        if (kind_ == Kind::Polymer) return subset_size(c) == 1 ? z_[std::countr_zero(c)] : Complex(0.0);
        auto it = gc_.find(c);
        return it == gc_.end() ? Complex(0.0) : it->second;
    }

    // g(Δ) through the factorization over components.
    Complex weight(Subset d) const {
        Complex g(1.0);
        for (Subset c : components(d)) {
            g *= cluster_weight(c);
            if (g == Complex(0.0)) break;
        }
        return g;
    }

    const std::map<Subset, Complex>& nonzero_cluster_weights() const { return gc_; }
    const std::vector<std::pair<int, int>>& edges() const { return edges_; }

private:
    PolymerSystem(int n, const std::vector<std::pair<int, int>>& edges, Kind k) : n_(n), kind_(k), edges_(edges) {
        if (n < 0 || n > polymer_model_cap) throw std::invalid_argument("too many polymers");
        nb_.assign(n, 0);
        for (int x = 0; x < n; ++x) nb_[x] = 1ull << x;
        for (auto [a, b] : edges) {
            if (a < 0 || b < 0 || a >= n || b >= n) throw std::invalid_argument("edge outside the polymer set");
            nb_[a] |= 1ull << b;
            nb_[b] |= 1ull << a;
        }
    }

    int n_;
    Kind kind_;
    std::vector<std::pair<int, int>> edges_;
    std::vector<Subset> nb_;
    std::vector<Complex> z_;
    std::map<Subset, Complex> gc_;
};

namespace detail {

inline Complex polymer_partition(const PolymerSystem& s, Subset a, std::unordered_map<Subset, Complex>& memo) {
    if (!a) return 1.0;
    if (auto it = memo.find(a); it != memo.end()) return it->second;
    int x = std::countr_zero(a);
    Complex z = polymer_partition(s, a & ~(1ull << x), memo) +
                s.activity(x) * polymer_partition(s, a & ~s.neighbourhood(x), memo);
    memo.emplace(a, z);
    return z;
}

// Z(B) for every B ⊂ S (zeta transform of g).
inline std::vector<Complex> all_partition_functions(const PolymerSystem& s) {
    if (s.size() > cluster_polymer_cap) throw std::invalid_argument("polymer set too large for subset tables");
    const size_t M = size_t{1} << s.size();
    std::vector<Complex> g(M);
    g[0] = 1.0;
    for (Subset d = 1; d < M; ++d) {
        Subset c = s.component(std::countr_zero(d), d);
        g[d] = s.cluster_weight(c) * g[d & ~c];
    }
    for (int i = 0; i < s.size(); ++i)
        for (Subset d = 0; d < M; ++d)
            if ((d >> i) & 1u) g[d] += g[d ^ (1ull << i)];
    return g;
}

// log Z(B) for every B, additive over the components of B so that the
// branch of the complex logarithm is consistent.
inline std::vector<Complex> all_log_partition_functions(const PolymerSystem& s) {
    auto z = all_partition_functions(s);
    const size_t M = z.size();
    std::vector<Complex> lz(M);
    lz[0] = 0.0;
    for (Subset d = 1; d < M; ++d) {
        Subset c = s.component(std::countr_zero(d), d);
        if (c == d) {
            if (z[d] == Complex(0.0)) throw std::domain_error("partition function vanishes");
            lz[d] = std::log(z[d]);
        } else {
            lz[d] = lz[c] + lz[d & ~c];
        }
    }
    return lz;
}

}  // namespace detail

inline Complex partition_function(const PolymerSystem& s, Subset a) {
    if (!subset_of(a, s.all())) throw std::invalid_argument("subset outside the polymer set");
    if (s.kind() == PolymerSystem::Kind::Polymer) {
        std::unordered_map<Subset, Complex> memo;
        return detail::polymer_partition(s, a, memo);
    }
    if (subset_size(a) > cluster_polymer_cap) throw std::invalid_argument("subset too large for direct summation");
    Complex z(0.0);
    Subset d = a;
    while (true) {  // all submasks of a
        z += s.weight(d);
        if (!d) break;
        d = (d - 1) & a;
    }
    return z;
}

struct ClusterWeightTable {
    int polymers = 0;
    int max_size = 0;
    std::map<Subset, Complex> weights;  // clusters with |Δ| <= max_size
    double max_nonzero_off_clusters = 0.0;

    Complex at(Subset d) const {
        auto it = weights.find(d);
        return it == weights.end() ? Complex(0.0) : it->second;
    }
};

// g^T(Δ) = Σ_{A⊂Δ} (-1)^{|Δ∖A|} log Z(A), tabulated on clusters.
inline ClusterWeightTable truncated_weights(const PolymerSystem& s, int max_size) {
    if (max_size < 1 || max_size > cluster_size_cap) throw std::invalid_argument("cluster size cap out of range");
    auto gt = detail::all_log_partition_functions(s);
    const size_t M = gt.size();
    for (int i = 0; i < s.size(); ++i)
        for (Subset d = 0; d < M; ++d)
            if ((d >> i) & 1u) gt[d] -= gt[d ^ (1ull << i)];
    ClusterWeightTable t;
    t.polymers = s.size();
    t.max_size = max_size;
    for (Subset d = 1; d < M; ++d) {
        if (s.is_cluster(d)) {
            if (subset_size(d) <= max_size) t.weights.emplace(d, gt[d]);
        } else {
            t.max_nonzero_off_clusters = std::max(t.max_nonzero_off_clusters, std::abs(gt[d]));
        }
    }
    return t;
}

struct ClusterSum {
    Complex value;
    bool exact = true;  // no cluster inside A exceeds the size cap
};

inline ClusterSum log_partition_via_clusters(const PolymerSystem& s, Subset a, int max_size) {
    if (!subset_of(a, s.all())) throw std::invalid_argument("subset outside the polymer set");
    ClusterWeightTable t = truncated_weights(s, max_size);
    ClusterSum r{Complex(0.0), true};
    for (auto& [d, w] : t.weights)
        if (subset_of(d, a)) r.value += w;
    for (Subset c : s.components(a))
        if (subset_size(c) > max_size) r.exact = false;
    return r;
}

// Any cluster model is a polymer model over its clusters.
inline PolymerSystem dual_polymer_model(const PolymerSystem& s) {
    std::vector<Subset> cl;
    std::vector<Complex> z;
    for (auto& [c, w] : s.nonzero_cluster_weights()) {
        cl.push_back(c);
        z.push_back(w);
    }
    if (s.kind() == PolymerSystem::Kind::Polymer)
        for (int x = 0; x < s.size(); ++x) {
            cl.push_back(1ull << x);
            z.push_back(s.activity(x));
        }
    if (cl.size() > static_cast<size_t>(polymer_model_cap)) throw std::invalid_argument("too many clusters for the dual model");
    std::vector<std::pair<int, int>> edges;
    for (size_t i = 0; i < cl.size(); ++i)
        for (size_t j = i + 1; j < cl.size(); ++j)
            if (s.incompatible(cl[i], cl[j])) edges.emplace_back(static_cast<int>(i), static_cast<int>(j));
    return PolymerSystem::polymer_model(static_cast<int>(cl.size()), edges, std::move(z));
}

// ---------------------------------------------------------------------------

struct KpVerdict {
    bool premise_holds = false;
    double premise_margin = 0.0;  // 1 - sup ratio
    int premise_worst = -1;
    bool weight_bound_holds = true;  // |g(Δ)| <= Π z (cluster models)
    bool conclusion_checked = false;
    bool conclusion_holds = false;
    double conclusion_margin = 0.0;
    int conclusion_worst = -1;
    // guaranteed: the premise holds, which implies the conclusion;
    // observed: the conclusion was evaluated numerically and holds.
    bool guaranteed() const { return premise_holds && weight_bound_holds; }
    bool observed() const { return conclusion_checked && conclusion_holds; }
};

namespace detail {
inline double ratio(double num, double den) {
    if (num == 0.0) return 0.0;  // 0/0 = 0
    return den > 0 ? num / den : std::numeric_limits<double>::infinity();
}
}  // namespace detail

// Σ_{Δ≁X} e^{Σ_{Y∈Δ} b(Y)} |g^T(Δ)| / a(X), worst X.
inline std::pair<double, int> kp_conclusion_sup(const PolymerSystem& s, const std::vector<double>& a,
                                                const std::vector<double>& b) {
    ClusterWeightTable t = truncated_weights(s, std::min(s.size(), cluster_size_cap));
    if (s.size() > cluster_size_cap) throw std::invalid_argument("conclusion check needs at most 12 polymers");
    double worst = 0.0;
    int arg = -1;
    for (int x = 0; x < s.size(); ++x) {
        double sum = 0.0;
        for (auto& [d, w] : t.weights) {
            if (!(s.neighbourhood(x) & d)) continue;
            double eb = 0.0;
            for (Subset r = d; r; r &= r - 1) eb += b[std::countr_zero(r)];
            sum += std::exp(eb) * std::abs(w);
        }
        double q = detail::ratio(sum, a[x]);
        if (arg < 0 || q > worst) {
            worst = q;
            arg = x;
        }
    }
    return {worst, arg};
}

// Polymer models: Σ_{Y≁X} e^{(a+b)(Y)} |g(Y)| <= a(X).
// Cluster models: Σ_{Y≁X} e^{(2a+b)(Y)} z(Y) <= a(X) and |g(Δ)| <= Π z.
inline KpVerdict kp_check(const PolymerSystem& s, const std::vector<double>& a, const std::vector<double>& b,
                          const std::vector<double>& z = {}) {
    const int n = s.size();
    if (static_cast<int>(a.size()) != n || static_cast<int>(b.size()) != n)
        throw std::invalid_argument("a and b need one value per polymer");
    const bool poly = s.kind() == PolymerSystem::Kind::Polymer;
    if (!poly && static_cast<int>(z.size()) != n) throw std::invalid_argument("cluster models need a majorant z");
    KpVerdict v;
    double worst = 0.0;
    for (int x = 0; x < n; ++x) {
        double sum = 0.0;
        for (int y = 0; y < n; ++y) {
            if (!s.incompatible(x, y)) continue;
            sum += poly ? std::exp(a[y] + b[y]) * std::abs(s.activity(y)) : std::exp(2 * a[y] + b[y]) * z[y];
        }
        double q = detail::ratio(sum, a[x]);
        if (v.premise_worst < 0 || q > worst) {
            worst = q;
            v.premise_worst = x;
        }
    }
    v.premise_holds = worst <= 1.0;
    v.premise_margin = 1.0 - worst;
    if (!poly) {
        if (n > cluster_polymer_cap) throw std::invalid_argument("weight bound check needs at most 20 polymers");
        for (Subset d = 1; d <= s.all() && v.weight_bound_holds; ++d) {
            double bound = 1.0;
            for (Subset r = d; r; r &= r - 1) bound *= z[std::countr_zero(r)];
            if (std::abs(s.weight(d)) > bound * (1 + 1e-12)) v.weight_bound_holds = false;
        }
    }
    if (n <= cluster_size_cap) {
        auto [q, x] = kp_conclusion_sup(s, a, b);
        v.conclusion_checked = true;
        v.conclusion_holds = q <= 1.0;
        v.conclusion_margin = 1.0 - q;
        v.conclusion_worst = x;
    }
    return v;
}

}  // namespace rbising

#endif

#ifndef RBISING_STATS_HPP
#define RBISING_STATS_HPP

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include <boost/math/distributions/students_t.hpp>

#include "model.hpp"
#include "multiscale.hpp"
#include "rng.hpp"

namespace rbising {

// ---------------------------------------------------------------------------
// Random boundary fields.  η_x for x ∈ Z² is a pure function of
// (seed, replica, x), so the fields seen by nested volumes are consistent.

struct RandomField {
    uint64_t seed = 0, replica = 0;

    int at(int x, int y) const {
        uint64_t step = (static_cast<uint64_t>(static_cast<uint32_t>(x)) << 32) | static_cast<uint32_t>(y);
        return CounterRng(seed, replica).pm1(step);
    }
    BoundaryCondition restrict_to(const Volume& v) const {
        BoundaryCondition e(v, 1);
        for (int b = 0; b < v.num_boundary(); ++b) {
            Site s = v.boundary_exterior(b);
            e[b] = static_cast<int8_t>(at(s.x, s.y));
        }
        return e;
    }
};

struct RandomBCEnsemble {
    uint64_t seed = 0;

    BoundaryCondition sample(const Volume& v, uint64_t replica) const { return RandomField{seed, replica}.restrict_to(v); }

    // Keeps η on `frozen` bonds and draws the rest afresh.
    BoundaryCondition sample_conditioned(const Volume& v, uint64_t replica, const BoundaryCondition& base,
                                         const BoundaryBonds& frozen) const {
        BoundaryCondition e = sample(v, replica);
        for (int b : frozen) e[b] = base[b];
        return e;
    }
};

inline BoundaryCondition dobrushin_boundary(const Volume& v) {
    BoundaryCondition e(v, 1);
    for (int b = 0; b < v.num_boundary(); ++b) e[b] = static_cast<int8_t>(v.boundary_exterior(b).y >= 0 ? 1 : -1);
    return e;
}

// ---------------------------------------------------------------------------
// Small statistics helpers.

struct Interval {
    double lo = 0, hi = 0;
};

inline Interval wilson_interval(long k, long n, double z = 1.959963984540054) {
    if (n <= 0) return {0.0, 1.0};
    double ph = static_cast<double>(k) / n, z2 = z * z;
    double den = 1 + z2 / n, mid = (ph + z2 / (2.0 * n)) / den;
    double half = z * std::sqrt(ph * (1 - ph) / n + z2 / (4.0 * n * n)) / den;
    return {std::max(0.0, mid - half), std::min(1.0, mid + half)};
}

// Mean and standard error from contiguous batch means.
struct Estimate {
    double value = 0, error = 0;
    long samples = 0;
};

inline Estimate batch_mean(const std::vector<double>& x, int batches = 50) {
    Estimate e;
    e.samples = static_cast<long>(x.size());
    if (x.empty()) return e;
    e.value = std::accumulate(x.begin(), x.end(), 0.0) / x.size();
    const long len = static_cast<long>(x.size()) / batches;
    if (batches < 2 || len < 1) return e;
    std::vector<double> m(batches, 0.0);
    for (int b = 0; b < batches; ++b) {
        for (long i = b * len; i < (b + 1) * len; ++i) m[b] += x[i];
        m[b] /= len;
    }
    double mu = std::accumulate(m.begin(), m.end(), 0.0) / batches, ss = 0;
    for (double y : m) ss += (y - mu) * (y - mu);
    e.error = std::sqrt(ss / (batches - 1) / batches);
    return e;
}

inline std::vector<double> average_ranks(const std::vector<double>& x) {
    std::vector<size_t> idx(x.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::stable_sort(idx.begin(), idx.end(), [&](size_t a, size_t b) { return x[a] < x[b]; });
    std::vector<double> r(x.size());
    for (size_t i = 0; i < idx.size();) {
        size_t j = i;
        while (j + 1 < idx.size() && x[idx[j + 1]] == x[idx[i]]) ++j;
        for (size_t k = i; k <= j; ++k) r[idx[k]] = 0.5 * (i + j) + 1;
        i = j + 1;
    }
    return r;
}

struct RankTest {
    double statistic = 0;
    double p_value = 1;  // see the producing function for sidedness
};

// Spearman ρ with the one-sided p-value for ρ < 0 (t approximation).
inline RankTest spearman_decreasing(const std::vector<double>& x, const std::vector<double>& y) {
    if (x.size() != y.size() || x.size() < 3) throw std::invalid_argument("spearman needs at least 3 pairs");
    auto rx = average_ranks(x), ry = average_ranks(y);
    const double n = static_cast<double>(x.size());
    double mx = std::accumulate(rx.begin(), rx.end(), 0.0) / n, my = std::accumulate(ry.begin(), ry.end(), 0.0) / n;
    double sxy = 0, sxx = 0, syy = 0;
    for (size_t i = 0; i < rx.size(); ++i) {
        sxy += (rx[i] - mx) * (ry[i] - my);
        sxx += (rx[i] - mx) * (rx[i] - mx);
        syy += (ry[i] - my) * (ry[i] - my);
    }
    RankTest t;
    if (sxx == 0 || syy == 0) return t;
    t.statistic = sxy / std::sqrt(sxx * syy);
    double rho = std::clamp(t.statistic, -1.0 + 1e-15, 1.0 - 1e-15);
    double tt = rho * std::sqrt((n - 2) / (1 - rho * rho));
    t.p_value = boost::math::cdf(boost::math::students_t(n - 2), tt);
    return t;
}

// Wilcoxon signed-rank test of symmetry about 0; two-sided normal approximation
// with tie correction, zeros dropped.
inline RankTest wilcoxon_signed_rank(const std::vector<double>& x) {
    std::vector<double> a, sgn;
    for (double v : x)
        if (v != 0) {
            a.push_back(std::abs(v));
            sgn.push_back(v > 0 ? 1 : -1);
        }
    RankTest t;
    const double n = static_cast<double>(a.size());
    if (a.empty()) return t;
    auto r = average_ranks(a);
    double wp = 0;
    for (size_t i = 0; i < r.size(); ++i)
        if (sgn[i] > 0) wp += r[i];
    double mean = n * (n + 1) / 4, var = n * (n + 1) * (2 * n + 1) / 24;
    std::vector<double> sorted = a;
    std::sort(sorted.begin(), sorted.end());
    for (size_t i = 0; i < sorted.size();) {
        size_t j = i;
        while (j + 1 < sorted.size() && sorted[j + 1] == sorted[i]) ++j;
        double tk = static_cast<double>(j - i + 1);
        var -= (tk * tk * tk - tk) / 48;
        i = j + 1;
    }
    t.statistic = wp;
    if (var <= 0) return t;
    double z = (wp - mean) / std::sqrt(var);
    t.p_value = std::erfc(std::abs(z) / std::sqrt(2.0));
    return t;
}

// Runs f(i) for i in [0, n) on `threads` workers; results must be written to
// index-addressed slots so the outcome does not depend on scheduling.
template <class F>
void parallel_for(int n, int threads, F&& f) {
    threads = std::max(1, std::min(threads, n));
    if (threads == 1) {
        for (int i = 0; i < n; ++i) f(i);
        return;
    }
    std::vector<std::thread> pool;
    std::vector<std::exception_ptr> err(threads);
    for (int t = 0; t < threads; ++t)
        pool.emplace_back([&, t] {
            try {
                for (int i = t; i < n; i += threads) f(i);
            } catch (...) {
                err[t] = std::current_exception();
            }
        });
    for (auto& th : pool) th.join();
    for (auto& e : err)
        if (e) std::rethrow_exception(e);
}

// ---------------------------------------------------------------------------
// Free energy differences F^η = log Z^{+,η} - log Z^{+,-η}.

struct FreeEnergySample {
    int N = 0;
    uint64_t replica = 0;
    double value = 0;
    std::string method;
    double error = 0;
    bool infinite = false;
};

inline FreeEnergySample free_energy_exact(const Volume& v, const BoundaryCondition& eta, const CouplingParams& p) {
    auto a = constrained_logZ(v, eta, p);
    auto b = constrained_logZ(v, eta.flipped(), p);
    FreeEnergySample s;
    s.N = v.N();
    s.method = "exact";
    s.value = a.plus - b.plus;
    return s;
}

// Exterior sign of a sampled configuration.
class SectorClassifier {
public:
    explicit SectorClassifier(const Volume& v) : v_(v) {
        if (v.num_sites() <= enumeration_site_cap) cat_ = &catalog_for(v);
    }
    int operator()(const SpinConfig& s) const {
        if (cat_) {
            uint64_t bits = 0;
            for (int i = 0; i < v_.num_sites(); ++i)
                if (s[i] < 0) bits |= 1ull << i;
            const int top = v_.num_sites() - 1;
            if ((bits >> top) & 1u) return -cat_->sign(~bits & cat_->all_sites());
            return cat_->sign(bits);
        }
        return constrained_split(s, v_);
    }

private:
    Volume v_;
    const VolumeCatalog* cat_ = nullptr;
};

// F = log(μ̂(Ω^+)/μ̂(Ω^-)), using Z^{+,-η} = Z^{-,η}; delta-method error from
// batch means of the sector indicator.
inline FreeEnergySample free_energy_mc(const Volume& v, const BoundaryCondition& eta, const CouplingParams& p,
                                       const MetropolisOptions& o, int batches = 50) {
    SectorClassifier cls(v);
    std::vector<double> ind;
    ind.reserve(static_cast<size_t>(o.sweeps / o.thin));
    metropolis_sampler(v, eta, p, o, [&](long, const SpinConfig& s) { ind.push_back(cls(s) > 0 ? 1.0 : 0.0); });
    Estimate e = batch_mean(ind, batches);
    FreeEnergySample s;
    s.N = v.N();
    s.replica = o.replica;
    s.method = "mc-ratio";
    if (e.value <= 0 || e.value >= 1) {
        s.infinite = true;
        s.value = e.value <= 0 ? -std::numeric_limits<double>::infinity() : std::numeric_limits<double>::infinity();
        return s;
    }
    s.value = std::log(e.value / (1 - e.value));
    s.error = e.error / (e.value * (1 - e.value));
    return s;
}

// ---------------------------------------------------------------------------
// Interfaces.

// An interface is an open curve, so it needs a broken bond along the boundary
// ring of Λ.
inline bool ring_unbroken(const SpinConfig& s, const Volume& v) {
    const int N = v.N();
    int first = s[v.site_index(-N, -N)];
    for (int t = -N; t <= N; ++t)
        if (s[v.site_index(t, -N)] != first || s[v.site_index(t, N)] != first || s[v.site_index(-N, t)] != first ||
            s[v.site_index(N, t)] != first)
            return false;
    return true;
}

inline bool has_interface(const SpinConfig& s, const Volume& v) {
    return !ring_unbroken(s, v) && detect_interface(s, v);
}

inline Estimate interface_probability(const Volume& v, const BoundaryCondition& eta, const CouplingParams& p,
                                      const MetropolisOptions& o, int batches = 50) {
    std::vector<double> ind;
    metropolis_sampler(v, eta, p, o, [&](long, const SpinConfig& s) { ind.push_back(has_interface(s, v) ? 1.0 : 0.0); });
    return batch_mean(ind, batches);
}

// Sampler start: the uniform configuration with the lower energy.
inline int lower_energy_start(const BoundaryCondition& eta) {
    long s = 0;
    for (auto x : eta.eta) s += x;
    return s >= 0 ? 1 : -1;
}

struct InterfaceOptions {
    double beta = 1.0, lambda = 1.0;
    std::vector<int> Ns{4, 8, 12};
    int replicas = 50;
    long sweeps = 100000, burn_in = 10000;
    uint64_t seed = 1;
    int threads = 1;
};

struct InterfaceRow {
    int N = 0;
    std::vector<double> estimate;  // μ̂(interface) per replica
    double median = 0;
    double dobrushin = 0;  // Dobrushin η control
};

struct InterfaceResult {
    std::vector<InterfaceRow> rows;
    RankTest trend;  // pooled replica estimates against N
    bool nonincreasing = false;  // medians
    bool trend_ok() const { return nonincreasing && trend.statistic < 0 && trend.p_value < 0.05; }
    bool control_ok() const {
        return !rows.empty() && rows.front().dobrushin >= 10 * rows.front().median && rows.front().dobrushin > 0;
    }
};

inline double median(std::vector<double> x) {
    if (x.empty()) throw std::invalid_argument("median of an empty sample");
    std::sort(x.begin(), x.end());
    size_t m = x.size() / 2;
    return x.size() % 2 ? x[m] : 0.5 * (x[m - 1] + x[m]);
}

inline InterfaceResult interface_experiment(const InterfaceOptions& o) {
    CouplingParams p{o.beta, o.lambda};
    p.validate();
    if (o.Ns.empty() || o.replicas < 1) throw std::invalid_argument("empty interface experiment");
    RandomBCEnsemble ens{o.seed};
    InterfaceResult res;
    std::vector<double> xs, ys;
    for (int N : o.Ns) {
        Volume v(N);
        InterfaceRow row;
        row.N = N;
        row.estimate.assign(o.replicas, 0.0);
        parallel_for(o.replicas + 1, o.threads, [&](int r) {
            MetropolisOptions mo;
            mo.seed = o.seed;
            mo.replica = static_cast<uint64_t>(r);
            mo.sweeps = o.sweeps;
            mo.burn_in = o.burn_in;
            if (r == o.replicas) {  // control
                mo.replica = ~uint64_t{0};
                mo.start = 1;
                row.dobrushin = interface_probability(v, dobrushin_boundary(v), p, mo).value;
                return;
            }
            auto eta = ens.sample(v, r);
            mo.start = lower_energy_start(eta);
            row.estimate[r] = interface_probability(v, eta, p, mo).value;
        });
        row.median = median(row.estimate);
        for (double y : row.estimate) {
            xs.push_back(N);
            ys.push_back(y);
        }
        res.rows.push_back(std::move(row));
    }
    res.nonincreasing = true;
    for (size_t i = 1; i < res.rows.size(); ++i)
        if (res.rows[i].median > res.rows[i - 1].median) res.nonincreasing = false;
    res.trend = spearman_decreasing(xs, ys);
    return res;
}

// ---------------------------------------------------------------------------
// Single-site marginals and the basic estimate experiment.

inline double center_plus_probability(const Volume& v, const BoundaryCondition& eta, const CouplingParams& p,
                                      int max_width) {
    return transfer_matrix_plus_probability(v, eta, p, v.site_index(0, 0), max_width);
}

// ‖μ - ν‖_{0} for measures given by μ(σ_0 = +1).
inline double single_site_distance(double p, double q) { return 2.0 * std::abs(p - q); }

struct BasicEstOptions {
    double beta = 0.8, lambda = 1.0, epsilon = 0.3;
    std::vector<int> Ns{4, 6, 8, 10};
    int replicas = 200;
    uint64_t seed = 1;
    int max_width = 21;
    int threads = 1;
};

struct BasicEstRow {
    int N = 0;
    long replicas = 0, far = 0;
    double p_hat = 0;
    Interval ci;
    double reference = 0;  // c N^{-1/2}, matched at the first N
};

struct BasicEstResult {
    std::vector<BasicEstRow> rows;
    double proxy_plus = 0, proxy_minus = 0;  // μ^±(σ_0 = +1)
    std::vector<std::vector<double>> distance;  // [N index][replica]
    RankTest trend;
    bool nonincreasing = false;  // pointwise, reported only
    bool trend_ok() const { return trend.statistic < 0 && trend.p_value < 0.05; }
};

inline BasicEstResult basic_est_experiment(const BasicEstOptions& o) {
    if (o.Ns.empty()) throw std::invalid_argument("no volumes");
    CouplingParams p{o.beta, o.lambda};
    p.validate();
    BasicEstResult res;
    const int Nmax = *std::max_element(o.Ns.begin(), o.Ns.end());
    Volume vmax(Nmax);
    res.proxy_plus = center_plus_probability(vmax, BoundaryCondition(vmax, 1), p, o.max_width);
    res.proxy_minus = center_plus_probability(vmax, BoundaryCondition(vmax, -1), p, o.max_width);
    RandomBCEnsemble ens{o.seed};
    std::vector<double> xs, ys;
    for (int N : o.Ns) {
        Volume v(N);
        std::vector<double> d(o.replicas);
        parallel_for(o.replicas, o.threads, [&](int r) {
            double q = center_plus_probability(v, ens.sample(v, r), p, o.max_width);
            d[r] = std::min(single_site_distance(q, res.proxy_plus), single_site_distance(q, res.proxy_minus));
        });
        BasicEstRow row;
        row.N = N;
        row.replicas = o.replicas;
        for (int r = 0; r < o.replicas; ++r) {
            bool far = d[r] >= o.epsilon;
            row.far += far;
            xs.push_back(N);
            ys.push_back(far ? 1.0 : 0.0);
        }
        row.p_hat = static_cast<double>(row.far) / row.replicas;
        row.ci = wilson_interval(row.far, row.replicas);
        res.distance.push_back(std::move(d));
        res.rows.push_back(row);
    }
    const double c = res.rows.front().p_hat * std::sqrt(static_cast<double>(res.rows.front().N));
    for (auto& r : res.rows) r.reference = c / std::sqrt(static_cast<double>(r.N));
    res.nonincreasing = true;
    for (size_t i = 1; i < res.rows.size(); ++i)
        if (res.rows[i].p_hat > res.rows[i - 1].p_hat) res.nonincreasing = false;
    res.trend = spearman_decreasing(xs, ys);
    return res;
}

// ---------------------------------------------------------------------------
// Empirical frequencies Q_N^{B,η} = (1/N) Σ_{k<=N} 1{μ_{Λ(k)}^η ∈ B} for balls
// around the η ≡ ±1 proxies on the window {0}.

enum class BallCenter { PlusProxy, MinusProxy, Everything, Nothing };

struct FrequencyOptions {
    double beta = 1.0, lambda = 1.0, epsilon = 0.2;
    int N_max = 8;
    int replicas = 20;
    uint64_t seed = 1;
    int max_width = 17;
    int threads = 1;
};

struct FrequencyCurve {
    uint64_t replica = 0;
    std::vector<double> Q;       // Q_1 .. Q_{N_max}
    std::vector<double> marginal;  // μ_{Λ(k)}(σ_0 = +1)
};

struct FrequencyResult {
    double proxy_plus = 0, proxy_minus = 0;
    std::vector<FrequencyCurve> curves;
    int abstentions = 0;  // exact marginals never abstain
};

inline bool in_ball(BallCenter c, double q, const FrequencyResult& r, double eps) {
    switch (c) {
        case BallCenter::Everything: return true;
        case BallCenter::Nothing: return false;
        case BallCenter::PlusProxy: return single_site_distance(q, r.proxy_plus) <= eps;
        case BallCenter::MinusProxy: return single_site_distance(q, r.proxy_minus) <= eps;
    }
    return false;
}

inline FrequencyResult empirical_frequency(const FrequencyOptions& o, BallCenter center) {
    if (o.N_max < 1) throw std::invalid_argument("N_max must be at least 1");
    CouplingParams p{o.beta, o.lambda};
    p.validate();
    FrequencyResult res;
    Volume vmax(o.N_max);
    res.proxy_plus = center_plus_probability(vmax, BoundaryCondition(vmax, 1), p, o.max_width);
    res.proxy_minus = center_plus_probability(vmax, BoundaryCondition(vmax, -1), p, o.max_width);
    res.curves.resize(o.replicas);
    parallel_for(o.replicas, o.threads, [&](int r) {
        RandomField f{o.seed, static_cast<uint64_t>(r)};
        FrequencyCurve& c = res.curves[r];
        c.replica = r;
        int hits = 0;
        for (int k = 1; k <= o.N_max; ++k) {
            Volume v(k);
            double q = center_plus_probability(v, f.restrict_to(v), p, o.max_width);
            c.marginal.push_back(q);
            hits += in_ball(center, q, res, o.epsilon);
            c.Q.push_back(static_cast<double>(hits) / k);
        }
    });
    return res;
}

// ---------------------------------------------------------------------------
// Characteristic functions and the local limit bound.

inline std::vector<std::complex<double>> characteristic_function(const std::vector<double>& samples,
                                                                  const std::vector<double>& ts) {
    std::vector<std::complex<double>> out;
    for (double t : ts) {
        std::complex<double> acc(0.0);
        for (double f : samples) acc += std::polar(1.0, t * f);
        out.push_back(samples.empty() ? std::complex<double>(1.0) : acc / static_cast<double>(samples.size()));
    }
    return out;
}

struct LLTInput {
    std::vector<double> t;        // grid covering [-tau, tau]
    std::vector<double> psi_abs;  // |ψ_n(t)| on the grid
    double A = 1, delta = 1, tau = 1;
    double a = -1, b = 1;
    double k = 2;
};

struct LLTReport {
    double premise_i = 0;   // A ∫ |ψ|
    bool premise_i_ok = false;
    double premise_ii = 0;  // A / (δ^k τ^{k-1})
    bool premise_ii_ok = false;
    double conclusion = 0;  // (A/δ) P̂
    double conclusion_rhs = 0;
    bool conclusion_ok = false;
    bool asserted() const { return premise_i_ok && premise_ii_ok; }
    std::string verdict() const {
        if (!premise_i_ok || !premise_ii_ok) return "premise failed";
        return conclusion_ok ? "bound holds" : "bound violated";
    }
};

inline double trapezoid(const std::vector<double>& x, const std::vector<double>& y) {
    double s = 0;
    for (size_t i = 1; i < x.size(); ++i) s += 0.5 * (x[i] - x[i - 1]) * (y[i] + y[i - 1]);
    return s;
}

// premise ii is a limit statement; at one n it is compared with `ii_threshold`.
inline LLTReport llt_bound(const LLTInput& in, double p_hat, double slack = 0.1, double ii_threshold = 1.0) {
    if (in.t.size() != in.psi_abs.size() || in.t.size() < 2) throw std::invalid_argument("malformed psi grid");
    if (!(in.A > 0 && in.delta > 0 && in.tau > 0 && in.a < in.b && in.k > 1)) throw std::invalid_argument("invalid LLT sequences");
    const double tol = 1e-12 * in.tau;
    if (in.t.front() > -in.tau + tol || in.t.back() < in.tau - tol) throw std::invalid_argument("grid does not cover [-tau, tau]");
    for (size_t i = 1; i < in.t.size(); ++i)
        if (in.t[i] - in.t[i - 1] > in.tau / 1000 + tol || in.t[i] <= in.t[i - 1])
            throw std::invalid_argument("quadrature step too coarse");
    for (double x : in.psi_abs)
        if (!(x >= 0 && x <= 1 + 1e-12)) throw std::invalid_argument("|psi| must lie in [0,1]");
    LLTReport r;
    r.premise_i = in.A * trapezoid(in.t, in.psi_abs);
    r.premise_i_ok = r.premise_i <= 2 * M_PI;
    r.premise_ii = in.A / (std::pow(in.delta, in.k) * std::pow(in.tau, in.k - 1));
    r.premise_ii_ok = r.premise_ii <= ii_threshold;
    r.conclusion = in.A / in.delta * p_hat;
    r.conclusion_rhs = (in.b - in.a) * (1 + slack);
    r.conclusion_ok = r.conclusion <= r.conclusion_rhs;
    return r;
}

// X_n = sum of n independent ±1: ψ_n = cos^n t and exact binomial probabilities.
struct RademacherFixture {
    LLTInput input;
    double probability = 0;  // P{a δ <= X_n <= b δ}
};

inline RademacherFixture rademacher_fixture(long n, double delta_exponent = 0.3, double tau = M_PI / 2,
                                            double a = -1, double b = 1, int points = 4001) {
    RademacherFixture f;
    LLTInput& in = f.input;
    in.A = std::sqrt(2 * M_PI * n);
    in.delta = std::pow(static_cast<double>(n), delta_exponent);
    in.tau = tau;
    in.a = a;
    in.b = b;
    for (int i = 0; i < points; ++i) {
        double t = -tau + 2 * tau * i / (points - 1);
        in.t.push_back(t);
        in.psi_abs.push_back(std::pow(std::abs(std::cos(t)), static_cast<double>(n)));
    }
    // X = 2K - n with K ~ Bin(n, 1/2)
    double lo = a * in.delta, hi = b * in.delta;
    for (long k = 0; k <= n; ++k) {
        double x = 2.0 * k - n;
        if (x < lo || x > hi) continue;
        f.probability += std::exp(std::lgamma(n + 1.0) - std::lgamma(k + 1.0) - std::lgamma(n - k + 1.0) - n * std::log(2.0));
    }
    return f;
}

// ---------------------------------------------------------------------------
// F = F̃ + F̂: corner part from the collar field, the step-zero clusters with
// domain in the collar, the corner aggregates and ψ_∞.  Normal orders whose
// aggregates reach the collar are attributed to F̂ and flagged.

struct CornerSplit {
    double F = 0, F_tilde = 0, F_hat = 0;
    std::vector<std::string> flags;
};

namespace detail {
inline void split_report(const ExpansionReport& r, double& tilde, double& hat, std::vector<std::string>& flags) {
    std::vector<char> in(0);
    int maxb = 0;
    for (int b : r.corner_collar) maxb = std::max(maxb, b + 1);
    for (auto& a : r.aggregates)
        for (int b : a.domain) maxb = std::max(maxb, b + 1);
    in.assign(maxb, 0);
    for (int b : r.corner_collar) in[b] = 1;
    hat += r.field_corner + r.phi0_corner + r.psi_infty;
    tilde += (r.vacuum - r.field_corner) + (r.phi0_total - r.phi0_corner);
    std::vector<char> order_hat(r.psi.size() + 1, 0);
    for (auto& a : r.aggregates) {
        if (a.order == 0) {
            hat += a.log_zhat;
            continue;
        }
        bool reach = false;
        for (int b : a.domain) reach = reach || in[b];
        if (reach) {
            hat += a.log_zhat;
            order_hat[a.order] = 1;
        } else {
            tilde += a.log_zhat;
        }
    }
    for (size_t n = 0; n < r.psi.size(); ++n) {
        if (order_hat[n + 1]) {
            hat += r.psi[n];
            flags.push_back("order " + std::to_string(n + 1) + " clusters attributed to the corner part");
        } else {
            tilde += r.psi[n];
        }
    }
}
}  // namespace detail

// `plus` expands Z^{+,η}, `flipped` expands Z^{+,-η}.
inline CornerSplit corner_split(const ExpansionReport& plus, const ExpansionReport& flipped) {
    if (plus.sign != 1 || flipped.sign != 1) throw std::invalid_argument("corner split needs two plus-sector reports");
    CornerSplit c;
    double t1 = 0, h1 = 0, t2 = 0, h2 = 0;
    detail::split_report(plus, t1, h1, c.flags);
    detail::split_report(flipped, t2, h2, c.flags);
    c.F_tilde = t1 - t2;
    c.F_hat = h1 - h2;
    c.F = plus.total() - flipped.total();
    return c;
}

}  // namespace rbising

#endif

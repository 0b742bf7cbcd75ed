#include <catch_amalgamated.hpp>

#include <boost/math/distributions/chi_squared.hpp>
#include <random>

#include "rbising/fixtures.hpp"
#include "rbising/stats.hpp"

using namespace rbising;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {

BoundaryCondition random_eta(const Volume& v, std::mt19937& gen) {
    BoundaryCondition e(v, 1);
    for (int b = 0; b < v.num_boundary(); ++b) e[b] = (gen() & 1u) ? 1 : -1;
    return e;
}

}  // namespace

TEST_CASE("random boundary ensemble") {
    Volume v1(1), v2(2);
    RandomBCEnsemble ens{9};
    SECTION("reproducible and nested") {
        CHECK(ens.sample(v2, 3) == ens.sample(v2, 3));
        CHECK_FALSE(ens.sample(v2, 3) == ens.sample(v2, 4));
        RandomField f{9, 3};
        auto e = ens.sample(v2, 3);
        for (int b = 0; b < v2.num_boundary(); ++b) {
            Site s = v2.boundary_exterior(b);
            CHECK(e[b] == f.at(s.x, s.y));
        }
    }
    SECTION("fair coins") {
        const int n = 4000;
        std::vector<int> plus(v2.num_boundary(), 0);
        for (int r = 0; r < n; ++r) {
            auto e = ens.sample(v2, r);
            for (int b = 0; b < v2.num_boundary(); ++b) plus[b] += e[b] > 0;
        }
        double chi2 = 0;
        for (int k : plus) chi2 += (k - n / 2.0) * (k - n / 2.0) / (n / 4.0);
        CHECK(chi2 < boost::math::quantile(boost::math::chi_squared(v2.num_boundary()), 0.999));
    }
    SECTION("conditioning keeps the frozen bonds") {
        BoundaryCondition base(v1, -1);
        BoundaryBonds frozen{0, 5, 7};
        auto e = ens.sample_conditioned(v1, 2, base, frozen);
        auto free = ens.sample(v1, 2);
        for (int b = 0; b < v1.num_boundary(); ++b)
            CHECK(e[b] == (std::find(frozen.begin(), frozen.end(), b) != frozen.end() ? -1 : free[b]));
    }
    SECTION("Dobrushin boundary") {
        auto d = dobrushin_boundary(v2);
        for (int b = 0; b < v2.num_boundary(); ++b) CHECK(d[b] == (v2.boundary_exterior(b).y >= 0 ? 1 : -1));
    }
}

TEST_CASE("small statistics helpers") {
    auto w = wilson_interval(0, 20);
    CHECK(w.lo == 0.0);
    CHECK(w.hi > 0.1);
    auto h = wilson_interval(10, 20);
    CHECK_THAT(h.lo + h.hi, WithinAbs(1.0, 1e-12));
    CHECK(wilson_interval(0, 0).hi == 1.0);

    auto e = batch_mean(std::vector<double>(100, 2.0), 10);
    CHECK(e.value == 2.0);
    CHECK(e.error == 0.0);

    CHECK(median({3, 1, 2}) == 2.0);
    CHECK(median({4, 1, 2, 3}) == 2.5);
    CHECK_THROWS_AS(median({}), std::invalid_argument);

    std::vector<double> x{1, 2, 3, 4, 5, 6}, y{9, 7, 6, 4, 2, 1};
    auto s = spearman_decreasing(x, y);
    CHECK_THAT(s.statistic, WithinAbs(-1.0, 1e-12));
    CHECK(s.p_value < 1e-3);
    CHECK(spearman_decreasing(x, x).p_value > 0.99);
    CHECK_THROWS_AS(spearman_decreasing({1, 2}, {1, 2}), std::invalid_argument);

    std::mt19937 gen(4);
    std::normal_distribution<double> nd(0, 1);
    std::vector<double> sym, shifted;
    for (int i = 0; i < 200; ++i) {
        sym.push_back(nd(gen));
        shifted.push_back(nd(gen) + 1);
    }
    CHECK(wilcoxon_signed_rank(sym).p_value > 0.01);
    CHECK(wilcoxon_signed_rank(shifted).p_value < 1e-6);
    CHECK(wilcoxon_signed_rank({0, 0, 0}).p_value == 1.0);
}

TEST_CASE("free energy differences") {
    CouplingParams p{1, 1};
    SECTION("plus boundary favours the plus sector") {
        Volume v(1);
        CHECK(free_energy_exact(v, BoundaryCondition(v, 1), p).value > 0);
    }
    SECTION("antisymmetry and the conjugate sector") {
        std::mt19937 gen(8);
        for (int N : {1, 2}) {
            Volume v(N);
            for (int rep = 0; rep < (N == 1 ? 20 : 5); ++rep) {
                auto eta = random_eta(v, gen);
                double f = free_energy_exact(v, eta, p).value;
                CHECK_THAT(free_energy_exact(v, eta.flipped(), p).value, WithinAbs(-f, 1e-12));
                auto z = constrained_logZ(v, eta, p);
                CHECK_THAT(f, WithinAbs(z.plus - z.minus, 1e-12));
            }
        }
    }
    SECTION("sector ratio estimator") {
        Volume v(1);
        std::mt19937 gen(3);
        auto eta = random_eta(v, gen);
        CouplingParams q{0.7, 1};
        MetropolisOptions o;
        o.seed = 11;
        o.sweeps = 200000;
        o.burn_in = 1000;
        auto mc = free_energy_mc(v, eta, q, o);
        REQUIRE_FALSE(mc.infinite);
        CHECK(mc.method == "mc-ratio");
        CHECK(std::abs(mc.value - free_energy_exact(v, eta, q).value) < 3 * mc.error);
    }
    SECTION("a sector never visited gives an infinite ratio") {
        Volume v(1);
        MetropolisOptions o;
        o.sweeps = 200;
        auto mc = free_energy_mc(v, BoundaryCondition(v, 1), {6, 1}, o);
        CHECK(mc.infinite);
        CHECK(mc.value > 0);
    }
}

TEST_CASE("interface probability") {
    SECTION("β = 0 matches uniform sampling") {
        Volume v(2);
        MetropolisOptions o;
        o.seed = 5;
        o.sweeps = 20000;
        std::mt19937 eg(1);
        auto mc = interface_probability(v, random_eta(v, eg), {0, 1}, o);
        std::mt19937_64 gen(6);
        const int n = 20000;
        int hits = 0;
        for (int i = 0; i < n; ++i) hits += has_interface(SpinConfig::from_bits(v, gen() & ((1ull << 25) - 1)), v);
        double q = static_cast<double>(hits) / n;
        double se = std::sqrt(2 * q * (1 - q) / n);
        CHECK(q > 0.05);
        CHECK(std::abs(mc.value - q) < 4 * se);
    }
    SECTION("uniform boundary suppresses interfaces") {
        Volume v(6);
        MetropolisOptions o;
        o.sweeps = 20000;
        o.burn_in = 1000;
        CHECK(interface_probability(v, BoundaryCondition(v, 1), {1.5, 1}, o).value < 1e-3);
    }
    SECTION("Dobrushin boundary forces one") {
        Volume v(4);
        MetropolisOptions o;
        o.sweeps = 5000;
        o.burn_in = 500;
        CHECK(interface_probability(v, dobrushin_boundary(v), {1, 1}, o).value > 0.9);
    }
    SECTION("classification") {
        Volume v(2);
        SpinConfig half(v, 1);
        for (int s = 0; s < v.num_sites(); ++s)
            if (v.site(s).y < 0) half[s] = -1;
        CHECK(has_interface(half, v));
        CHECK_FALSE(has_interface(SpinConfig(v, -1), v));
        CHECK(lower_energy_start(BoundaryCondition(v, -1)) == -1);
        CHECK(lower_energy_start(dobrushin_boundary(v)) == 1);
    }
}

TEST_CASE("single-site marginals") {
    SECTION("uniform boundary sits on its proxy") {
        Volume v(4);
        CouplingParams p{1, 1};
        double q = center_plus_probability(v, BoundaryCondition(v, 1), p, 17);
        CHECK(q > 0.9);
        CHECK_THAT(center_plus_probability(v, BoundaryCondition(v, -1), p, 17), WithinAbs(1 - q, 1e-12));
        CHECK(single_site_distance(q, q) == 0.0);
    }
    SECTION("β = 0 makes both proxies the paramagnet") {
        BasicEstOptions o;
        o.beta = 0;
        o.Ns = {2, 3, 4};
        o.replicas = 5;
        auto r = basic_est_experiment(o);
        CHECK_THAT(r.proxy_plus, WithinAbs(0.5, 1e-12));
        for (auto& row : r.rows) CHECK(row.far == 0);
    }
    SECTION("small basic estimate run") {
        BasicEstOptions o;
        o.Ns = {2, 3, 4};
        o.replicas = 30;
        auto r = basic_est_experiment(o);
        REQUIRE(r.rows.size() == 3);
        for (auto& row : r.rows) {
            CHECK(row.ci.lo <= row.p_hat);
            CHECK(row.p_hat <= row.ci.hi);
            for (double d : r.distance[&row - r.rows.data()]) CHECK((d >= 0 && d <= 2));
        }
        CHECK_THAT(r.rows[0].reference, WithinAbs(r.rows[0].p_hat, 1e-15));
        o.threads = 3;
        auto t = basic_est_experiment(o);
        CHECK(t.distance == r.distance);
    }
}

TEST_CASE("empirical frequencies") {
    FrequencyOptions o;
    o.N_max = 5;
    o.replicas = 6;
    o.max_width = 11;
    auto all = empirical_frequency(o, BallCenter::Everything);
    auto none = empirical_frequency(o, BallCenter::Nothing);
    for (auto& c : all.curves)
        for (double q : c.Q) CHECK(q == 1.0);
    for (auto& c : none.curves)
        for (double q : c.Q) CHECK(q == 0.0);
    auto plus = empirical_frequency(o, BallCenter::PlusProxy);
    auto minus = empirical_frequency(o, BallCenter::MinusProxy);
    REQUIRE(single_site_distance(plus.proxy_plus, plus.proxy_minus) > 2 * o.epsilon);
    for (size_t r = 0; r < plus.curves.size(); ++r)
        for (size_t k = 0; k < plus.curves[r].Q.size(); ++k) {
            double a = plus.curves[r].Q[k], b = minus.curves[r].Q[k];
            CHECK((a >= 0 && a <= 1 && b >= 0 && b <= 1));
            CHECK(a + b <= 1 + 1e-12);  // the balls are disjoint
        }
    o.epsilon = 0.6;
    auto wide = empirical_frequency(o, BallCenter::PlusProxy);
    for (size_t r = 0; r < plus.curves.size(); ++r)
        for (size_t k = 0; k < plus.curves[r].Q.size(); ++k) CHECK(wide.curves[r].Q[k] >= plus.curves[r].Q[k]);
    CHECK_THROWS_AS(empirical_frequency(FrequencyOptions{.N_max = 0}, BallCenter::Nothing), std::invalid_argument);
}

TEST_CASE("characteristic function") {
    std::vector<double> ts{-1.0, -0.3, 0.0, 0.4, 1.2};
    auto z = characteristic_function(std::vector<double>(10, 0.0), ts);
    for (auto c : z) CHECK(std::abs(c - std::complex<double>(1.0)) < 1e-15);
    // the field part 2β Σ η of a free energy has ψ(t) = cos(2βt)^n
    Volume v(1);
    RandomBCEnsemble ens{21};
    const double beta = 0.4;
    const int m = 40000;
    std::vector<double> f;
    for (int r = 0; r < m; ++r) {
        auto e = ens.sample(v, r);
        double s = 0;
        for (auto x : e.eta) s += x;
        f.push_back(2 * beta * s);
    }
    auto psi = characteristic_function(f, ts);
    for (size_t i = 0; i < ts.size(); ++i) {
        CHECK(std::abs(psi[i]) <= 1 + 1e-12);
        CHECK(std::abs(psi[i].imag()) < 5 / std::sqrt(m));
        CHECK(std::abs(psi[i].real() - std::pow(std::cos(2 * beta * ts[i]), v.num_boundary())) < 5 / std::sqrt(m));
    }
    CHECK(characteristic_function({}, {0.5})[0] == std::complex<double>(1.0));
}

TEST_CASE("local limit bound") {
    SECTION("Rademacher sums") {
        auto f = rademacher_fixture(10000);
        auto r = llt_bound(f.input, f.probability);
        CHECK(r.premise_i_ok);
        CHECK(r.conclusion <= 2.2);
        CHECK(r.verdict() == "bound holds");
        // at n = 400 the window [-δ, δ] holds 7 even points for 2δ ≈ 12.1, so
        // lattice effects beat the 10% slack and the report must say so
        auto g = rademacher_fixture(400);
        auto s = llt_bound(g.input, g.probability);
        CHECK(s.conclusion > s.conclusion_rhs);
        CHECK(s.verdict() == "bound violated");
    }
    SECTION("degenerate sum") {
        LLTInput in;
        in.tau = 1;
        for (int i = 0; i <= 2000; ++i) {
            in.t.push_back(-1 + i / 1000.0);
            in.psi_abs.push_back(1.0);
        }
        in.A = 1;
        in.a = 1;
        in.b = 2;
        auto r = llt_bound(in, 0.0);
        CHECK(r.conclusion == 0.0);
        CHECK(r.conclusion_ok);
        CHECK_THAT(r.conclusion_rhs, WithinRel(1.1, 1e-15));
        in.A = 10;
        auto bad = llt_bound(in, 0.0);
        CHECK_FALSE(bad.premise_i_ok);
        CHECK(bad.verdict() == "premise failed");
    }
    SECTION("input validation") {
        auto f = rademacher_fixture(100, 0.3, M_PI / 2, -1, 1, 101);
        CHECK_THROWS_AS(llt_bound(f.input, f.probability), std::invalid_argument);
        auto g = rademacher_fixture(100);
        g.input.A = 0;
        CHECK_THROWS_AS(llt_bound(g.input, 0.1), std::invalid_argument);
    }
}

TEST_CASE("corner split") {
    Volume v(2);
    CatalogExpansion ce(catalog_for(v), build_schedule(5, 0.1, 2));
    CouplingParams p{1.5, 1};
    std::mt19937 gen(12);
    std::vector<BoundaryCondition> etas{BoundaryCondition(v, 1), unbalanced_strip_eta(v, 4), random_eta(v, gen),
                                        random_eta(v, gen)};
    for (auto& eta : etas) {
        auto c = corner_split(ce.expand(eta, p), ce.expand(eta.flipped(), p));
        CHECK_THAT(c.F_tilde + c.F_hat, WithinAbs(c.F, 1e-8));
        CHECK_THAT(c.F, WithinAbs(free_energy_exact(v, eta, p).value, 1e-8));
    }
    CHECK_THROWS_AS(corner_split(ce.expand(etas[0], p, -1), ce.expand(etas[0], p)), std::invalid_argument);
}

#include <catch_amalgamated.hpp>

#include <random>

#include "rbising/fixtures.hpp"
#include "rbising/multiscale.hpp"

using namespace rbising;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {

BoundaryCondition random_eta(const Volume& v, std::mt19937& gen) {
    BoundaryCondition e(v, 1);
    for (int b = 0; b < v.num_boundary(); ++b) e[b] = (gen() & 1u) ? 1 : -1;
    return e;
}

void check_report_terms_equal(const ExpansionReport& a, const ExpansionReport& b) {
    CHECK(a.vacuum == b.vacuum);
    CHECK(a.phi0_total == b.phi0_total);
    CHECK(a.psi == b.psi);
    CHECK(a.psi_infty == b.psi_infty);
    REQUIRE(a.aggregates.size() == b.aggregates.size());
    for (size_t i = 0; i < a.aggregates.size(); ++i) {
        CHECK(a.aggregates[i].contours == b.aggregates[i].contours);
        CHECK(a.aggregates[i].log_zhat == b.aggregates[i].log_zhat);
    }
}

}  // namespace

TEST_CASE("balance") {
    Volume v(6);
    auto strip = bottom_strip(v, -4, 9);
    REQUIRE(strip.length() == 11);
    REQUIRE(strip.boundary_minus.size() == 9);
    auto eta = with_minus(v, strip.boundary_minus);
    CHECK_FALSE(is_balanced(strip, eta, 5));
    eta[strip.boundary_minus[4]] = 1;
    CHECK(is_balanced(strip, eta, 5));
    CHECK(is_balanced(contour_of_region({{0, 0}}, v), BoundaryCondition(v, -1), 5));
    CHECK(is_balanced(11, -8, 5));
    CHECK_FALSE(is_balanced(11, -9, 5));
}

TEST_CASE("scale schedule") {
    auto a = build_schedule(500, 0.1, 10);
    REQUIRE(a.levels() >= 1);
    CHECK_THAT(a.L[1], WithinRel(100.0, 1e-14));
    CHECK_THAT(a.l[1], WithinRel(std::exp(50.0), 1e-14));
    auto b = build_schedule(5, 0.1, 10);
    CHECK(b.levels() == 1);
    CHECK_THAT(b.L[1], WithinRel(1.0, 1e-14));
    CHECK_THAT(b.l[1], WithinRel(std::exp(0.5), 1e-14));
    CHECK_THAT(build_schedule(5, 0.1, std::exp(10.0)).l_infty, WithinRel(std::pow(10.0, 1.1), 1e-12));
    for (int n = 1; n <= a.levels(); ++n) {
        CHECK(a.L[n] > 0);
        CHECK(a.l[n] > 0);
        CHECK_THAT(a.L[n], WithinRel(a.l[n - 1] / std::pow(5.0, n), 1e-14));
    }
    CHECK_THROWS_AS(build_schedule(1, 0.1, 10), std::invalid_argument);
    CHECK_THROWS_AS(build_schedule(5, 0, 10), std::invalid_argument);
}

TEST_CASE("aggregate decomposition") {
    SECTION("nothing unbalanced") {
        Volume v(4);
        auto d = decompose_aggregates(std::vector<Contour>{}, build_schedule(5, 0.1, 4), v);
        CHECK(d.aggregates.empty());
    }
    SECTION("strip fixture") {
        auto f = strip_fixture();
        std::vector<Contour> unb;
        for (auto& c : f.contours)
            if (!is_balanced(c, f.eta, f.schedule.l0)) unb.push_back(c);
        REQUIRE(unb.size() == 2);
        auto d = decompose_aggregates(unb, f.schedule, f.volume);
        REQUIRE(d.aggregates.size() == 2);
        int normal = 0, corner = 0;
        for (auto& g : d.aggregates) {
            if (g.is_corner()) {
                ++corner;
                CHECK(f.volume.corner(g.corner) == DualSite{-121, 121});
            } else {
                ++normal;
                CHECK(g.order == 1);
                CHECK(g.hull_length == 100);
            }
            CHECK_FALSE(g.flagged);
        }
        CHECK(normal == 1);
        CHECK(corner == 1);
    }
    SECTION("contour hugging a corner") {
        Volume v(20);
        auto c = contour_of_region({{-20, -20}}, v);
        auto eta = with_minus(v, c.boundary_minus);
        REQUIRE_FALSE(is_balanced(c, eta, 5));
        auto d = decompose_aggregates({c}, build_schedule(5, 0.1, 20), v);
        REQUIRE(d.aggregates.size() == 1);
        CHECK(d.aggregates[0].is_corner());
        CHECK(v.corner(d.aggregates[0].corner) == DualSite{-41, -41});
        CHECK(d.flagged.empty());
    }
}

TEST_CASE("aggregates partition the unbalanced contours") {
    Volume v(12);
    auto s = build_schedule(50, 0.1, 12);
    std::mt19937 gen(31);
    for (int rep = 0; rep < 20; ++rep) {
        std::vector<Contour> cs;
        int x = -12;
        while (x < 10) {
            int len = 1 + gen() % 4;
            if (x + len > 12) break;
            if (gen() % 2) cs.push_back(bottom_strip(v, x, len));
            x += len + 1 + gen() % 6;
        }
        if (cs.empty()) continue;
        auto d = decompose_aggregates(cs, s, v);
        std::vector<int> hits(cs.size(), 0);
        for (auto& g : d.aggregates)
            for (int m : g.members) ++hits[m];
        for (size_t i = 0; i < cs.size(); ++i) {
            CHECK(hits[i] == 1);
            REQUIRE(d.owner[i] >= 0);
        }
        for (size_t a = 0; a < d.aggregates.size(); ++a)
            for (size_t b = a + 1; b < d.aggregates.size(); ++b) {
                auto &A = d.aggregates[a], &B = d.aggregates[b];
                if (A.is_corner() || B.is_corner() || A.order != B.order) continue;
                for (int i : A.members)
                    for (int j : B.members)
                        CHECK(dual_distance(contour_dual_bonds(cs[i], v), contour_dual_bonds(cs[j], v)) > s.L[A.order]);
            }
    }
}

TEST_CASE("aggregates are local in the boundary condition") {
    auto f = strip_fixture();
    const Volume& v = f.volume;
    auto decompose = [&](const BoundaryCondition& eta) {
        std::vector<Contour> unb;
        for (auto& c : f.contours)
            if (!is_balanced(c, eta, f.schedule.l0)) unb.push_back(c);
        return decompose_aggregates(unb, f.schedule, v);
    };
    auto d0 = decompose(f.eta);
    int far = v.boundary_index_of_exterior({0, v.N() + 1});
    for (auto& g : d0.aggregates) REQUIRE_FALSE(std::binary_search(g.domain.begin(), g.domain.end(), far));
    auto eta = f.eta;
    eta[far] = static_cast<int8_t>(-eta[far]);
    auto d1 = decompose(eta);
    REQUIRE(d1.aggregates.size() == d0.aggregates.size());
    for (size_t i = 0; i < d0.aggregates.size(); ++i) {
        CHECK(d0.aggregates[i].members == d1.aggregates[i].members);
        CHECK(d0.aggregates[i].order == d1.aggregates[i].order);
        CHECK(d0.aggregates[i].domain == d1.aggregates[i].domain);
    }
}

TEST_CASE("step zero") {
    SECTION("single polymer") {
        Volume v(3);
        ContourEnsemble e(v, {contour_of_region({{0, 0}}, v)});
        CouplingParams p{1, 1};
        auto z = step_zero_expansion(e, BoundaryCondition(v, 1), p, build_schedule(5, 0.1, 3));
        CHECK_THAT(z.phi0_total, WithinRel(std::log1p(std::exp(-8.0)), 1e-12));
    }
    SECTION("locality") {
        auto f = balanced_fixture();
        ContourEnsemble e(f.volume, f.contours);
        CouplingParams p{1, 1};
        auto a = step_zero_expansion(e, f.eta, p, f.schedule);
        auto eta = f.eta;
        eta[f.volume.boundary_index_of_exterior({0, f.volume.N() + 1})] = -1;
        auto b = step_zero_expansion(e, eta, p, f.schedule);
        REQUIRE(a.phi0.weights.size() == b.phi0.weights.size());
        for (auto& [c, w] : a.phi0.weights) CHECK(b.phi0.at(c) == w);
    }
    SECTION("balanced fixture sums to its polymer partition function") {
        auto f = balanced_fixture();
        ContourEnsemble e(f.volume, f.contours);
        CouplingParams p{0.6, 1};
        auto z = step_zero_expansion(e, f.eta, p, f.schedule);
        CHECK(z.unbalanced == 0);
        CHECK_THAT(z.phi0_total, WithinRel(e.log_partition(e.all(), e.weights(f.eta, p)), 1e-12));
    }
}

TEST_CASE("aggregate partition functions") {
    Volume v(3);
    auto a = contour_of_region({{0, 0}}, v), b = contour_of_region({{1, 0}}, v);
    ContourEnsemble e(v, {a, b});
    std::vector<double> rho{0.2, 0.3};
    CHECK(aggregate_logZ(e, 0, rho) == 0.0);
    CHECK_THAT(aggregate_logZ(e, 1, rho), WithinAbs(std::log(1.2), 1e-15));
    CHECK_THAT(aggregate_logZ(e, 3, rho), WithinAbs(std::log(1.5), 1e-15));
}

TEST_CASE("catalog expansion is exact") {
    for (int N : {1, 2}) {
        Volume v(N);
        const auto& cat = catalog_for(v);
        std::mt19937 gen(40 + N);
        SECTION("plus boundary, N = " + std::to_string(N)) {
            CouplingParams p{1, 1};
            auto r = sequential_expansion(cat, BoundaryCondition(v, 1), p, build_schedule(5, 0.1, N));
            CHECK(r.aggregates.empty());
            CHECK_THAT(r.vacuum + r.phi0_total, WithinRel(constrained_logZ(v, BoundaryCondition(v, 1), p).plus, 1e-9));
        }
        SECTION("random boundary, N = " + std::to_string(N)) {
            for (int rep = 0; rep < 4; ++rep) {
                auto eta = rep == 0 && N == 2 ? unbalanced_strip_eta(v, 4) : random_eta(v, gen);
                CouplingParams p{2, 1};
                auto r = sequential_expansion(cat, eta, p, build_schedule(5, 0.1, N));
                CHECK_THAT(r.total(), WithinAbs(constrained_logZ(v, eta, p).plus, 1e-8));
                CHECK_THAT(r.total(), WithinAbs(polymer_logZ(cat, eta, p), 1e-8));
                CHECK_FALSE(r.truncated);
            }
        }
        SECTION("conjugation, N = " + std::to_string(N)) {
            auto eta = random_eta(v, gen);
            CouplingParams p{1.5, 1};
            CatalogExpansion ce(cat, build_schedule(5, 0.1, N));
            check_report_terms_equal(ce.expand(eta, p, -1), ce.expand(eta.flipped(), p, 1));
        }
    }
}

TEST_CASE("unbalanced strip boundary produces aggregates") {
    Volume v(2);
    auto eta = unbalanced_strip_eta(v, 5);
    CatalogExpansion ce(catalog_for(v), build_schedule(5, 0.1, 2));
    auto u = ce.unbalanced(eta);
    CHECK_FALSE(u.empty());
    auto r = ce.expand(eta, {2, 1});
    CHECK(r.unbalanced == static_cast<int>(u.size()));
    CHECK_FALSE(r.aggregates.empty());
}

TEST_CASE("literal expansion of the strip fixture") {
    auto f = strip_fixture();
    ContourEnsemble e(f.volume, f.contours);
    CouplingParams p{1, 1};
    auto le = literal_sequential_expansion(e, f.eta, p, f.schedule);
    CHECK_THAT(le.report.total(), WithinAbs(le.exact_logZ, 1e-8));
    CHECK(le.report.aggregates.size() == 2);
    for (auto& L : le.levels) CHECK(L.factorization_residual < 1e-10);
}

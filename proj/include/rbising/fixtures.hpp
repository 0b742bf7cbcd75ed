#ifndef RBISING_FIXTURES_HPP
#define RBISING_FIXTURES_HPP

// Hand-built contour ensembles and boundary conditions used by `validate`,
// the tests and the acceptance run.

#include <string>
#include <vector>

#include "multiscale.hpp"

namespace rbising {

// Boundary bonds of the bottom wall whose exterior x lies in [x0, x1).
inline BoundaryBonds bottom_run(const Volume& v, int x0, int x1) {
    BoundaryBonds out;
    for (int b = 0; b < v.num_boundary(); ++b) {
        Site e = v.boundary_exterior(b);
        if (e.y == -v.N() - 1 && e.x >= x0 && e.x < x1) out.push_back(b);
    }
    return out;
}

inline BoundaryCondition with_minus(const Volume& v, const BoundaryBonds& P, int base = 1) {
    BoundaryCondition eta(v, base);
    for (int b : P) eta[b] = static_cast<int8_t>(-base);
    return eta;
}

// Strip of k sites along the bottom wall, starting at x0.
inline Contour bottom_strip(const Volume& v, int x0, int k) {
    std::vector<Site> s;
    for (int x = x0; x < x0 + k; ++x) s.push_back({x, -v.N()});
    return contour_of_region(s, v);
}

// Λ(60) with a 100-site unbalanced strip on the bottom wall and a corner cut,
// plus short balanced contours next to both and in the bulk.  With l0 = 50
// the schedule has two orders; the strip is a 1-aggregate and the corner cut
// a corner aggregate.
struct StripFixture {
    Volume volume{60};
    std::vector<Contour> contours;
    BoundaryCondition eta;
    ScaleSchedule schedule;
};

inline StripFixture strip_fixture() {
    StripFixture f;
    const Volume& v = f.volume;
    const int N = v.N();
    auto reg = [&](std::vector<Site> s) { f.contours.push_back(contour_of_region(s, v)); };
    f.contours.push_back(bottom_strip(v, -50, 100));
    reg({{0, -N + 1}});
    reg({{10, -N + 1}, {11, -N + 1}, {12, -N + 1}, {13, -N + 1}});
    reg({{11, -N + 2}});
    reg({{-N, N}});
    reg({{-N + 1, N}});
    reg({{-N, N - 1}, {-N + 1, N - 1}, {-N + 2, N - 1}, {-N + 3, N - 1}, {-N + 4, N - 1}});
    reg({{-N + 3, N}});
    reg({{-N + 2, N - 2}});
    reg({{0, 0}});
    reg({{1, 0}});
    f.eta = with_minus(v, bottom_run(v, -50, 50));
    for (int b = 0; b < v.num_boundary(); ++b) {
        Site e = v.boundary_exterior(b);
        if ((e.x == -N - 1 && e.y == N) || (e.x == -N && e.y == N + 1)) f.eta[b] = -1;
    }
    f.schedule = build_schedule(50, 0.1, N);
    return f;
}

// Balanced contours only: every 0-cluster is a cluster of short contours.
inline StripFixture balanced_fixture() {
    StripFixture f;
    const Volume& v = f.volume;
    const int N = v.N();
    auto reg = [&](std::vector<Site> s) { f.contours.push_back(contour_of_region(s, v)); };
    reg({{0, 0}});
    reg({{1, 0}});
    reg({{0, 1}});
    reg({{5, 5}, {6, 5}});
    reg({{6, 6}});
    reg({{0, -N}});
    reg({{1, -N}});
    reg({{0, -N + 1}});
    reg({{N, 0}, {N, 1}});
    reg({{-N, -N}});
    f.eta = BoundaryCondition(v, 1);
    f.schedule = build_schedule(50, 0.1, N);
    return f;
}

// η carrying a minus run of `len` bonds on the bottom wall that wraps around
// the bottom-left corner, so the strips cut from that corner along the run
// are unbalanced.
inline BoundaryCondition unbalanced_strip_eta(const Volume& v, int len) {
    auto eta = with_minus(v, bottom_run(v, -v.N(), -v.N() + len));
    eta[v.boundary_index_of_exterior({-v.N() - 1, -v.N()})] = -1;
    return eta;
}

}  // namespace rbising

#endif

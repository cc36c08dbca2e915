#include "doctest.h"

#include <algorithm>
#include <cmath>

#include <bchar/balls.hpp>

using namespace bchar;

TEST_CASE("ball packing geometry 2D") {
    Domain<2> dom{{0, 0}, {1, 1}, {4, 4}};
    Mesh<2> mesh(dom, 1.0);
    BallCloud<2> cloud(mesh, {2, 2}, 0.98);
    CHECK(cloud.balls_per_cell() == 4);
    CHECK(cloud.ball_count() == 64);
    // radius = alpha * (h / balls_per_axis) / 2
    CHECK(cloud.radius() == doctest::Approx(0.98 * 0.25 / 2.0 / 2.0));

    // balls stay inside their cell and are pairwise disjoint
    for (int i = 0; i < cloud.ball_count(); ++i) {
        const auto bi = cloud.ball(i);
        const int cell = cloud.cell_of(i);
        const auto lo = mesh.cell_lo(cell);
        for (int k = 0; k < 2; ++k) {
            CHECK(bi.center[k] - bi.radius >= lo[k] - 1e-12);
            CHECK(bi.center[k] + bi.radius <=
                  lo[k] + mesh.cell_size()[k] + 1e-12);
        }
        for (int j = i + 1; j < cloud.ball_count(); ++j) {
            const auto bj = cloud.ball(j);
            double d2 = 0;
            for (int k = 0; k < 2; ++k) {
                const double d = bi.center[k] - bj.center[k];
                d2 += d * d;
            }
            CHECK(std::sqrt(d2) >= bi.radius + bj.radius - 1e-12);
        }
    }
}

TEST_CASE("porous density matches cell mass") {
    Domain<2> dom{{0, 0}, {1, 1}, {2, 2}};
    Mesh<2> mesh(dom, std::vector<double>{0.5, 1.0, 0.8, 0.9});
    BallCloud<2> cloud(mesh, {2, 2}, 0.98);
    const double bv = ball_volume<2>(cloud.radius());
    for (int c = 0; c < mesh.cell_count(); ++c) {
        // rho_K * phi_K * (sum of ball volumes in K) = |K|_phi
        CHECK(cloud.rho(c) * mesh.porosity(c) * cloud.balls_per_cell() * bv ==
              doctest::Approx(mesh.porous_volume(c)));
    }
}

TEST_CASE("ball packing 3D counts") {
    Domain<3> dom{{0, 0, 0}, {1, 1, 1}, {2, 2, 2}};
    Mesh<3> mesh(dom, 1.0);
    BallCloud<3> cloud(mesh, {2, 2, 2}, 0.98);
    CHECK(cloud.balls_per_cell() == 8);
    CHECK(cloud.ball_count() == 64);
    CHECK(cloud.flat_of(cloud.cell_of(13), cloud.slot_of(13)) == 13);
}

TEST_CASE("neighbor_candidates finds every overlapping ball") {
    Domain<2> dom{{0, 0}, {1, 1}, {8, 8}};
    Mesh<2> mesh(dom, 1.0);
    BallCloud<2> cloud(mesh, {2, 2}, 0.98);
    Ball<2> query{{0.31, 0.47}, 0.11};
    const auto cand = cloud.neighbor_candidates(query);
    for (int i = 0; i < cloud.ball_count(); ++i) {
        if (ball_intersection_volume<2>(query, cloud.ball(i)) > 0.0) {
            CHECK(std::find(cand.begin(), cand.end(), i) != cand.end());
        }
    }
}

TEST_CASE("ball packing rejects bad arguments") {
    Domain<2> dom{{0, 0}, {1, 1}, {2, 2}};
    Mesh<2> mesh(dom, 1.0);
    CHECK_THROWS_AS(BallCloud<2>(mesh, {0, 2}, 0.98), Error);
}

#include <doctest.h>

#include <cmath>
#include <set>
#include <vector>

#include "coagent/four_rooms.hpp"

using namespace coagent;

TEST_CASE("layout has 104 open cells, 25 per room plus 4 hallways") {
    FourRooms env;
    CHECK(env.n_states() == 104);

    // hallway cells of the canonical map
    const std::set<std::pair<int, int>> hallways = {
        {3, 6}, {6, 2}, {7, 9}, {10, 6}};
    for (const auto& [r, c] : hallways) CHECK(env.is_open(r, c));

    // each room quadrant holds exactly 25 open non-hallway cells
    auto room_count = [&](int r0, int r1, int c0, int c1) {
        int n = 0;
        for (int r = r0; r <= r1; ++r)
            for (int c = c0; c <= c1; ++c)
                if (env.is_open(r, c) && !hallways.count({r, c})) ++n;
        return n;
    };
    CHECK(room_count(1, 5, 1, 5) == 25);
    CHECK(room_count(1, 5, 7, 11) == 25);
    CHECK(room_count(7, 11, 1, 5) == 25);
    CHECK(room_count(6, 11, 7, 11) == 25);

    int open = 0;
    for (char ch : FourRooms::layout())
        if (ch == ' ') ++open;
    CHECK(open == 104);
}

TEST_CASE("reset is deterministic under a fixed seed and never puts the goal on the agent") {
    FourRooms env;
    Rng rng_a(123), rng_b(123);
    for (int i = 0; i < 200; ++i) {
        const auto a = env.reset_state(rng_a);
        const auto b = env.reset_state(rng_b);
        CHECK(a.agent == b.agent);
        CHECK(a.goal == b.goal);
        CHECK(a.agent != a.goal);
    }
}

TEST_CASE("goal distribution over 10000 resets is uniform (chi-square)") {
    FourRooms env;
    Rng rng(9);
    std::vector<int> counts(104, 0);
    const int n = 10000;
    for (int i = 0; i < n; ++i) ++counts[env.reset_state(rng).goal];
    const double expected = n / 104.0;
    double chi2 = 0.0;
    for (int c : counts) chi2 += (c - expected) * (c - expected) / expected;
    // p > 0.01 with df = 103: critical value 139.31 (Wilson-Hilferty)
    CHECK(chi2 < 139.31);
}

TEST_CASE("one-step kernel: 2/3 intended, 1/9 each slip, walls collapse to self") {
    FourRooms env;
    for (int cell = 0; cell < env.n_states(); ++cell) {
        for (int a = 0; a < env.n_actions(); ++a) {
            const auto dist = env.transition_kernel(cell, a);
            double sum = 0.0;
            for (double p : dist) sum += p;
            CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));
        }
    }
    // corner cell (1,1): up and left are walls
    const int corner = env.cell_at(1, 1);
    REQUIRE(corner >= 0);
    const auto dist = env.transition_kernel(corner, kRight);
    CHECK(dist[corner] == doctest::Approx(2.0 / 9.0));  // both blocked slips
    CHECK(dist[env.cell_at(1, 2)] == doctest::Approx(2.0 / 3.0));
    CHECK(dist[env.cell_at(2, 1)] == doctest::Approx(1.0 / 9.0));
}

TEST_CASE("sampled transitions match the analytic kernel") {
    FourRooms env;
    Rng rng(77);
    const std::vector<int> cells = {env.cell_at(1, 1), env.cell_at(3, 6),
                                    env.cell_at(9, 9)};
    const int n = 60000;
    for (int cell : cells) {
        for (int a = 0; a < env.n_actions(); ++a) {
            const auto kernel = env.transition_kernel(cell, a);
            std::vector<int> counts(env.n_states(), 0);
            FourRooms::State s{cell, (cell + 1) % 104};
            for (int i = 0; i < n; ++i)
                ++counts[env.step_state(s, a, rng).next];
            for (int next = 0; next < env.n_states(); ++next) {
                const double freq = counts[next] / static_cast<double>(n);
                const double p = kernel[next];
                const double tol = 4.5 * std::sqrt(p * (1 - p) / n) + 1e-9;
                CHECK(std::abs(freq - p) <= tol);
            }
        }
    }
}

TEST_CASE("stepping toward an adjacent goal succeeds with frequency 2/3") {
    FourRooms env;
    Rng rng(5);
    const int agent = env.cell_at(2, 2);
    const int goal = env.cell_at(2, 3);  // right of the agent
    FourRooms::State s{agent, goal};
    const int n = 60000;
    int done = 0;
    for (int i = 0; i < n; ++i) {
        const auto out = env.step_state(s, kRight, rng);
        CHECK(out.done == (out.next == goal));
        CHECK(out.reward == (out.done ? 1.0 : 0.0));
        if (out.done) ++done;
    }
    const double freq = done / static_cast<double>(n);
    CHECK(std::abs(freq - 2.0 / 3.0) < 0.01);
}

TEST_CASE("environment interface hides the goal and ends episodes on it") {
    FourRooms env;
    Rng rng(31);
    for (int ep = 0; ep < 50; ++ep) {
        int state = env.reset(rng);
        const int goal = env.current().goal;
        for (int t = 0; t < 2000; ++t) {
            const auto out = env.step(state, rng.uniform_int(4), rng);
            CHECK((out.reward == 1.0) == out.done);
            CHECK((out.next == goal) == out.done);
            state = out.next;
            if (out.done) break;
        }
    }
}

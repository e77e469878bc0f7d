#include <doctest.h>

#include <fstream>
#include <sstream>

#include "coagent/exact_values.hpp"
#include "coagent/gradients.hpp"
#include "coagent/verification.hpp"

using namespace coagent;
using namespace coagent::oracle;

namespace {

FiniteMdpSpec self_loop(double reward, double gamma) {
    FiniteMdpSpec mdp;
    mdp.n_states = 1;
    mdp.n_actions = 2;
    mdp.transition = {{{1.0}, {1.0}}};
    mdp.reward = {{{reward}, {reward}}};
    mdp.gamma = gamma;
    mdp.init_dist = {1.0};
    return mdp;
}

}  // namespace

TEST_CASE("self-loop with unit reward: every value is the geometric sum") {
    const auto mdp = self_loop(1.0, 0.5);
    Network net({Topology::fon, {1}, 2}, 1, 1.0, 1.0);
    const auto tables = exact_q(net, mdp);
    CHECK(tables.v_down[0](0, 0) == doctest::Approx(2.0).epsilon(1e-12));
    CHECK(tables.v_up[0](0, 0) == doctest::Approx(2.0).epsilon(1e-12));
    CHECK(tables.q_leaf[0](0, 0) == doctest::Approx(2.0).epsilon(1e-12));
    CHECK(tables.q_leaf[0](0, 1) == doctest::Approx(2.0).epsilon(1e-12));
    CHECK(expected_return(net, mdp) == doctest::Approx(2.0).epsilon(1e-12));
}

TEST_CASE("gamma zero reduces bottom action values to one-step rewards") {
    auto mdp = fixture_3state();
    mdp.gamma = 0.0;
    Network net({Topology::hoc, {1, 2}, 2}, 3, 1.0, 1.0);
    Rng rng(14);
    ParamLayout layout(net);
    layout.materialize(layout.random_theta(rng), net);
    const auto tables = exact_q(net, mdp);
    const StackSpace stacks(net);
    for (int k = 0; k < stacks.n_stacks(1); ++k)
        for (int s = 0; s < 3; ++s)
            for (int a = 0; a < 2; ++a)
                CHECK(tables.q_leaf[k](s, a) ==
                      doctest::Approx(mdp.expected_reward(s, a)).epsilon(1e-14));
}

TEST_CASE("a level's value is the policy mix of its children's values") {
    const auto mdp = fixture_3state();
    Network net({Topology::hoc, {1, 2}, 2}, 3, 1.0, 1.0);
    Rng rng(15);
    ParamLayout layout(net);
    layout.materialize(layout.random_theta(rng), net);
    const auto tables = exact_q(net, mdp);
    for (int s = 0; s < 3; ++s) {
        const auto probs = net.policy_distribution(0, s);
        const double mix =
            probs[0] * tables.v_down[1](0, s) + probs[1] * tables.v_down[1](1, s);
        CHECK(tables.v_down[0](0, s) == doctest::Approx(mix).epsilon(1e-12));
    }
}

TEST_CASE("Bellman residuals stay at solver precision on random parameters") {
    Rng rng(16);
    for (auto topology : {Topology::hoc, Topology::fon}) {
        for (double gamma : {0.0, 0.5, 0.9}) {
            auto mdp = fixture_5state();
            mdp.gamma = gamma;
            Network net({topology, {1, 2, 2}, 2}, 5, 1.0, 1.0);
            ParamLayout layout(net);
            layout.materialize(layout.random_theta(rng), net);
            const auto tables = exact_q(net, mdp);
            const auto residuals = bellman_residuals(net, mdp, tables);
            CHECK(residuals.max() <= 1e-10);
        }
    }
}

TEST_CASE("cascade kernels generalize across levels consistently") {
    const auto mdp = fixture_3state();
    Network net({Topology::hoc, {1, 2, 2}, 2}, 3, 1.0, 1.0);
    Rng rng(17);
    ParamLayout layout(net);
    layout.materialize(layout.random_theta(rng), net);
    const auto tables = exact_q(net, mdp);
    const StackSpace stacks(net);
    const int bottom = stacks.depth() - 1;

    auto beta_at = [&](int level, int stack, int s) {
        return level == 0 ? 0.0
                          : net.termination_prob(stacks.option_at(level, stack), s);
    };
    auto pol = [&](int level, int stack, int s, int c) {
        return net.policy_distribution(stacks.option_at(level, stack), s)[c];
    };

    // independent enumeration: from upward at (l, k), probability of passing
    // through downward execution at (m, p)
    auto direct = [&](int l, int k, int m, int p, int s) {
        double total = 0.0;
        double up = 1.0;
        for (int stop = l; stop >= 0; --stop) {
            const int anc = stacks.prefix(l, k, stop);
            const double stay = stop == 0 ? 1.0 : 1.0 - beta_at(stop, anc, s);
            if (stop <= m) {
                // descend from the stop level to level m; the ancestors of p
                // must match k up to the stop level
                if (stacks.prefix(m, p, stop) == anc) {
                    double walk = up * stay;
                    for (int d = stop; d < m; ++d) {
                        const int next = stacks.prefix(m, p, d + 1);
                        walk *= pol(d, stacks.prefix(m, p, d), s,
                                    next % stacks.branching(d));
                    }
                    total += walk;
                }
            }
            if (stop > 0) up *= beta_at(stop, anc, s);
        }
        return total;
    };

    for (int s = 0; s < 3; ++s) {
        // downward composition: level-l kernel then policy products
        for (int l = 0; l <= bottom; ++l) {
            for (int m = l; m <= bottom; ++m) {
                for (int k = 0; k < stacks.n_stacks(l); ++k) {
                    for (int p = 0; p < stacks.n_stacks(m); ++p) {
                        double composed = 0.0;
                        for (int mid = 0; mid < stacks.n_stacks(l); ++mid) {
                            if (stacks.prefix(m, p, l) != mid) continue;
                            double walk = tables.cascade_kernel[l][s](k, mid);
                            for (int d = l; d < m; ++d) {
                                const int next = stacks.prefix(m, p, d + 1);
                                walk *= pol(d, stacks.prefix(m, p, d), s,
                                            next % stacks.branching(d));
                            }
                            composed += walk;
                        }
                        CHECK(composed ==
                              doctest::Approx(direct(l, k, m, p, s)).epsilon(1e-11));
                    }
                }
            }
        }
        // upward composition: deeper upward states reach a shallow level's
        // kernel through the termination product
        for (int l = 0; l <= bottom; ++l) {
            for (int m = 0; m <= l; ++m) {
                for (int k = 0; k < stacks.n_stacks(l); ++k) {
                    double casc = 1.0;
                    for (int j = m + 1; j <= l; ++j)
                        casc *= beta_at(j, stacks.prefix(l, k, j), s);
                    const int km = stacks.prefix(l, k, m);
                    for (int p = 0; p < stacks.n_stacks(m); ++p) {
                        const double composed =
                            casc * tables.cascade_kernel[m][s](km, p);
                        CHECK(composed ==
                              doctest::Approx(direct(l, k, m, p, s)).epsilon(1e-11));
                    }
                }
            }
        }
    }
}

TEST_CASE("gamma of one without absorption is rejected") {
    auto mdp = fixture_3state();
    mdp.gamma = 1.0;
    Network net({Topology::fon, {1, 1}, 2}, 3, 1.0, 1.0);
    CHECK_THROWS_AS(exact_q(net, mdp), std::invalid_argument);
}

TEST_CASE("the action-count contract with the MDP is enforced") {
    const auto mdp = fixture_3state();  // two actions
    Network net({Topology::fon, {1}, 4}, 3, 1.0, 1.0);
    CHECK_THROWS_AS(exact_q(net, mdp), std::invalid_argument);
}

TEST_CASE("bundled fixture files match the built-in generators") {
    auto read = [](const std::string& path) {
        std::ifstream in(path);
        REQUIRE(in);
        std::stringstream buf;
        buf << in.rdbuf();
        return buf.str();
    };
    const std::string dir = COAGENT_FIXTURE_DIR;
    CHECK(mdp_from_json(read(dir + "/mdp_3state.json")) == fixture_3state());
    CHECK(mdp_from_json(read(dir + "/mdp_5state.json")) == fixture_5state());
}

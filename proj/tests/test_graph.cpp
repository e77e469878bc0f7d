#include <doctest.h>

#include <set>

#include "coagent/four_rooms.hpp"
#include "coagent/graph.hpp"
#include "coagent/learner.hpp"

using namespace coagent;

namespace {

CoagentId pi(int opt) { return {CoagentKind::policy, opt}; }
CoagentId beta(int opt) { return {CoagentKind::termination, opt}; }

}  // namespace

TEST_CASE("three-level binary HOC: 14 vertices and the full edge set") {
    const NetworkSpec spec{Topology::hoc, {1, 2, 2}, 4};
    const auto g = build_graph(spec);
    CHECK(g.n_vertices() == 14);

    // option ids: root 0, level one {1,2}, level two {3,4,5,6}
    std::set<std::pair<int, int>> expected;
    auto add = [&](CoagentId a, CoagentId b) {
        expected.insert({CoagentGraph::vertex(a), CoagentGraph::vertex(b)});
    };
    for (int o = 0; o < 7; ++o) add(beta(o), pi(o));          // keep-going edges
    for (int o = 3; o < 7; ++o) add(pi(o), beta(o));          // primitive step
    add(pi(0), pi(1)); add(pi(0), pi(2));                     // selection, downward
    add(pi(1), pi(3)); add(pi(1), pi(4));
    add(pi(2), pi(5)); add(pi(2), pi(6));
    add(beta(1), beta(0)); add(beta(2), beta(0));             // cascade, upward
    add(beta(3), beta(1)); add(beta(4), beta(1));
    add(beta(5), beta(2)); add(beta(6), beta(2));
    CHECK(g.edges == expected);
    CHECK(!validate_graph(g, spec).has_value());
}

TEST_CASE("single-option network: two vertices linked both ways") {
    const NetworkSpec spec{Topology::fon, {1}, 4};
    const auto g = build_graph(spec);
    CHECK(g.n_vertices() == 2);
    CHECK(g.edges.size() == 2);
    CHECK(g.has_edge(pi(0), beta(0)));
    CHECK(g.has_edge(beta(0), pi(0)));
    CHECK(!validate_graph(g, spec).has_value());
}

TEST_CASE("two-layer FON and HOC induce identical graphs") {
    const NetworkSpec fon{Topology::fon, {1, 2}, 4};
    const NetworkSpec hoc{Topology::hoc, {1, 2}, 4};
    const auto a = build_graph(fon);
    const auto b = build_graph(hoc);
    CHECK(a.n_options == b.n_options);
    CHECK(a.edges == b.edges);
}

TEST_CASE("a FON connects layers all-to-all") {
    const NetworkSpec spec{Topology::fon, {1, 2, 2}, 4};
    const auto g = build_graph(spec);
    CHECK(g.n_vertices() == 10);
    // both level-one options feed both bottom options and vice versa
    for (int mid : {1, 2})
        for (int low : {3, 4}) {
            CHECK(g.has_edge(pi(mid), pi(low)));
            CHECK(g.has_edge(beta(low), beta(mid)));
        }
    CHECK(!validate_graph(g, spec).has_value());
}

TEST_CASE("validation flags unreachable vertices and missing primitive edges") {
    const NetworkSpec spec{Topology::fon, {1, 1}, 4};
    auto g = build_graph(spec);
    CHECK(g.n_vertices() == 4);
    CHECK(!validate_graph(g, spec).has_value());

    auto broken = g;
    broken.edges.erase({CoagentGraph::vertex(beta(1)),
                        CoagentGraph::vertex(beta(0))});
    const auto violation = validate_graph(broken, spec);
    REQUIRE(violation.has_value());
    CHECK(violation->find("unreachable") != std::string::npos);

    auto no_primitive = g;
    no_primitive.edges.erase({CoagentGraph::vertex(pi(1)),
                              CoagentGraph::vertex(beta(1))});
    CHECK(validate_graph(no_primitive, spec).has_value());
}

TEST_CASE("contracting the keep-going edges doubles the tree and adds loops") {
    const NetworkSpec spec{Topology::hoc, {1, 2, 2}, 4};
    const auto contracted = contract_cross_edges(build_graph(spec));

    std::set<std::pair<int, int>> expected;
    for (int o = 0; o < 7; ++o) expected.insert({o, o});  // loops everywhere
    const std::vector<std::pair<int, int>> tree = {{0, 1}, {0, 2}, {1, 3},
                                                   {1, 4}, {2, 5}, {2, 6}};
    for (const auto& [p, c] : tree) {
        expected.insert({p, c});
        expected.insert({c, p});
    }
    CHECK(contracted.edges == expected);
}

TEST_CASE("recorded paths close on primitives; closing empty is an error") {
    RecordingSink sink;
    sink.record({pi(0), 7, 1}, false);
    sink.record({pi(1), 7, 2}, true);  // primitive closes
    REQUIRE(sink.paths().size() == 1);
    CHECK(sink.paths()[0].steps.size() == 2);
    CHECK(sink.paths()[0].primitive == 2);
    CHECK(!sink.open());
    CHECK_THROWS_AS(sink.close(), std::logic_error);
}

TEST_CASE("simulation only walks graph edges, upward then downward") {
    for (auto topology : {Topology::hoc, Topology::fon}) {
        const NetworkSpec spec{topology, {1, 2, 2}, 4};
        const auto g = build_graph(spec);
        FourRooms env;
        Learner learner(spec, env.n_states(), Hyperparams{});
        Rng rng(17);
        for (int ep = 0; ep < 5; ++ep) {
            RecordingSink sink;
            learner.learn_episode(env, 300, rng, &sink);
            REQUIRE(!sink.paths().empty());
            const ExecutionStep* previous = nullptr;
            for (const auto& path : sink.paths()) {
                REQUIRE(!path.steps.empty());
                bool seen_policy = false;
                for (const auto& step : path.steps) {
                    if (step.coagent.kind == CoagentKind::policy)
                        seen_policy = true;
                    else
                        CHECK(!seen_policy);  // terminations precede policies
                    if (previous)
                        CHECK(g.has_edge(previous->coagent, step.coagent));
                    previous = &step;
                }
                CHECK(path.steps.back().coagent.kind == CoagentKind::policy);
                CHECK(path.steps.back().action == path.primitive);
            }
        }
    }
}

TEST_CASE("DOT export names every coagent") {
    const NetworkSpec spec{Topology::hoc, {1, 2}, 4};
    const auto dot = graph_to_dot(build_graph(spec), spec);
    CHECK(dot.find("digraph") != std::string::npos);
    CHECK(dot.find("pi()") != std::string::npos);
    CHECK(dot.find("beta(2)") != std::string::npos);
}

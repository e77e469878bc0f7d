#include "coagent/graph.hpp"

#include <sstream>
#include <vector>

namespace coagent {

CoagentGraph build_graph(const NetworkSpec& spec) {
    const Network net(spec, /*n_states=*/1, 1.0, 1.0);
    CoagentGraph g;
    g.n_options = net.n_options();

    auto pi = [](int opt) { return CoagentId{CoagentKind::policy, opt}; };
    auto beta = [](int opt) { return CoagentId{CoagentKind::termination, opt}; };
    auto add = [&](const CoagentId& a, const CoagentId& b) {
        g.edges.insert({CoagentGraph::vertex(a), CoagentGraph::vertex(b)});
    };

    for (int opt = 0; opt < net.n_options(); ++opt) {
        const OptionNode& node = net.option(opt);
        // a termination that keeps going hands control to its own policy
        add(beta(opt), pi(opt));
        if (node.leaf) {
            // the primitive action is followed by this option's termination
            add(pi(opt), beta(opt));
        } else {
            for (int c = 0; c < node.n_children; ++c) {
                const int child = net.child_option(opt, c);
                add(pi(opt), pi(child));
                add(beta(child), beta(opt));
            }
        }
    }
    return g;
}

std::optional<std::string> validate_graph(const CoagentGraph& graph,
                                          const NetworkSpec& spec) {
    const Network net(spec, 1, 1.0, 1.0);
    if (graph.n_options != net.n_options())
        return "graph option count does not match the spec";

    // reachability from the root policy vertex
    std::vector<char> seen(graph.n_vertices(), 0);
    std::vector<int> frontier = {CoagentGraph::vertex({CoagentKind::policy, 0})};
    seen[frontier[0]] = 1;
    while (!frontier.empty()) {
        const int v = frontier.back();
        frontier.pop_back();
        for (const auto& [a, b] : graph.edges) {
            if (a == v && !seen[b]) {
                seen[b] = 1;
                frontier.push_back(b);
            }
        }
    }
    for (int v = 0; v < graph.n_vertices(); ++v)
        if (!seen[v])
            return "vertex " + coagent_label(spec, CoagentGraph::coagent(v)) +
                   " is unreachable from the root policy";

    for (int opt = 0; opt < net.n_options(); ++opt) {
        if (!net.option(opt).leaf) continue;
        if (!graph.has_edge({CoagentKind::policy, opt},
                            {CoagentKind::termination, opt}))
            return "leaf policy " +
                   coagent_label(spec, {CoagentKind::policy, opt}) +
                   " does not feed its termination";
    }
    return std::nullopt;
}

OptionGraph contract_cross_edges(const CoagentGraph& graph) {
    OptionGraph g;
    g.n_options = graph.n_options;
    for (const auto& [a, b] : graph.edges) g.edges.insert({a / 2, b / 2});
    return g;
}

std::string coagent_label(const NetworkSpec& spec, const CoagentId& id) {
    const Network net(spec, 1, 1.0, 1.0);
    const OptionNode& node = net.option(id.option);
    std::ostringstream out;
    out << (id.kind == CoagentKind::policy ? "pi" : "beta") << "(";
    for (std::size_t i = 0; i < node.address.size(); ++i) {
        if (i) out << ",";
        out << node.address[i] + 1;
    }
    out << ")";
    return out.str();
}

std::string graph_to_dot(const CoagentGraph& graph, const NetworkSpec& spec) {
    std::ostringstream out;
    out << "digraph coagents {\n";
    for (int v = 0; v < graph.n_vertices(); ++v) {
        const CoagentId id = CoagentGraph::coagent(v);
        out << "  v" << v << " [label=\"" << coagent_label(spec, id) << "\"";
        if (id.kind == CoagentKind::termination) out << " shape=box";
        out << "];\n";
    }
    for (const auto& [a, b] : graph.edges)
        out << "  v" << a << " -> v" << b << ";\n";
    out << "}\n";
    return out.str();
}

}  // namespace coagent

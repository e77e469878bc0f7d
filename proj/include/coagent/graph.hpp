#pragma once

#include <optional>
#include <set>
#include <string>
#include <utility>

#include "coagent/option_net.hpp"
#include "coagent/trace.hpp"

namespace coagent {

/**
 * Directed graph over coagents: which coagent can follow which inside an
 * execution path. Two vertices per option (policy and termination, the root
 * termination included even though it is the constant "never terminate").
 * Immutable after construction and safe to share.
 */
struct CoagentGraph {
    int n_options = 0;
    std::set<std::pair<int, int>> edges;  // over vertex ids

    static int vertex(const CoagentId& id) {
        return id.option * 2 + (id.kind == CoagentKind::termination ? 1 : 0);
    }
    static CoagentId coagent(int vertex) {
        return {vertex % 2 ? CoagentKind::termination : CoagentKind::policy,
                vertex / 2};
    }
    int n_vertices() const { return n_options * 2; }
    bool has_edge(const CoagentId& a, const CoagentId& b) const {
        return edges.count({vertex(a), vertex(b)}) > 0;
    }
};

/// Graph over whole options, used to express the contracted view where an
/// option's policy and termination form one coagent.
struct OptionGraph {
    int n_options = 0;
    std::set<std::pair<int, int>> edges;  // over option ids; loops allowed
};

/// Builds the execution graph for a network shape: termination edges run
/// upward, policy edges downward, each termination feeds its own policy, and
/// bottom-layer policies feed their own termination after the primitive step.
CoagentGraph build_graph(const NetworkSpec& spec);

/// ok (nullopt) iff every vertex is reachable from the root policy and every
/// bottom-layer policy feeds its own termination. A violation names the
/// offending vertex.
std::optional<std::string> validate_graph(const CoagentGraph& graph,
                                          const NetworkSpec& spec);

/// Merges each option's termination vertex into its policy vertex. The
/// cross edges become self-loops: an option can act twice in a row
/// (termination decision, then selection).
OptionGraph contract_cross_edges(const CoagentGraph& graph);

std::string coagent_label(const NetworkSpec& spec, const CoagentId& id);
std::string graph_to_dot(const CoagentGraph& graph, const NetworkSpec& spec);

}  // namespace coagent

#pragma once

#include <string>
#include <vector>

#include "coagent/rng.hpp"
#include "coagent/trace.hpp"

namespace coagent {

enum class Topology { hoc, fon };

/**
 * Network shape <m1, ..., mN>: N layers of options, layer i holding m_i of
 * them (m1 = 1, the root). In an HOC the layers form a tree where every
 * layer-i option owns m_{i+1} children; in a FON every layer-i option
 * connects to all m_{i+1} options of the next layer. Bottom-layer options
 * select primitive actions.
 */
struct NetworkSpec {
    Topology topology = Topology::fon;
    std::vector<int> layers;
    int n_primitive = 0;

    int depth() const { return static_cast<int>(layers.size()); }
    /// Number of distinct options the spec induces.
    int option_count() const;

    bool operator==(const NetworkSpec&) const = default;
};

struct Hyperparams {
    double gamma = 0.99;
    double alpha_q = 0.01;
    double alpha_pi = 1e-5;
    double alpha_beta = 0.001;
    double tau_pi = 0.01;
    double tau_beta = 1.0;
};

/// One option: selection policy and termination tables plus the per-episode
/// bookkeeping the learning algorithm carries around.
struct OptionNode {
    std::vector<int> address;  // child indices from the root; empty = root
    int level = 0;             // 0 = root
    int level_pos = 0;         // position within its level's enumeration
    int tree_parent = -1;      // HOC only; -1 for the root and for FON
    int n_children = 0;        // child options, or primitive actions at the bottom
    bool leaf = false;

    std::vector<double> policy_logits;       // n_states * n_children
    std::vector<double> termination_logits;  // n_states; empty for the root

    // episode bookkeeping
    int activation_time = 0;
    double reward_acc = 0.0;
    int last_obs = 0;
    int prev_action = 0;
    bool terminated = false;
};

double stable_sigmoid(double x);

/**
 * A tabular HOC or FON network: option tables plus the execution rule
 * (downward selection, primitive action, upward termination cascade).
 * Options are enumerated level by level with the root at index 0.
 *
 * Instances are single-owner; all mutation goes through the owning learner.
 */
class Network {
public:
    Network(NetworkSpec spec, int n_states, double tau_pi, double tau_beta);

    const NetworkSpec& spec() const { return spec_; }
    int n_states() const { return n_states_; }
    int n_options() const { return static_cast<int>(options_.size()); }
    int depth() const { return spec_.depth(); }
    double tau_pi() const { return tau_pi_; }
    double tau_beta() const { return tau_beta_; }

    OptionNode& option(int id) { return options_[id]; }
    const OptionNode& option(int id) const { return options_[id]; }
    const std::vector<int>& level_options(int level) const {
        return level_ids_[level];
    }

    /// Option reached when `opt` selects child index c (opt must not be leaf).
    int child_option(int opt, int c) const;

    // -- distributions ---------------------------------------------------------

    /// softmax(policy_logits(state) / tau_pi); sums to 1.
    std::vector<double> policy_distribution(int opt, int state) const;
    double termination_prob(int opt, int state) const;
    /// Samples the termination function; calling this on the root is a
    /// programming error (the root never terminates).
    bool sample_termination(int opt, int state, Rng& rng);

    // -- execution rule ----------------------------------------------------------

    /// Resets bookkeeping and the active path for a fresh episode.
    void begin_episode();

    /// Active options, root first; back() is the deepest active option.
    const std::vector<int>& active_path() const { return active_path_; }

    /// Descends from the deepest active option, sampling children and
    /// reactivating every option it passes, until a primitive action is
    /// drawn. Returns the primitive action.
    int choose_primitive_action(int state, int t, Rng& rng,
                                TraceSink* sink = nullptr);

    /// Samples terminations deepest-first at the new state, flagging
    /// terminated options; returns the depth of the first option that keeps
    /// going (0 = root, which never samples).
    int termination_cascade(int state, Rng& rng, TraceSink* sink = nullptr);

    /// Drops the active path below `depth` (inclusive bound: path keeps
    /// entries [0, depth]).
    void truncate_active_path(int depth);

private:
    NetworkSpec spec_;
    int n_states_;
    double tau_pi_;
    double tau_beta_;
    std::vector<OptionNode> options_;
    std::vector<std::vector<int>> level_ids_;
    std::vector<int> active_path_;
    std::vector<double> weight_buf_;
};

/// All-zero tables: uniform policies, termination probability 1/2.
Network init_network(const NetworkSpec& spec, int n_states, double tau_pi = 1.0,
                     double tau_beta = 1.0);

/// Versioned JSON checkpoint of the network tables plus the learner's
/// action-value tables.
std::string checkpoint_to_json(const Network& net,
                               const std::vector<std::vector<double>>& q_tables);
void checkpoint_from_json(const std::string& text, Network& net,
                          std::vector<std::vector<double>>& q_tables);

std::string topology_name(Topology t);
Topology topology_from_name(const std::string& name);

}  // namespace coagent
